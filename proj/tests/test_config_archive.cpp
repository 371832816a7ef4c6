#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "aita/archive.hpp"
#include "aita/checkpoint.hpp"
#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/generator.hpp"
#include "aita/ranker.hpp"

using namespace aita;

namespace {

std::string temp_dir() {
    static int counter = 0;
    auto d =
        std::filesystem::temp_directory_path() / ("aita_cfg_test_" + std::to_string(++counter));
    std::filesystem::create_directories(d);
    return d.string();
}

} // namespace

TEST_CASE("config file parsing, overrides, and hashing") {
    const std::string dir = temp_dir();
    {
        std::ofstream out(dir + "/run.cfg");
        out << "# comment\n"
            << "embedding_dim=32\n"
            << "lambda = 0.5\n"
            << "epochs=3\n";
    }
    RunConfig cfg;
    load_config_file(dir + "/run.cfg", cfg);
    CHECK(cfg.embedding_dim == 32);
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.heads == 3); // untouched default

    SUBCASE("overrides win") {
        apply_config_override("epochs=7", cfg);
        CHECK(cfg.epochs == 7);
    }
    SUBCASE("unknown keys are fatal") {
        CHECK_THROWS(apply_config_override("nope=1", cfg));
        std::ofstream out(dir + "/bad.cfg");
        out << "mystery_knob=3\n";
        out.close();
        RunConfig c2;
        CHECK_THROWS(load_config_file(dir + "/bad.cfg", c2));
    }
    SUBCASE("hash covers settings but not paths or threads") {
        RunConfig a = cfg, b = cfg;
        CHECK(config_hash(a) == config_hash(b));
        b.embeddings_path = "/somewhere/else.txt";
        b.threads = 7;
        CHECK(config_hash(a) == config_hash(b));
        b.lambda = 0.9;
        CHECK(config_hash(a) != config_hash(b));
    }
    SUBCASE("env seed override") {
        setenv("AITA_SEED", "4242", 1);
        apply_env_seed(cfg);
        unsetenv("AITA_SEED");
        CHECK(cfg.seed == 4242);
    }
    SUBCASE("validation rejects bad combinations") {
        RunConfig bad = cfg;
        bad.attn_dim = 10;
        bad.heads = 3;
        CHECK_THROWS(bad.validate());
        bad = cfg;
        bad.reward_sign = 0;
        CHECK_THROWS(bad.validate());
        bad = cfg;
        bad.min_count = 0;
        CHECK_THROWS(bad.validate());
    }
    SUBCASE("render and reparse round-trips the hash") {
        const std::string rendered = render_config(cfg);
        RunConfig back;
        std::istringstream in(rendered);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) apply_config_override(line, back);
        CHECK(config_hash(back) == config_hash(cfg));
    }
}

TEST_CASE("archive round-trip and determinism") {
    const std::string dir = temp_dir();
    ArchiveWriter w;
    w.meta()["kind"] = "test";
    w.meta()["n"] = 3;
    w.add_text("hello", "world\n");
    Mat m(2, 3);
    m.a = {1, 2, 3, 4, 5, 0.25};
    w.add_f32("mat", m);
    w.write(dir + "/a1.bin");
    w.write(dir + "/a2.bin");

    ArchiveReader r(dir + "/a1.bin");
    CHECK(r.meta().at("kind") == "test");
    CHECK(r.has("hello"));
    CHECK(!r.has("nope"));
    CHECK(r.read_text("hello") == "world\n");
    const Mat back = r.read_f32("mat", 2, 3);
    CHECK(back.a == m.a); // exactly representable values survive the narrow

    std::ifstream f1(dir + "/a1.bin", std::ios::binary), f2(dir + "/a2.bin", std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);

    SUBCASE("bad magic is rejected") {
        std::ofstream bad(dir + "/bad.bin", std::ios::binary);
        bad << "NOTANARCHIVE____________";
        bad.close();
        CHECK_THROWS(ArchiveReader(dir + "/bad.bin"));
    }
    SUBCASE("missing section is an error") { CHECK_THROWS(r.read("nope")); }
}

TEST_CASE("checkpoint save and load restore shapes, values, and hash") {
    const std::string dir = temp_dir();
    RunConfig cfg;
    cfg.embedding_dim = 8;
    cfg.attn_dim = 8;
    cfg.heads = 2;
    cfg.aspect_dim = 4;
    cfg.gen_hidden = 5;
    cfg.epochs = 2;

    Vocab vocab;
    vocab.id_to_token = {"<pad>", "<unk>", "<bos>", "<eos>", "alpha", "beta"};
    for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[i]] = i;
    vocab.min_count = cfg.min_count;
    EmbeddingTable emb = seed_embeddings(vocab, cfg.embedding_dim, 3);

    Rng rng(5);
    RankerParams rp = RankerParams::init(cfg, rng);
    GeneratorParams gp = GeneratorParams::init(cfg, vocab.size(), rng);
    save_checkpoint(dir + "/ck.aita", cfg, 2, rp, gp, vocab, emb);

    const Checkpoint ck = load_checkpoint(dir + "/ck.aita");
    CHECK(ck.epoch == 2);
    CHECK(ck.cfg_hash == config_hash(cfg));
    CHECK(ck.vocab.id_to_token == vocab.id_to_token);
    CHECK(ck.emb.data == emb.data);
    // float32 round-trip: loading after saving the loaded params is stable
    CHECK(ck.ranker.M.rows == rp.M.rows);
    for (std::size_t i = 0; i < rp.M.size(); ++i)
        CHECK(ck.ranker.M.a[i] == doctest::Approx(rp.M.a[i]).epsilon(1e-6));
    Checkpoint ck2 = ck;
    save_checkpoint(dir + "/ck2.aita", ck.cfg, ck.epoch, ck2.ranker, ck2.generator, ck.vocab,
                    ck.emb);
    const Checkpoint ck3 = load_checkpoint(dir + "/ck2.aita");
    CHECK(ck3.ranker.M.a == ck.ranker.M.a);
    CHECK(ck3.generator.W2.a == ck.generator.W2.a);

    SUBCASE("corpus archives are not checkpoints") {
        CHECK_THROWS(load_checkpoint(dir + "/missing.aita"));
    }
}
