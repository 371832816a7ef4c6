#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fixture.hpp"

namespace {

std::string cli_path() {
    const char* p = std::getenv("AITA_CLI");
    REQUIRE_MESSAGE(p != nullptr, "AITA_CLI must point at the built binary");
    return p;
}

std::string temp_dir() {
    static int counter = 0;
    auto d =
        std::filesystem::temp_directory_path() / ("aita_cli_test_" + std::to_string(++counter));
    std::filesystem::create_directories(d);
    return d.string();
}

struct CliResult {
    int code;
    std::string out;
};

CliResult run_cli(const std::string& args) {
    const std::string dir = temp_dir();
    const std::string out_file = dir + "/stdout.txt";
    const std::string cmd = cli_path() + " " + args + " >" + out_file + " 2>" + dir + "/err.txt";
    const int rc = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {WEXITSTATUS(rc), out};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

// tiny dims so end-to-end runs stay fast
const std::string kSets =
    " --set embedding_dim=8 --set attn_dim=8 --set heads=2 --set aspect_dim=4"
    " --set gen_hidden=8 --set batch_size=32 --set seed=11";

long count_lines(const std::string& s) {
    long n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run_cli("ingest --reviews x --out y").code == 2);
    CHECK(run_cli("definitely-not-a-command").code == 2);
    CHECK(run_cli("").code == 2);
}

TEST_CASE("ingest reports counts and skips malformed lines") {
    const std::string dir = temp_dir();
    write_file(dir + "/qa.jsonl",
               R"({"product_id":"p1","question":"Does it fit?","answer":"Yes"})"
               "\n"
               R"({"product_id":"p1","question":"How big?","answer":"Very"})"
               "\n"
               "not json at all\n"
               R"({"product_id":"p2","question":"Is it loud?","answer":"No"})"
               "\n"
               R"({"product_id":"p2","question":"Worth it?","answer":"Sure"})"
               "\n");
    write_file(dir + "/r.jsonl",
               R"({"product_id":"p1","review_id":"r1","text":"Works great. Battery lasts."})"
               "\n");
    const auto res = run_cli("ingest --qa " + dir + "/qa.jsonl --reviews " + dir +
                             "/r.jsonl --out " + dir + "/c.aita" + kSets +
                             " --set min_count=1");
    CHECK(res.code == 0);
    CHECK(res.out.find("#q=4") != std::string::npos);
    CHECK(res.out.find("#s=2") != std::string::npos);
    CHECK(res.out.find("skipped_qa=1") != std::string::npos);
}

TEST_CASE("full pipeline: ingest, train, generate, rank, eval") {
    const std::string dir = temp_dir();
    const auto paths = aita::testsupport::write_fixture(dir + "/fix");

    // ingest
    auto res = run_cli("ingest --qa " + paths.qa + " --reviews " + paths.reviews + " --out " +
                       dir + "/corpus.aita" + kSets);
    REQUIRE(res.code == 0);
    CHECK(res.out.find("#q=200") != std::string::npos);
    CHECK(res.out.find("#s=600") != std::string::npos);

    // train one epoch
    res = run_cli("train --corpus " + dir + "/corpus.aita --out " + dir + "/run1" + kSets +
                  " --set epochs=1");
    REQUIRE(res.code == 0);
    CHECK(res.out.find("n_qr=10") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/run1/checkpoint_epoch_0.aita"));
    CHECK(std::filesystem::exists(dir + "/run1/checkpoint_epoch_1.aita"));
    CHECK(std::filesystem::exists(dir + "/run1/log.jsonl"));
    CHECK(std::filesystem::exists(dir + "/run1/instances.jsonl"));
    CHECK(std::filesystem::exists(dir + "/run1/config.txt"));

    // epochs=0 leaves only the initial state
    res = run_cli("train --corpus " + dir + "/corpus.aita --out " + dir + "/run0" + kSets +
                  " --set epochs=0");
    REQUIRE(res.code == 0);
    CHECK(std::filesystem::exists(dir + "/run0/checkpoint_epoch_0.aita"));
    CHECK(!std::filesystem::exists(dir + "/run0/checkpoint_epoch_1.aita"));
    CHECK(count_lines(slurp(dir + "/run0/log.jsonl")) == 0);

    // determinism: the same seed gives byte-identical logs
    res = run_cli("train --corpus " + dir + "/corpus.aita --out " + dir + "/run2" + kSets +
                  " --set epochs=1");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir + "/run1/log.jsonl") == slurp(dir + "/run2/log.jsonl"));
    CHECK(slurp(dir + "/run1/checkpoint_epoch_1.aita") ==
          slurp(dir + "/run2/checkpoint_epoch_1.aita"));

    // generate over the held-out reviews
    const std::string ck = dir + "/run1/checkpoint_epoch_1.aita";
    res = run_cli("generate --checkpoint " + ck + " --reviews " + paths.test_reviews +
                  " --out " + dir + "/gen1.jsonl");
    REQUIRE(res.code == 0);
    CHECK(count_lines(slurp(dir + "/gen1.jsonl")) == 100);

    // beam 1 equals the greedy default, and reruns are identical
    res = run_cli("generate --checkpoint " + ck + " --reviews " + paths.test_reviews +
                  " --out " + dir + "/gen2.jsonl --beam 1");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir + "/gen1.jsonl") == slurp(dir + "/gen2.jsonl"));
    res = run_cli("generate --checkpoint " + ck + " --reviews " + paths.test_reviews +
                  " --out " + dir + "/gen3.jsonl");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir + "/gen1.jsonl") == slurp(dir + "/gen3.jsonl"));

    // config hash mismatch is fatal without --force
    write_file(dir + "/other.cfg", "embedding_dim=16\nattn_dim=16\nheads=2\n");
    res = run_cli("generate --checkpoint " + ck + " --reviews " + paths.test_reviews +
                  " --out " + dir + "/gen4.jsonl --config " + dir + "/other.cfg");
    CHECK(res.code == 1);
    res = run_cli("generate --checkpoint " + ck + " --reviews " + paths.test_reviews +
                  " --out " + dir + "/gen4.jsonl --config " + dir + "/other.cfg --force");
    CHECK(res.code == 0);

    // rank dump
    res = run_cli("rank --checkpoint " + ck + " --corpus " + dir + "/corpus.aita --topk 3" +
                  " --out " + dir + "/rank.jsonl");
    REQUIRE(res.code == 0);
    CHECK(count_lines(slurp(dir + "/rank.jsonl")) == 200);

    // eval: generated vs gold references
    res = run_cli("eval --pred " + dir + "/gen1.jsonl --ref " + paths.test_refs + " --out " +
                  dir + "/report.json");
    REQUIRE(res.code == 0);
    CHECK(res.out.find("BLEU1=") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/report.json"));

    // eval with itself is a perfect score
    res = run_cli("eval --pred " + dir + "/gen1.jsonl --ref " + dir + "/gen1.jsonl");
    REQUIRE(res.code == 0);
    CHECK(res.out.find("BLEU1=1 ") != std::string::npos);

    // disjoint keys fail with exit 1
    write_file(dir + "/badref.jsonl",
               R"({"product_id":"zz","question_id":"zz","question":"zz"})"
               "\n");
    res = run_cli("eval --pred " + dir + "/gen1.jsonl --ref " + dir + "/badref.jsonl");
    CHECK(res.code == 1);
}

TEST_CASE("AITA_SEED environment override changes the run") {
    const std::string dir = temp_dir();
    const auto paths = aita::testsupport::write_fixture(dir + "/fix");
    auto res = run_cli("ingest --qa " + paths.qa + " --reviews " + paths.reviews + " --out " +
                       dir + "/c.aita" + kSets);
    REQUIRE(res.code == 0);

    setenv("AITA_SEED", "9001", 1);
    res = run_cli("train --corpus " + dir + "/c.aita --out " + dir + "/runA" + kSets +
                  " --set epochs=1 --force");
    unsetenv("AITA_SEED");
    REQUIRE(res.code == 0);
    res = run_cli("train --corpus " + dir + "/c.aita --out " + dir + "/runB" + kSets +
                  " --set epochs=1 --force");
    REQUIRE(res.code == 0);
    CHECK(slurp(dir + "/runA/checkpoint_epoch_1.aita") !=
          slurp(dir + "/runB/checkpoint_epoch_1.aita"));
}
