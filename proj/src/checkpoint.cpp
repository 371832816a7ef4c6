#include "aita/checkpoint.hpp"

#include <sstream>
#include <stdexcept>

#include "aita/archive.hpp"

namespace aita {

namespace {

void add_params(ArchiveWriter& w, nlohmann::json& table, const std::string& prefix,
                std::vector<NamedParam> refs) {
    for (const auto& np : refs) {
        const std::string section = prefix + "/" + np.name;
        table.push_back({{"name", section},
                         {"shape", {np.m->rows, np.m->cols}},
                         {"dtype", "float32"},
                         {"byte_order", "little"}});
        w.add_f32(section, *np.m);
    }
}

void read_params(const ArchiveReader& r, const std::string& prefix,
                 std::vector<NamedParam> refs) {
    for (auto& np : refs) {
        const std::string section = prefix + "/" + np.name;
        *np.m = r.read_f32(section, np.m->rows, np.m->cols);
    }
}

} // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, int epoch,
                     RankerParams& ranker, GeneratorParams& generator, const Vocab& vocab,
                     const EmbeddingTable& emb) {
    ArchiveWriter w;
    w.meta()["kind"] = "checkpoint";
    w.meta()["config_hash"] = config_hash(cfg);
    w.meta()["epoch"] = epoch;
    w.meta()["vocab_size"] = vocab.size();
    nlohmann::json table = nlohmann::json::array();
    add_params(w, table, "ranker", ranker.param_refs());
    add_params(w, table, "generator", generator.param_refs());
    w.meta()["params"] = table;

    w.add_text("config", render_config(cfg));
    std::string vocab_txt;
    for (int i = 4; i < vocab.size(); ++i) {
        vocab_txt += vocab.id_to_token[i];
        vocab_txt += '\n';
    }
    w.add_text("vocab", vocab_txt);
    w.add_f32("embeddings", emb.data);
    w.write(path);
}

Checkpoint load_checkpoint(const std::string& path) {
    ArchiveReader r(path);
    if (r.meta().value("kind", "") != "checkpoint")
        throw std::runtime_error("archive is not a checkpoint: " + path);
    Checkpoint ck;
    ck.cfg_hash = r.meta().at("config_hash").get<std::string>();
    ck.epoch = r.meta().at("epoch").get<int>();

    std::istringstream cin_(r.read_text("config"));
    std::string line;
    while (std::getline(cin_, line))
        if (!line.empty()) apply_config_override(line, ck.cfg);
    ck.cfg.validate();
    if (config_hash(ck.cfg) != ck.cfg_hash)
        throw std::runtime_error("checkpoint config snapshot does not match its hash: " + path);

    ck.vocab.min_count = ck.cfg.min_count;
    ck.vocab.id_to_token = {"<pad>", "<unk>", "<bos>", "<eos>"};
    std::istringstream vin(r.read_text("vocab"));
    while (std::getline(vin, line))
        if (!line.empty()) ck.vocab.id_to_token.push_back(line);
    for (int i = 0; i < ck.vocab.size(); ++i) ck.vocab.token_to_id[ck.vocab.id_to_token[i]] = i;
    if (ck.vocab.size() != r.meta().at("vocab_size").get<int>())
        throw std::runtime_error("checkpoint vocab size mismatch: " + path);

    ck.emb.dim = ck.cfg.embedding_dim;
    ck.emb.data = r.read_f32_raw("embeddings");
    if (ck.emb.rows() != ck.vocab.size())
        throw std::runtime_error("checkpoint embedding rows mismatch: " + path);

    Rng dummy(0);
    ck.ranker = RankerParams::init(ck.cfg, dummy);
    ck.generator = GeneratorParams::init(ck.cfg, ck.vocab.size(), dummy);
    read_params(r, "ranker", ck.ranker.param_refs());
    read_params(r, "generator", ck.generator.param_refs());
    return ck;
}

} // namespace aita
