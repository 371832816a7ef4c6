#include "aita/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace aita {

namespace {

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
    bool hashed = true;
};

template <class T>
T parse_num(const std::string& s) {
    std::istringstream in(s);
    T v{};
    in >> v;
    if (in.fail() || !in.eof()) throw std::runtime_error("bad config value: " + s);
    return v;
}

std::string fmt_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> f = {
        {"embedding_dim", {[](const RunConfig& c) { return std::to_string(c.embedding_dim); },
                           [](RunConfig& c, const std::string& s) { c.embedding_dim = parse_num<int>(s); }}},
        {"attn_dim", {[](const RunConfig& c) { return std::to_string(c.attn_dim); },
                      [](RunConfig& c, const std::string& s) { c.attn_dim = parse_num<int>(s); }}},
        {"heads", {[](const RunConfig& c) { return std::to_string(c.heads); },
                   [](RunConfig& c, const std::string& s) { c.heads = parse_num<int>(s); }}},
        {"aspect_dim", {[](const RunConfig& c) { return std::to_string(c.aspect_dim); },
                        [](RunConfig& c, const std::string& s) { c.aspect_dim = parse_num<int>(s); }}},
        {"gen_hidden", {[](const RunConfig& c) { return std::to_string(c.gen_hidden); },
                        [](RunConfig& c, const std::string& s) { c.gen_hidden = parse_num<int>(s); }}},
        {"lambda", {[](const RunConfig& c) { return fmt_double(c.lambda); },
                    [](RunConfig& c, const std::string& s) { c.lambda = parse_num<double>(s); }}},
        {"epochs", {[](const RunConfig& c) { return std::to_string(c.epochs); },
                    [](RunConfig& c, const std::string& s) { c.epochs = parse_num<int>(s); }}},
        {"mu_fraction", {[](const RunConfig& c) { return fmt_double(c.mu_fraction); },
                         [](RunConfig& c, const std::string& s) { c.mu_fraction = parse_num<double>(s); }}},
        {"reward_sign", {[](const RunConfig& c) { return std::to_string(c.reward_sign); },
                         [](RunConfig& c, const std::string& s) { c.reward_sign = parse_num<int>(s); }}},
        {"objective_sign", {[](const RunConfig& c) { return std::to_string(c.objective_sign); },
                            [](RunConfig& c, const std::string& s) { c.objective_sign = parse_num<int>(s); }}},
        {"ranker_lr", {[](const RunConfig& c) { return fmt_double(c.ranker_lr); },
                       [](RunConfig& c, const std::string& s) { c.ranker_lr = parse_num<double>(s); }}},
        {"gen_lr", {[](const RunConfig& c) { return fmt_double(c.gen_lr); },
                    [](RunConfig& c, const std::string& s) { c.gen_lr = parse_num<double>(s); }}},
        {"batch_size", {[](const RunConfig& c) { return std::to_string(c.batch_size); },
                        [](RunConfig& c, const std::string& s) { c.batch_size = parse_num<int>(s); }}},
        {"gen_passes", {[](const RunConfig& c) { return std::to_string(c.gen_passes); },
                        [](RunConfig& c, const std::string& s) { c.gen_passes = parse_num<int>(s); }}},
        {"use_aspect", {[](const RunConfig& c) { return std::to_string(int(c.use_aspect)); },
                        [](RunConfig& c, const std::string& s) { c.use_aspect = parse_num<int>(s) != 0; }}},
        {"min_count", {[](const RunConfig& c) { return std::to_string(c.min_count); },
                       [](RunConfig& c, const std::string& s) { c.min_count = parse_num<int>(s); }}},
        {"max_q_len", {[](const RunConfig& c) { return std::to_string(c.max_q_len); },
                       [](RunConfig& c, const std::string& s) { c.max_q_len = parse_num<int>(s); }}},
        {"max_r_len", {[](const RunConfig& c) { return std::to_string(c.max_r_len); },
                       [](RunConfig& c, const std::string& s) { c.max_r_len = parse_num<int>(s); }}},
        {"max_qa_len", {[](const RunConfig& c) { return std::to_string(c.max_qa_len); },
                        [](RunConfig& c, const std::string& s) { c.max_qa_len = parse_num<int>(s); }}},
        // decode-time knob; overriding it must not detach artifacts from
        // their checkpoint, so it stays out of the hash like threads/paths
        {"beam_size", {[](const RunConfig& c) { return std::to_string(c.beam_size); },
                       [](RunConfig& c, const std::string& s) { c.beam_size = parse_num<int>(s); },
                       /*hashed=*/false}},
        {"max_gen_len", {[](const RunConfig& c) { return std::to_string(c.max_gen_len); },
                         [](RunConfig& c, const std::string& s) { c.max_gen_len = parse_num<int>(s); }}},
        {"seed", {[](const RunConfig& c) { return std::to_string(c.seed); },
                  [](RunConfig& c, const std::string& s) { c.seed = parse_num<uint64_t>(s); }}},
        {"threads", {[](const RunConfig& c) { return std::to_string(c.threads); },
                     [](RunConfig& c, const std::string& s) { c.threads = parse_num<int>(s); },
                     /*hashed=*/false}},
        {"embeddings_path", {[](const RunConfig& c) { return c.embeddings_path; },
                             [](RunConfig& c, const std::string& s) { c.embeddings_path = s; },
                             /*hashed=*/false}},
    };
    return f;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

void RunConfig::validate() const {
    if (embedding_dim < 1 || attn_dim < 1 || gen_hidden < 1 || aspect_dim < 1 || heads < 1)
        throw std::runtime_error("config: dimensions must be positive");
    if (attn_dim % heads != 0)
        throw std::runtime_error("config: attn_dim must be divisible by heads");
    if (reward_sign != 1 && reward_sign != -1)
        throw std::runtime_error("config: reward_sign must be +1 or -1");
    if (objective_sign != 1 && objective_sign != -1)
        throw std::runtime_error("config: objective_sign must be +1 or -1");
    if (min_count < 1) throw std::runtime_error("config: min_count must be >= 1");
    if (mu_fraction < 0.0) throw std::runtime_error("config: mu_fraction must be >= 0");
    if (epochs < 0) throw std::runtime_error("config: epochs must be >= 0");
    if (beam_size < 1 || max_gen_len < 1 || batch_size < 1 || gen_passes < 1)
        throw std::runtime_error("config: beam_size/max_gen_len/batch_size/gen_passes must be >= 1");
}

void apply_config_override(const std::string& kv, RunConfig& cfg) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config override must be key=value: " + kv);
    std::string key = trim(kv.substr(0, eq));
    std::string val = trim(kv.substr(eq + 1));
    auto it = fields().find(key);
    if (it == fields().end()) throw std::runtime_error("unknown config key: " + key);
    it->second.set(cfg, val);
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            apply_config_override(line, cfg);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_env_seed(RunConfig& cfg) {
    if (const char* s = std::getenv("AITA_SEED")) {
        cfg.seed = parse_num<uint64_t>(std::string(s));
    }
}

std::string render_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : fields()) {
        out += key;
        out += '=';
        out += field.get(cfg);
        out += '\n';
    }
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [key, field] : fields()) {
        if (!field.hashed) continue;
        const std::string line = key + "=" + field.get(cfg) + "\n";
        for (char c : line) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace aita
