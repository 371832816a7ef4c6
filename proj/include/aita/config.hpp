#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aita {

// Flat run configuration. File format is `key=value` lines, `#` comments;
// command-line --set overrides win over the file, AITA_SEED wins over the
// file's seed.
struct RunConfig {
    // model
    int embedding_dim = 300;
    int attn_dim = 300;   // h_dim of the ranker encoders; must divide by heads
    int heads = 3;
    int aspect_dim = 20;  // k
    int gen_hidden = 200; // per-direction encoder width and decoder width

    // training
    double lambda = 0.8;
    int epochs = 10;
    double mu_fraction = 0.05;
    int reward_sign = -1;    // -1: softmax of negated log-ppl; +1: literal normalization
    int objective_sign = 1;  // -1 flips the ranker ascent direction
    double ranker_lr = 1e-3;
    double gen_lr = 1e-3;
    int batch_size = 16;
    int gen_passes = 1; // passes over S per outer epoch
    bool use_aspect = true;

    // corpus
    int min_count = 2;
    int max_q_len = 30;
    int max_r_len = 50;
    int max_qa_len = 80;

    // decoding
    int beam_size = 1;
    int max_gen_len = 30;

    uint64_t seed = 13;
    int threads = 0; // 0: leave the OpenMP default alone

    // paths; excluded from the config hash
    std::string embeddings_path;

    void validate() const; // throws std::runtime_error on bad combinations
};

// Parse a key=value config file into `cfg`. Unknown keys are fatal.
void load_config_file(const std::string& path, RunConfig& cfg);

// Apply one "key=value" override.
void apply_config_override(const std::string& kv, RunConfig& cfg);

// Apply AITA_SEED from the environment, if set.
void apply_env_seed(RunConfig& cfg);

// Canonical "key=value\n" rendering of every hashed key, sorted.
std::string render_config(const RunConfig& cfg);

// FNV-1a 64 over render_config, as fixed-width hex. Identifies artifacts
// produced under compatible settings; paths do not participate.
std::string config_hash(const RunConfig& cfg);

} // namespace aita
