#pragma once

#include <string>

#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/generator.hpp"
#include "aita/ranker.hpp"

namespace aita {

// Model checkpoint: manifest (names, shapes, dtype float32, little-endian,
// format version) plus one raw buffer per parameter, and the vocabulary,
// embedding table, and config snapshot needed for standalone inference.
void save_checkpoint(const std::string& path, const RunConfig& cfg, int epoch,
                     RankerParams& ranker, GeneratorParams& generator, const Vocab& vocab,
                     const EmbeddingTable& emb);

struct Checkpoint {
    RunConfig cfg;
    std::string cfg_hash;
    int epoch = 0;
    RankerParams ranker;
    GeneratorParams generator;
    Vocab vocab;
    EmbeddingTable emb;
};

Checkpoint load_checkpoint(const std::string& path);

} // namespace aita
