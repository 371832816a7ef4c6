#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "aita/config.hpp"

namespace aita {

// One user-posed question with its answer, keyed by product.
struct QAPair {
    std::string product_id;
    std::string question_id;
    std::vector<std::string> q_tokens;
    std::vector<std::string> a_tokens;
};

enum class NerTag : uint8_t { B = 0, I = 1, O = 2 };

// Universal POS tag set (17 tags).
enum class PosTag : uint8_t {
    ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM,
    PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X
};
constexpr int kNumPosTags = 17;
constexpr int kNumNerTags = 3;

const char* pos_tag_name(PosTag t);

// One tokenized review sentence with linguistic features.
struct ReviewSentence {
    std::string product_id;
    std::string review_id;
    int sent_idx = 0;
    std::vector<std::string> tokens;  // lowercased
    std::vector<PosTag> pos_tags;     // one per token
    std::vector<NerTag> ner_bio;      // one per token
};

// Lowercase, split on whitespace and punctuation boundaries, keep punctuation
// as single-character tokens.
std::vector<std::string> tokenize(const std::string& text);
// Case-preserving variant; annotate() wants the original casing.
std::vector<std::string> tokenize_cased(const std::string& text);

// Rule-based split on [.!?] followed by whitespace and a non-lowercase
// character; a short abbreviation list suppresses false boundaries.
std::vector<std::string> split_sentences(const std::string& text);

// Lexicon + suffix POS tagger and a capitalization/number NER heuristic.
// Deterministic; expects tokens with original casing. Throws on empty input.
std::pair<std::vector<PosTag>, std::vector<NerTag>> annotate(const std::vector<std::string>& tokens);

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;

    std::vector<std::string> id_to_token; // starts with the 4 reserved tokens
    std::unordered_map<std::string, int> token_to_id;
    int min_count = 1;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int encode(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnk : it->second;
    }
    std::vector<int> encode(const std::vector<std::string>& tokens) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) ids.push_back(encode(t));
        return ids;
    }
    const std::string& decode(int id) const { return id_to_token.at(id); }
};

// Tokens at or above min_count get ids in descending-frequency order, ties
// lexicographic, after the 4 reserved ids. Throws on an empty corpus.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count);

// |vocab| x dim float32 rows; frozen after loading.
struct EmbeddingTable {
    int dim = 0;
    std::vector<float> data; // row-major, vocab.size() rows
    const float* row(int id) const { return data.data() + static_cast<std::size_t>(id) * dim; }
    int rows() const { return dim == 0 ? 0 : static_cast<int>(data.size()) / dim; }
};

// Word-vector text file "word v1 ... v<dim>". In-file rows are copied
// verbatim; absent words are seeded uniform in [-0.1, 0.1]. A dimension
// mismatch on any line is fatal and names the line.
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, int dim, uint64_t seed);
// All-absent variant for runs without a vector file.
EmbeddingTable seed_embeddings(const Vocab& vocab, int dim, uint64_t seed);

struct IngestStats {
    long records = 0;
    long skipped = 0;
};

// Line-delimited JSON {product_id, question, answer}; empty question or
// answer skips the record. question_id defaults to "<product_id>#<line>".
std::vector<QAPair> ingest_qa(const std::string& path, const RunConfig& cfg, IngestStats& stats);

// Line-delimited JSON {product_id, review_id, text}; text is sentence-split,
// tokenized, and annotated. Empty text counts as skipped.
std::vector<ReviewSentence> ingest_reviews(const std::string& path, const RunConfig& cfg,
                                           IngestStats& stats);

struct Corpus {
    std::vector<QAPair> qa;
    std::vector<ReviewSentence> reviews;
    Vocab vocab;
    EmbeddingTable emb;
    IngestStats qa_stats;
    IngestStats review_stats;
    std::string cfg_hash;
};

// Ingest both files, build the vocabulary over all token sequences, and load
// (or seed) the embedding table.
Corpus build_corpus(const std::string& qa_path, const std::string& reviews_path,
                    const RunConfig& cfg);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

} // namespace aita
