#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace aita {

using TokenSeq = std::vector<std::string>;

// Modified n-gram precision with clipping over the references, geometric
// mean of orders 1..n with uniform weights, brevity penalty
// exp(1 - ref_len/cand_len) when the candidate is shorter (closest reference
// length, ties toward the shorter). Smoothing: add-1 on zero counts for
// orders above 1. Throws on an empty candidate or empty reference list.
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n);

// LCS-based F-measure with beta = 1.2 (beta^2 = 1.44).
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

// Base-form METEOR: exact then stem alignment (suffix-stripping stemmer),
// F with alpha = 0.9, fragmentation penalty 0.5 * (chunks/matches)^3.
// No synonym matching.
double meteor_base(const TokenSeq& candidate, const TokenSeq& reference);

// The stemmer used for METEOR stem matches, exposed for tests.
std::string light_stem(const std::string& word);

struct ExampleScores {
    std::string key;
    double bleu1 = 0, bleu4 = 0, meteor = 0, rouge = 0;
};

struct MetricReport {
    double bleu1_mean = 0, bleu4_mean = 0, meteor_mean = 0, rouge_mean = 0;
    long count = 0;
    std::vector<ExampleScores> examples;
    std::string config_hash; // from the prediction file when present
};

// Aligns prediction and reference JSONL files by key (see README: explicit
// "key" field, else product_id/review_id/sent_idx, else product_id and
// question_id) and averages per-example metrics. Multiple reference records
// under one key act as multi-reference for BLEU and best-of for the rest.
// Alignment mismatches are fatal and name the offending keys.
MetricReport evaluate(const std::string& pred_path, const std::string& ref_path);

nlohmann::json report_to_json(const MetricReport& report);

} // namespace aita
