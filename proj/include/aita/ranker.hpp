#pragma once

#include <string>
#include <vector>

#include "aita/adam.hpp"
#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/mat.hpp"
#include "aita/rng.hpp"

namespace aita {

// Per-token attention weights plus the aspect distribution the ranker hands
// to the generator.
struct AspectInfo {
    Vec alphas;  // per token, sums to 1
    Vec p_alpha; // length k, sums to 1
};

enum class RankerSide { QA, Review };

struct RankerParams {
    // per-head projections, separate per side: embedding_dim x head_dim
    std::vector<Mat> qa_Wq, qa_Wk, qa_Wv;
    std::vector<Mat> r_Wq, r_Wk, r_Wv;
    Mat M;  // h_dim x h_dim, single storage shared by both sides
    Mat Ws; // 1 x 3h
    Mat bs; // 1 x 1
    Mat Wp; // k x h
    Mat bp; // k x 1
    Mat A;  // k x h, aspect embedding rows
    int embedding_dim = 0, heads = 0, head_dim = 0, h_dim = 0, aspect_dim = 0;

    static RankerParams init(const RunConfig& cfg, Rng& rng);
    std::vector<NamedParam> param_refs();
    // Zero-filled clone of the same shapes, for gradient accumulation.
    static RankerParams zeros_like(const RankerParams& p);
};

// Multi-head self-attention encoding; one row per token. Throws on empty
// input. The per-head softmax scale is 1/sqrt(embedding_dim).
Mat ranker_encode(const std::vector<int>& ids, RankerSide side, const RankerParams& p,
                  const EmbeddingTable& emb);

struct GlobalAttention {
    Vec h_alpha;
    Vec alphas;
};
GlobalAttention global_attention(const Mat& H, const Mat& M);

// sigmoid(Ws [h_qa, h_r, |h_qa - h_r|] + bs); strictly inside (0, 1).
double ranking_score(const Vec& h_qa, const Vec& h_r, const RankerParams& p);

Vec aspect_distribution(const Vec& h_alpha, const RankerParams& p);
Vec reconstruct(const Vec& p_alpha, const Mat& A);
double reconstruction_loss(const Vec& h_alpha, const Vec& h_alpha_prime);

// Full review-side pipeline: encode, attend, project to aspects.
AspectInfo ranker_aspects(const std::vector<int>& ids, const RankerParams& p,
                          const EmbeddingTable& emb);

// qa text seen by the ranker: question, separator, answer, truncated.
std::vector<int> qa_concat_ids(const QAPair& qa, const Vocab& vocab, const RunConfig& cfg);

struct ScoredReview {
    const ReviewSentence* review;
    double score;
};

// Candidates must share qa.product_id. Descending score; ties by
// (review_id, sent_idx). Empty candidate set yields an empty result.
std::vector<ScoredReview> rank_reviews(const QAPair& qa,
                                       const std::vector<const ReviewSentence*>& candidates,
                                       const RankerParams& p, const EmbeddingTable& emb,
                                       const Vocab& vocab, const RunConfig& cfg);

// One qa with its scored candidates and precomputed rewards.
struct RankerGroup {
    std::vector<int> qa_ids;
    std::vector<std::vector<int>> candidate_ids;
    Vec rewards; // aligned with candidate_ids
};

struct RankerGroupResult {
    double objective = 0; // minimized quantity: -sign * (L^g - lambda L^alpha)
    double expected_reward = 0; // L^g with Z fixed
    double recon_loss = 0;      // mean over candidates
    double Z = 0;
    Vec scores;
};

// Forward (and, when grads is non-null, backward) pass for one group.
// fixed_Z <= 0 computes Z from the current scores and then treats it as a
// constant, matching the policy-gradient approximation. This is the plain
// reference; the batched path below must match it.
RankerGroupResult ranker_group_run(const RankerParams& p, const EmbeddingTable& emb,
                                   const RankerGroup& g, double lambda, int objective_sign,
                                   double fixed_Z, RankerParams* grads);

struct RankerBatchResult {
    double objective = 0;       // mean over groups
    double mean_expected_reward = 0;
    Vec group_Z;
};

// Batched objective over groups. Texts repeated across groups are encoded
// once and their backward runs once on the summed upstream gradient, which
// is what makes epoch-scale training affordable. fixed_Z, when non-null,
// pins each group's normalizer (for gradient checks).
RankerBatchResult ranker_batch_run(const RankerParams& p, const EmbeddingTable& emb,
                                   const std::vector<RankerGroup>& batch, double lambda,
                                   int objective_sign, const Vec* fixed_Z, RankerParams* grads);

// One optimizer step over a batch of groups (mean objective). Returns the
// mean expected reward, or 0 for an empty batch (no-op).
double ranker_update(const std::vector<RankerGroup>& batch, RankerParams& p,
                     const EmbeddingTable& emb, const RunConfig& cfg, Adam& opt);

} // namespace aita
