#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/generator.hpp"
#include "aita/ranker.hpp"

namespace aita {

enum class InstanceSource { QA, QR };

// The unit the adapt/augment loop adds and removes. Contexts live in the
// orchestrator's pools (answers for QA, review sentences for QR) and are
// addressed by index so an aspect refresh touches one place.
struct TrainingInstance {
    InstanceSource source = InstanceSource::QA;
    std::string product_id;
    std::string question_id;
    std::string context_ref; // question_id for QA, "review_id#sent_idx" for QR
    std::vector<std::string> q_tokens;
    int ctx_index = -1;
};

class InstanceSet {
  public:
    const std::vector<TrainingInstance>& items() const { return items_; }
    int size() const { return static_cast<int>(items_.size()); }
    int n_qa() const { return n_qa_; }
    int n_qr() const { return n_qr_; }

    bool contains(const std::string& question_id, const std::string& context_ref) const {
        return keys_.count({question_id, context_ref}) > 0;
    }
    // false (and no change) on a duplicate (question_id, context_ref)
    bool add(TrainingInstance inst);
    // indices must be valid; duplicates among them are an error
    void remove_indices(std::vector<int> indices);

  private:
    std::vector<TrainingInstance> items_;
    std::set<std::pair<std::string, std::string>> keys_;
    int n_qa_ = 0, n_qr_ = 0;
};

struct RewardEntry {
    double raw = 0;    // log perplexity of generating q from this context
    double reward = 0; // normalized within the question's candidate group
};

struct RewardTable {
    // (question_id, context_ref) -> entry; map order keeps runs reproducible
    std::map<std::pair<std::string, std::string>, RewardEntry> entries;
    const RewardEntry* find(const std::string& qid, const std::string& ref) const {
        auto it = entries.find({qid, ref});
        return it == entries.end() ? nullptr : &it->second;
    }
};

struct RewardContext {
    std::string context_ref;
    const GenContext* ctx;
};

// One question with its reward candidates: the same-product review
// sentences plus the question's own answer treated as a review.
struct QuestionGroup {
    std::string question_id;
    std::string product_id;
    const std::vector<std::string>* q_tokens = nullptr;
    std::vector<RewardContext> contexts;
};

// reward_sign -1 (default): softmax over the group of negated log
// perplexities. reward_sign +1: literal normalization raw/sum(raw). Empty
// groups are skipped with a warning. Every group's rewards sum to 1.
RewardTable compute_rewards(const std::vector<QuestionGroup>& groups,
                            const GeneratorParams& gen, const Vocab& vocab,
                            const EmbeddingTable& emb, const RunConfig& cfg);

// Removes min(mu, n_qa) QA-sourced instances with the worst removal key:
// highest raw log perplexity under reward_sign -1 (lowest under +1), ties by
// (product_id, question_id) ascending. QR instances are never removed.
int adapt_remove(InstanceSet& S, const RewardTable& rewards, int mu, int reward_sign);

struct PoolPair {
    const QAPair* qa;
    const ReviewSentence* review;
    int review_index; // into the orchestrator's review context pool
};

struct ScoredPoolPair {
    double score;
    std::string product_id, question_id, review_id;
    int sent_idx;
    int pool_index;
};

// Selection rule shared with the oracle tests: descending score with at most
// one new review per question, ties by (product_id, question_id, review_id,
// sent_idx); stops after mu picks. Returns pool_index values in pick order.
std::vector<int> select_augment(std::vector<ScoredPoolPair> scored, int mu);

// Scores the eligible pool pairs with the ranker and adds the selected ones
// as QR instances. Pairs already present in S are skipped. Returns how many
// were added (an empty eligible pool adds nothing and warns).
int augment_add(InstanceSet& S, const RankerParams& ranker, const std::vector<PoolPair>& pool,
                int mu, const Corpus& corpus, const RunConfig& cfg);

struct EpochLog {
    int epoch = 0;
    int n_qa = 0;
    int n_qr = 0;
    double mean_reward = 0;
    double mean_train_nll = 0;
};

struct RunResult {
    InstanceSet S;
    RankerParams ranker;
    GeneratorParams generator;
    std::vector<EpochLog> log;
    // context pools, index-aligned with corpus.qa / corpus.reviews
    std::vector<GenContext> answer_ctx;
    std::vector<GenContext> review_ctx;
};

// The full iterative loop. When run_dir is non-empty, writes per-epoch
// checkpoints, an append-only log.jsonl, and a final instance dump there.
RunResult run_aita(const Corpus& corpus, const RunConfig& cfg, const std::string& run_dir = "");

AspectInfo uniform_aspect(int n_tokens, int aspect_dim);

} // namespace aita
