#pragma once

#include <functional>
#include <string>
#include <vector>

#include "aita/adam.hpp"
#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/mat.hpp"
#include "aita/ranker.hpp"
#include "aita/rng.hpp"

namespace aita {

struct LstmParams {
    Mat Wx; // 4h x in, gate order [i, f, g, o]
    Mat Wh; // 4h x h
    Mat b;  // 4h x 1
};

struct GeneratorParams {
    LstmParams enc_fwd, enc_bwd; // input: extended embedding
    LstmParams dec;              // input: plain word embedding
    Mat init_s, init_s_b;        // h x 2h, h x 1 (affine decoder state init)
    Mat init_c, init_c_b;
    Mat W_att;  // 2h x h
    Mat W1, b1; // h x 3h, h x 1 (bottleneck over [s_t, c_t])
    Mat W2, b2; // V x h, V x 1
    Mat Wc, bc; // k x h, 1 x 1 (aspect-aware copy gate)
    int embedding_dim = 0, hidden = 0, aspect_dim = 0, vocab_size = 0, ext_dim = 0;

    static GeneratorParams init(const RunConfig& cfg, int vocab_size, Rng& rng);
    std::vector<NamedParam> param_refs();
    static GeneratorParams zeros_like(const GeneratorParams& p);
};

// One source sequence prepared for the generator. ext_ids hold the copy
// targets: the vocab id when in vocabulary, otherwise V + oov slot. OOV
// slots are per-context and render back through oov_tokens.
struct GenContext {
    std::vector<std::string> tokens;
    std::vector<int> ids;     // vocab ids, OOV -> UNK
    std::vector<int> ext_ids; // copy target ids
    std::vector<std::string> oov_tokens;
    std::vector<PosTag> pos;
    std::vector<NerTag> ner;
    AspectInfo aspect;
};

GenContext make_gen_context(const std::vector<std::string>& tokens,
                            const std::vector<PosTag>& pos, const std::vector<NerTag>& ner,
                            const AspectInfo& aspect, const Vocab& vocab);

// Question tokens as decoder targets against a context: vocab id, else the
// context's extended id, else UNK.
std::vector<int> encode_targets(const std::vector<std::string>& q_tokens, const Vocab& vocab,
                                const GenContext& ctx);

// Bidirectional encoding of the extended embeddings; one row [fwd_i, bwd_i]
// per token. Throws when aspect.alphas disagrees with the token count.
Mat encode_review(const GenContext& ctx, const GeneratorParams& p, const EmbeddingTable& emb,
                  bool use_aspect = true);

struct DecState {
    Vec s; // hidden
    Vec c; // cell
};

// Encoder outputs plus the decoder start state (affine map of the final
// forward/backward encoder states).
struct EncodedReview {
    Mat Hg;
    DecState init;
};
EncodedReview encode_with_init(const GenContext& ctx, const GeneratorParams& p,
                               const EmbeddingTable& emb, bool use_aspect = true);

// One decoder step: returns the mixture distribution over vocab + context
// OOV slots (sums to 1) and advances the state. prev_id >= vocab_size is
// looked up as UNK.
Vec decode_step(DecState& state, int prev_id, const Mat& Hg, const GenContext& ctx,
                const GeneratorParams& p, const EmbeddingTable& emb, bool use_aspect = true);

// Mean over the question tokens of -ln p(q_t | ...) under teacher forcing.
// Probabilities are floored at 1e-12; trailing PADs are ignored. EOS is a
// training-only target and does not enter this score.
double log_perplexity(const std::vector<std::string>& q_tokens, const GenContext& ctx,
                      const Vocab& vocab, const GeneratorParams& p, const EmbeddingTable& emb,
                      bool use_aspect = true);

enum class DecodeMode { Greedy, Beam };

struct GenerationResult {
    std::vector<int> token_ids;      // extended ids; ends with EOS or at max_len
    std::vector<std::string> tokens; // rendered, including the EOS marker
    Vec step_probs;                  // mixture probability of each emitted token
    double score = 0;                // mean log-probability
};

GenerationResult generate(const GenContext& ctx, const Vocab& vocab, const GeneratorParams& p,
                          const EmbeddingTable& emb, DecodeMode mode, int beam_size,
                          int max_len, bool use_aspect = true);

// A training example: context plus gold question (non-owning views).
struct GenInstance {
    const GenContext* ctx = nullptr;
    const std::vector<std::string>* q_tokens = nullptr;
};

// Teacher-forced batch objective: mean over instances of the per-token mean
// NLL, with EOS appended as the final target. Fills grads when non-null.
double generator_batch_nll(const std::vector<GenInstance>& batch, const Vocab& vocab,
                           const GeneratorParams& p, const EmbeddingTable& emb,
                           bool use_aspect, GeneratorParams* grads);

// One optimizer ascent step on the batch likelihood; returns the batch NLL.
// Empty batch is a no-op returning 0.
double generator_update(const std::vector<GenInstance>& batch, const Vocab& vocab,
                        GeneratorParams& p, const EmbeddingTable& emb, const RunConfig& cfg,
                        Adam& opt);

// Deterministic beam search over an abstract step function, exposed for
// oracle tests. The step function consumes (state, input token) and yields
// the successor state plus log-probabilities for the next output token.
struct BeamStep {
    int next_state;
    const Vec* log_probs; // indexed by token id
};
using BeamStepFn = std::function<BeamStep(int state, int token)>;

struct BeamHyp {
    std::vector<int> tokens;
    double log_prob = 0;
    double norm_score = 0;
};

// Expands from `bos`; a hypothesis finishes at `eos` or max_len. banned ids
// are never emitted. Returns the hypothesis with the best length-normalized
// score (ties: lexicographically smaller token sequence). beam_size 1 is
// exactly greedy argmax with lowest-id tie-breaks.
BeamHyp beam_decode(const BeamStepFn& step, int initial_state, int bos, int eos, int n_tokens,
                    const std::vector<int>& banned, int beam_size, int max_len);

} // namespace aita
