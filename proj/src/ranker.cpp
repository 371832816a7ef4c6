#include "aita/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "aita/kernels.hpp"

namespace aita {

namespace {

using kernels::dot;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat embed(const std::vector<int>& ids, const EmbeddingTable& emb) {
    Mat E(static_cast<int>(ids.size()), emb.dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const float* r = emb.row(ids[i]);
        for (int j = 0; j < emb.dim; ++j) E(static_cast<int>(i), j) = r[j];
    }
    return E;
}

void uniform_fill(Mat& m, Rng& rng, double lo, double hi) {
    for (double& v : m.a) v = rng.uniform(lo, hi);
}

struct SideTrace {
    Mat E;
    std::vector<Mat> Q, K, V, P; // per head; P is the row softmax of QK^T*scale
    Mat H;                       // n x h
    Vec hbar, u, alphas, h_alpha;
};

const std::vector<Mat>& side_Wq(const RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wq : p.r_Wq;
}
const std::vector<Mat>& side_Wk(const RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wk : p.r_Wk;
}
const std::vector<Mat>& side_Wv(const RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wv : p.r_Wv;
}
std::vector<Mat>& side_Wq(RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wq : p.r_Wq;
}
std::vector<Mat>& side_Wk(RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wk : p.r_Wk;
}
std::vector<Mat>& side_Wv(RankerParams& p, RankerSide s) {
    return s == RankerSide::QA ? p.qa_Wv : p.r_Wv;
}

SideTrace encode_fwd(const std::vector<int>& ids, RankerSide side, const RankerParams& p,
                     const EmbeddingTable& emb) {
    if (ids.empty()) throw std::invalid_argument("ranker encode: empty input");
    SideTrace t;
    t.E = embed(ids, emb);
    const int n = t.E.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.embedding_dim));
    t.H = Mat(n, p.h_dim);
    t.Q.resize(p.heads);
    t.K.resize(p.heads);
    t.V.resize(p.heads);
    t.P.resize(p.heads);
    for (int j = 0; j < p.heads; ++j) {
        kernels::matmul(t.E, side_Wq(p, side)[j], t.Q[j]);
        kernels::matmul(t.E, side_Wk(p, side)[j], t.K[j]);
        kernels::matmul(t.E, side_Wv(p, side)[j], t.V[j]);
        kernels::matmul_nt(t.Q[j], t.K[j], t.P[j]);
        for (double& v : t.P[j].a) v *= scale;
        kernels::softmax_rows(t.P[j]);
        Mat head;
        kernels::matmul(t.P[j], t.V[j], head);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < p.head_dim; ++c) t.H(i, j * p.head_dim + c) = head(i, c);
    }

    // global attention
    const int h = p.h_dim;
    t.hbar.assign(h, 0.0);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) t.hbar[c] += t.H(i, c);
    for (double& v : t.hbar) v /= n;
    kernels::matvec(p.M, t.hbar, t.u);
    Vec scores(n);
    for (int i = 0; i < n; ++i) scores[i] = dot(t.H.row(i), t.u.data(), h);
    t.alphas = kernels::softmax(scores);
    t.h_alpha.assign(h, 0.0);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) t.h_alpha[c] += t.alphas[i] * t.H(i, c);
    return t;
}

// Backward from d(h_alpha) through global attention and the encoder.
// Accumulates into grads; embeddings are frozen so dE is dropped.
void side_backward(const SideTrace& t, RankerSide side, const RankerParams& p,
                   const Vec& dh_alpha, RankerParams& grads) {
    const int n = t.H.rows;
    const int h = p.h_dim;

    Mat dH(n, h);
    Vec dalpha(n, 0.0);
    for (int i = 0; i < n; ++i) {
        dalpha[i] = dot(t.H.row(i), dh_alpha.data(), h);
        for (int c = 0; c < h; ++c) dH(i, c) += t.alphas[i] * dh_alpha[c];
    }
    // softmax backward
    double inner = 0.0;
    for (int i = 0; i < n; ++i) inner += dalpha[i] * t.alphas[i];
    Vec dscore(n);
    for (int i = 0; i < n; ++i) dscore[i] = t.alphas[i] * (dalpha[i] - inner);
    // score_i = h_i . (M hbar)
    Vec w(h, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < h; ++c) {
            dH(i, c) += dscore[i] * t.u[c];
            w[c] += dscore[i] * t.H(i, c);
        }
    }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < h; ++c) grads.M(r, c) += w[r] * t.hbar[c];
    Vec dhbar;
    kernels::matvec_t(p.M, w, dhbar);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) dH(i, c) += dhbar[c] / n;

    // encoder backward per head
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.embedding_dim));
    for (int j = 0; j < p.heads; ++j) {
        Mat dHead(n, p.head_dim);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < p.head_dim; ++c) dHead(i, c) = dH(i, j * p.head_dim + c);
        Mat dP, dV;
        kernels::matmul_nt(dHead, t.V[j], dP);
        kernels::matmul_tn(t.P[j], dHead, dV);
        Mat dS(n, n);
        for (int r = 0; r < n; ++r) {
            double in2 = 0.0;
            for (int c = 0; c < n; ++c) in2 += dP(r, c) * t.P[j](r, c);
            for (int c = 0; c < n; ++c) dS(r, c) = t.P[j](r, c) * (dP(r, c) - in2);
        }
        for (double& v : dS.a) v *= scale;
        Mat dQ, dK;
        kernels::matmul(dS, t.K[j], dQ);
        kernels::matmul_tn(dS, t.Q[j], dK);
        Mat g;
        kernels::matmul_tn(t.E, dQ, g);
        Mat& gWq = side_Wq(grads, side)[j];
        for (std::size_t i = 0; i < g.size(); ++i) gWq.a[i] += g.a[i];
        kernels::matmul_tn(t.E, dK, g);
        Mat& gWk = side_Wk(grads, side)[j];
        for (std::size_t i = 0; i < g.size(); ++i) gWk.a[i] += g.a[i];
        kernels::matmul_tn(t.E, dV, g);
        Mat& gWv = side_Wv(grads, side)[j];
        for (std::size_t i = 0; i < g.size(); ++i) gWv.a[i] += g.a[i];
    }
}

} // namespace

RankerParams RankerParams::init(const RunConfig& cfg, Rng& rng) {
    RankerParams p;
    p.embedding_dim = cfg.embedding_dim;
    p.heads = cfg.heads;
    p.head_dim = cfg.attn_dim / cfg.heads;
    p.h_dim = cfg.attn_dim;
    p.aspect_dim = cfg.aspect_dim;
    auto make_side = [&](std::vector<Mat>& ws) {
        ws.assign(p.heads, Mat(p.embedding_dim, p.head_dim));
        for (auto& w : ws) uniform_fill(w, rng, -0.08, 0.08);
    };
    make_side(p.qa_Wq);
    make_side(p.qa_Wk);
    make_side(p.qa_Wv);
    make_side(p.r_Wq);
    make_side(p.r_Wk);
    make_side(p.r_Wv);
    p.M = Mat(p.h_dim, p.h_dim);
    uniform_fill(p.M, rng, -0.08, 0.08);
    p.Ws = Mat(1, 3 * p.h_dim);
    uniform_fill(p.Ws, rng, -0.08, 0.08);
    p.bs = Mat(1, 1);
    p.Wp = Mat(p.aspect_dim, p.h_dim);
    uniform_fill(p.Wp, rng, -0.08, 0.08);
    p.bp = Mat(p.aspect_dim, 1);
    p.A = Mat(p.aspect_dim, p.h_dim);
    uniform_fill(p.A, rng, -0.08, 0.08);
    return p;
}

std::vector<NamedParam> RankerParams::param_refs() {
    std::vector<NamedParam> out;
    for (int j = 0; j < heads; ++j) {
        out.push_back({"qa_Wq." + std::to_string(j), &qa_Wq[j]});
        out.push_back({"qa_Wk." + std::to_string(j), &qa_Wk[j]});
        out.push_back({"qa_Wv." + std::to_string(j), &qa_Wv[j]});
        out.push_back({"r_Wq." + std::to_string(j), &r_Wq[j]});
        out.push_back({"r_Wk." + std::to_string(j), &r_Wk[j]});
        out.push_back({"r_Wv." + std::to_string(j), &r_Wv[j]});
    }
    out.push_back({"M", &M});
    out.push_back({"Ws", &Ws});
    out.push_back({"bs", &bs});
    out.push_back({"Wp", &Wp});
    out.push_back({"bp", &bp});
    out.push_back({"A", &A});
    return out;
}

RankerParams RankerParams::zeros_like(const RankerParams& p) {
    RankerParams z = p;
    auto zero_all = [](std::vector<Mat>& ms) {
        for (auto& m : ms) m.zero();
    };
    zero_all(z.qa_Wq);
    zero_all(z.qa_Wk);
    zero_all(z.qa_Wv);
    zero_all(z.r_Wq);
    zero_all(z.r_Wk);
    zero_all(z.r_Wv);
    z.M.zero();
    z.Ws.zero();
    z.bs.zero();
    z.Wp.zero();
    z.bp.zero();
    z.A.zero();
    return z;
}

Mat ranker_encode(const std::vector<int>& ids, RankerSide side, const RankerParams& p,
                  const EmbeddingTable& emb) {
    return encode_fwd(ids, side, p, emb).H;
}

GlobalAttention global_attention(const Mat& H, const Mat& M) {
    if (H.rows == 0) throw std::invalid_argument("global_attention: empty input");
    const int n = H.rows, h = H.cols;
    Vec hbar(h, 0.0);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) hbar[c] += H(i, c);
    for (double& v : hbar) v /= n;
    Vec u;
    kernels::matvec(M, hbar, u);
    Vec scores(n);
    for (int i = 0; i < n; ++i) scores[i] = dot(H.row(i), u.data(), h);
    GlobalAttention out;
    out.alphas = kernels::softmax(scores);
    out.h_alpha.assign(h, 0.0);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) out.h_alpha[c] += out.alphas[i] * H(i, c);
    return out;
}

double ranking_score(const Vec& h_qa, const Vec& h_r, const RankerParams& p) {
    if (h_qa.size() != h_r.size()) throw std::invalid_argument("ranking_score: dim mismatch");
    const int h = static_cast<int>(h_qa.size());
    if (3 * h != p.Ws.cols) throw std::invalid_argument("ranking_score: scorer dim mismatch");
    double z = p.bs(0, 0);
    const double* w = p.Ws.row(0);
    for (int c = 0; c < h; ++c) {
        z += w[c] * h_qa[c];
        z += w[h + c] * h_r[c];
        z += w[2 * h + c] * std::abs(h_qa[c] - h_r[c]);
    }
    return sigmoid(z);
}

Vec aspect_distribution(const Vec& h_alpha, const RankerParams& p) {
    Vec logits;
    kernels::matvec(p.Wp, h_alpha, logits);
    for (int k = 0; k < p.aspect_dim; ++k) logits[k] += p.bp(k, 0);
    return kernels::softmax(logits);
}

Vec reconstruct(const Vec& p_alpha, const Mat& A) {
    Vec h(A.cols, 0.0);
    for (int k = 0; k < A.rows; ++k)
        for (int c = 0; c < A.cols; ++c) h[c] += p_alpha[k] * A(k, c);
    return h;
}

double reconstruction_loss(const Vec& h_alpha, const Vec& h_alpha_prime) {
    double s = 0.0;
    for (std::size_t i = 0; i < h_alpha.size(); ++i) {
        const double d = h_alpha[i] - h_alpha_prime[i];
        s += d * d;
    }
    return 0.5 * s;
}

AspectInfo ranker_aspects(const std::vector<int>& ids, const RankerParams& p,
                          const EmbeddingTable& emb) {
    SideTrace t = encode_fwd(ids, RankerSide::Review, p, emb);
    AspectInfo info;
    info.alphas = t.alphas;
    info.p_alpha = aspect_distribution(t.h_alpha, p);
    return info;
}

std::vector<int> qa_concat_ids(const QAPair& qa, const Vocab& vocab, const RunConfig& cfg) {
    std::vector<int> ids = vocab.encode(qa.q_tokens);
    ids.push_back(Vocab::kEos); // separator between question and answer
    for (const auto& t : qa.a_tokens) ids.push_back(vocab.encode(t));
    if (static_cast<int>(ids.size()) > cfg.max_qa_len) ids.resize(cfg.max_qa_len);
    return ids;
}

std::vector<ScoredReview> rank_reviews(const QAPair& qa,
                                       const std::vector<const ReviewSentence*>& candidates,
                                       const RankerParams& p, const EmbeddingTable& emb,
                                       const Vocab& vocab, const RunConfig& cfg) {
    std::vector<ScoredReview> out(candidates.size());
    if (candidates.empty()) return out;
    for (const auto* r : candidates)
        if (r->product_id != qa.product_id)
            throw std::invalid_argument("rank_reviews: candidate from a different product");
    const SideTrace qa_t = encode_fwd(qa_concat_ids(qa, vocab, cfg), RankerSide::QA, p, emb);
    const int n = static_cast<int>(candidates.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const SideTrace rt =
            encode_fwd(vocab.encode(candidates[i]->tokens), RankerSide::Review, p, emb);
        out[i] = {candidates[i], ranking_score(qa_t.h_alpha, rt.h_alpha, p)};
    }
    std::stable_sort(out.begin(), out.end(), [](const ScoredReview& a, const ScoredReview& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.review->review_id != b.review->review_id)
            return a.review->review_id < b.review->review_id;
        return a.review->sent_idx < b.review->sent_idx;
    });
    return out;
}

RankerGroupResult ranker_group_run(const RankerParams& p, const EmbeddingTable& emb,
                                   const RankerGroup& g, double lambda, int objective_sign,
                                   double fixed_Z, RankerParams* grads) {
    RankerGroupResult res;
    const int nr = static_cast<int>(g.candidate_ids.size());
    if (nr == 0) return res;

    SideTrace qa_t = encode_fwd(g.qa_ids, RankerSide::QA, p, emb);
    std::vector<SideTrace> r_ts(nr);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nr; ++i)
        r_ts[i] = encode_fwd(g.candidate_ids[i], RankerSide::Review, p, emb);

    const int h = p.h_dim;
    res.scores.resize(nr);
    std::vector<Vec> p_alphas(nr), h_primes(nr);
    double recon_sum = 0.0;
    for (int i = 0; i < nr; ++i) {
        res.scores[i] = ranking_score(qa_t.h_alpha, r_ts[i].h_alpha, p);
        p_alphas[i] = aspect_distribution(r_ts[i].h_alpha, p);
        h_primes[i] = reconstruct(p_alphas[i], p.A);
        recon_sum += reconstruction_loss(r_ts[i].h_alpha, h_primes[i]);
    }
    res.Z = fixed_Z > 0 ? fixed_Z : 0.0;
    if (fixed_Z <= 0)
        for (double s : res.scores) res.Z += s;
    double lg = 0.0;
    for (int i = 0; i < nr; ++i) lg += res.scores[i] * g.rewards[i];
    lg /= res.Z;
    res.expected_reward = lg;
    res.recon_loss = recon_sum / nr;
    const double sign = static_cast<double>(objective_sign);
    res.objective = -sign * (lg - lambda * res.recon_loss);

    if (!grads) return res;

    Vec dh_qa(h, 0.0);
    for (int i = 0; i < nr; ++i) {
        const double ds = -sign * g.rewards[i] / res.Z; // d objective / d score_i, Z fixed
        const double dz = ds * res.scores[i] * (1.0 - res.scores[i]);
        const double* w = p.Ws.row(0);
        Vec dh_r(h, 0.0);
        for (int c = 0; c < h; ++c) {
            const double diff = qa_t.h_alpha[c] - r_ts[i].h_alpha[c];
            const double sg = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
            grads->Ws(0, c) += dz * qa_t.h_alpha[c];
            grads->Ws(0, h + c) += dz * r_ts[i].h_alpha[c];
            grads->Ws(0, 2 * h + c) += dz * std::abs(diff);
            dh_qa[c] += dz * (w[c] + w[2 * h + c] * sg);
            dh_r[c] += dz * (w[h + c] - w[2 * h + c] * sg);
        }
        grads->bs(0, 0) += dz;

        // reconstruction branch: d objective / d L^alpha_i = sign*lambda/nr
        const double dl = sign * lambda / nr;
        const Vec& ha = r_ts[i].h_alpha;
        const Vec& hp = h_primes[i];
        const Vec& pa = p_alphas[i];
        Vec dhp(h), dp(p.aspect_dim, 0.0);
        for (int c = 0; c < h; ++c) {
            dhp[c] = dl * (hp[c] - ha[c]);
            dh_r[c] += dl * (ha[c] - hp[c]);
        }
        for (int k = 0; k < p.aspect_dim; ++k) {
            for (int c = 0; c < h; ++c) {
                grads->A(k, c) += pa[k] * dhp[c];
                dp[k] += p.A(k, c) * dhp[c];
            }
        }
        double inner = 0.0;
        for (int k = 0; k < p.aspect_dim; ++k) inner += dp[k] * pa[k];
        for (int k = 0; k < p.aspect_dim; ++k) {
            const double dlogit = pa[k] * (dp[k] - inner);
            grads->bp(k, 0) += dlogit;
            for (int c = 0; c < h; ++c) {
                grads->Wp(k, c) += dlogit * ha[c];
                dh_r[c] += p.Wp(k, c) * dlogit;
            }
        }

        side_backward(r_ts[i], RankerSide::Review, p, dh_r, *grads);
    }
    side_backward(qa_t, RankerSide::QA, p, dh_qa, *grads);
    return res;
}

RankerBatchResult ranker_batch_run(const RankerParams& p, const EmbeddingTable& emb,
                                   const std::vector<RankerGroup>& batch, double lambda,
                                   int objective_sign, const Vec* fixed_Z,
                                   RankerParams* grads) {
    RankerBatchResult out;
    const int nb = static_cast<int>(batch.size());
    std::vector<int> live;
    for (int g = 0; g < nb; ++g)
        if (!batch[g].candidate_ids.empty()) live.push_back(g);
    out.group_Z.assign(nb, 0.0);
    if (live.empty()) return out;
    const double wg = 1.0 / static_cast<double>(live.size());
    const double sign = static_cast<double>(objective_sign);
    const int h = p.h_dim;

    // each distinct candidate text is encoded once per batch
    std::map<std::vector<int>, int> slot_of;
    std::vector<const std::vector<int>*> slot_ids;
    std::vector<std::vector<int>> member_slots(nb);
    for (int g : live) {
        for (const auto& ids : batch[g].candidate_ids) {
            auto [it, fresh] = slot_of.try_emplace(ids, static_cast<int>(slot_of.size()));
            if (fresh) slot_ids.push_back(&it->first);
            member_slots[g].push_back(it->second);
        }
    }
    const int ns = static_cast<int>(slot_of.size());

    std::vector<SideTrace> qa_t(nb), cand_t(ns);
    const int nlive = static_cast<int>(live.size());
#pragma omp parallel for schedule(dynamic)
    for (int li = 0; li < nlive; ++li)
        qa_t[live[li]] = encode_fwd(batch[live[li]].qa_ids, RankerSide::QA, p, emb);
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < ns; ++s)
        cand_t[s] = encode_fwd(*slot_ids[s], RankerSide::Review, p, emb);

    // per-candidate aspect pipeline, shared across groups
    std::vector<Vec> p_alphas(ns), h_primes(ns);
    Vec recon(ns);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < ns; ++s) {
        p_alphas[s] = aspect_distribution(cand_t[s].h_alpha, p);
        h_primes[s] = reconstruct(p_alphas[s], p.A);
        recon[s] = reconstruction_loss(cand_t[s].h_alpha, h_primes[s]);
    }

    std::vector<Vec> scores(nb);
    for (int g : live) {
        const int nc = static_cast<int>(member_slots[g].size());
        scores[g].resize(nc);
        double Z = 0.0, lg = 0.0, rl = 0.0;
        for (int i = 0; i < nc; ++i) {
            scores[g][i] = ranking_score(qa_t[g].h_alpha, cand_t[member_slots[g][i]].h_alpha, p);
            Z += scores[g][i];
            rl += recon[member_slots[g][i]];
        }
        if (fixed_Z) Z = (*fixed_Z)[g];
        out.group_Z[g] = Z;
        for (int i = 0; i < nc; ++i) lg += scores[g][i] * batch[g].rewards[i];
        lg /= Z;
        rl /= nc;
        out.mean_expected_reward += wg * lg;
        out.objective += wg * (-sign * (lg - lambda * rl));
    }
    if (!grads) return out;

    std::vector<Vec> dh_qa(nb), dh_cand(ns, Vec(h, 0.0));
    Vec recon_coef(ns, 0.0);
    for (int g : live) {
        dh_qa[g].assign(h, 0.0);
        const int nc = static_cast<int>(member_slots[g].size());
        for (int i = 0; i < nc; ++i) {
            const int s = member_slots[g][i];
            const double ds = wg * (-sign) * batch[g].rewards[i] / out.group_Z[g];
            const double dz = ds * scores[g][i] * (1.0 - scores[g][i]);
            const double* w = p.Ws.row(0);
            const Vec& hqa = qa_t[g].h_alpha;
            const Vec& hr = cand_t[s].h_alpha;
            for (int c = 0; c < h; ++c) {
                const double diff = hqa[c] - hr[c];
                const double sg = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                grads->Ws(0, c) += dz * hqa[c];
                grads->Ws(0, h + c) += dz * hr[c];
                grads->Ws(0, 2 * h + c) += dz * std::abs(diff);
                dh_qa[g][c] += dz * (w[c] + w[2 * h + c] * sg);
                dh_cand[s][c] += dz * (w[h + c] - w[2 * h + c] * sg);
            }
            grads->bs(0, 0) += dz;
            recon_coef[s] += wg * sign * lambda / nc;
        }
    }

    // one reconstruction backward per distinct candidate with summed weight
    for (int s = 0; s < ns; ++s) {
        const double dl = recon_coef[s];
        if (dl == 0.0) continue;
        const Vec& ha = cand_t[s].h_alpha;
        const Vec& hp = h_primes[s];
        const Vec& pa = p_alphas[s];
        Vec dhp(h), dp(p.aspect_dim, 0.0);
        for (int c = 0; c < h; ++c) {
            dhp[c] = dl * (hp[c] - ha[c]);
            dh_cand[s][c] += dl * (ha[c] - hp[c]);
        }
        for (int k = 0; k < p.aspect_dim; ++k) {
            for (int c = 0; c < h; ++c) {
                grads->A(k, c) += pa[k] * dhp[c];
                dp[k] += p.A(k, c) * dhp[c];
            }
        }
        double inner = 0.0;
        for (int k = 0; k < p.aspect_dim; ++k) inner += dp[k] * pa[k];
        for (int k = 0; k < p.aspect_dim; ++k) {
            const double dlogit = pa[k] * (dp[k] - inner);
            grads->bp(k, 0) += dlogit;
            for (int c = 0; c < h; ++c) {
                grads->Wp(k, c) += dlogit * ha[c];
                dh_cand[s][c] += p.Wp(k, c) * dlogit;
            }
        }
    }

    for (int s = 0; s < ns; ++s)
        side_backward(cand_t[s], RankerSide::Review, p, dh_cand[s], *grads);
    for (int g : live) side_backward(qa_t[g], RankerSide::QA, p, dh_qa[g], *grads);
    return out;
}

double ranker_update(const std::vector<RankerGroup>& batch, RankerParams& p,
                     const EmbeddingTable& emb, const RunConfig& cfg, Adam& opt) {
    if (batch.empty()) return 0.0;
    RankerParams grads = RankerParams::zeros_like(p);
    const auto res =
        ranker_batch_run(p, emb, batch, cfg.lambda, cfg.objective_sign, nullptr, &grads);
    bool any = false;
    for (const auto& g : batch)
        if (!g.candidate_ids.empty()) any = true;
    if (!any) return 0.0;
    opt.step(p.param_refs(), grads.param_refs());
    return res.mean_expected_reward;
}

} // namespace aita
