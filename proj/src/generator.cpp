#include "aita/generator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "aita/kernels.hpp"

namespace aita {

namespace {

using kernels::dot;

constexpr double kProbFloor = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void uniform_fill(Mat& m, Rng& rng, double lo, double hi) {
    for (double& v : m.a) v = rng.uniform(lo, hi);
}

LstmParams make_lstm(int in, int h, Rng& rng) {
    LstmParams p{Mat(4 * h, in), Mat(4 * h, h), Mat(4 * h, 1)};
    uniform_fill(p.Wx, rng, -0.08, 0.08);
    uniform_fill(p.Wh, rng, -0.08, 0.08);
    return p;
}

struct LstmStepTrace {
    Vec x, i, f, g, o, c, h;
};

// gate rows of Wx/Wh/b are laid out [i, f, g, o]
void lstm_step(const LstmParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev,
               LstmStepTrace& t) {
    const int h = p.Wh.cols;
    Vec z(4 * h);
    for (int r = 0; r < 4 * h; ++r)
        z[r] = dot(p.Wx.row(r), x.data(), p.Wx.cols) + dot(p.Wh.row(r), h_prev.data(), h) +
               p.b(r, 0);
    t.x = x;
    t.i.resize(h);
    t.f.resize(h);
    t.g.resize(h);
    t.o.resize(h);
    t.c.resize(h);
    t.h.resize(h);
    for (int k = 0; k < h; ++k) {
        t.i[k] = sigmoid(z[k]);
        t.f[k] = sigmoid(z[h + k]);
        t.g[k] = std::tanh(z[2 * h + k]);
        t.o[k] = sigmoid(z[3 * h + k]);
        t.c[k] = t.f[k] * c_prev[k] + t.i[k] * t.g[k];
        t.h[k] = t.o[k] * std::tanh(t.c[k]);
    }
}

// Accumulates parameter grads and fills grads w.r.t. the previous state.
void lstm_backward(const LstmParams& p, const LstmStepTrace& t, const Vec& h_prev,
                   const Vec& c_prev, const Vec& dh, const Vec& dc_in, LstmParams& g,
                   Vec& dh_prev, Vec& dc_prev) {
    const int h = p.Wh.cols;
    Vec dgates(4 * h);
    dc_prev.assign(h, 0.0);
    for (int k = 0; k < h; ++k) {
        const double tc = std::tanh(t.c[k]);
        const double dout = dh[k] * tc;
        const double dc = dc_in[k] + dh[k] * t.o[k] * (1.0 - tc * tc);
        const double di = dc * t.g[k];
        const double dgg = dc * t.i[k];
        const double df = dc * c_prev[k];
        dc_prev[k] = dc * t.f[k];
        dgates[k] = di * t.i[k] * (1.0 - t.i[k]);
        dgates[h + k] = df * t.f[k] * (1.0 - t.f[k]);
        dgates[2 * h + k] = dgg * (1.0 - t.g[k] * t.g[k]);
        dgates[3 * h + k] = dout * t.o[k] * (1.0 - t.o[k]);
    }
    dh_prev.assign(h, 0.0);
    for (int r = 0; r < 4 * h; ++r) {
        const double dr = dgates[r];
        if (dr == 0.0) continue;
        double* wx = g.Wx.row(r);
        for (int c = 0; c < p.Wx.cols; ++c) wx[c] += dr * t.x[c];
        double* wh = g.Wh.row(r);
        const double* pwh = p.Wh.row(r);
        for (int c = 0; c < h; ++c) {
            wh[c] += dr * h_prev[c];
            dh_prev[c] += dr * pwh[c];
        }
        g.b(r, 0) += dr;
    }
}

Vec extended_embedding(const GenContext& ctx, int i, const GeneratorParams& p,
                       const EmbeddingTable& emb, bool use_aspect) {
    Vec x(p.ext_dim, 0.0);
    const float* e = emb.row(ctx.ids[i]);
    for (int c = 0; c < p.embedding_dim; ++c) x[c] = e[c];
    x[p.embedding_dim + static_cast<int>(ctx.pos[i])] = 1.0;
    x[p.embedding_dim + kNumPosTags + static_cast<int>(ctx.ner[i])] = 1.0;
    x[p.ext_dim - 1] = use_aspect ? ctx.aspect.alphas[i] : 0.0;
    return x;
}

Vec word_embedding(int id, const GeneratorParams& p, const EmbeddingTable& emb) {
    const int lookup = id >= p.vocab_size ? Vocab::kUnk : id;
    Vec x(p.embedding_dim);
    const float* e = emb.row(lookup);
    for (int c = 0; c < p.embedding_dim; ++c) x[c] = e[c];
    return x;
}

struct EncTrace {
    int n = 0;
    std::vector<Vec> xs;
    std::vector<LstmStepTrace> fwd, bwd; // bwd in processing order (token n-1 first)
    Mat Hg;
    Vec cat_h, cat_c;
    DecState init;
};

EncTrace encode_fwd(const GenContext& ctx, const GeneratorParams& p, const EmbeddingTable& emb,
                    bool use_aspect) {
    const int n = static_cast<int>(ctx.ids.size());
    if (n == 0) throw std::invalid_argument("generator encode: empty context");
    if (use_aspect && static_cast<int>(ctx.aspect.alphas.size()) != n)
        throw std::invalid_argument("generator encode: aspect weights do not match tokens");
    EncTrace t;
    t.n = n;
    t.xs.resize(n);
    for (int i = 0; i < n; ++i) t.xs[i] = extended_embedding(ctx, i, p, emb, use_aspect);

    const int h = p.hidden;
    t.fwd.resize(n);
    t.bwd.resize(n);
    const Vec zero(h, 0.0);
    for (int i = 0; i < n; ++i) {
        const Vec& hp = i == 0 ? zero : t.fwd[i - 1].h;
        const Vec& cp = i == 0 ? zero : t.fwd[i - 1].c;
        lstm_step(p.enc_fwd, t.xs[i], hp, cp, t.fwd[i]);
    }
    for (int k = 0; k < n; ++k) { // processes token n-1-k
        const Vec& hp = k == 0 ? zero : t.bwd[k - 1].h;
        const Vec& cp = k == 0 ? zero : t.bwd[k - 1].c;
        lstm_step(p.enc_bwd, t.xs[n - 1 - k], hp, cp, t.bwd[k]);
    }
    t.Hg = Mat(n, 2 * h);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < h; ++c) {
            t.Hg(i, c) = t.fwd[i].h[c];
            t.Hg(i, h + c) = t.bwd[n - 1 - i].h[c];
        }
    }
    t.cat_h.resize(2 * h);
    t.cat_c.resize(2 * h);
    for (int c = 0; c < h; ++c) {
        t.cat_h[c] = t.fwd[n - 1].h[c];
        t.cat_h[h + c] = t.bwd[n - 1].h[c];
        t.cat_c[c] = t.fwd[n - 1].c[c];
        t.cat_c[h + c] = t.bwd[n - 1].c[c];
    }
    t.init.s.assign(h, 0.0);
    t.init.c.assign(h, 0.0);
    for (int r = 0; r < h; ++r) {
        t.init.s[r] = dot(p.init_s.row(r), t.cat_h.data(), 2 * h) + p.init_s_b(r, 0);
        t.init.c[r] = dot(p.init_c.row(r), t.cat_c.data(), 2 * h) + p.init_c_b(r, 0);
    }
    return t;
}

struct DecStepTrace {
    Vec x;
    LstmStepTrace lstm;
    Vec s_prev, c_prev;
    Vec u;   // W_att * s_t
    Vec z;   // attention over source positions
    Vec ctx; // 2h
    Vec cat; // [s_t, ctx]
    Vec tau; // bottleneck
    Vec p0;  // vocab distribution
    double beta = 0;
    Vec p_mix;
};

void dec_step_fwd(DecStepTrace& t, const DecState& state, int input_id, const Mat& Hg,
                  const GenContext& ctx, const GeneratorParams& p, const EmbeddingTable& emb,
                  bool use_aspect) {
    const int h = p.hidden;
    const int n = Hg.rows;
    t.x = word_embedding(input_id, p, emb);
    t.s_prev = state.s;
    t.c_prev = state.c;
    lstm_step(p.dec, t.x, state.s, state.c, t.lstm);
    const Vec& s = t.lstm.h;

    kernels::matvec(p.W_att, s, t.u);
    Vec logits(n);
    for (int j = 0; j < n; ++j) logits[j] = dot(Hg.row(j), t.u.data(), 2 * h);
    t.z = kernels::softmax(logits);
    t.ctx.assign(2 * h, 0.0);
    for (int j = 0; j < n; ++j)
        for (int c = 0; c < 2 * h; ++c) t.ctx[c] += t.z[j] * Hg(j, c);

    t.cat.resize(3 * h);
    std::copy(s.begin(), s.end(), t.cat.begin());
    std::copy(t.ctx.begin(), t.ctx.end(), t.cat.begin() + h);
    t.tau.resize(h);
    for (int r = 0; r < h; ++r)
        t.tau[r] = sigmoid(dot(p.W1.row(r), t.cat.data(), 3 * h) + p.b1(r, 0));
    Vec vlogits(p.vocab_size);
    for (int r = 0; r < p.vocab_size; ++r)
        vlogits[r] = dot(p.W2.row(r), t.tau.data(), h) + p.b2(r, 0);
    t.p0 = kernels::softmax(vlogits);

    double beta_pre = p.bc(0, 0);
    if (use_aspect) {
        Vec wc_s;
        kernels::matvec(p.Wc, s, wc_s);
        for (int k = 0; k < p.aspect_dim; ++k) beta_pre += ctx.aspect.p_alpha[k] * wc_s[k];
    }
    t.beta = sigmoid(beta_pre);

    const int n_ext = p.vocab_size + static_cast<int>(ctx.oov_tokens.size());
    t.p_mix.assign(n_ext, 0.0);
    for (int w = 0; w < p.vocab_size; ++w) t.p_mix[w] = (1.0 - t.beta) * t.p0[w];
    for (int j = 0; j < n; ++j) t.p_mix[ctx.ext_ids[j]] += t.beta * t.z[j];
}

// Backward through one decoder step. dpm is d objective / d p_mix[target];
// ds_carry/dc_carry hold the state grads flowing back from the next step.
// Emits grads w.r.t. this step's previous state and accumulates into dHg.
void dec_step_backward(const DecStepTrace& t, int target, double dpm, const Mat& Hg,
                       const GenContext& ctx, const GeneratorParams& p, bool use_aspect,
                       const Vec& ds_carry, const Vec& dc_carry, GeneratorParams& g, Mat& dHg,
                       Vec& ds_prev, Vec& dc_prev) {
    const int h = p.hidden;
    const int n = Hg.rows;
    const Vec& s = t.lstm.h;

    Vec dz(n, 0.0);
    Vec dp0(p.vocab_size, 0.0);
    double dbeta = 0.0;
    double copy_mass = 0.0;
    for (int j = 0; j < n; ++j)
        if (ctx.ext_ids[j] == target) {
            dz[j] += dpm * t.beta;
            copy_mass += t.z[j];
        }
    if (target < p.vocab_size) {
        dp0[target] += dpm * (1.0 - t.beta);
        dbeta += dpm * (copy_mass - t.p0[target]);
    } else {
        dbeta += dpm * copy_mass;
    }

    Vec ds = ds_carry;
    Vec dc = dc_carry;

    // copy gate
    const double dbeta_pre = dbeta * t.beta * (1.0 - t.beta);
    g.bc(0, 0) += dbeta_pre;
    if (use_aspect && dbeta_pre != 0.0) {
        for (int k = 0; k < p.aspect_dim; ++k) {
            const double dwc = dbeta_pre * ctx.aspect.p_alpha[k];
            for (int c = 0; c < h; ++c) {
                g.Wc(k, c) += dwc * s[c];
                ds[c] += dwc * p.Wc(k, c);
            }
        }
    }

    // vocabulary branch
    double inner = 0.0;
    for (int w = 0; w < p.vocab_size; ++w) inner += dp0[w] * t.p0[w];
    Vec dtau(h, 0.0);
    if (dpm != 0.0) {
        for (int w = 0; w < p.vocab_size; ++w) {
            const double dlogit = t.p0[w] * (dp0[w] - inner);
            if (dlogit == 0.0) continue;
            g.b2(w, 0) += dlogit;
            double* w2 = g.W2.row(w);
            const double* pw2 = p.W2.row(w);
            for (int c = 0; c < h; ++c) {
                w2[c] += dlogit * t.tau[c];
                dtau[c] += dlogit * pw2[c];
            }
        }
    }
    Vec dcat(3 * h, 0.0);
    for (int r = 0; r < h; ++r) {
        const double dpre = dtau[r] * t.tau[r] * (1.0 - t.tau[r]);
        if (dpre == 0.0) continue;
        g.b1(r, 0) += dpre;
        double* w1 = g.W1.row(r);
        const double* pw1 = p.W1.row(r);
        for (int c = 0; c < 3 * h; ++c) {
            w1[c] += dpre * t.cat[c];
            dcat[c] += dpre * pw1[c];
        }
    }
    for (int c = 0; c < h; ++c) ds[c] += dcat[c];
    const Vec dctx(dcat.begin() + h, dcat.end());

    // attention context
    bool any_dctx = false;
    for (double v : dctx)
        if (v != 0.0) {
            any_dctx = true;
            break;
        }
    if (any_dctx) {
        for (int j = 0; j < n; ++j) {
            dz[j] += dot(Hg.row(j), dctx.data(), 2 * h);
            for (int c = 0; c < 2 * h; ++c) dHg(j, c) += t.z[j] * dctx[c];
        }
    }
    double zin = 0.0;
    for (int j = 0; j < n; ++j) zin += dz[j] * t.z[j];
    Vec du(2 * h, 0.0);
    bool any_du = false;
    for (int j = 0; j < n; ++j) {
        const double dlog = t.z[j] * (dz[j] - zin);
        if (dlog == 0.0) continue;
        any_du = true;
        for (int c = 0; c < 2 * h; ++c) {
            dHg(j, c) += dlog * t.u[c];
            du[c] += dlog * Hg(j, c);
        }
    }
    if (any_du) {
        for (int r = 0; r < 2 * h; ++r) {
            if (du[r] == 0.0) continue;
            double* wa = g.W_att.row(r);
            const double* pwa = p.W_att.row(r);
            for (int c = 0; c < h; ++c) {
                wa[c] += du[r] * s[c];
                ds[c] += du[r] * pwa[c];
            }
        }
    }

    lstm_backward(p.dec, t.lstm, t.s_prev, t.c_prev, ds, dc, g.dec, ds_prev, dc_prev);
}

// Decoder-init affine maps plus BPTT through both encoder directions.
void encoder_backward(const EncTrace& t, const GeneratorParams& p, const Vec& ds0,
                      const Vec& dc0, Mat& dHg, GeneratorParams& g) {
    const int h = p.hidden;
    const int n = t.n;
    Vec dcat_h(2 * h, 0.0), dcat_c(2 * h, 0.0);
    for (int r = 0; r < h; ++r) {
        if (ds0[r] != 0.0) {
            g.init_s_b(r, 0) += ds0[r];
            double* w = g.init_s.row(r);
            const double* pw = p.init_s.row(r);
            for (int c = 0; c < 2 * h; ++c) {
                w[c] += ds0[r] * t.cat_h[c];
                dcat_h[c] += ds0[r] * pw[c];
            }
        }
        if (dc0[r] != 0.0) {
            g.init_c_b(r, 0) += dc0[r];
            double* w = g.init_c.row(r);
            const double* pw = p.init_c.row(r);
            for (int c = 0; c < 2 * h; ++c) {
                w[c] += dc0[r] * t.cat_c[c];
                dcat_c[c] += dc0[r] * pw[c];
            }
        }
    }

    std::vector<Vec> dfwd_h(n, Vec(h, 0.0)), dbwd_h(n, Vec(h, 0.0));
    std::vector<Vec> dfwd_c(n, Vec(h, 0.0)), dbwd_c(n, Vec(h, 0.0));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < h; ++c) {
            dfwd_h[i][c] += dHg(i, c);
            dbwd_h[n - 1 - i][c] += dHg(i, h + c); // bwd trace is in processing order
        }
    for (int c = 0; c < h; ++c) {
        dfwd_h[n - 1][c] += dcat_h[c];
        dbwd_h[n - 1][c] += dcat_h[h + c];
        dfwd_c[n - 1][c] += dcat_c[c];
        dbwd_c[n - 1][c] += dcat_c[h + c];
    }

    const Vec zero(h, 0.0);
    Vec dh_prev, dc_prev;
    for (int i = n - 1; i >= 0; --i) {
        const Vec& hp = i == 0 ? zero : t.fwd[i - 1].h;
        const Vec& cp = i == 0 ? zero : t.fwd[i - 1].c;
        lstm_backward(p.enc_fwd, t.fwd[i], hp, cp, dfwd_h[i], dfwd_c[i], g.enc_fwd, dh_prev,
                      dc_prev);
        if (i > 0)
            for (int c = 0; c < h; ++c) {
                dfwd_h[i - 1][c] += dh_prev[c];
                dfwd_c[i - 1][c] += dc_prev[c];
            }
    }
    for (int k = n - 1; k >= 0; --k) {
        const Vec& hp = k == 0 ? zero : t.bwd[k - 1].h;
        const Vec& cp = k == 0 ? zero : t.bwd[k - 1].c;
        lstm_backward(p.enc_bwd, t.bwd[k], hp, cp, dbwd_h[k], dbwd_c[k], g.enc_bwd, dh_prev,
                      dc_prev);
        if (k > 0)
            for (int c = 0; c < h; ++c) {
                dbwd_h[k - 1][c] += dh_prev[c];
                dbwd_c[k - 1][c] += dc_prev[c];
            }
    }
}

// Shared teacher-forced pass: mean NLL over the targets. With grads, also
// backpropagates `weight` times the objective.
double teacher_forced(const GenContext& ctx, const std::vector<int>& targets,
                      const GeneratorParams& p, const EmbeddingTable& emb, bool use_aspect,
                      GeneratorParams* grads, double weight) {
    EncTrace enc = encode_fwd(ctx, p, emb, use_aspect);
    const int steps = static_cast<int>(targets.size());
    std::vector<DecStepTrace> dts(steps);
    DecState st = enc.init;
    double nll = 0.0;
    for (int t = 0; t < steps; ++t) {
        const int input = t == 0 ? Vocab::kBos : targets[t - 1];
        dec_step_fwd(dts[t], st, input, enc.Hg, ctx, p, emb, use_aspect);
        st.s = dts[t].lstm.h;
        st.c = dts[t].lstm.c;
        nll += -std::log(std::max(dts[t].p_mix[targets[t]], kProbFloor));
    }
    nll /= steps;
    if (!grads) return nll;

    const int h = p.hidden;
    Mat dHg(enc.n, 2 * h);
    Vec ds_carry(h, 0.0), dc_carry(h, 0.0);
    for (int t = steps - 1; t >= 0; --t) {
        const double pm = dts[t].p_mix[targets[t]];
        const double dpm = pm > kProbFloor ? -(weight / steps) / pm : 0.0;
        Vec ds_prev, dc_prev;
        dec_step_backward(dts[t], targets[t], dpm, enc.Hg, ctx, p, use_aspect, ds_carry,
                          dc_carry, *grads, dHg, ds_prev, dc_prev);
        ds_carry = std::move(ds_prev);
        dc_carry = std::move(dc_prev);
    }
    encoder_backward(enc, p, ds_carry, dc_carry, dHg, *grads);
    return nll;
}

std::vector<std::string> trim_pads(const std::vector<std::string>& toks) {
    std::vector<std::string> out = toks;
    while (!out.empty() && out.back() == "<pad>") out.pop_back();
    return out;
}

} // namespace

GeneratorParams GeneratorParams::init(const RunConfig& cfg, int vocab_size, Rng& rng) {
    GeneratorParams p;
    p.embedding_dim = cfg.embedding_dim;
    p.hidden = cfg.gen_hidden;
    p.aspect_dim = cfg.aspect_dim;
    p.vocab_size = vocab_size;
    p.ext_dim = cfg.embedding_dim + kNumPosTags + kNumNerTags + 1;
    const int h = p.hidden;
    p.enc_fwd = make_lstm(p.ext_dim, h, rng);
    p.enc_bwd = make_lstm(p.ext_dim, h, rng);
    p.dec = make_lstm(p.embedding_dim, h, rng);
    p.init_s = Mat(h, 2 * h);
    p.init_s_b = Mat(h, 1);
    p.init_c = Mat(h, 2 * h);
    p.init_c_b = Mat(h, 1);
    uniform_fill(p.init_s, rng, -0.08, 0.08);
    uniform_fill(p.init_c, rng, -0.08, 0.08);
    p.W_att = Mat(2 * h, h);
    uniform_fill(p.W_att, rng, -0.08, 0.08);
    p.W1 = Mat(h, 3 * h);
    p.b1 = Mat(h, 1);
    uniform_fill(p.W1, rng, -0.08, 0.08);
    p.W2 = Mat(vocab_size, h);
    p.b2 = Mat(vocab_size, 1);
    uniform_fill(p.W2, rng, -0.08, 0.08);
    p.Wc = Mat(cfg.aspect_dim, h);
    p.bc = Mat(1, 1);
    uniform_fill(p.Wc, rng, -0.08, 0.08);
    return p;
}

std::vector<NamedParam> GeneratorParams::param_refs() {
    return {
        {"enc_fwd.Wx", &enc_fwd.Wx}, {"enc_fwd.Wh", &enc_fwd.Wh}, {"enc_fwd.b", &enc_fwd.b},
        {"enc_bwd.Wx", &enc_bwd.Wx}, {"enc_bwd.Wh", &enc_bwd.Wh}, {"enc_bwd.b", &enc_bwd.b},
        {"dec.Wx", &dec.Wx},         {"dec.Wh", &dec.Wh},         {"dec.b", &dec.b},
        {"init_s", &init_s},         {"init_s_b", &init_s_b},     {"init_c", &init_c},
        {"init_c_b", &init_c_b},     {"W_att", &W_att},           {"W1", &W1},
        {"b1", &b1},                 {"W2", &W2},                 {"b2", &b2},
        {"Wc", &Wc},                 {"bc", &bc},
    };
}

GeneratorParams GeneratorParams::zeros_like(const GeneratorParams& p) {
    GeneratorParams z = p;
    for (auto& np : z.param_refs()) np.m->zero();
    return z;
}

GenContext make_gen_context(const std::vector<std::string>& tokens,
                            const std::vector<PosTag>& pos, const std::vector<NerTag>& ner,
                            const AspectInfo& aspect, const Vocab& vocab) {
    if (tokens.size() != pos.size() || tokens.size() != ner.size())
        throw std::invalid_argument("make_gen_context: feature length mismatch");
    GenContext ctx;
    ctx.tokens = tokens;
    ctx.pos = pos;
    ctx.ner = ner;
    ctx.aspect = aspect;
    ctx.ids.reserve(tokens.size());
    ctx.ext_ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        const int id = vocab.encode(t);
        ctx.ids.push_back(id);
        if (id != Vocab::kUnk) {
            ctx.ext_ids.push_back(id);
            continue;
        }
        int slot = -1;
        for (std::size_t k = 0; k < ctx.oov_tokens.size(); ++k)
            if (ctx.oov_tokens[k] == t) {
                slot = static_cast<int>(k);
                break;
            }
        if (slot < 0) {
            slot = static_cast<int>(ctx.oov_tokens.size());
            ctx.oov_tokens.push_back(t);
        }
        ctx.ext_ids.push_back(vocab.size() + slot);
    }
    return ctx;
}

std::vector<int> encode_targets(const std::vector<std::string>& q_tokens, const Vocab& vocab,
                                const GenContext& ctx) {
    std::vector<int> out;
    out.reserve(q_tokens.size());
    for (const auto& t : q_tokens) {
        int id = vocab.encode(t);
        if (id == Vocab::kUnk) {
            for (std::size_t k = 0; k < ctx.oov_tokens.size(); ++k)
                if (ctx.oov_tokens[k] == t) {
                    id = vocab.size() + static_cast<int>(k);
                    break;
                }
        }
        out.push_back(id);
    }
    return out;
}

Mat encode_review(const GenContext& ctx, const GeneratorParams& p, const EmbeddingTable& emb,
                  bool use_aspect) {
    return encode_fwd(ctx, p, emb, use_aspect).Hg;
}

EncodedReview encode_with_init(const GenContext& ctx, const GeneratorParams& p,
                               const EmbeddingTable& emb, bool use_aspect) {
    EncTrace t = encode_fwd(ctx, p, emb, use_aspect);
    return {std::move(t.Hg), std::move(t.init)};
}

Vec decode_step(DecState& state, int prev_id, const Mat& Hg, const GenContext& ctx,
                const GeneratorParams& p, const EmbeddingTable& emb, bool use_aspect) {
    DecStepTrace t;
    dec_step_fwd(t, state, prev_id, Hg, ctx, p, emb, use_aspect);
    state.s = t.lstm.h;
    state.c = t.lstm.c;
    return t.p_mix;
}

double log_perplexity(const std::vector<std::string>& q_tokens, const GenContext& ctx,
                      const Vocab& vocab, const GeneratorParams& p, const EmbeddingTable& emb,
                      bool use_aspect) {
    const auto toks = trim_pads(q_tokens);
    if (toks.empty()) throw std::invalid_argument("log_perplexity: empty question");
    const auto targets = encode_targets(toks, vocab, ctx);
    return teacher_forced(ctx, targets, p, emb, use_aspect, nullptr, 0.0);
}

GenerationResult generate(const GenContext& ctx, const Vocab& vocab, const GeneratorParams& p,
                          const EmbeddingTable& emb, DecodeMode mode, int beam_size,
                          int max_len, bool use_aspect) {
    if (max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");
    const int width = mode == DecodeMode::Greedy ? 1 : std::max(1, beam_size);
    EncTrace enc = encode_fwd(ctx, p, emb, use_aspect);
    const int n_tokens = p.vocab_size + static_cast<int>(ctx.oov_tokens.size());

    std::vector<DecState> states{enc.init};
    std::deque<Vec> dists;
    auto stepfn = [&](int state, int token) -> BeamStep {
        DecState st = states[state];
        Vec pm = decode_step(st, token, enc.Hg, ctx, p, emb, use_aspect);
        states.push_back(std::move(st));
        Vec lp(pm.size());
        for (std::size_t i = 0; i < pm.size(); ++i)
            lp[i] = std::log(std::max(pm[i], kProbFloor));
        dists.push_back(std::move(lp));
        return {static_cast<int>(states.size()) - 1, &dists.back()};
    };
    const std::vector<int> banned = {Vocab::kPad, Vocab::kBos};
    const BeamHyp best =
        beam_decode(stepfn, 0, Vocab::kBos, Vocab::kEos, n_tokens, banned, width, max_len);

    GenerationResult res;
    res.token_ids = best.tokens;
    // replay the winner for the per-step mixture probabilities
    DecState st = enc.init;
    int prev = Vocab::kBos;
    double logp = 0.0;
    for (int id : res.token_ids) {
        Vec pm = decode_step(st, prev, enc.Hg, ctx, p, emb, use_aspect);
        const double prob = std::max(pm[id], kProbFloor);
        res.step_probs.push_back(prob);
        logp += std::log(prob);
        prev = id;
    }
    res.score = res.token_ids.empty() ? 0.0 : logp / static_cast<double>(res.token_ids.size());
    res.tokens.reserve(res.token_ids.size());
    for (int id : res.token_ids)
        res.tokens.push_back(id >= p.vocab_size ? ctx.oov_tokens[id - p.vocab_size]
                                                : vocab.decode(id));
    return res;
}

double generator_batch_nll(const std::vector<GenInstance>& batch, const Vocab& vocab,
                           const GeneratorParams& p, const EmbeddingTable& emb,
                           bool use_aspect, GeneratorParams* grads) {
    if (batch.empty()) return 0.0;
    double total = 0.0;
    const double w = 1.0 / static_cast<double>(batch.size());
    for (const GenInstance& inst : batch) {
        const auto toks = trim_pads(*inst.q_tokens);
        if (toks.empty()) throw std::invalid_argument("generator: empty question");
        auto targets = encode_targets(toks, vocab, *inst.ctx);
        targets.push_back(Vocab::kEos);
        total += w * teacher_forced(*inst.ctx, targets, p, emb, use_aspect, grads, w);
    }
    return total;
}

double generator_update(const std::vector<GenInstance>& batch, const Vocab& vocab,
                        GeneratorParams& p, const EmbeddingTable& emb, const RunConfig& cfg,
                        Adam& opt) {
    if (batch.empty()) return 0.0;
    GeneratorParams grads = GeneratorParams::zeros_like(p);
    const double nll = generator_batch_nll(batch, vocab, p, emb, cfg.use_aspect, &grads);
    opt.step(p.param_refs(), grads.param_refs());
    return nll;
}

BeamHyp beam_decode(const BeamStepFn& step, int initial_state, int bos, int eos, int n_tokens,
                    const std::vector<int>& banned, int beam_size, int max_len) {
    struct Live {
        std::vector<int> tokens;
        double logp = 0;
        int state = 0;
        int last = 0;
    };
    std::vector<Live> live{{{}, 0.0, initial_state, bos}};
    std::vector<BeamHyp> finished;

    auto is_banned = [&](int tok) {
        return std::find(banned.begin(), banned.end(), tok) != banned.end();
    };

    for (int len = 1; len <= max_len && !live.empty(); ++len) {
        struct Cand {
            double logp;
            int hyp;
            int tok;
            int state;
        };
        std::vector<Cand> cands;
        for (std::size_t hi = 0; hi < live.size(); ++hi) {
            const BeamStep bs = step(live[hi].state, live[hi].last);
            const Vec& lp = *bs.log_probs;
            std::vector<int> idx(n_tokens);
            std::iota(idx.begin(), idx.end(), 0);
            const int keep = std::min(beam_size + static_cast<int>(banned.size()), n_tokens);
            std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(), [&](int a, int b) {
                if (lp[a] != lp[b]) return lp[a] > lp[b];
                return a < b;
            });
            int taken = 0;
            for (int k = 0; k < keep && taken < beam_size; ++k) {
                const int tok = idx[k];
                if (is_banned(tok)) continue;
                cands.push_back(
                    {live[hi].logp + lp[tok], static_cast<int>(hi), tok, bs.next_state});
                ++taken;
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            if (a.hyp != b.hyp) return a.hyp < b.hyp;
            return a.tok < b.tok;
        });
        // the beam_size best candidates advance; EOS ones retire
        std::vector<Live> next;
        int used = 0;
        for (const Cand& c : cands) {
            if (used >= beam_size) break;
            ++used;
            std::vector<int> toks = live[c.hyp].tokens;
            toks.push_back(c.tok);
            if (c.tok == eos) {
                BeamHyp h;
                h.tokens = std::move(toks);
                h.log_prob = c.logp;
                h.norm_score = c.logp / static_cast<double>(h.tokens.size());
                finished.push_back(std::move(h));
            } else {
                next.push_back({std::move(toks), c.logp, c.state, c.tok});
            }
        }
        live = std::move(next);
        if (static_cast<int>(finished.size()) >= beam_size) break;
    }
    for (const Live& l : live) {
        if (l.tokens.empty()) continue;
        BeamHyp h;
        h.tokens = l.tokens;
        h.log_prob = l.logp;
        h.norm_score = l.logp / static_cast<double>(h.tokens.size());
        finished.push_back(std::move(h));
    }
    if (finished.empty()) return {};
    std::stable_sort(finished.begin(), finished.end(), [](const BeamHyp& a, const BeamHyp& b) {
        if (a.norm_score != b.norm_score) return a.norm_score > b.norm_score;
        return a.tokens < b.tokens;
    });
    return finished.front();
}

} // namespace aita
