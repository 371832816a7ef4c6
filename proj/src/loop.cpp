#include "aita/loop.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "aita/checkpoint.hpp"
#include "aita/kernels.hpp"
#include "aita/rng.hpp"

namespace aita {

AspectInfo uniform_aspect(int n_tokens, int aspect_dim) {
    AspectInfo a;
    a.alphas.assign(n_tokens, 1.0 / n_tokens);
    a.p_alpha.assign(aspect_dim, 1.0 / aspect_dim);
    return a;
}

bool InstanceSet::add(TrainingInstance inst) {
    if (!keys_.insert({inst.question_id, inst.context_ref}).second) return false;
    (inst.source == InstanceSource::QA ? n_qa_ : n_qr_) += 1;
    items_.push_back(std::move(inst));
    return true;
}

void InstanceSet::remove_indices(std::vector<int> indices) {
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end())
        throw std::invalid_argument("remove_indices: duplicate index");
    for (auto it = indices.rbegin(); it != indices.rend(); ++it) {
        const TrainingInstance& inst = items_.at(*it);
        keys_.erase({inst.question_id, inst.context_ref});
        (inst.source == InstanceSource::QA ? n_qa_ : n_qr_) -= 1;
        items_.erase(items_.begin() + *it);
    }
}

RewardTable compute_rewards(const std::vector<QuestionGroup>& groups,
                            const GeneratorParams& gen, const Vocab& vocab,
                            const EmbeddingTable& emb, const RunConfig& cfg) {
    const int ng = static_cast<int>(groups.size());
    std::vector<std::vector<RewardEntry>> results(ng);
#pragma omp parallel for schedule(dynamic)
    for (int gi = 0; gi < ng; ++gi) {
        const QuestionGroup& g = groups[gi];
        const int nc = static_cast<int>(g.contexts.size());
        if (nc == 0) continue;
        std::vector<RewardEntry> ent(nc);
        for (int i = 0; i < nc; ++i)
            ent[i].raw = log_perplexity(*g.q_tokens, *g.contexts[i].ctx, vocab, gen, emb,
                                        cfg.use_aspect);
        if (cfg.reward_sign < 0) {
            Vec neg(nc);
            for (int i = 0; i < nc; ++i) neg[i] = -ent[i].raw;
            Vec r = kernels::softmax(neg);
            for (int i = 0; i < nc; ++i) ent[i].reward = r[i];
        } else {
            double sum = 0.0;
            for (int i = 0; i < nc; ++i) sum += ent[i].raw;
            for (int i = 0; i < nc; ++i)
                ent[i].reward = sum > 0.0 ? ent[i].raw / sum : 1.0 / nc;
        }
        results[gi] = std::move(ent);
    }
    RewardTable table;
    for (int gi = 0; gi < ng; ++gi) {
        const QuestionGroup& g = groups[gi];
        if (g.contexts.empty()) {
            std::cerr << "warning: question " << g.question_id
                      << " has no reward candidates, skipped\n";
            continue;
        }
        for (std::size_t i = 0; i < g.contexts.size(); ++i)
            table.entries[{g.question_id, g.contexts[i].context_ref}] = results[gi][i];
    }
    return table;
}

int adapt_remove(InstanceSet& S, const RewardTable& rewards, int mu, int reward_sign) {
    if (mu <= 0) return 0;
    struct Cand {
        double raw;
        const TrainingInstance* inst;
        int index;
    };
    std::vector<Cand> cands;
    const auto& items = S.items();
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
        if (items[i].source != InstanceSource::QA) continue;
        const RewardEntry* e = rewards.find(items[i].question_id, items[i].context_ref);
        if (!e)
            throw std::runtime_error("adapt_remove: no reward entry for QA instance " +
                                     items[i].question_id);
        cands.push_back({e->raw, &items[i], i});
    }
    // worst first: highest raw log ppl when low perplexity is favored
    std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
        if (a.raw != b.raw) return reward_sign < 0 ? a.raw > b.raw : a.raw < b.raw;
        if (a.inst->product_id != b.inst->product_id)
            return a.inst->product_id < b.inst->product_id;
        return a.inst->question_id < b.inst->question_id;
    });
    const int k = std::min<int>(mu, static_cast<int>(cands.size()));
    std::vector<int> doomed;
    doomed.reserve(k);
    for (int i = 0; i < k; ++i) doomed.push_back(cands[i].index);
    S.remove_indices(std::move(doomed));
    return k;
}

std::vector<int> select_augment(std::vector<ScoredPoolPair> scored, int mu) {
    std::sort(scored.begin(), scored.end(), [](const ScoredPoolPair& a, const ScoredPoolPair& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.product_id != b.product_id) return a.product_id < b.product_id;
        if (a.question_id != b.question_id) return a.question_id < b.question_id;
        if (a.review_id != b.review_id) return a.review_id < b.review_id;
        return a.sent_idx < b.sent_idx;
    });
    std::vector<int> picks;
    std::set<std::string> used_questions;
    for (const auto& s : scored) {
        if (static_cast<int>(picks.size()) >= mu) break;
        if (!used_questions.insert(s.question_id).second) continue;
        picks.push_back(s.pool_index);
    }
    return picks;
}

namespace {

std::string review_ref(const ReviewSentence& r) {
    return r.review_id + "#" + std::to_string(r.sent_idx);
}

} // namespace

int augment_add(InstanceSet& S, const RankerParams& ranker, const std::vector<PoolPair>& pool,
                int mu, const Corpus& corpus, const RunConfig& cfg) {
    if (mu <= 0) return 0;
    std::vector<int> eligible;
    for (int i = 0; i < static_cast<int>(pool.size()); ++i)
        if (!S.contains(pool[i].qa->question_id, review_ref(*pool[i].review)))
            eligible.push_back(i);
    if (eligible.empty()) {
        std::cerr << "warning: augment pool is empty, nothing added\n";
        return 0;
    }

    // encode each distinct qa and review once, then score the pairs
    std::map<const QAPair*, int> qa_slot;
    std::map<int, int> review_slot;
    for (int i : eligible) {
        qa_slot.emplace(pool[i].qa, static_cast<int>(qa_slot.size()));
        review_slot.emplace(pool[i].review_index, static_cast<int>(review_slot.size()));
    }
    std::vector<const QAPair*> qas(qa_slot.size());
    for (const auto& [qa, s] : qa_slot) qas[s] = qa;
    std::vector<int> reviews(review_slot.size());
    for (const auto& [ri, s] : review_slot) reviews[s] = ri;

    std::vector<Vec> qa_h(qas.size()), r_h(reviews.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(qas.size()); ++i) {
        const Mat H = ranker_encode(qa_concat_ids(*qas[i], corpus.vocab, cfg), RankerSide::QA,
                                    ranker, corpus.emb);
        qa_h[i] = global_attention(H, ranker.M).h_alpha;
    }
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(reviews.size()); ++i) {
        const Mat H = ranker_encode(corpus.vocab.encode(corpus.reviews[reviews[i]].tokens),
                                    RankerSide::Review, ranker, corpus.emb);
        r_h[i] = global_attention(H, ranker.M).h_alpha;
    }

    std::vector<ScoredPoolPair> scored(eligible.size());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < static_cast<int>(eligible.size()); ++k) {
        const PoolPair& pp = pool[eligible[k]];
        const double s =
            ranking_score(qa_h[qa_slot.at(pp.qa)], r_h[review_slot.at(pp.review_index)], ranker);
        scored[k] = {s,          pp.qa->product_id, pp.qa->question_id,
                     pp.review->review_id, pp.review->sent_idx, eligible[k]};
    }

    int added = 0;
    for (int pi : select_augment(std::move(scored), mu)) {
        const PoolPair& pp = pool[pi];
        TrainingInstance inst;
        inst.source = InstanceSource::QR;
        inst.product_id = pp.qa->product_id;
        inst.question_id = pp.qa->question_id;
        inst.context_ref = review_ref(*pp.review);
        inst.q_tokens = pp.qa->q_tokens;
        inst.ctx_index = pp.review_index;
        if (S.add(std::move(inst))) ++added;
    }
    return added;
}

namespace {

nlohmann::json log_row_json(const EpochLog& row) {
    return {{"epoch", row.epoch},
            {"n_qa", row.n_qa},
            {"n_qr", row.n_qr},
            {"mean_reward", row.mean_reward},
            {"mean_train_nll", row.mean_train_nll}};
}

} // namespace

RunResult run_aita(const Corpus& corpus, const RunConfig& cfg, const std::string& run_dir) {
    cfg.validate();
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
    RunResult res;
    {
        Rng rng(derive_seed(cfg.seed, "ranker_init"));
        res.ranker = RankerParams::init(cfg, rng);
    }
    {
        Rng rng(derive_seed(cfg.seed, "generator_init"));
        res.generator = GeneratorParams::init(cfg, corpus.vocab.size(), rng);
    }
    Adam opt_r(res.ranker.param_refs(), cfg.ranker_lr);
    Adam opt_g(res.generator.param_refs(), cfg.gen_lr);

    // context pools; instances address them by index
    res.answer_ctx.reserve(corpus.qa.size());
    for (const auto& qa : corpus.qa) {
        auto [pos, ner] = annotate(qa.a_tokens);
        res.answer_ctx.push_back(make_gen_context(
            qa.a_tokens, pos, ner,
            uniform_aspect(static_cast<int>(qa.a_tokens.size()), cfg.aspect_dim), corpus.vocab));
    }
    res.review_ctx.reserve(corpus.reviews.size());
    for (const auto& r : corpus.reviews)
        res.review_ctx.push_back(make_gen_context(
            r.tokens, r.pos_tags, r.ner_bio,
            uniform_aspect(static_cast<int>(r.tokens.size()), cfg.aspect_dim), corpus.vocab));

    for (std::size_t i = 0; i < corpus.qa.size(); ++i) {
        const QAPair& qa = corpus.qa[i];
        TrainingInstance inst;
        inst.source = InstanceSource::QA;
        inst.product_id = qa.product_id;
        inst.question_id = qa.question_id;
        inst.context_ref = qa.question_id;
        inst.q_tokens = qa.q_tokens;
        inst.ctx_index = static_cast<int>(i);
        res.S.add(std::move(inst));
    }
    const int mu = static_cast<int>(std::llround(cfg.mu_fraction * res.S.size()));

    // product indexes, the (qa, r) pool, and the reward groups are fixed
    std::map<std::string, std::vector<int>> product_reviews;
    for (std::size_t j = 0; j < corpus.reviews.size(); ++j)
        product_reviews[corpus.reviews[j].product_id].push_back(static_cast<int>(j));
    std::vector<PoolPair> pool;
    for (const auto& qa : corpus.qa) {
        auto it = product_reviews.find(qa.product_id);
        if (it == product_reviews.end()) continue;
        for (int j : it->second) pool.push_back({&qa, &corpus.reviews[j], j});
    }
    std::vector<QuestionGroup> groups(corpus.qa.size());
    for (std::size_t i = 0; i < corpus.qa.size(); ++i) {
        QuestionGroup& g = groups[i];
        g.question_id = corpus.qa[i].question_id;
        g.product_id = corpus.qa[i].product_id;
        g.q_tokens = &corpus.qa[i].q_tokens;
        auto it = product_reviews.find(g.product_id);
        if (it != product_reviews.end())
            for (int j : it->second)
                g.contexts.push_back({review_ref(corpus.reviews[j]), &res.review_ctx[j]});
        g.contexts.push_back({g.question_id, &res.answer_ctx[i]});
    }
    // static ranker-side inputs
    std::vector<std::vector<int>> review_ids(corpus.reviews.size());
    for (std::size_t j = 0; j < corpus.reviews.size(); ++j)
        review_ids[j] = corpus.vocab.encode(corpus.reviews[j].tokens);
    std::vector<std::vector<int>> qa_ids(corpus.qa.size());
    for (std::size_t i = 0; i < corpus.qa.size(); ++i)
        qa_ids[i] = qa_concat_ids(corpus.qa[i], corpus.vocab, cfg);

    const bool emit = !run_dir.empty();
    if (emit) {
        std::filesystem::create_directories(run_dir);
        save_checkpoint(run_dir + "/checkpoint_epoch_0.aita", cfg, 0, res.ranker, res.generator,
                        corpus.vocab, corpus.emb);
        std::ofstream(run_dir + "/log.jsonl", std::ios::trunc);
    }

    auto instance_view = [&](const TrainingInstance& inst) -> GenInstance {
        const GenContext* ctx = inst.source == InstanceSource::QA
                                    ? &res.answer_ctx[inst.ctx_index]
                                    : &res.review_ctx[inst.ctx_index];
        return {ctx, &inst.q_tokens};
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        try {
            // 1. train the generator on S
            double nll_sum = 0;
            long nll_n = 0;
            for (int pass = 1; pass <= cfg.gen_passes; ++pass) {
                std::vector<int> order(res.S.size());
                std::iota(order.begin(), order.end(), 0);
                Rng shuffle_rng(derive_seed(cfg.seed, "gen_shuffle",
                                            static_cast<uint64_t>(epoch) * 1000 + pass));
                shuffle_rng.shuffle(order);
                for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
                    std::vector<GenInstance> batch;
                    for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k)
                        batch.push_back(instance_view(res.S.items()[order[k]]));
                    const double nll =
                        generator_update(batch, corpus.vocab, res.generator, corpus.emb, cfg,
                                         opt_g);
                    nll_sum += nll * batch.size();
                    nll_n += static_cast<long>(batch.size());
                }
            }
            const double mean_nll = nll_n > 0 ? nll_sum / nll_n : 0.0;

            // 2. rewards from the current generator
            const RewardTable table =
                compute_rewards(groups, res.generator, corpus.vocab, corpus.emb, cfg);

            // 3. drop the worst QA instances
            adapt_remove(res.S, table, mu, cfg.reward_sign);

            // 4. train the ranker (review candidates only)
            std::vector<int> gorder;
            for (std::size_t i = 0; i < groups.size(); ++i) {
                auto it = product_reviews.find(groups[i].product_id);
                if (it != product_reviews.end() && !it->second.empty())
                    gorder.push_back(static_cast<int>(i));
            }
            Rng gshuf(derive_seed(cfg.seed, "ranker_shuffle", static_cast<uint64_t>(epoch)));
            gshuf.shuffle(gorder);
            double reward_sum = 0;
            long reward_n = 0;
            for (std::size_t b = 0; b < gorder.size(); b += cfg.batch_size) {
                std::vector<RankerGroup> batch;
                for (std::size_t k = b; k < std::min(gorder.size(), b + cfg.batch_size); ++k) {
                    const int gi = gorder[k];
                    auto it = product_reviews.find(groups[gi].product_id);
                    if (it == product_reviews.end() || it->second.empty()) continue;
                    RankerGroup rg;
                    rg.qa_ids = qa_ids[gi];
                    for (int j : it->second) {
                        rg.candidate_ids.push_back(review_ids[j]);
                        const RewardEntry* e =
                            table.find(groups[gi].question_id, review_ref(corpus.reviews[j]));
                        rg.rewards.push_back(e ? e->reward : 0.0);
                    }
                    batch.push_back(std::move(rg));
                }
                if (batch.empty()) continue;
                reward_sum +=
                    ranker_update(batch, res.ranker, corpus.emb, cfg, opt_r) * batch.size();
                reward_n += static_cast<long>(batch.size());
            }
            const double mean_reward = reward_n > 0 ? reward_sum / reward_n : 0.0;

            // 5. add the top-ranked fresh (q, r) pairs
            augment_add(res.S, res.ranker, pool, mu, corpus, cfg);

            // 6. refresh aspect features from the updated ranker
            const int na = static_cast<int>(res.answer_ctx.size());
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < na; ++i)
                res.answer_ctx[i].aspect =
                    ranker_aspects(res.answer_ctx[i].ids, res.ranker, corpus.emb);
            const int nr = static_cast<int>(res.review_ctx.size());
#pragma omp parallel for schedule(dynamic)
            for (int j = 0; j < nr; ++j)
                res.review_ctx[j].aspect =
                    ranker_aspects(res.review_ctx[j].ids, res.ranker, corpus.emb);

            res.log.push_back({epoch, res.S.n_qa(), res.S.n_qr(), mean_reward, mean_nll});
            if (emit) {
                std::ofstream log_out(run_dir + "/log.jsonl", std::ios::app);
                log_out << log_row_json(res.log.back()).dump() << "\n";
                save_checkpoint(run_dir + "/checkpoint_epoch_" + std::to_string(epoch) + ".aita",
                                cfg, epoch, res.ranker, res.generator, corpus.vocab, corpus.emb);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("epoch " + std::to_string(epoch) + " failed (" + e.what() +
                                     "); last completed checkpoint is intact");
        }
    }

    if (emit) {
        std::ofstream out(run_dir + "/instances.jsonl", std::ios::trunc);
        for (const auto& inst : res.S.items()) {
            out << nlohmann::json{{"source", inst.source == InstanceSource::QA ? "QA" : "QR"},
                                  {"product_id", inst.product_id},
                                  {"question_id", inst.question_id},
                                  {"context_ref", inst.context_ref},
                                  {"q_tokens", inst.q_tokens}}
                       .dump()
                << "\n";
        }
    }
    return res;
}

} // namespace aita
