#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aita/checkpoint.hpp"
#include "aita/config.hpp"
#include "aita/corpus.hpp"
#include "aita/eval.hpp"
#include "aita/generator.hpp"
#include "aita/loop.hpp"
#include "aita/ranker.hpp"

namespace {

using namespace aita;

RunConfig assemble_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) load_config_file(config_path, cfg);
    apply_env_seed(cfg);
    for (const auto& kv : overrides) apply_config_override(kv, cfg);
    cfg.validate();
    return cfg;
}

void check_hash(const std::string& what, const std::string& artifact_hash,
                const std::string& expected, bool force) {
    if (artifact_hash == expected) return;
    if (force) {
        std::cerr << "warning: " << what << " config hash " << artifact_hash
                  << " does not match " << expected << " (continuing under --force)\n";
        return;
    }
    throw std::runtime_error(what + " was produced under config hash " + artifact_hash +
                             " but the current config hashes to " + expected +
                             "; pass --force to override");
}

std::string join_tokens(const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) out += ' ';
        out += toks[i];
    }
    return out;
}

std::string render_question(const GenerationResult& res) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < res.tokens.size(); ++i) {
        const int id = res.token_ids[i];
        if (id == Vocab::kEos || id == Vocab::kPad || id == Vocab::kBos) continue;
        kept.push_back(res.tokens[i]);
    }
    return join_tokens(kept);
}

int cmd_ingest(const std::string& qa_path, const std::string& reviews_path,
               const std::string& out, const std::string& config_path,
               const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    const Corpus corpus = build_corpus(qa_path, reviews_path, cfg);
    save_corpus(corpus, out);
    std::cout << "#q=" << corpus.qa.size() << " #a=" << corpus.qa.size()
              << " #s=" << corpus.reviews.size() << " vocab=" << corpus.vocab.size()
              << " skipped_qa=" << corpus.qa_stats.skipped
              << " skipped_reviews=" << corpus.review_stats.skipped << "\n";
    std::cout << "corpus written to " << out << " (config " << corpus.cfg_hash << ")\n";
    return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& out,
              const std::string& config_path, const std::vector<std::string>& overrides,
              bool force) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    const Corpus corpus = load_corpus(corpus_path);
    check_hash("corpus " + corpus_path, corpus.cfg_hash, config_hash(cfg), force);
    std::filesystem::create_directories(out);
    {
        std::ofstream echo(out + "/config.txt", std::ios::trunc);
        echo << render_config(cfg);
    }
    const RunResult res = run_aita(corpus, cfg, out);
    for (const auto& row : res.log)
        std::cout << "epoch " << row.epoch << ": n_qa=" << row.n_qa << " n_qr=" << row.n_qr
                  << " mean_reward=" << row.mean_reward
                  << " mean_train_nll=" << row.mean_train_nll << "\n";
    std::cout << "run directory: " << out << "\n";
    return 0;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& reviews_path,
                 const std::string& out, int beam, const std::string& config_path,
                 bool force) {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    if (!config_path.empty()) {
        RunConfig given;
        load_config_file(config_path, given);
        given.validate();
        check_hash("checkpoint " + checkpoint_path, ck.cfg_hash, config_hash(given), force);
    }
    RunConfig cfg = ck.cfg;
    if (beam > 0) cfg.beam_size = beam;

    IngestStats stats;
    const auto reviews = ingest_reviews(reviews_path, cfg, stats);
    std::ofstream outf(out, std::ios::trunc);
    if (!outf) throw std::runtime_error("cannot write " + out);
    const DecodeMode mode = cfg.beam_size > 1 ? DecodeMode::Beam : DecodeMode::Greedy;
    for (const auto& r : reviews) {
        const std::vector<int> ids = ck.vocab.encode(r.tokens);
        const AspectInfo aspect = cfg.use_aspect
                                      ? ranker_aspects(ids, ck.ranker, ck.emb)
                                      : uniform_aspect(static_cast<int>(r.tokens.size()),
                                                       cfg.aspect_dim);
        const GenContext ctx =
            make_gen_context(r.tokens, r.pos_tags, r.ner_bio, aspect, ck.vocab);
        const GenerationResult res = generate(ctx, ck.vocab, ck.generator, ck.emb, mode,
                                              cfg.beam_size, cfg.max_gen_len, cfg.use_aspect);
        outf << nlohmann::json{{"product_id", r.product_id},
                               {"review_id", r.review_id},
                               {"sent_idx", r.sent_idx},
                               {"review_sentence", join_tokens(r.tokens)},
                               {"generated_question", render_question(res)},
                               {"score", res.score},
                               {"config_hash", ck.cfg_hash}}
                    .dump()
             << "\n";
    }
    std::cout << reviews.size() << " questions written to " << out << "\n";
    return 0;
}

int cmd_rank(const std::string& checkpoint_path, const std::string& corpus_path, int topk,
             const std::string& out, bool force) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const Corpus corpus = load_corpus(corpus_path);
    check_hash("corpus " + corpus_path, corpus.cfg_hash, ck.cfg_hash, force);

    std::map<std::string, std::vector<const ReviewSentence*>> by_product;
    for (const auto& r : corpus.reviews) by_product[r.product_id].push_back(&r);

    std::ofstream outf(out, std::ios::trunc);
    if (!outf) throw std::runtime_error("cannot write " + out);
    long written = 0;
    for (const auto& qa : corpus.qa) {
        auto it = by_product.find(qa.product_id);
        if (it == by_product.end()) continue;
        const auto ranked = rank_reviews(qa, it->second, ck.ranker, ck.emb, ck.vocab, ck.cfg);
        nlohmann::json cands = nlohmann::json::array();
        for (int i = 0; i < std::min<int>(topk, static_cast<int>(ranked.size())); ++i)
            cands.push_back({{"review_id", ranked[i].review->review_id},
                             {"sent_idx", ranked[i].review->sent_idx},
                             {"score", ranked[i].score},
                             {"text", join_tokens(ranked[i].review->tokens)}});
        outf << nlohmann::json{{"product_id", qa.product_id},
                               {"question_id", qa.question_id},
                               {"question", join_tokens(qa.q_tokens)},
                               {"config_hash", ck.cfg_hash},
                               {"top", cands}}
                    .dump()
             << "\n";
        ++written;
    }
    std::cout << written << " questions ranked into " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& ref, const std::string& out) {
    const MetricReport report = evaluate(pred, ref);
    if (!out.empty()) {
        std::ofstream outf(out, std::ios::trunc);
        outf << report_to_json(report).dump(2) << "\n";
    }
    std::cout << "BLEU1=" << report.bleu1_mean << " BLEU4=" << report.bleu4_mean
              << " METEOR=" << report.meteor_mean << " ROUGE_L=" << report.rouge_mean
              << " n=" << report.count << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"review question generation via adaptive instance transfer and augmentation"};
    app.require_subcommand(1);

    std::string qa_path, reviews_path, corpus_path, checkpoint_path, config_path;
    std::string pred_path, ref_path, out_path;
    std::vector<std::string> overrides;
    int beam = 0, topk = 5;
    bool force = false;

    auto* ingest = app.add_subcommand("ingest", "build a corpus archive from raw QA/review files");
    ingest->add_option("--qa", qa_path, "line-delimited QA json file")->required();
    ingest->add_option("--reviews", reviews_path, "line-delimited review json file")->required();
    ingest->add_option("--out", out_path, "corpus archive to write")->required();
    ingest->add_option("--config", config_path, "key=value config file");
    ingest->add_option("--set", overrides, "config override key=value (repeatable)");

    auto* train = app.add_subcommand("train", "run the iterative training loop");
    train->add_option("--corpus", corpus_path, "corpus archive")->required();
    train->add_option("--out", out_path, "run directory")->required();
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--set", overrides, "config override key=value (repeatable)");
    train->add_flag("--force", force, "accept mixed config hashes");

    auto* gen = app.add_subcommand("generate", "generate one question per review sentence");
    gen->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    gen->add_option("--reviews", reviews_path, "line-delimited review json file")->required();
    gen->add_option("--out", out_path, "output jsonl")->required();
    gen->add_option("--beam", beam, "beam size override (1 = greedy)");
    gen->add_option("--config", config_path, "config file to cross-check the checkpoint hash");
    gen->add_flag("--force", force, "accept mixed config hashes");

    auto* rank = app.add_subcommand("rank", "debug: dump the top-k ranked reviews per question");
    rank->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    rank->add_option("--corpus", corpus_path, "corpus archive")->required();
    rank->add_option("--topk", topk, "how many reviews per question");
    rank->add_option("--out", out_path, "output jsonl")->required();
    rank->add_flag("--force", force, "accept mixed config hashes");

    auto* ev = app.add_subcommand("eval", "score predictions against references");
    ev->add_option("--pred", pred_path, "prediction jsonl")->required();
    ev->add_option("--ref", ref_path, "reference jsonl")->required();
    ev->add_option("--out", out_path, "metrics report json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(ingest))
            return cmd_ingest(qa_path, reviews_path, out_path, config_path, overrides);
        if (app.got_subcommand(train))
            return cmd_train(corpus_path, out_path, config_path, overrides, force);
        if (app.got_subcommand(gen))
            return cmd_generate(checkpoint_path, reviews_path, out_path, beam, config_path,
                                force);
        if (app.got_subcommand(rank))
            return cmd_rank(checkpoint_path, corpus_path, topk, out_path, force);
        if (app.got_subcommand(ev)) return cmd_eval(pred_path, ref_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
