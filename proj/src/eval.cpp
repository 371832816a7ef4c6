#include "aita/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace aita {

namespace {

std::map<std::string, int> ngram_counts(const TokenSeq& toks, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            key += toks[i + k];
            key += '\x1f';
        }
        ++counts[key];
    }
    return counts;
}

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= m; ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

bool suffix(const std::string& s, const char* suf) {
    const std::size_t n = std::strlen(suf);
    return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

} // namespace

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n) {
    if (candidate.empty()) throw std::invalid_argument("bleu: empty candidate");
    if (references.empty()) throw std::invalid_argument("bleu: no references");
    const long cand_len = static_cast<long>(candidate.size());

    // closest reference length, ties toward the shorter
    long ref_len = static_cast<long>(references[0].size());
    for (const auto& r : references) {
        const long rl = static_cast<long>(r.size());
        if (std::abs(rl - cand_len) < std::abs(ref_len - cand_len) ||
            (std::abs(rl - cand_len) == std::abs(ref_len - cand_len) && rl < ref_len))
            ref_len = rl;
    }

    double log_prec_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        const auto cand_counts = ngram_counts(candidate, order);
        long total = 0, clipped = 0;
        for (const auto& [key, c] : cand_counts) total += c;
        for (const auto& [key, c] : cand_counts) {
            int best = 0;
            for (const auto& r : references) {
                const auto rc = ngram_counts(r, order);
                auto it = rc.find(key);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            clipped += std::min<long>(c, best);
        }
        double p;
        if (order == 1) {
            p = total > 0 ? static_cast<double>(clipped) / total : 0.0;
            if (p == 0.0) return 0.0;
        } else if (clipped == 0) {
            p = 1.0 / (total + 1.0); // add-1 smoothing on zero counts
        } else {
            p = static_cast<double>(clipped) / total;
        }
        log_prec_sum += std::log(p) / n;
    }
    const double bp = cand_len < ref_len
                          ? std::exp(1.0 - static_cast<double>(ref_len) / cand_len)
                          : 1.0;
    return bp * std::exp(log_prec_sum);
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("rouge_l: empty input");
    const int lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / candidate.size();
    const double r = static_cast<double>(lcs) / reference.size();
    const double beta2 = 1.2 * 1.2;
    return (1.0 + beta2) * p * r / (r + beta2 * p);
}

std::string light_stem(const std::string& word) {
    std::string w = word;
    if (suffix(w, "ing") && w.size() > 5)
        w.resize(w.size() - 3);
    else if (suffix(w, "ed") && w.size() > 4)
        w.resize(w.size() - 2);
    else if (suffix(w, "ly") && w.size() > 4)
        w.resize(w.size() - 2);
    else if (suffix(w, "es") && w.size() > 4)
        w.resize(w.size() - 2);
    else if (suffix(w, "s") && !suffix(w, "ss") && w.size() > 3)
        w.resize(w.size() - 1);
    return w;
}

double meteor_base(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("meteor: empty input");
    const int nc = static_cast<int>(candidate.size());
    const int nr = static_cast<int>(reference.size());
    std::vector<int> match(nc, -1);     // candidate position -> reference position
    std::vector<bool> ref_used(nr, false);

    // stage 1: exact matches, left to right, earliest free reference slot
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nr; ++j) {
            if (ref_used[j] || candidate[i] != reference[j]) continue;
            match[i] = j;
            ref_used[j] = true;
            break;
        }
    // stage 2: stem matches on what is left
    for (int i = 0; i < nc; ++i) {
        if (match[i] >= 0) continue;
        const std::string cs = light_stem(candidate[i]);
        for (int j = 0; j < nr; ++j) {
            if (ref_used[j] || cs != light_stem(reference[j])) continue;
            match[i] = j;
            ref_used[j] = true;
            break;
        }
    }

    int matches = 0;
    for (int i = 0; i < nc; ++i)
        if (match[i] >= 0) ++matches;
    if (matches == 0) return 0.0;

    const double p = static_cast<double>(matches) / nc;
    const double r = static_cast<double>(matches) / nr;
    const double alpha = 0.9;
    const double f = p * r / (alpha * p + (1.0 - alpha) * r);

    // chunks: maximal runs adjacent in both sequences
    int chunks = 0;
    int prev_ref = -2;
    for (int i = 0; i < nc; ++i) {
        if (match[i] < 0) {
            prev_ref = -2;
            continue;
        }
        if (match[i] != prev_ref + 1) ++chunks;
        prev_ref = match[i];
    }
    const double frag = static_cast<double>(chunks) / matches;
    const double penalty = 0.5 * frag * frag * frag;
    return f * (1.0 - penalty);
}

namespace {

struct PredRecord {
    std::string key;
    TokenSeq tokens;
};

std::string record_key(const nlohmann::json& j) {
    if (j.contains("key") && j.at("key").is_string()) return j.at("key").get<std::string>();
    if (j.contains("review_id")) {
        return j.at("product_id").get<std::string>() + "|" +
               j.at("review_id").get<std::string>() + "#" +
               std::to_string(j.value("sent_idx", 0));
    }
    return j.at("product_id").get<std::string>() + "|" +
           j.at("question_id").get<std::string>();
}

TokenSeq record_question(const nlohmann::json& j) {
    std::string text;
    if (j.contains("generated_question"))
        text = j.at("generated_question").get<std::string>();
    else if (j.contains("question"))
        text = j.at("question").get<std::string>();
    else
        throw std::runtime_error("record has neither generated_question nor question");
    TokenSeq toks;
    std::istringstream ss(text);
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
}

} // namespace

MetricReport evaluate(const std::string& pred_path, const std::string& ref_path) {
    auto read_file = [](const std::string& path, std::string* cfg_hash) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open: " + path);
        std::vector<std::pair<std::string, TokenSeq>> out;
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const std::exception& e) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (cfg_hash && cfg_hash->empty() && j.contains("config_hash"))
                *cfg_hash = j.at("config_hash").get<std::string>();
            out.emplace_back(record_key(j), record_question(j));
        }
        return out;
    };

    MetricReport report;
    const auto preds = read_file(pred_path, &report.config_hash);
    const auto refs_flat = read_file(ref_path, nullptr);
    std::map<std::string, std::vector<TokenSeq>> refs;
    for (const auto& [key, toks] : refs_flat) refs[key].push_back(toks);

    std::map<std::string, TokenSeq> pred_map;
    std::vector<std::string> dup_or_missing;
    for (const auto& [key, toks] : preds) {
        if (!pred_map.emplace(key, toks).second) dup_or_missing.push_back("duplicate " + key);
    }
    for (const auto& [key, toks] : pred_map)
        if (refs.find(key) == refs.end()) dup_or_missing.push_back("no reference for " + key);
    for (const auto& [key, v] : refs)
        if (pred_map.find(key) == pred_map.end())
            dup_or_missing.push_back("no prediction for " + key);
    if (!dup_or_missing.empty() || pred_map.empty()) {
        std::string msg = "evaluate: prediction/reference alignment failed:";
        for (std::size_t i = 0; i < dup_or_missing.size() && i < 20; ++i)
            msg += "\n  " + dup_or_missing[i];
        if (pred_map.empty()) msg += "\n  (no predictions)";
        throw std::runtime_error(msg);
    }

    const int n = static_cast<int>(pred_map.size());
    std::vector<ExampleScores> ex(n);
    std::vector<std::pair<const std::string*, const TokenSeq*>> items;
    items.reserve(n);
    for (const auto& [key, toks] : pred_map) items.emplace_back(&key, &toks);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        const auto& key = *items[i].first;
        const TokenSeq& cand = *items[i].second;
        const auto& rlist = refs.at(key);
        ExampleScores s;
        s.key = key;
        if (!cand.empty()) {
            s.bleu1 = bleu(cand, rlist, 1);
            s.bleu4 = bleu(cand, rlist, 4);
            for (const auto& r : rlist) {
                s.meteor = std::max(s.meteor, meteor_base(cand, r));
                s.rouge = std::max(s.rouge, rouge_l(cand, r));
            }
        }
        ex[i] = std::move(s);
    }
    report.examples = std::move(ex);
    report.count = n;
    for (const auto& s : report.examples) {
        report.bleu1_mean += s.bleu1;
        report.bleu4_mean += s.bleu4;
        report.meteor_mean += s.meteor;
        report.rouge_mean += s.rouge;
    }
    report.bleu1_mean /= n;
    report.bleu4_mean /= n;
    report.meteor_mean /= n;
    report.rouge_mean /= n;
    return report;
}

nlohmann::json report_to_json(const MetricReport& report) {
    nlohmann::json examples = nlohmann::json::array();
    for (const auto& s : report.examples)
        examples.push_back({{"key", s.key},
                            {"bleu1", s.bleu1},
                            {"bleu4", s.bleu4},
                            {"meteor", s.meteor},
                            {"rouge_l", s.rouge}});
    return {{"bleu1_mean", report.bleu1_mean},
            {"bleu4_mean", report.bleu4_mean},
            {"meteor_mean", report.meteor_mean},
            {"rouge_l_mean", report.rouge_mean},
            {"count", report.count},
            {"config_hash", report.config_hash.empty() ? "none" : report.config_hash},
            {"meteor_mode", "base: exact+stem matching, no synonym dictionary"},
            {"bleu_smoothing", "add-1 on zero counts for orders above 1"},
            {"examples", examples}};
}

} // namespace aita
