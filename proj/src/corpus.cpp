#include "aita/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "aita/archive.hpp"
#include "aita/rng.hpp"

namespace aita {

namespace {

bool is_word_byte(unsigned char c) {
    // Non-ASCII bytes stay inside tokens so UTF-8 sequences survive.
    return std::isalnum(c) || c >= 0x80;
}

const std::set<std::string>& abbreviations() {
    static const std::set<std::string> abbr = {
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc",
        "ltd", "co", "corp", "fig", "al", "eg", "ie", "e.g", "i.e", "approx",
        "dept", "est", "a.m", "p.m", "u.s", "oz", "lb", "lbs", "ft"};
    return abbr;
}

std::string to_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> tokenize_impl(const std::string& text, bool lower) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur.push_back(lower ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else {
            if (!cur.empty()) {
                tokens.push_back(cur);
                cur.clear();
            }
            if (!std::isspace(c)) tokens.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

// Maximal run of letters and interior dots ending right before position i.
std::string word_before(const std::string& text, std::size_t i) {
    std::size_t b = i;
    while (b > 0) {
        unsigned char c = text[b - 1];
        if (std::isalpha(c) || c == '.') --b;
        else break;
    }
    std::string w = text.substr(b, i - b);
    while (!w.empty() && w.front() == '.') w.erase(w.begin());
    return to_lower(w);
}

const std::map<std::string, PosTag>& pos_lexicon() {
    static const std::map<std::string, PosTag> lex = {
        {"the", PosTag::DET}, {"a", PosTag::DET}, {"an", PosTag::DET},
        {"this", PosTag::DET}, {"that", PosTag::DET}, {"these", PosTag::DET},
        {"those", PosTag::DET}, {"some", PosTag::DET}, {"any", PosTag::DET},
        {"each", PosTag::DET}, {"every", PosTag::DET}, {"no", PosTag::DET},
        {"i", PosTag::PRON}, {"you", PosTag::PRON}, {"he", PosTag::PRON},
        {"she", PosTag::PRON}, {"it", PosTag::PRON}, {"we", PosTag::PRON},
        {"they", PosTag::PRON}, {"me", PosTag::PRON}, {"him", PosTag::PRON},
        {"her", PosTag::PRON}, {"us", PosTag::PRON}, {"them", PosTag::PRON},
        {"my", PosTag::PRON}, {"your", PosTag::PRON}, {"his", PosTag::PRON},
        {"its", PosTag::PRON}, {"our", PosTag::PRON}, {"their", PosTag::PRON},
        {"who", PosTag::PRON}, {"what", PosTag::PRON}, {"which", PosTag::PRON},
        {"something", PosTag::PRON}, {"anything", PosTag::PRON},
        {"is", PosTag::AUX}, {"am", PosTag::AUX}, {"are", PosTag::AUX},
        {"was", PosTag::AUX}, {"were", PosTag::AUX}, {"be", PosTag::AUX},
        {"been", PosTag::AUX}, {"being", PosTag::AUX}, {"do", PosTag::AUX},
        {"does", PosTag::AUX}, {"did", PosTag::AUX}, {"have", PosTag::AUX},
        {"has", PosTag::AUX}, {"had", PosTag::AUX}, {"can", PosTag::AUX},
        {"could", PosTag::AUX}, {"will", PosTag::AUX}, {"would", PosTag::AUX},
        {"shall", PosTag::AUX}, {"should", PosTag::AUX}, {"may", PosTag::AUX},
        {"might", PosTag::AUX}, {"must", PosTag::AUX},
        {"and", PosTag::CCONJ}, {"or", PosTag::CCONJ}, {"but", PosTag::CCONJ},
        {"nor", PosTag::CCONJ}, {"yet", PosTag::CCONJ},
        {"if", PosTag::SCONJ}, {"because", PosTag::SCONJ}, {"while", PosTag::SCONJ},
        {"although", PosTag::SCONJ}, {"though", PosTag::SCONJ}, {"since", PosTag::SCONJ},
        {"unless", PosTag::SCONJ}, {"whether", PosTag::SCONJ},
        {"in", PosTag::ADP}, {"on", PosTag::ADP}, {"at", PosTag::ADP},
        {"by", PosTag::ADP}, {"for", PosTag::ADP}, {"with", PosTag::ADP},
        {"about", PosTag::ADP}, {"against", PosTag::ADP}, {"between", PosTag::ADP},
        {"into", PosTag::ADP}, {"through", PosTag::ADP}, {"during", PosTag::ADP},
        {"before", PosTag::ADP}, {"after", PosTag::ADP}, {"above", PosTag::ADP},
        {"below", PosTag::ADP}, {"to", PosTag::ADP}, {"from", PosTag::ADP},
        {"up", PosTag::ADP}, {"down", PosTag::ADP}, {"of", PosTag::ADP},
        {"off", PosTag::ADP}, {"over", PosTag::ADP}, {"under", PosTag::ADP},
        {"not", PosTag::PART}, {"n't", PosTag::PART},
        {"very", PosTag::ADV}, {"really", PosTag::ADV}, {"quite", PosTag::ADV},
        {"too", PosTag::ADV}, {"also", PosTag::ADV}, {"just", PosTag::ADV},
        {"never", PosTag::ADV}, {"always", PosTag::ADV}, {"often", PosTag::ADV},
        {"still", PosTag::ADV}, {"again", PosTag::ADV}, {"there", PosTag::ADV},
        {"here", PosTag::ADV}, {"now", PosTag::ADV}, {"then", PosTag::ADV},
        {"when", PosTag::ADV}, {"where", PosTag::ADV}, {"how", PosTag::ADV},
        {"why", PosTag::ADV}, {"well", PosTag::ADV}, {"long", PosTag::ADV},
        {"yes", PosTag::INTJ}, {"oh", PosTag::INTJ}, {"wow", PosTag::INTJ},
        {"hey", PosTag::INTJ}, {"hello", PosTag::INTJ}, {"please", PosTag::INTJ},
        {"one", PosTag::NUM}, {"two", PosTag::NUM}, {"three", PosTag::NUM},
        {"four", PosTag::NUM}, {"five", PosTag::NUM}, {"six", PosTag::NUM},
        {"seven", PosTag::NUM}, {"eight", PosTag::NUM}, {"nine", PosTag::NUM},
        {"ten", PosTag::NUM},
    };
    return lex;
}

bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

PosTag pos_of(const std::string& token) {
    const unsigned char c0 = token.empty() ? ' ' : static_cast<unsigned char>(token[0]);
    if (!std::isalnum(c0) && c0 < 0x80) {
        static const std::string symbols = "$%+=<>^~|*&";
        return symbols.find(static_cast<char>(c0)) != std::string::npos ? PosTag::SYM
                                                                        : PosTag::PUNCT;
    }
    if (std::isdigit(c0)) return PosTag::NUM;
    const std::string low = to_lower(token);
    auto it = pos_lexicon().find(low);
    if (it != pos_lexicon().end()) return it->second;
    if (ends_with(low, "ly") && low.size() > 3) return PosTag::ADV;
    if ((ends_with(low, "ing") || ends_with(low, "ed")) && low.size() > 4) return PosTag::VERB;
    if ((ends_with(low, "ous") || ends_with(low, "ful") || ends_with(low, "able") ||
         ends_with(low, "ive")) && low.size() > 4)
        return PosTag::ADJ;
    if ((ends_with(low, "tion") || ends_with(low, "ness") || ends_with(low, "ment")) &&
        low.size() > 5)
        return PosTag::NOUN;
    if (std::isupper(c0)) return PosTag::PROPN;
    return PosTag::NOUN;
}

bool entity_like(const std::string& token) {
    if (token.empty()) return false;
    const unsigned char c0 = static_cast<unsigned char>(token[0]);
    return std::isupper(c0) || std::isdigit(c0);
}

nlohmann::json parse_json_line(const std::string& line) {
    return nlohmann::json::parse(line);
}

std::string require_string(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j.at(field).is_string())
        throw std::runtime_error(std::string("missing string field: ") + field);
    return j.at(field).get<std::string>();
}

void truncate_to(std::vector<std::string>& tokens, int n) {
    if (static_cast<int>(tokens.size()) > n) tokens.resize(n);
}

} // namespace

const char* pos_tag_name(PosTag t) {
    static const char* names[kNumPosTags] = {"ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET",
                                             "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
                                             "PUNCT", "SCONJ", "SYM", "VERB", "X"};
    return names[static_cast<int>(t)];
}

std::vector<std::string> tokenize(const std::string& text) { return tokenize_impl(text, true); }

std::vector<std::string> tokenize_cased(const std::string& text) {
    return tokenize_impl(text, false);
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i;
        while (end + 1 < n && (text[end + 1] == '.' || text[end + 1] == '!' || text[end + 1] == '?'))
            ++end;
        // boundary: whitespace then a non-lowercase character
        std::size_t j = end + 1;
        std::size_t ws = j;
        while (ws < n && std::isspace(static_cast<unsigned char>(text[ws]))) ++ws;
        const bool have_gap = ws > j;
        const bool next_ok = ws < n && !std::islower(static_cast<unsigned char>(text[ws]));
        bool boundary = have_gap && next_ok;
        if (boundary && c == '.' && end == i) {
            if (abbreviations().count(word_before(text, i)) > 0) boundary = false;
        }
        if (boundary) {
            sentences.push_back(text.substr(start, end + 1 - start));
            start = ws;
            i = ws - 1;
        } else {
            i = end;
        }
    }
    if (start < n) {
        const std::string rest = text.substr(start);
        if (rest.find_first_not_of(" \t\r\n") != std::string::npos) sentences.push_back(rest);
    }
    return sentences;
}

std::pair<std::vector<PosTag>, std::vector<NerTag>> annotate(
    const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw std::invalid_argument("annotate: empty token sequence");
    std::vector<PosTag> pos(tokens.size());
    std::vector<NerTag> ner(tokens.size());
    bool prev_entity = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        pos[i] = pos_of(tokens[i]);
        const bool ent = entity_like(tokens[i]);
        ner[i] = !ent ? NerTag::O : (prev_entity ? NerTag::I : NerTag::B);
        prev_entity = ent;
    }
    return {pos, ner};
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
    Vocab v;
    v.min_count = min_count;
    v.id_to_token = {"<pad>", "<unk>", "<bos>", "<eos>"};
    std::map<std::string, long> freq;
    long total = 0;
    for (const auto& seq : corpus) {
        for (const auto& t : seq) {
            ++freq[t];
            ++total;
        }
    }
    if (total == 0) throw std::runtime_error("build_vocab: empty corpus");
    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [tok, n] : freq) {
        if (n < min_count) continue;
        // data tokens that collide with the reserved strings stay OOV
        if (tok == "<pad>" || tok == "<unk>" || tok == "<bos>" || tok == "<eos>") continue;
        kept.emplace_back(tok, n);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [tok, n] : kept) v.id_to_token.push_back(tok);
    for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
    return v;
}

EmbeddingTable seed_embeddings(const Vocab& vocab, int dim, uint64_t seed) {
    EmbeddingTable t;
    t.dim = dim;
    t.data.resize(static_cast<std::size_t>(vocab.size()) * dim);
    Rng rng(derive_seed(seed, "embeddings"));
    for (float& f : t.data) f = static_cast<float>(rng.uniform(-0.1, 0.1));
    return t;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                               uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
    EmbeddingTable t = seed_embeddings(vocab, dim, seed);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<float> vals;
        vals.reserve(dim);
        float f;
        while (ss >> f) vals.push_back(f);
        if (static_cast<int>(vals.size()) != dim)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(dim) + " floats, got " +
                                     std::to_string(vals.size()));
        auto it = vocab.token_to_id.find(word);
        if (it == vocab.token_to_id.end()) continue;
        std::copy(vals.begin(), vals.end(), t.data.begin() + static_cast<std::size_t>(it->second) * dim);
    }
    return t;
}

std::vector<QAPair> ingest_qa(const std::string& path, const RunConfig& cfg, IngestStats& stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qa file: " + path);
    std::vector<QAPair> out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ++stats.records;
        try {
            auto j = parse_json_line(line);
            QAPair qa;
            qa.product_id = require_string(j, "product_id");
            if (qa.product_id.empty()) throw std::runtime_error("empty product_id");
            qa.q_tokens = tokenize(require_string(j, "question"));
            qa.a_tokens = tokenize(require_string(j, "answer"));
            if (qa.q_tokens.empty() || qa.a_tokens.empty())
                throw std::runtime_error("empty question or answer");
            if (j.contains("question_id") && j.at("question_id").is_string())
                qa.question_id = j.at("question_id").get<std::string>();
            else
                qa.question_id = qa.product_id + "#" + std::to_string(lineno);
            if (!seen.insert({qa.product_id, qa.question_id}).second)
                throw std::runtime_error("duplicate (product_id, question_id)");
            truncate_to(qa.q_tokens, cfg.max_q_len);
            truncate_to(qa.a_tokens, cfg.max_r_len);
            out.push_back(std::move(qa));
        } catch (const std::exception& e) {
            ++stats.skipped;
            std::cerr << "warning: " << path << ":" << lineno << ": skipped (" << e.what()
                      << ")\n";
        }
    }
    return out;
}

std::vector<ReviewSentence> ingest_reviews(const std::string& path, const RunConfig& cfg,
                                           IngestStats& stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reviews file: " + path);
    std::vector<ReviewSentence> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ++stats.records;
        try {
            auto j = parse_json_line(line);
            const std::string product_id = require_string(j, "product_id");
            const std::string review_id = require_string(j, "review_id");
            const std::string text = require_string(j, "text");
            if (product_id.empty() || review_id.empty()) throw std::runtime_error("empty id");
            int sent_idx = 0;
            bool any = false;
            for (const auto& sent : split_sentences(text)) {
                auto cased = tokenize_cased(sent);
                if (cased.empty()) continue;
                auto [pos, ner] = annotate(cased);
                ReviewSentence rs;
                rs.product_id = product_id;
                rs.review_id = review_id;
                rs.sent_idx = sent_idx++;
                rs.tokens.reserve(cased.size());
                for (const auto& t : cased) rs.tokens.push_back(to_lower(t));
                rs.pos_tags = std::move(pos);
                rs.ner_bio = std::move(ner);
                if (static_cast<int>(rs.tokens.size()) > cfg.max_r_len) {
                    rs.tokens.resize(cfg.max_r_len);
                    rs.pos_tags.resize(cfg.max_r_len);
                    rs.ner_bio.resize(cfg.max_r_len);
                }
                out.push_back(std::move(rs));
                any = true;
            }
            if (!any) {
                ++stats.skipped;
                std::cerr << "warning: " << path << ":" << lineno << ": skipped (no sentences)\n";
            }
        } catch (const std::exception& e) {
            ++stats.skipped;
            std::cerr << "warning: " << path << ":" << lineno << ": skipped (" << e.what()
                      << ")\n";
        }
    }
    return out;
}

Corpus build_corpus(const std::string& qa_path, const std::string& reviews_path,
                    const RunConfig& cfg) {
    Corpus c;
    c.qa = ingest_qa(qa_path, cfg, c.qa_stats);
    c.reviews = ingest_reviews(reviews_path, cfg, c.review_stats);
    std::vector<std::vector<std::string>> seqs;
    seqs.reserve(c.qa.size() * 2 + c.reviews.size());
    for (const auto& qa : c.qa) {
        seqs.push_back(qa.q_tokens);
        seqs.push_back(qa.a_tokens);
    }
    for (const auto& r : c.reviews) seqs.push_back(r.tokens);
    c.vocab = build_vocab(seqs, cfg.min_count);
    c.emb = cfg.embeddings_path.empty()
                ? seed_embeddings(c.vocab, cfg.embedding_dim, cfg.seed)
                : load_embeddings(cfg.embeddings_path, c.vocab, cfg.embedding_dim, cfg.seed);
    c.cfg_hash = config_hash(cfg);
    return c;
}

namespace {

nlohmann::json qa_to_json(const QAPair& qa) {
    return {{"product_id", qa.product_id},
            {"question_id", qa.question_id},
            {"q_tokens", qa.q_tokens},
            {"a_tokens", qa.a_tokens}};
}

nlohmann::json review_to_json(const ReviewSentence& r) {
    std::vector<int> pos, ner;
    pos.reserve(r.pos_tags.size());
    ner.reserve(r.ner_bio.size());
    for (auto p : r.pos_tags) pos.push_back(static_cast<int>(p));
    for (auto n : r.ner_bio) ner.push_back(static_cast<int>(n));
    return {{"product_id", r.product_id}, {"review_id", r.review_id}, {"sent_idx", r.sent_idx},
            {"tokens", r.tokens},         {"pos_tags", pos},          {"ner_bio", ner}};
}

} // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
    ArchiveWriter w;
    w.meta()["kind"] = "corpus";
    w.meta()["config_hash"] = corpus.cfg_hash;
    w.meta()["counts"] = {{"qa", corpus.qa.size()},
                          {"review_sentences", corpus.reviews.size()},
                          {"vocab", corpus.vocab.size()},
                          {"qa_skipped", corpus.qa_stats.skipped},
                          {"review_skipped", corpus.review_stats.skipped}};
    w.meta()["embedding_dim"] = corpus.emb.dim;
    w.meta()["min_count"] = corpus.vocab.min_count;

    std::string vocab_txt;
    for (int i = 4; i < corpus.vocab.size(); ++i) {
        vocab_txt += corpus.vocab.id_to_token[i];
        vocab_txt += '\n';
    }
    w.add_text("vocab", vocab_txt);
    w.add_f32("embeddings", corpus.emb.data);

    std::string qa_txt;
    for (const auto& qa : corpus.qa) {
        qa_txt += qa_to_json(qa).dump();
        qa_txt += '\n';
    }
    w.add_text("qa.jsonl", qa_txt);

    std::string rev_txt;
    for (const auto& r : corpus.reviews) {
        rev_txt += review_to_json(r).dump();
        rev_txt += '\n';
    }
    w.add_text("reviews.jsonl", rev_txt);
    w.write(path);
}

Corpus load_corpus(const std::string& path) {
    ArchiveReader r(path);
    if (r.meta().value("kind", "") != "corpus")
        throw std::runtime_error("archive is not a corpus: " + path);
    Corpus c;
    c.cfg_hash = r.meta().at("config_hash").get<std::string>();
    c.qa_stats.skipped = r.meta().at("counts").value("qa_skipped", 0L);
    c.review_stats.skipped = r.meta().at("counts").value("review_skipped", 0L);

    c.vocab.min_count = r.meta().at("min_count").get<int>();
    c.vocab.id_to_token = {"<pad>", "<unk>", "<bos>", "<eos>"};
    std::istringstream vin(r.read_text("vocab"));
    std::string tok;
    while (std::getline(vin, tok))
        if (!tok.empty()) c.vocab.id_to_token.push_back(tok);
    for (int i = 0; i < c.vocab.size(); ++i) c.vocab.token_to_id[c.vocab.id_to_token[i]] = i;

    c.emb.dim = r.meta().at("embedding_dim").get<int>();
    c.emb.data = r.read_f32_raw("embeddings");
    if (c.emb.rows() != c.vocab.size())
        throw std::runtime_error("corpus embeddings row count mismatch");

    std::istringstream qin(r.read_text("qa.jsonl"));
    std::string line;
    while (std::getline(qin, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        QAPair qa;
        qa.product_id = j.at("product_id").get<std::string>();
        qa.question_id = j.at("question_id").get<std::string>();
        qa.q_tokens = j.at("q_tokens").get<std::vector<std::string>>();
        qa.a_tokens = j.at("a_tokens").get<std::vector<std::string>>();
        c.qa.push_back(std::move(qa));
    }
    std::istringstream rin(r.read_text("reviews.jsonl"));
    while (std::getline(rin, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        ReviewSentence rs;
        rs.product_id = j.at("product_id").get<std::string>();
        rs.review_id = j.at("review_id").get<std::string>();
        rs.sent_idx = j.at("sent_idx").get<int>();
        rs.tokens = j.at("tokens").get<std::vector<std::string>>();
        for (int p : j.at("pos_tags").get<std::vector<int>>())
            rs.pos_tags.push_back(static_cast<PosTag>(p));
        for (int n : j.at("ner_bio").get<std::vector<int>>())
            rs.ner_bio.push_back(static_cast<NerTag>(n));
        c.reviews.push_back(std::move(rs));
    }
    return c;
}

} // namespace aita
