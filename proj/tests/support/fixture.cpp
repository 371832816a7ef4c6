#include "fixture.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "aita/rng.hpp"

namespace aita::testsupport {

namespace {

const std::vector<std::string> kAspects = {
    "battery", "screen", "case",   "strap",  "zoom",   "lens",    "button",
    "cable",   "charger", "speaker", "keyboard", "mouse", "tripod", "filter",
    "flash",   "sensor",  "memory", "adapter", "remote", "stand"};

const std::vector<std::string> kAdjectives = {"great", "solid", "decent", "weak",
                                              "sturdy", "loud", "bright", "slow"};

const std::vector<std::string> kFillers = {
    "i bought it last week .",
    "shipping was fast .",
    "my wife uses it daily .",
    "overall a solid purchase .",
    "it arrived in two days .",
    "works exactly as described .",
};

std::string question_for(int aspect_idx) {
    const std::string& x = kAspects[aspect_idx];
    switch (aspect_idx % 5) {
        case 0: return "how is the " + x + " ?";
        case 1: return "does the " + x + " work well ?";
        case 2: return "how long does the " + x + " last ?";
        case 3: return "is the " + x + " good ?";
        default: return "can i replace the " + x + " ?";
    }
}

std::string answer_for(int aspect_idx, int variant, const std::string& adj) {
    const std::string& x = kAspects[aspect_idx];
    switch (variant % 4) {
        case 0: return "the " + x + " is " + adj + " .";
        case 1: return "yes the " + x + " works fine .";
        case 2: return "i think the " + x + " is " + adj + " .";
        default: return "the " + x + " lasted three weeks .";
    }
}

std::string review_sentence_for(int aspect_idx, int variant, const std::string& adj) {
    const std::string& x = kAspects[aspect_idx];
    switch (variant % 5) {
        case 0: return "the " + x + " is really " + adj + " .";
        case 1: return "i love the " + x + " on this thing .";
        case 2: return "the " + x + " works " + adj + " after a month .";
        case 3: return "honestly the " + x + " feels " + adj + " .";
        default: return "the " + x + " could be better .";
    }
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string pid(int p) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "p%02d", p);
    return std::string(buf);
}

} // namespace

FixturePaths write_fixture(const std::string& dir, uint64_t seed) {
    std::filesystem::create_directories(dir);
    FixturePaths paths{dir + "/qa.jsonl", dir + "/reviews.jsonl", dir + "/test_reviews.jsonl",
                       dir + "/test_refs.jsonl"};
    Rng rng(derive_seed(seed, "fixture"));

    std::ofstream qa_out(paths.qa, std::ios::trunc);
    std::ofstream rev_out(paths.reviews, std::ios::trunc);
    std::ofstream trev_out(paths.test_reviews, std::ios::trunc);
    std::ofstream tref_out(paths.test_refs, std::ios::trunc);
    if (!qa_out || !rev_out || !trev_out || !tref_out)
        throw std::runtime_error("cannot write fixture under " + dir);

    for (int p = 0; p < kFixtureProducts; ++p) {
        const std::string product = pid(p);
        const int aspects[3] = {(p * 3) % 20, (p * 3 + 1) % 20, (p * 3 + 2) % 20};

        for (int i = 0; i < kFixtureQaPerProduct; ++i) {
            const int aspect = aspects[i % 3];
            const std::string adj = kAdjectives[rng.uniform_int(kAdjectives.size())];
            nlohmann::json j = {{"product_id", product},
                                {"question_id", product + "-q" + std::to_string(i)},
                                {"question", question_for(aspect)},
                                {"answer", answer_for(aspect, i, adj)}};
            qa_out << j.dump() << "\n";
        }

        // 30 sentences per product: 20 aspect-bearing, 10 filler, in a
        // seeded order, packed three per review record
        std::vector<std::string> sentences;
        for (int i = 0; i < 20; ++i) {
            const int aspect = aspects[i % 3];
            const std::string adj = kAdjectives[rng.uniform_int(kAdjectives.size())];
            sentences.push_back(review_sentence_for(aspect, i, adj));
        }
        for (int i = 0; i < 10; ++i)
            sentences.push_back(kFillers[rng.uniform_int(kFillers.size())]);
        rng.shuffle(sentences);
        for (int r = 0; r * 3 < static_cast<int>(sentences.size()); ++r) {
            std::string text;
            for (int k = 0; k < 3; ++k) {
                if (k > 0) text += " ";
                text += capitalize(sentences[r * 3 + k]);
            }
            nlohmann::json j = {{"product_id", product},
                                {"review_id", product + "-r" + std::to_string(r)},
                                {"text", text}};
            rev_out << j.dump() << "\n";
        }

        for (int i = 0; i < kFixtureTestPerProduct; ++i) {
            const int aspect = aspects[i % 3];
            const std::string adj = kAdjectives[rng.uniform_int(kAdjectives.size())];
            const std::string rid = product + "-t" + std::to_string(i);
            nlohmann::json jr = {{"product_id", product},
                                 {"review_id", rid},
                                 {"text", capitalize(review_sentence_for(aspect, i + 1, adj))}};
            trev_out << jr.dump() << "\n";
            nlohmann::json jq = {{"product_id", product},
                                 {"review_id", rid},
                                 {"sent_idx", 0},
                                 {"question", question_for(aspect)}};
            tref_out << jq.dump() << "\n";
        }
    }
    return paths;
}

} // namespace aita::testsupport
