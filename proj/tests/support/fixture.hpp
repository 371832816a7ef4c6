#pragma once

#include <cstdint>
#include <string>

namespace aita::testsupport {

// Synthetic corpus: 20 products, 200 QA pairs, 600 review sentences, plus a
// held-out test split of 100 labelled (review sentence, question) pairs.
// Every product talks about three aspect terms; questions reuse the aspect
// term of their paired context, so aspect-aware features carry real signal.
struct FixturePaths {
    std::string qa;
    std::string reviews;
    std::string test_reviews;
    std::string test_refs;
};

constexpr int kFixtureProducts = 20;
constexpr int kFixtureQaPerProduct = 10;
constexpr int kFixtureSentencesPerProduct = 30;
constexpr int kFixtureTestPerProduct = 5;

FixturePaths write_fixture(const std::string& dir, uint64_t seed = 7);

} // namespace aita::testsupport
