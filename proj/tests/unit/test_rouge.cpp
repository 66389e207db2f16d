#include "doctest.h"
#include "oracles.hpp"

#include "ccg/rouge.hpp"

using namespace ccg::rouge;

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("The Model, the model.") == Tokens{"the", "model", "the", "model"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("COVID-19 vaccine") == Tokens{"covid", "19", "vaccine"});
  CHECK(tokenize("  []  ").empty());
}

TEST_CASE("rouge_n hand examples") {
  auto s1 = rouge_n({"a", "b", "c"}, {"a", "b", "d", "e"}, 1);
  CHECK(s1.precision == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(s1.recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s1.f1 == doctest::Approx(4.0 / 7).epsilon(1e-12));

  auto s2 = rouge_n({"a", "b", "c"}, {"a", "b", "c", "d"}, 2);
  CHECK(s2.precision == doctest::Approx(1.0));
  CHECK(s2.recall == doctest::Approx(2.0 / 3));
  CHECK(s2.f1 == doctest::Approx(0.8).epsilon(1e-12));

  CHECK(rouge_n({"x", "y"}, {"x", "y"}, 1).f1 == 1.0);
  CHECK(rouge_n({"x", "y"}, {"x", "y"}, 2).f1 == 1.0);
}

TEST_CASE("rouge_l hand examples") {
  CHECK(lcs_length({"a", "b", "c", "d"}, {"a", "c", "b", "d"}) == 3);
  auto s = rouge_l({"a", "b", "c", "d"}, {"a", "c", "b", "d"});
  CHECK(s.precision == 0.75);
  CHECK(s.recall == 0.75);
  CHECK(s.f1 == 0.75);
  CHECK(rouge_l({"a", "b"}, {"c", "d"}).f1 == 0.0);
  CHECK(rouge_l({"a", "b"}, {"a", "b"}).f1 == 1.0);
}

TEST_CASE("zero denominators give zero, no smoothing") {
  CHECK(rouge_n({}, {"a"}, 1).f1 == 0.0);
  CHECK(rouge_n({"a"}, {}, 1).f1 == 0.0);
  CHECK(rouge_n({"a"}, {"a"}, 2).f1 == 0.0);
  CHECK(rouge_l({}, {}).f1 == 0.0);
}

TEST_CASE("relevance_score hand examples") {
  CHECK(relevance_score("graph neural network", "graph neural network") == 1.0);
  // Unigrams: 3 of 3 vs 3 of 6 -> 2/3; bigrams: 2 of 2 vs 2 of 5 -> 4/7.
  CHECK(relevance_score("graph neural network", "we train a graph neural network") ==
        doctest::Approx((2.0 / 3 + 4.0 / 7) / 2).epsilon(1e-12));
  CHECK(relevance_score("graph neural network", "we train a graph neural network") ==
        doctest::Approx(13.0 / 21).epsilon(1e-12));
  const double single = relevance_score("network", "we train a graph neural network");
  CHECK(single == doctest::Approx(rouge_n({"network"}, tokenize("we train a graph neural network"), 1).f1 / 2));
}

TEST_CASE("agreement with the brute-force oracle on random pairs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = ref::random_sentence(rng, 0, 25), r = ref::random_sentence(rng, 0, 25);
    const auto ct = tokenize(c), rt = tokenize(r);
    REQUIRE(ct == ref::tokens(c));
    for (std::size_t n : {1, 2}) {
      const auto a = rouge_n(ct, rt, n);
      const auto b = ref::rouge_n(ct, rt, n);
      CHECK(std::abs(a.precision - b.p) <= 1e-12);
      CHECK(std::abs(a.recall - b.r) <= 1e-12);
      CHECK(std::abs(a.f1 - b.f) <= 1e-12);
    }
    const auto l = rouge_l(ct, rt);
    const auto lb = ref::rouge_l(ct, rt);
    CHECK(std::abs(l.f1 - lb.f) <= 1e-12);
    CHECK(std::abs(l.precision - lb.p) <= 1e-12);
    CHECK(std::abs(l.recall - lb.r) <= 1e-12);
  }
}

TEST_CASE("properties: symmetry, bounds, recall monotonicity") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = tokenize(ref::random_sentence(rng, 0, 20));
    const auto r = tokenize(ref::random_sentence(rng, 1, 20));
    for (std::size_t n : {1, 2}) {
      const auto ab = rouge_n(c, r, n), ba = rouge_n(r, c, n);
      CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-12));
      CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-12));
      for (double v : {ab.precision, ab.recall, ab.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      CHECK(ab.f1 <= std::max(ab.precision, ab.recall) + 1e-12);
    }
    const auto lab = rouge_l(c, r), lba = rouge_l(r, c);
    CHECK(lab.f1 == doctest::Approx(lba.f1).epsilon(1e-12));
    CHECK(lab.f1 <= std::max(lab.precision, lab.recall) + 1e-12);

    auto longer = c;
    std::uniform_int_distribution<std::size_t> pick(0, r.size() - 1);
    longer.push_back(r[pick(rng)]);
    CHECK(rouge_n(longer, r, 1).recall >= rouge_n(c, r, 1).recall);
  }
}

TEST_CASE("score_pair bundles the three F1 values") {
  const auto t = score_pair("We train a model.", "we train the model");
  CHECK(t.r1 == doctest::Approx(rouge_n(tokenize("We train a model."), tokenize("we train the model"), 1).f1));
  CHECK(t.r2 == doctest::Approx(rouge_n(tokenize("We train a model."), tokenize("we train the model"), 2).f1));
  CHECK(t.rl == doctest::Approx(rouge_l(tokenize("We train a model."), tokenize("we train the model")).f1));
}
