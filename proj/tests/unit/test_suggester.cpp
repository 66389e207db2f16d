#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "ccg/oracle.hpp"
#include "ccg/suggester.hpp"
#include "oracles.hpp"

using namespace ccg;
using namespace ccg::suggester;

namespace {

encoder::EncoderConfig tiny_encoder(std::size_t dim = 8, std::size_t buckets = 64) {
  encoder::EncoderConfig cfg;
  cfg.dim = dim;
  cfg.buckets = buckets;
  cfg.max_tokens = 48;
  return cfg;
}

double ref_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("cosine examples") {
  const std::vector<double> a{1, 2}, b{2, 1}, x{1, 0}, y{0, 1}, z{0, 0};
  CHECK(cosine(a, b) == doctest::Approx(0.8));
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(x, y) == 0.0);
  CHECK_THROWS_AS(cosine(a, z), std::domain_error);
}

TEST_CASE("triplet loss hand values and invariants") {
  CHECK(triplet_loss(0.9, 0.7, 1, 3, 0.01) == 0.0);
  CHECK(triplet_loss(0.50, 0.52, 1, 2, 0.01) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK_THROWS_AS(triplet_loss(0.5, 0.5, 2, 2, 0.01), std::invalid_argument);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> f(-1, 1);
  std::uniform_int_distribution<std::size_t> r(1, 10);
  for (int t = 0; t < 1000; ++t) {
    std::size_t ri = r(rng), rj = r(rng);
    if (ri == rj) continue;
    if (ri > rj) std::swap(ri, rj);
    const double fi = f(rng), fj = f(rng);
    const double loss = triplet_loss(fi, fj, ri, rj, 0.01);
    CHECK(loss >= 0.0);
    if (fi - fj >= static_cast<double>(rj - ri) * 0.01) CHECK(loss == 0.0);
    nn::Graph g;
    CHECK(g.scalar(triplet_loss(g, g.input({fi}, 1, 1), g.input({fj}, 1, 1), ri, rj, 0.01)) ==
          doctest::Approx(loss).epsilon(1e-12));
  }
}

TEST_CASE("triplet gradient through a miniature encoder matches central differences") {
  encoder::TextEncoder enc(tiny_encoder());
  enc.module().init_pretrained();
  const auto& m = enc.module();
  const auto q = m.token_ids("graph neural networks for citation text");
  const auto ki = m.token_ids("graph networks");
  const auto kj = m.token_ids("protein folding");
  auto build = [&](nn::Graph& g) {
    auto vq = m.embed(g, q);
    auto fi = g.cosine(vq, m.embed(g, ki));
    auto fj = g.cosine(vq, m.embed(g, kj));
    // Wide margin keeps the hinge active.
    return triplet_loss(g, fi, fj, 1, 3, 0.6);
  };
  nn::GradBuffer grads(enc.params());
  grads.zero();
  {
    nn::Graph g(&grads);
    auto loss = build(g);
    REQUIRE(g.scalar(loss) > 0.0);
    g.backward(loss);
  }
  const double h = 1e-6;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& p : enc.params().params()) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      double& x = p->values()[i];
      const double orig = x;
      x = orig + h;
      nn::Graph gp;
      const double up = gp.scalar(build(gp));
      x = orig - h;
      nn::Graph gm;
      const double down = gm.scalar(build(gm));
      x = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.data(*p)[i];
      if (numeric == 0.0 && analytic == 0.0) continue;
      ++checked;
      worst = std::max(worst, std::abs(numeric - analytic) / std::max(std::abs(numeric), 1e-3));
    }
  }
  CHECK(checked > 50);
  CHECK(worst < 1e-4);
}

TEST_CASE("MMR worked example, alpha zero and duplicates") {
  auto picks = mmr_select({0.9, 0.8}, {1.0, 0.95, 0.95, 1.0}, 2, 0.2);
  REQUIRE(picks.size() == 2);
  CHECK(picks[0].index == 0);
  CHECK(picks[0].score == doctest::Approx(0.72));
  CHECK(picks[1].index == 1);
  CHECK(picks[1].score == doctest::Approx(0.45));
  CHECK(mmr_select({0.8}, {1.0}, 1, 0.2)[0].score == doctest::Approx(0.64));

  auto dup = mmr_select({0.9, 0.5, 0.9}, {1, 0.3, 1, 0.3, 1, 0.3, 1, 0.3, 1}, 3, 0.2);
  REQUIRE(dup.size() == 3);
  CHECK(dup[0].index == 0);
  const auto pos0 = 0u;
  const auto pos2 = std::find_if(dup.begin(), dup.end(), [](auto p) { return p.index == 2; }) - dup.begin();
  CHECK(pos2 > pos0);
  CHECK(mmr_select({0.9, 0.5}, {1, 0, 0, 1}, 0, 0.2).empty());

  encoder::TextEncoder enc(tiny_encoder(16, 512));
  enc.module().init_pretrained();
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::string> cands;
    for (int i = 0; i < 7; ++i) cands.push_back(ref::random_sentence(rng, 1, 4));
    const auto query = ref::random_sentence(rng, 5, 15);
    const auto top = rank_candidates(enc, query, cands);
    for (std::size_t k = 1; k <= cands.size(); ++k) {
      const auto sel = mmr_select(enc, query, cands, k, 0.0);
      REQUIRE(sel.size() == k);
      for (std::size_t i = 0; i < k; ++i) CHECK(sel[i].index == top[i].index);
    }
    const auto mmr = mmr_select(enc, query, cands, 3, 0.2);
    std::set<std::size_t> distinct;
    for (const auto& c : mmr) distinct.insert(c.index);
    CHECK(distinct.size() == mmr.size());
  }
}

TEST_CASE("rank_candidates: identity, hand cosines and permutation invariance") {
  encoder::TextEncoder enc(tiny_encoder(16, 512));
  enc.module().init_pretrained();
  const std::string query = "dense retrieval with graph models";
  std::vector<std::string> cands{"graph models", "protein structure", query, "dense retrieval", "weather data"};
  const auto ranked = rank_candidates(enc, query, cands);
  REQUIRE(ranked.size() == 5);
  CHECK(ranked[0].text == query);
  CHECK(ranked[0].score == doctest::Approx(1.0));

  const auto vq = enc.embed(query);
  std::vector<std::pair<double, std::size_t>> hand;
  for (std::size_t i = 0; i < cands.size(); ++i) hand.push_back({-ref_cosine(vq, enc.embed(cands[i])), i});
  std::stable_sort(hand.begin(), hand.end(), [](auto a, auto b) { return a.first < b.first; });
  for (std::size_t i = 0; i < hand.size(); ++i) {
    CHECK(ranked[i].index == hand[i].second);
    CHECK(ranked[i].score == doctest::Approx(-hand[i].first).epsilon(1e-12));
  }

  auto perm = cands;
  std::reverse(perm.begin(), perm.end());
  const auto again = rank_candidates(enc, query, perm);
  for (std::size_t i = 0; i < cands.size(); ++i) CHECK(again[i].text == ranked[i].text);
}

TEST_CASE("background downsampling and pair sampling") {
  std::vector<Intent> labels;
  labels.insert(labels.end(), 1000, Intent::background);
  labels.insert(labels.end(), 100, Intent::method);
  labels.insert(labels.end(), 100, Intent::result);
  std::mt19937_64 rng(5);
  const auto kept = downsample_background(labels, 0.2, rng);
  std::array<std::size_t, 3> counts{};
  for (auto i : kept) ++counts[index_of(labels[i])];
  CHECK(counts == std::array<std::size_t, 3>{200, 100, 100});
  CHECK(std::is_sorted(kept.begin(), kept.end()));

  const std::vector<std::size_t> ranks{1, 2, 2, 3};
  auto all = sample_pairs(ranks, 16, rng);
  CHECK(all.size() == 5);
  for (auto [i, j] : all) CHECK(ranks[i] < ranks[j]);
  std::vector<std::size_t> many(12);
  for (std::size_t i = 0; i < many.size(); ++i) many[i] = i + 1;
  auto capped = sample_pairs(many, 16, rng);
  CHECK(capped.size() == 16);
  std::set<std::pair<std::size_t, std::size_t>> distinct(capped.begin(), capped.end());
  CHECK(distinct.size() == 16);
  CHECK(sample_pairs({1, 1, 1}, 16, rng).empty());
}

TEST_CASE("untrained intent head is near uniform in expectation") {
  ContextBundle ctx{{"We build on prior work."}, "A title", "An abstract."};
  std::array<double, 3> mean{};
  const int inits = 100;
  for (int s = 0; s < inits; ++s) {
    IntentPredictor p(tiny_encoder(16, 256), 32, 1000 + s);
    const auto pred = p.predict(ctx);
    CHECK(pred.probabilities[0] + pred.probabilities[1] + pred.probabilities[2] == doctest::Approx(1.0));
    for (std::size_t k = 0; k < 3; ++k) mean[k] += pred.probabilities[k] / inits;
  }
  for (double m : mean) CHECK(m == doctest::Approx(1.0 / 3).epsilon(0.1));
  IntentPredictor p(tiny_encoder());
  CHECK_THROWS_AS(p.predict(ContextBundle{}), std::invalid_argument);
  CHECK(p.predict(ctx).probabilities == p.predict(ctx).probabilities);
  auto pieces = p.input_pieces(ctx);
  CHECK(pieces.front() == "[CLS]");
  CHECK(std::count(pieces.begin(), pieces.end(), "[SEP]") == 1);
}

TEST_CASE("softmax invariants") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d(0, 3);
  for (int t = 0; t < 200; ++t) {
    std::array<double, 3> l{d(rng), d(rng), d(rng)}, shifted = l;
    const double c = d(rng);
    for (auto& x : shifted) x += c;
    auto a = make_prediction(l), b = make_prediction(shifted);
    CHECK(a.probabilities[0] + a.probabilities[1] + a.probabilities[2] == doctest::Approx(1.0));
    CHECK(a.label == b.label);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.probabilities[k] == doctest::Approx(b.probabilities[k]));
  }
}

TEST_CASE("templated intent contexts are learned") {
  const std::vector<std::string> topics{"graph parsing", "protein folding", "speech tagging", "image retrieval",
                                        "query expansion", "drug discovery", "weather models", "code search",
                                        "text summaries", "gene networks"};
  auto context = [&](Intent intent, std::size_t t) {
    const auto& topic = topics[t % topics.size()];
    std::string cue = intent == Intent::result     ? "Our results outperform earlier " + topic + " systems."
                      : intent == Intent::method   ? "We adopt the procedure used for " + topic + "."
                                                   : "Prior studies have examined " + topic + " at length.";
    return ContextBundle{{"This section concerns " + topic + ".", cue}, "On " + topic, "A study of " + topic + "."};
  };
  std::vector<ContextBundle> train;
  std::vector<Intent> labels;
  for (std::size_t t = 0; t < 7; ++t)
    for (Intent i : kAllIntents)
      for (int rep = 0; rep < (i == Intent::background ? 10 : 2); ++rep) {
        train.push_back(context(i, t));
        labels.push_back(i);
      }
  IntentPredictor p(tiny_encoder(32, 2048), 32, 13);
  IntentTrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-2;
  auto report = p.train(train, labels, cfg);
  CHECK(report.pool == std::array<std::size_t, 3>{14, 14, 14});
  std::size_t correct = 0, total = 0;
  for (std::size_t t = 7; t < topics.size(); ++t) {
    ++total;
    correct += p.predict(context(Intent::result, t)).label == Intent::result;
  }
  CHECK(static_cast<double>(correct) >= 0.8 * static_cast<double>(total));
  CHECK_THROWS_AS(p.train(train, std::vector<Intent>(train.size(), Intent::method), cfg), std::invalid_argument);
}

TEST_CASE("triplet fine-tuning improves the rank of the best candidate") {
  std::mt19937_64 rng(8);
  std::vector<RankingQuery> queries;
  for (int q = 0; q < 40; ++q) {
    RankingQuery rq;
    rq.query = ref::random_sentence(rng, 8, 14);
    const auto qt = ref::tokens(rq.query);
    for (int c = 0; c < 6; ++c) rq.candidates.push_back(ref::random_sentence(rng, 2, 3));
    rq.candidates[q % 6] = qt[0] + " " + qt[1];
    for (const auto& r : oracle::assign_relevance_ranks(rq.candidates, rq.query)) rq.ranks.push_back(r.rank);
    queries.push_back(rq);
  }
  auto enc = encoder::TextEncoder::pretrained(tiny_encoder(16, 512));
  const double before = mean_rank_of_best(*enc, queries);
  ExtractorConfig cfg;
  cfg.epochs = 6;
  cfg.learning_rate = 5e-3;
  auto report = triplet_fine_tune(*enc, queries, cfg);
  const double after = mean_rank_of_best(*enc, queries);
  CHECK(report.queries_with_pairs == 40);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  CHECK(after < before);
}

TEST_CASE("suggest returns the configured list sizes") {
  SuggesterModels models;
  models.intent = std::make_unique<IntentPredictor>(tiny_encoder(16, 256));
  models.keyword_encoder = encoder::TextEncoder::pretrained(tiny_encoder(16, 256));
  models.sentence_encoder = encoder::TextEncoder::pretrained(tiny_encoder(16, 256));
  ContextBundle ctx{{"Graph neural networks help protein folding.", "The dataset covers speech tagging."},
                    "Neural retrieval models", "We study dense retrieval for question answering tasks."};
  std::vector<std::string> body{"One.", "Two sentences here.", "Three.", "Four is here.", "Five.", "Six.", "Two sentences here."};
  ExtractorConfig cfg;
  auto automatic = suggest(ctx, body, models, cfg, SuggestMode::automatic);
  CHECK(automatic.keywords.size() == 3);
  CHECK(automatic.sentences.size() == 2);
  auto ui = suggest(ctx, body, models, cfg, SuggestMode::ui);
  CHECK(ui.keywords.size() == 5);
  CHECK(ui.sentences.size() == 5);
  std::set<std::string> distinct;
  for (const auto& s : ui.sentences) distinct.insert(s.text);
  CHECK(distinct.size() == ui.sentences.size());
  for (std::size_t i = 1; i < ui.sentences.size(); ++i) CHECK(ui.sentences[i - 1].score >= ui.sentences[i].score);

  auto sparse = suggest(ContextBundle{{"Graph models."}, "", ""}, {}, models, cfg, SuggestMode::automatic);
  CHECK(sparse.keywords.size() == 1);
  CHECK(sparse.sentences.empty());
  auto j = to_json(ui);
  CHECK(j["keywords"].size() == 5);
}

TEST_CASE("extractor config validation and round trip") {
  ExtractorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.gamma = 0;
  CHECK_THROWS(cfg.validate());
  CHECK(to_json(extractor_config_from_json(json::parse(to_json(ExtractorConfig{}).dump()))) ==
        to_json(ExtractorConfig{}));
}
