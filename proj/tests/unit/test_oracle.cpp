#include "doctest.h"

#include <cmath>
#include <random>

#include "ccg/np_chunker.hpp"
#include "ccg/oracle.hpp"
#include "oracles.hpp"

using namespace ccg;
using namespace ccg::oracle;

namespace {

encoder::EncoderConfig small_encoder() {
  encoder::EncoderConfig cfg;
  cfg.dim = 16;
  cfg.buckets = 512;
  cfg.max_tokens = 64;
  return cfg;
}

}  // namespace

TEST_CASE("noun-phrase chunker examples") {
  CHECK(chunker::words("COVID-19 cases (rising).") ==
        std::vector<std::string>{"COVID-19", "cases", "(", "rising", ")", "."});
  CHECK(chunker::extract_candidate_keywords("We propose a graph neural network for COVID-19 detection.") ==
        std::vector<std::string>{"graph neural network", "COVID-19 detection"});
  CHECK(chunker::extract_candidate_keywords("The model and the Model use a model.") ==
        std::vector<std::string>{"model"});
  CHECK(chunker::extract_candidate_keywords("").empty());
  using chunker::Tag;
  std::vector<chunker::TaggedToken> toks{{"this", Tag::Det}, {"large", Tag::Adj}, {"corpus", Tag::Noun},
                                         {"is", Tag::Aux},   {"an", Tag::Det},    {"idea", Tag::Noun},
                                         {"big", Tag::Adj},  {".", Tag::Punct}};
  CHECK(chunker::chunk_tagged(toks) == std::vector<std::string>{"this large corpus", "idea"});
}

TEST_CASE("greedy selection examples") {
  auto r = greedy_select({"a b", "c d", "x y"}, "a b c d", 3);
  CHECK(r.selected == std::vector<std::size_t>{0, 1});
  CHECK(r.final_score == doctest::Approx(1.0));
  REQUIRE(r.gains.size() == 2);
  for (double g : r.gains) CHECK(g > 0);
  CHECK(r.scores.back() == r.final_score);

  auto none = greedy_select({"x", "y z"}, "a b c", 3);
  CHECK(none.selected.empty());
  CHECK(none.final_score == 0.0);

  auto capped = greedy_select({"a", "b", "c", "d"}, "a b c d", 2);
  CHECK(capped.selected.size() == 2);
  CHECK(greedy_select({}, "a b", 3).selected.empty());
  // Tie on the first step goes to the lowest index.
  CHECK(greedy_select({"q a", "a q"}, "a", 1).selected == std::vector<std::size_t>{0});
}

TEST_CASE("greedy never exceeds the exhaustive optimum and its bookkeeping is consistent") {
  std::mt19937_64 rng(21);
  int optimal = 0;
  const int trials = 150;
  for (int t = 0; t < trials; ++t) {
    std::uniform_int_distribution<int> ncand(0, 6);
    std::vector<std::string> cands;
    for (int i = ncand(rng); i > 0; --i) cands.push_back(ref::random_sentence(rng, 1, 4));
    const auto target = ref::random_sentence(rng, 3, 12);
    const std::size_t cap = t % 2 ? kMaxKeywords : kMaxSentences;
    const auto r = greedy_select(cands, target, cap);
    const double best = ref::best_ordered_subset(cands, target, cap);
    REQUIRE(r.final_score <= best + 1e-12);
    REQUIRE(r.selected.size() <= cap);
    REQUIRE(r.final_score == doctest::Approx(selection_score(cands, r.selected, target)).epsilon(1e-12));
    double running = 0;
    for (std::size_t k = 0; k < r.gains.size(); ++k) {
      REQUIRE(r.gains[k] > 0);
      running += r.gains[k];
      REQUIRE(r.scores[k] == doctest::Approx(running).epsilon(1e-9));
    }
    optimal += std::abs(r.final_score - best) < 1e-12;
  }
  CHECK(optimal >= trials * 7 / 10);
}

TEST_CASE("dense ranks") {
  CHECK(dense_ranks({0.8, 0.8, 0.5}) == std::vector<std::size_t>{1, 1, 2});
  CHECK(dense_ranks({0.1, 0.9, 0.5, 0.9}) == std::vector<std::size_t>{3, 1, 2, 1});
  CHECK(dense_ranks({0.9, 0.7, 0.5, 0.3}, 2) == std::vector<std::size_t>{1, 2, 2, 2});
  CHECK(dense_ranks({}).empty());
  auto ranked = assign_relevance_ranks({"a b", "x", "a"}, "a b");
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[1].rank == 3);
  CHECK(ranked[2].rank == 2);
  CHECK(ranked[1].score == 0.0);
  CHECK(ranked[2].score == doctest::Approx(ref::relevance("a", "a b")));
}

TEST_CASE("section classes") {
  CHECK(section_class("1 Introduction") == SectionClass::introduction);
  CHECK(section_class("Related Work") == SectionClass::related_work);
  CHECK(section_class("Methods") == SectionClass::method);
  CHECK(section_class("Experiments and Results") == SectionClass::experiments);
  CHECK(section_class("Conclusions") == SectionClass::conclusion);
  CHECK(section_class("Acknowledgements") == SectionClass::other);
}

TEST_CASE("intent classifier: zero weights give ln 3, and a single class is learned") {
  IntentClassifier clf(small_encoder(), 8, 3);
  for (const auto& p : clf.params().params()) p->fill(0.0);
  LabeledSentence item{"We use [] for tagging.", Intent::method, std::nullopt, std::nullopt};
  nn::Graph g;
  CHECK(g.scalar(clf.loss(g, item, {}, false, false)) == doctest::Approx(std::log(3.0)));
  LabeledSentence unlabeled{"No label.", std::nullopt, std::nullopt, std::nullopt};
  CHECK(!clf.loss(g, unlabeled, {}, false, false).valid());

  IntentClassifier single(small_encoder(), 8, 3);
  std::vector<LabeledSentence> data;
  for (int i = 0; i < 24; ++i)
    data.push_back({"Sentence " + std::to_string(i) + " uses []", Intent::result, std::nullopt, std::nullopt});
  ClassifierTrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 1e-2;
  auto report = single.train(data, {}, cfg);
  CHECK(!report.section_scaffold);
  CHECK(report.warnings.size() == 2);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  for (const auto& d : data) CHECK(single.predict(d.text).label == Intent::result);
  CHECK_THROWS_AS(single.train(data, {1.0, 0.0, 0.01}, cfg), std::invalid_argument);
}

TEST_CASE("classifier training is deterministic and save/load preserves logits") {
  std::vector<LabeledSentence> data;
  const char* sections[] = {"Introduction", "Methods", "Results"};
  for (int i = 0; i < 30; ++i)
    data.push_back({std::string(i % 3 == 0 ? "Prior work [] studied" : i % 3 == 1 ? "We use []" : "Ours beats []") +
                        " topic " + std::to_string(i),
                    static_cast<Intent>(i % 3), std::string(sections[i % 3]), i % 2 == 0});
  ClassifierTrainConfig cfg;
  cfg.epochs = 3;
  IntentClassifier a(small_encoder(), 8, 5), b(small_encoder(), 8, 5);
  auto ra = a.train(data, {}, cfg);
  auto rb = b.train(data, {}, cfg);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(ra.section_scaffold);
  CHECK(ra.worthiness_scaffold);
  CHECK(a.logits("We use [] here") == b.logits("We use [] here"));

  const auto dir = std::filesystem::temp_directory_path() / "ccg_test_classifier";
  std::filesystem::remove_all(dir);
  a.save(dir);
  auto c = IntentClassifier::load(dir);
  CHECK(c->logits("Ours beats [] again") == a.logits("Ours beats [] again"));
  const auto p = a.predict("anything");
  CHECK(p.probabilities[0] + p.probabilities[1] + p.probabilities[2] == doctest::Approx(1.0));
}

TEST_CASE("oracle attributes and label_dataset on a fixture") {
  corpus::Corpus c;
  corpus::CorpusEntry cited;
  cited.paper.paper_id = "C";
  cited.paper.title = "Graph neural networks";
  cited.paper.abstract = "We study graph neural networks.";
  cited.paper.body = {{"Intro", {"Graph neural networks are strong.", "Unrelated text here."}},
                      {"Method", {"We train graph neural networks with dropout."}}};
  c.add(cited);
  dataset::CitationInstance inst;
  inst.instance_id = "P:0:1";
  inst.citing_paper_id = "P";
  inst.cited_paper_id = "C";
  inst.target_sentence = "Graph neural networks [] are strong with dropout.";
  inst.context = {{"We consider graph neural networks."}, cited.paper.title, cited.paper.abstract};

  CHECK(body_sentences(cited.paper).size() == 3);
  auto attrs = oracle_attributes(inst, c, Intent::method);
  CHECK(attrs.intent == Intent::method);
  CHECK(!attrs.keywords.empty());
  CHECK(attrs.keywords.size() <= kMaxKeywords);
  CHECK(attrs.keywords[0] == "graph neural networks");
  CHECK(attrs.sentences.size() <= kMaxSentences);
  REQUIRE(!attrs.sentences.empty());
  CHECK(attrs.sentences[0] == "Graph neural networks are strong.");

  IntentClassifier clf(small_encoder(), 8, 1);
  std::vector<dataset::CitationInstance> xs{inst};
  label_dataset(xs, c, clf);
  REQUIRE(xs[0].attributes);
  CHECK(xs[0].attributes->intent == pseudo_label_intent(clf, inst.target_sentence));
  CHECK(xs[0].attributes->keywords == attrs.keywords);
  CHECK(xs[0].attributes->sentences == attrs.sentences);
}

TEST_CASE("classification scores") {
  using I = Intent;
  std::vector<I> gold{I::background, I::background, I::method, I::result, I::result, I::result};
  std::vector<I> pred{I::background, I::method, I::method, I::result, I::result, I::background};
  auto s = classification_scores(gold, pred);
  // background: P 1/2 R 1/2; method: P 1/2 R 1; result: P 1 R 2/3
  CHECK(s.f1[0] == doctest::Approx(0.5));
  CHECK(s.f1[1] == doctest::Approx(2.0 / 3.0));
  CHECK(s.f1[2] == doctest::Approx(0.8));
  CHECK(s.macro_f1 == doctest::Approx((0.5 + 2.0 / 3.0 + 0.8) / 3));
  CHECK(s.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK_THROWS(classification_scores(gold, {}));
}
