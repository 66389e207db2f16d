#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "ccg/corpus.hpp"
#include "ccg/generator.hpp"
#include "oracles.hpp"
#include "prompt_parser.hpp"

using namespace ccg;
using namespace ccg::generator;

namespace {

dataset::CitationInstance instance(const std::string& id, const std::string& target, CitationAttributes attrs,
                                   ContextBundle ctx) {
  dataset::CitationInstance i;
  i.instance_id = id;
  i.citing_paper_id = "P" + id;
  i.cited_paper_id = "C" + id;
  i.target_sentence = target;
  i.context = std::move(ctx);
  i.attributes = std::move(attrs);
  return i;
}

std::vector<dataset::CitationInstance> memorization_fixture() {
  const std::vector<std::string> topics{"graph parsing", "protein folding", "speech tagging", "image retrieval",
                                        "query expansion", "drug discovery", "weather models", "code search",
                                        "text summaries", "gene networks"};
  const std::array<std::string, 3> verbs{"studied", "used", "outperformed"};
  std::vector<dataset::CitationInstance> xs;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    const Intent intent = static_cast<Intent>(i % 3);
    xs.push_back(instance(std::to_string(i), "Prior work [] " + verbs[i % 3] + " " + topics[i] + ".",
                          {intent, {topics[i]}, {}},
                          {{"We discuss " + topics[i] + "."}, "On " + topics[i], "A paper about " + topics[i] + "."}));
  }
  return xs;
}

GeneratorConfig small_config() {
  GeneratorConfig cfg;
  cfg.dim = 32;
  cfg.min_count = 1;
  return cfg;
}

}  // namespace

TEST_CASE("prompt worked example and skeleton") {
  ContextBundle ctx{{"C1.", "C2."}, "T", "A"};
  CHECK(serialize_prompt(ctx, {Intent::method, {"a", "b"}, {}}) ==
        "intent: method keywords: a; b sentences:  context: C1. C2. title: T abstract: A");
  CHECK(serialize_prompt({}, {}) == "intent:  keywords:  sentences:  context:  title:  abstract: ");
  CHECK(serialize_prompt(ctx, {std::nullopt, {}, {"S1.", "S2."}}) ==
        "intent:  keywords:  sentences: S1. S2. context: C1. C2. title: T abstract: A");
}

TEST_CASE("prompt field order, round trip and injectivity") {
  std::mt19937_64 rng(11);
  std::set<std::string> prompts;
  std::set<std::tuple<int, std::vector<std::string>, std::vector<std::string>>> tuples;
  std::uniform_int_distribution<int> intent(-1, 2), count(0, 3);
  for (int t = 0; t < 500; ++t) {
    CitationAttributes a;
    const int i = intent(rng);
    if (i >= 0) a.intent = static_cast<Intent>(i);
    for (int k = count(rng); k > 0; --k) a.keywords.push_back(ref::random_sentence(rng, 1, 3));
    for (int k = count(rng); k > 0; --k) {
      auto s = ref::random_sentence(rng, 2, 8);
      s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
      a.sentences.push_back(s + ".");
    }
    std::erase_if(a.keywords, [](const std::string& k) { return k.find(';') != std::string::npos; });
    ContextBundle ctx{{"Local one.", "Local two."}, "Some title", "Some abstract."};
    const auto p = serialize_prompt(ctx, a);
    std::size_t last = 0;
    for (auto marker : kFieldMarkers) {
      const auto pos = p.find(marker);
      REQUIRE(pos != std::string::npos);
      CHECK(pos >= last);
      CHECK(p.find(marker, pos + 1) == std::string::npos);
      last = pos;
    }
    const auto parsed = ref::parse_prompt(p);
    REQUIRE(parsed.ok);
    CHECK(ref::attributes_of(parsed) == a);
    CHECK(parsed.context == "Local one. Local two.");
    CHECK(parsed.title == "Some title");
    CHECK(parsed.abstract == "Some abstract.");
    tuples.insert({i, a.keywords, a.sentences});
    prompts.insert(p);
  }
  CHECK(prompts.size() == tuples.size());
}

TEST_CASE("tokenizer, vocabulary and input truncation") {
  CHECK(tokenize("intent: method keywords: A-b [] x.") ==
        std::vector<std::string>{"intent:", "method", "keywords:", "a", "-", "b", "[]", "x", "."});
  CHECK(tokenize("ratio: 3") == std::vector<std::string>{"ratio", ":", "3"});
  CHECK(detokenize({"we", "use", "[]", "(", "x", ")", "."}) == "we use [] (x).");

  auto v = Vocab::build({{"b", "a", "a", "c"}, {"b", "d"}}, 12, 1);
  CHECK(v.size() == 12);
  CHECK(v.token(4) == "intent:");
  CHECK(v.token(10) == "a");
  CHECK(v.token(11) == "b");
  CHECK(v.id("zzz") == Vocab::kUnk);
  auto v2 = Vocab::build({{"b", "a", "a", "c"}, {"b", "d"}}, 100, 2);
  CHECK(v2.size() == 12);
  CHECK(!v2.contains("c"));
  CHECK(Vocab::from_json(v.to_json()).tokens() == v.tokens());

  GeneratorModel m(small_config(), v, 1);
  std::string longp;
  for (int i = 0; i < 700; ++i) longp += "w" + std::to_string(i) + " ";
  const auto src = m.encode_source(longp);
  CHECK(src.ids.size() == 512);
  CHECK(src.oov.size() == 512);
  CHECK(src.oov.back() == "w511");
  const auto tgt = m.encode_target("a w3 b unknownword", src);
  CHECK(tgt == std::vector<std::size_t>{10, v.size() + 3, 11, Vocab::kUnk, Vocab::kEos});
}

TEST_CASE("attribute dropout statistics") {
  const CitationAttributes full{Intent::result, {"k1", "k2", "k3"}, {"s1", "s2"}};
  std::mt19937_64 rng(2024);
  const int draws = 100000;
  int intent_empty = 0, all_kw = 0;
  std::array<int, 4> kw_sizes{};
  std::array<int, 3> sent_sizes{};
  std::map<std::vector<std::string>, int> two_subsets;
  for (int d = 0; d < draws; ++d) {
    const auto out = attribute_dropout(full, rng);
    intent_empty += !out.intent.has_value();
    if (out.intent) REQUIRE(*out.intent == Intent::result);
    ++kw_sizes[out.keywords.size()];
    ++sent_sizes[out.sentences.size()];
    all_kw += out.keywords.size() == 3;
    // never invents, keeps order
    std::size_t pos = 0;
    for (const auto& k : out.keywords) {
      auto it = std::find(full.keywords.begin() + static_cast<long>(pos), full.keywords.end(), k);
      REQUIRE(it != full.keywords.end());
      pos = static_cast<std::size_t>(it - full.keywords.begin()) + 1;
    }
    for (const auto& s : out.sentences) REQUIRE(std::count(full.sentences.begin(), full.sentences.end(), s) == 1);
    if (out.keywords.size() == 2) ++two_subsets[out.keywords];
  }
  CHECK(std::abs(intent_empty / double(draws) - 0.5) <= 0.01);
  CHECK(std::abs(all_kw / double(draws) - 0.25) <= 0.01);
  auto chi2 = [](const auto& counts, double expected) {
    double s = 0;
    for (int c : counts) s += (c - expected) * (c - expected) / expected;
    return s;
  };
  // p = 0.01 critical values: 11.345 (3 dof), 9.210 (2 dof)
  CHECK(chi2(kw_sizes, draws / 4.0) < 11.345);
  CHECK(chi2(sent_sizes, draws / 3.0) < 9.210);
  CHECK(two_subsets.size() == 3);
  std::vector<int> pair_counts;
  for (const auto& [k, c] : two_subsets) pair_counts.push_back(c);
  CHECK(chi2(pair_counts, kw_sizes[2] / 3.0) < 9.210);

  const CitationAttributes empty{Intent::method, {}, {}};
  for (int d = 0; d < 1000; ++d) {
    const auto out = attribute_dropout(empty, rng);
    CHECK(out.keywords.empty());
    CHECK(out.sentences.empty());
  }
  DropoutConfig off{0.0, false};
  CHECK(attribute_dropout(full, rng, off) == full);
}

TEST_CASE("uniform output distribution gives ln|V| per token") {
  auto cfg = small_config();
  cfg.use_copy = false;
  auto v = Vocab::build({{"alpha", "beta", "gamma", "delta", "eps"}}, 100, 1);
  GeneratorModel m(cfg, v, 3);
  for (const auto& p : m.params().params()) p->fill(0.0);
  const auto r = m.nll("intent: method context: alpha beta", "alpha gamma unknown eps");
  CHECK(r.tokens == 5);
  CHECK(r.per_token() == doctest::Approx(std::log(static_cast<double>(v.size()))).epsilon(1e-9));
  nn::Graph g;
  CHECK(g.scalar(m.loss(g, "intent: method", "beta")) == doctest::Approx(std::log(double(v.size()))));
}

TEST_CASE("memorization, determinism, output length and save/load") {
  const auto xs = memorization_fixture();
  const auto cfg = small_config();
  const auto vocab = build_vocab(xs, cfg);
  TrainingConfig tc;
  tc.learning_rate = 5e-3;
  tc.epochs = 40;
  tc.batch_size = 5;
  tc.dropout = {0.0, false};
  GeneratorModel a(cfg, vocab, 7);
  GeneratorModel untrained(cfg, vocab, 7);
  const auto report = train_generator(xs, a, tc);
  REQUIRE(report.epoch_nll.size() == 40);
  CHECK(report.epoch_nll.back() < 0.1 * report.epoch_nll.front());
  for (std::size_t e = 1; e < report.epoch_nll.size(); ++e) {
    CAPTURE(e);
    CHECK(report.epoch_nll[e] < report.epoch_nll[e - 1]);
  }
  CHECK(report.data_hash == data_hash(xs));

  DecodeParams greedy;
  greedy.beam_width = 1;
  int reproduced = 0;
  for (const auto& x : xs) {
    const auto out = a.generate_tokens(serialize_prompt(x.context, *x.attributes), greedy);
    reproduced += out == tokenize(x.target_sentence);
    const auto own = detokenize(out);
    const auto prompt = serialize_prompt(x.context, *x.attributes);
    CHECK(a.nll(prompt, own).per_token() <= untrained.nll(prompt, own).per_token());
  }
  CHECK(reproduced >= 9);

  GeneratorModel b(cfg, vocab, 7);
  CHECK(train_generator(xs, b, tc).epoch_nll == report.epoch_nll);

  const auto& x0 = xs[0];
  const auto g1 = a.generate(x0.context, *x0.attributes, {});
  CHECK(g1 == a.generate(x0.context, *x0.attributes, {}));
  DecodeParams longer;
  longer.max_tokens = 500;
  longer.block_repeat_trigrams = false;
  for (const auto& p : {greedy, DecodeParams{}, longer})
    CHECK(untrained.generate_tokens(serialize_prompt(x0.context, *x0.attributes), p).size() <= 75);

  const auto dir = std::filesystem::temp_directory_path() / "ccg_test_generator";
  std::filesystem::remove_all(dir);
  a.save(dir, {{"note", "x"}});
  auto loaded = GeneratorModel::load(dir);
  CHECK(loaded->vocab().tokens() == a.vocab().tokens());
  CHECK(loaded->generate(x0.context, *x0.attributes, {}) == g1);
  CHECK(io::read_json(dir / "meta.json").contains("seed"));

  CHECK(mean_nll(xs, a, false) < mean_nll(xs, a, true));
  CHECK_THROWS_AS(train_generator({}, a, tc), std::invalid_argument);
}

TEST_CASE("config round trips") {
  CHECK(to_json(generator_config_from_json(json::parse(to_json(GeneratorConfig{}).dump()))) ==
        to_json(GeneratorConfig{}));
  CHECK(to_json(training_config_from_json(json::parse(to_json(TrainingConfig{}).dump()))) ==
        to_json(TrainingConfig{}));
  CHECK(to_json(decode_params_from_json(json::parse(to_json(DecodeParams{}).dump()))) == to_json(DecodeParams{}));
  CHECK(TrainingConfig{}.learning_rate == 1e-5);
  CHECK(TrainingConfig{}.dropout.intent_drop == 0.5);
}
