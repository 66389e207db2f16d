#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <thread>

#include "ccg/service.hpp"
#include "httplib.h"

using namespace ccg;
using namespace ccg::service;
namespace fs = std::filesystem;

namespace {

encoder::EncoderConfig tiny() {
  encoder::EncoderConfig cfg;
  cfg.dim = 16;
  cfg.buckets = 256;
  cfg.max_tokens = 64;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ccg_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Resources make_resources(bool with_generator = true, bool with_suggester = true) {
  Resources r;
  r.corpus = std::make_unique<corpus::Corpus>();
  corpus::CorpusEntry e;
  e.paper.paper_id = "cited1";
  e.paper.title = "Graph neural networks for proteins";
  e.paper.abstract = "We apply graph neural networks to protein folding.";
  e.paper.body = {{"Intro", {"Proteins fold quickly.", "Graph models help.", "We test many datasets.",
                             "Results are strong.", "Code is public.", "Future work remains."}}};
  r.corpus->add(e);
  if (with_suggester) {
    r.suggester = std::make_unique<suggester::SuggesterModels>();
    r.suggester->intent = std::make_unique<suggester::IntentPredictor>(tiny());
    r.suggester->keyword_encoder = encoder::TextEncoder::pretrained(tiny());
    r.suggester->sentence_encoder = encoder::TextEncoder::pretrained(tiny());
  }
  if (with_generator) {
    generator::GeneratorConfig gc;
    gc.dim = 16;
    auto vocab = generator::Vocab::build({{"we", "use", "graph", "models", "[]", "."}}, 100, 1);
    r.generator = std::make_unique<generator::GeneratorModel>(gc, vocab, 3);
  }
  r.decode.beam_width = 1;
  r.decode.max_tokens = 4;
  dataset::CitationInstance inst;
  inst.instance_id = "p:0:3";
  inst.citing_paper_id = "p";
  inst.cited_paper_id = "cited1";
  inst.target_sentence = "We use [] here.";
  inst.context = {{"Protein folding matters.", "Graph neural networks help protein structure tasks."},
                  e.paper.title, e.paper.abstract};
  r.instances[inst.instance_id] = inst;
  return r;
}

const json kContextRequest = {{"context_text", "Protein folding matters. Graph neural networks help protein tasks."},
                              {"cited_paper_id", "cited1"}};

FeedbackRecord record(std::vector<std::string> order, Preference inf, Preference coh, Preference intent) {
  FeedbackRecord r;
  r.request_id = "r";
  r.presentation_order = std::move(order);
  r.preferences = {inf, coh, intent};
  return r;
}

}  // namespace

TEST_CASE("suggest: success, inline paper, errors") {
  auto res = make_resources();
  FeedbackStore store(fresh_dir("svc_suggest"));
  ServiceApi api(res, store, 1);

  auto ok = api.suggest(kContextRequest);
  REQUIRE(ok.status == 200);
  CHECK(ok.body["v"] == kSchemaVersion);
  CHECK(ok.body["keywords"].size() >= 1);
  CHECK(ok.body["keywords"].size() <= 5);
  CHECK(ok.body["sentences"].size() == 5);
  CHECK(ok.body["intent"]["probabilities"].size() == 3);
  for (const auto& k : ok.body["keywords"]) CHECK(k.contains("score"));
  CHECK(api.suggest(kContextRequest).body == ok.body);

  auto by_instance = api.suggest({{"instance_id", "p:0:3"}});
  CHECK(by_instance.status == 200);
  CHECK(by_instance.body["sentences"].size() == 5);

  auto inline_paper = api.suggest({{"context_text", "Graph models for proteins."},
                                   {"paper", {{"title", "A title"}, {"abstract", "An abstract."}, {"body", json::array()}}}});
  REQUIRE(inline_paper.status == 200);
  CHECK(inline_paper.body["sentences"].empty());
  CHECK(!inline_paper.body["keywords"].empty());

  CHECK(api.suggest({{"context_text", "x"}, {"cited_paper_id", "nope"}}).status == 404);
  CHECK(api.suggest({{"instance_id", "nope"}}).status == 404);
  CHECK(api.suggest(json::object()).status == 422);
  CHECK(api.suggest({{"context_text", ""}, {"paper", {{"title", ""}}}}).status == 422);
  CHECK(api.handle("POST", "/suggest", "{not json").status == 400);
  CHECK(api.handle("POST", "/nowhere", "{}").status == 404);
  CHECK(api.handle("DELETE", "/suggest", "{}").status == 405);

  auto no_models = make_resources(true, false);
  ServiceApi bare(no_models, store, 1);
  CHECK(bare.suggest(kContextRequest).status == 503);
}

TEST_CASE("generate: contract, determinism, errors") {
  auto res = make_resources();
  FeedbackStore store(fresh_dir("svc_generate"));
  ServiceApi api(res, store, 2);
  json req = kContextRequest;
  req["attributes"] = {{"intent", "method"}, {"keywords", {"graph models"}}, {"sentences", json::array()}};
  auto a = api.generate(req);
  REQUIRE(a.status == 200);
  CHECK(a.body["presentation_order"] == json::array({"conditional"}));
  CHECK(!a.body.contains("unconditional_sentence"));
  CHECK(generator::tokenize(a.body["conditional_sentence"].get<std::string>()).size() <= 75);
  auto b = api.generate(req);
  CHECK(b.body["conditional_sentence"] == a.body["conditional_sentence"]);
  CHECK(b.body["request_id"] != a.body["request_id"]);
  CHECK(store.find_request(a.body["request_id"]).has_value());

  json bad = req;
  bad["attributes"]["intent"] = "nonsense";
  CHECK(api.generate(bad).status == 422);
  bad = req;
  bad["attributes"]["keywords"] = "not a list";
  CHECK(api.handle("POST", "/generate", bad.dump()).status == 422);

  auto no_gen = make_resources(false);
  ServiceApi bare(no_gen, store, 2);
  CHECK(bare.generate(req).status == 503);
}

TEST_CASE("compare_unconditional presentation order is balanced and recorded") {
  auto res = make_resources();
  FeedbackStore store(fresh_dir("svc_order"));
  ServiceApi api(res, store, 3);
  json req = kContextRequest;
  req["compare_unconditional"] = true;
  std::size_t conditional_first = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto r = api.generate(req);
    REQUIRE(r.status == 200);
    REQUIRE(r.body.contains("unconditional_sentence"));
    const auto order = r.body["presentation_order"].get<std::vector<std::string>>();
    REQUIRE(order.size() == 2);
    REQUIRE(order[0] != order[1]);
    conditional_first += order[0] == "conditional";
    REQUIRE(store.find_request(r.body["request_id"])->presentation_order == order);
  }
  CHECK(std::abs(conditional_first / double(n) - 0.5) <= 0.05);
}

TEST_CASE("feedback: validation, de-randomization and durable reload") {
  const auto dir = fresh_dir("svc_feedback");
  auto res = make_resources();
  std::string single_id, pair_id;
  std::vector<std::string> pair_order;
  {
    FeedbackStore store(dir);
    ServiceApi api(res, store, 4);
    single_id = api.generate(kContextRequest).body["request_id"];
    json req = kContextRequest;
    req["compare_unconditional"] = true;
    auto r = api.generate(req);
    pair_id = r.body["request_id"];
    pair_order = r.body["presentation_order"].get<std::vector<std::string>>();

    const json prefs = {{"informative", "system_a"}, {"coherent", "system_b"}, {"intent_matched", "neutral"}};
    CHECK(api.feedback({{"request_id", "req-unknown"}, {"preferences", prefs}}).status == 404);
    CHECK(api.feedback({{"preferences", prefs}}).status == 422);
    CHECK(api.feedback({{"request_id", pair_id}, {"preferences", {{"informative", "system_a"}}}}).status == 422);
    CHECK(api.feedback({{"request_id", pair_id},
                        {"preferences", {{"informative", "x"}, {"coherent", "neutral"}, {"intent_matched", "neutral"}}}})
              .status == 422);
    CHECK(api.feedback({{"request_id", single_id}, {"preferences", prefs}}).status == 422);
    auto accepted = api.feedback({{"request_id", pair_id}, {"preferences", prefs}});
    CHECK(accepted.status == 200);
    CHECK(api.feedback({{"request_id", single_id},
                        {"preferences", {{"informative", "system_a"}, {"coherent", "neutral"}, {"intent_matched", "neutral"}}}})
              .status == 200);
    CHECK(store.feedback().size() == 2);
  }
  FeedbackStore reopened(dir);
  const auto records = reopened.feedback();
  REQUIRE(records.size() == 2);
  CHECK(records[0].request_id == pair_id);
  CHECK(records[0].presentation_order == pair_order);
  CHECK(reopened.find_request(single_id).has_value());
  ServiceApi api(res, reopened, 4);
  const auto summary = api.feedback_summary();
  REQUIRE(summary.status == 200);
  CHECK(summary.body["n"] == 2);
  // informative: pair record picked system_a, single record picked the only card.
  const double pair_a_conditional = pair_order[0] == "conditional" ? 50.0 : 0.0;
  CHECK(summary.body["criteria"]["informative"]["conditional"] == doctest::Approx(50.0 + pair_a_conditional));
  CHECK(summary.body["criteria"]["coherent"]["neutral"] == doctest::Approx(50.0));
  CHECK(summary.body["criteria"]["intent_matched"]["neutral"] == doctest::Approx(100.0));
  CHECK(summarize(reopened.feedback()).percent == summarize(records).percent);
}

TEST_CASE("summary: empty, hand-composed and the published-shape fixture") {
  auto zero = summarize({});
  CHECK(zero.n == 0);
  for (const auto& row : zero.percent) CHECK(row == std::array<double, 3>{0, 0, 0});

  using P = Preference;
  const std::vector<std::string> cu{"conditional", "unconditional"}, uc{"unconditional", "conditional"};
  std::vector<FeedbackRecord> three{record(cu, P::system_a, P::system_b, P::neutral),
                                    record(uc, P::system_a, P::system_b, P::system_b),
                                    record(uc, P::neutral, P::system_a, P::system_b)};
  auto s = summarize(three);
  CHECK(s.n == 3);
  // informative: cond, uncond, neutral
  CHECK(s.percent[0][0] == doctest::Approx(100.0 / 3));
  CHECK(s.percent[0][1] == doctest::Approx(100.0 / 3));
  CHECK(s.percent[0][2] == doctest::Approx(100.0 / 3));
  // coherent: uncond, cond, uncond
  CHECK(s.percent[1][0] == doctest::Approx(100.0 / 3));
  CHECK(s.percent[1][2] == doctest::Approx(200.0 / 3));
  // intent_matched: neutral, cond, cond
  CHECK(s.percent[2][0] == doctest::Approx(200.0 / 3));
  CHECK(s.percent[2][1] == doctest::Approx(100.0 / 3));

  // 45 ratings: informative 20/13/12, coherent 23/8/14, intent-matched 23/12/10.
  std::vector<FeedbackRecord> fixture;
  const std::array<std::array<int, 3>, 3> counts{{{20, 13, 12}, {23, 8, 14}, {23, 12, 10}}};
  for (int i = 0; i < 45; ++i) {
    const auto& order = i % 2 ? cu : uc;
    std::array<P, 3> prefs{};
    for (std::size_t c = 0; c < 3; ++c) {
      const int k = i < counts[c][0] ? 0 : i < counts[c][0] + counts[c][1] ? 1 : 2;
      const bool cond_is_a = order[0] == "conditional";
      prefs[c] = k == 1 ? P::neutral : ((k == 0) == cond_is_a ? P::system_a : P::system_b);
    }
    fixture.push_back(record(order, prefs[0], prefs[1], prefs[2]));
  }
  const auto table = render_summary(summarize(fixture));
  for (const char* v : {"44.44", "28.89", "26.67", "51.11", "17.78", "31.11", "22.22"})
    CHECK(table.find(v) != std::string::npos);
  CHECK(table.find("coherent") != std::string::npos);
  CHECK(to_json(summarize(fixture))["criteria"]["coherent"]["conditional"] == doctest::Approx(51.111).epsilon(1e-4));
}

TEST_CASE("record json round trips and preference parsing") {
  CHECK(parse_preference("system_a") == Preference::system_a);
  CHECK(parse_preference("neutral") == Preference::neutral);
  CHECK(!parse_preference("first").has_value());
  auto r = record({"unconditional", "conditional"}, Preference::system_b, Preference::neutral, Preference::system_a);
  r.selected = {Intent::result, {"k"}, {}};
  r.timestamp = "2024-01-01T00:00:00Z";
  const auto back = feedback_record_from_json(json::parse(to_json(r).dump()));
  CHECK(back.preferences == r.preferences);
  CHECK(back.presentation_order == r.presentation_order);
  CHECK(back.selected == r.selected);
  RequestRecord q{"req-1", {"conditional"}, {Intent::method, {}, {"s."}}, "t"};
  const auto qb = request_record_from_json(json::parse(to_json(q).dump()));
  CHECK(qb.request_id == q.request_id);
  CHECK(qb.attributes == q.attributes);
}

TEST_CASE("live HTTP round trip") {
  auto res = make_resources();
  FeedbackStore store(fresh_dir("svc_http"));
  ServiceApi api(res, store, 5);
  httplib::Server server;
  register_routes(server, api);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["generator_loaded"] == true);
  auto paper = client.Get("/paper/cited1");
  REQUIRE(paper);
  CHECK(json::parse(paper->body)["paper"]["paper_id"] == "cited1");
  CHECK(client.Get("/paper/missing")->status == 404);

  auto sug = client.Post("/suggest", kContextRequest.dump(), "application/json");
  REQUIRE(sug);
  CHECK(sug->status == 200);
  const auto suggestion = json::parse(sug->body);
  json gen = kContextRequest;
  gen["attributes"] = {{"intent", suggestion["intent"]["label"]},
                       {"keywords", {suggestion["keywords"][0]["text"]}},
                       {"sentences", {suggestion["sentences"][0]["text"]}}};
  gen["compare_unconditional"] = true;
  auto g = client.Post("/generate", gen.dump(), "application/json");
  REQUIRE(g);
  CHECK(g->status == 200);
  const auto id = json::parse(g->body)["request_id"];
  json fb = {{"request_id", id},
             {"preferences", {{"informative", "system_a"}, {"coherent", "neutral"}, {"intent_matched", "system_b"}}},
             {"selected", gen["attributes"]}};
  auto f = client.Post("/feedback", fb.dump(), "application/json");
  REQUIRE(f);
  CHECK(f->status == 200);
  CHECK(client.Post("/feedback", "garbage", "application/json")->status == 400);
  auto summary = client.Get("/feedback/summary");
  REQUIRE(summary);
  CHECK(json::parse(summary->body)["n"] == 1);
  CHECK(store.feedback().size() == 1);
  CHECK(store.feedback()[0].selected.keywords == gen["attributes"]["keywords"].get<std::vector<std::string>>());

  server.stop();
  t.join();
}
