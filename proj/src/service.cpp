#include "ccg/service.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "httplib.h"

namespace ccg::service {

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

Response error(int status, const std::string& message) {
  return {status, {{"v", kSchemaVersion}, {"error", message}}};
}

Response ok(ordered_json body) {
  ordered_json out{{"v", kSchemaVersion}};
  for (auto& [k, v] : body.items()) out[k] = v;
  return {200, out};
}

void append_line(const std::filesystem::path& path, const ordered_json& row) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << row.dump() << '\n';
  out.flush();
}

std::vector<std::string> string_list(const json& j, const char* what) {
  std::vector<std::string> out;
  if (j.is_string()) return corpus::split_sentences(j.get<std::string>());
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be a string or a list of strings");
  for (const auto& v : j) {
    if (!v.is_string()) throw std::invalid_argument(std::string(what) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Preference p) {
  switch (p) {
    case Preference::system_a:
      return "system_a";
    case Preference::system_b:
      return "system_b";
    case Preference::neutral:
      return "neutral";
  }
  return "?";
}

std::optional<Preference> parse_preference(std::string_view text) {
  for (auto p : {Preference::system_a, Preference::system_b, Preference::neutral})
    if (text == to_string(p)) return p;
  return std::nullopt;
}

ordered_json to_json(const RequestRecord& r) {
  return {{"v", kSchemaVersion},
          {"request_id", r.request_id},
          {"presentation_order", r.presentation_order},
          {"attributes", ccg::to_json(r.attributes)},
          {"timestamp", r.timestamp}};
}

RequestRecord request_record_from_json(const json& j) {
  RequestRecord r;
  r.request_id = j.at("request_id").get<std::string>();
  r.presentation_order = j.at("presentation_order").get<std::vector<std::string>>();
  r.attributes = attributes_from_json(j.value("attributes", json::object()));
  r.timestamp = j.value("timestamp", "");
  return r;
}

ordered_json to_json(const FeedbackRecord& r) {
  ordered_json prefs;
  for (std::size_t c = 0; c < kCriteria.size(); ++c) prefs[std::string(kCriteria[c])] = to_string(r.preferences[c]);
  return {{"v", kSchemaVersion},
          {"request_id", r.request_id},
          {"preferences", prefs},
          {"selected", ccg::to_json(r.selected)},
          {"presentation_order", r.presentation_order},
          {"timestamp", r.timestamp}};
}

FeedbackRecord feedback_record_from_json(const json& j) {
  FeedbackRecord r;
  r.request_id = j.at("request_id").get<std::string>();
  const auto& prefs = j.at("preferences");
  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    const auto p = parse_preference(prefs.at(std::string(kCriteria[c])).get<std::string>());
    if (!p) throw std::invalid_argument("bad preference for " + std::string(kCriteria[c]));
    r.preferences[c] = *p;
  }
  r.selected = attributes_from_json(j.value("selected", json::object()));
  r.presentation_order = j.value("presentation_order", std::vector<std::string>{});
  r.timestamp = j.value("timestamp", "");
  return r;
}

FeedbackStore::FeedbackStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  if (std::filesystem::exists(dir_ / "requests.jsonl"))
    io::for_each_jsonl(dir_ / "requests.jsonl", [&](std::size_t, const json& j) {
      auto r = request_record_from_json(j);
      requests_[r.request_id] = std::move(r);
    });
  if (std::filesystem::exists(dir_ / "feedback.jsonl"))
    io::for_each_jsonl(dir_ / "feedback.jsonl",
                       [&](std::size_t, const json& j) { feedback_.push_back(feedback_record_from_json(j)); });
}

void FeedbackStore::record_request(const RequestRecord& record) {
  std::lock_guard lock(mu_);
  append_line(dir_ / "requests.jsonl", to_json(record));
  requests_[record.request_id] = record;
}

std::optional<RequestRecord> FeedbackStore::find_request(const std::string& request_id) const {
  std::lock_guard lock(mu_);
  auto it = requests_.find(request_id);
  if (it == requests_.end()) return std::nullopt;
  return it->second;
}

void FeedbackStore::append(const FeedbackRecord& record) {
  std::lock_guard lock(mu_);
  append_line(dir_ / "feedback.jsonl", to_json(record));
  feedback_.push_back(record);
}

std::vector<FeedbackRecord> FeedbackStore::feedback() const {
  std::lock_guard lock(mu_);
  return feedback_;
}

FeedbackSummary summarize(const std::vector<FeedbackRecord>& records) {
  FeedbackSummary s;
  s.n = records.size();
  std::array<std::array<std::size_t, 3>, 3> counts{};
  for (const auto& r : records) {
    for (std::size_t c = 0; c < kCriteria.size(); ++c) {
      std::size_t column = 1;
      if (r.preferences[c] != Preference::neutral) {
        const std::size_t shown = r.preferences[c] == Preference::system_a ? 0 : 1;
        const std::string system = shown < r.presentation_order.size() ? r.presentation_order[shown] : "conditional";
        column = system == "conditional" ? 0 : 2;
      }
      ++counts[c][column];
    }
  }
  if (s.n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < 3; ++k)
        s.percent[c][k] = 100.0 * static_cast<double>(counts[c][k]) / static_cast<double>(s.n);
  return s;
}

ordered_json to_json(const FeedbackSummary& s) {
  ordered_json criteria;
  for (std::size_t c = 0; c < kCriteria.size(); ++c)
    criteria[std::string(kCriteria[c])] = {
        {"conditional", s.percent[c][0]}, {"neutral", s.percent[c][1]}, {"unconditional", s.percent[c][2]}};
  return {{"n", s.n}, {"criteria", criteria}};
}

std::string render_summary(const FeedbackSummary& s) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Criterion" << std::right << std::setw(13) << "conditional" << std::setw(10)
      << "neutral" << std::setw(15) << "unconditional" << '\n'
      << std::fixed << std::setprecision(2);
  for (std::size_t c = 0; c < kCriteria.size(); ++c)
    out << std::left << std::setw(16) << kCriteria[c] << std::right << std::setw(13) << s.percent[c][0]
        << std::setw(10) << s.percent[c][1] << std::setw(15) << s.percent[c][2] << '\n';
  out << "n = " << s.n << '\n';
  return out.str();
}

Resources load_resources(const pipeline::ServiceSettings& settings, const pipeline::PipelineConfig& config) {
  Resources r;
  r.extractor = config.suggester.extractor;
  r.decode = config.generator.decode;
  if (!settings.corpus.empty()) r.corpus = std::make_unique<corpus::Corpus>(corpus::Corpus::load(settings.corpus));
  if (!settings.suggester.empty())
    r.suggester = std::make_unique<suggester::SuggesterModels>(suggester::SuggesterModels::load(settings.suggester));
  if (!settings.generator.empty()) r.generator = generator::GeneratorModel::load(settings.generator);
  if (!settings.dataset.empty())
    for (auto& inst : dataset::load_dataset(settings.dataset).instances) r.instances[inst.instance_id] = inst;
  return r;
}

ServiceApi::ServiceApi(const Resources& resources, FeedbackStore& store, std::uint64_t seed)
    : res_(resources), store_(store), seed_(seed), rng_(seed) {}

std::variant<ServiceApi::Source, Response> ServiceApi::resolve_source(const json& request) const {
  if (!request.is_object()) return error(422, "request must be a JSON object");
  Source src;
  if (auto it = request.find("instance_id"); it != request.end()) {
    auto inst = res_.instances.find(it->get<std::string>());
    if (inst == res_.instances.end()) return error(404, "unknown instance " + it->get<std::string>());
    src.context = inst->second.context;
    if (res_.corpus)
      if (const auto* e = res_.corpus->find(inst->second.cited_paper_id)) src.body = oracle::body_sentences(e->paper);
    return src;
  }
  if (auto it = request.find("context"); it != request.end()) {
    src.context = context_from_json(*it);
  } else if (auto text = request.find("context_text"); text != request.end()) {
    if (!text->is_string()) return error(422, "context_text must be a string");
    src.context.local_context = corpus::split_sentences(text->get<std::string>());
  }
  if (auto it = request.find("cited_paper_id"); it != request.end()) {
    if (!it->is_string()) return error(422, "cited_paper_id must be a string");
    if (!res_.corpus) return error(503, "no corpus loaded");
    const auto* e = res_.corpus->find(it->get<std::string>());
    if (!e) return error(404, "unknown paper " + it->get<std::string>());
    src.context.cited_title = e->paper.title;
    src.context.cited_abstract = e->paper.abstract;
    src.body = oracle::body_sentences(e->paper);
  } else if (auto p = request.find("paper"); p != request.end()) {
    if (!p->is_object()) return error(422, "paper must be an object");
    src.context.cited_title = p->value("title", "");
    src.context.cited_abstract = p->value("abstract", "");
    if (auto b = p->find("body"); b != p->end() && !b->is_null()) src.body = string_list(*b, "paper.body");
  }
  const bool empty_context = std::all_of(src.context.local_context.begin(), src.context.local_context.end(),
                                         [](const auto& s) { return s.empty(); });
  if (empty_context && src.context.cited_title.empty() && src.context.cited_abstract.empty() && src.body.empty())
    return error(422, "empty context and empty cited content");
  return src;
}

Response ServiceApi::suggest(const json& request) const {
  if (!res_.suggester) return error(503, "suggestion models not loaded");
  auto src = resolve_source(request);
  if (auto* r = std::get_if<Response>(&src)) return *r;
  const auto& s = std::get<Source>(src);
  const auto bundle = suggester::suggest(s.context, s.body, *res_.suggester, res_.extractor, suggester::SuggestMode::ui);
  return ok(suggester::to_json(bundle));
}

Response ServiceApi::generate(const json& request) {
  if (!res_.generator) return error(503, "generator model not loaded");
  auto src = resolve_source(request);
  if (auto* r = std::get_if<Response>(&src)) return *r;
  const auto& s = std::get<Source>(src);
  CitationAttributes attrs;
  auto decode = res_.decode;
  try {
    attrs = attributes_from_json(request.value("attributes", json::object()));
    if (auto d = request.find("decode"); d != request.end()) decode = generator::decode_params_from_json(*d);
  } catch (const std::exception& e) {
    return error(422, std::string("malformed attributes or decode params: ") + e.what());
  }
  const bool compare = request.value("compare_unconditional", false);

  RequestRecord record;
  record.request_id = "req-" + io::hex64(io::fnv1a64(std::to_string(seed_) + ":" + std::to_string(counter_++)));
  record.attributes = attrs;
  record.timestamp = now_iso();
  ordered_json body;
  body["request_id"] = record.request_id;
  body["conditional_sentence"] = res_.generator->generate(s.context, attrs, decode);
  if (compare) {
    body["unconditional_sentence"] = res_.generator->generate(s.context, CitationAttributes{}, decode);
    bool swap;
    {
      std::lock_guard lock(rng_mu_);
      swap = std::bernoulli_distribution(0.5)(rng_);
    }
    record.presentation_order = swap ? std::vector<std::string>{"unconditional", "conditional"}
                                     : std::vector<std::string>{"conditional", "unconditional"};
  } else {
    record.presentation_order = {"conditional"};
  }
  body["presentation_order"] = record.presentation_order;
  store_.record_request(record);
  return ok(body);
}

Response ServiceApi::feedback(const json& request) {
  if (!request.is_object()) return error(422, "request must be a JSON object");
  auto id = request.find("request_id");
  if (id == request.end() || !id->is_string()) return error(422, "request_id is required");
  const auto prior = store_.find_request(id->get<std::string>());
  if (!prior) return error(404, "unknown request " + id->get<std::string>());
  FeedbackRecord record;
  record.request_id = prior->request_id;
  const auto prefs = request.find("preferences");
  if (prefs == request.end() || !prefs->is_object()) return error(422, "preferences must be an object");
  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    auto v = prefs->find(std::string(kCriteria[c]));
    if (v == prefs->end() || !v->is_string()) return error(422, "missing preference " + std::string(kCriteria[c]));
    const auto p = parse_preference(v->get<std::string>());
    if (!p) return error(422, "preference must be system_a, system_b or neutral");
    if (*p == Preference::system_b && prior->presentation_order.size() < 2)
      return error(422, "request " + record.request_id + " showed a single system");
    record.preferences[c] = *p;
  }
  auto selected = request.find("selected");
  try {
    record.selected = selected != request.end() ? attributes_from_json(*selected) : prior->attributes;
  } catch (const std::exception& e) {
    return error(422, std::string("malformed selected attributes: ") + e.what());
  }
  record.presentation_order = prior->presentation_order;
  record.timestamp = now_iso();
  store_.append(record);
  return ok({{"request_id", record.request_id}, {"accepted", true}});
}

Response ServiceApi::feedback_summary() const {
  const auto s = summarize(store_.feedback());
  auto body = to_json(s);
  body["table"] = render_summary(s);
  return ok(body);
}

Response ServiceApi::paper(const std::string& paper_id) const {
  if (!res_.corpus) return error(503, "no corpus loaded");
  const auto* e = res_.corpus->find(paper_id);
  if (!e) return error(404, "unknown paper " + paper_id);
  return ok({{"paper", corpus::to_json(*e)}});
}

Response ServiceApi::health() const {
  return ok({{"status", "ok"},
             {"corpus_papers", res_.corpus ? res_.corpus->size() : 0},
             {"suggester_loaded", res_.suggester != nullptr},
             {"generator_loaded", res_.generator != nullptr}});
}

Response ServiceApi::handle(std::string_view method, std::string_view path, std::string_view body) {
  try {
    if (method == "GET") {
      if (path == "/health") return health();
      if (path == "/feedback/summary") return feedback_summary();
      if (path.starts_with("/paper/")) return paper(std::string(path.substr(7)));
      return error(404, "no route " + std::string(path));
    }
    if (method != "POST") return error(405, "method not allowed");
    json request;
    try {
      request = json::parse(body);
    } catch (const json::parse_error& e) {
      return error(400, std::string("body is not JSON: ") + e.what());
    }
    if (path == "/suggest") return suggest(request);
    if (path == "/generate") return generate(request);
    if (path == "/feedback") return feedback(request);
    return error(404, "no route " + std::string(path));
  } catch (const std::invalid_argument& e) {
    return error(422, e.what());
  } catch (const json::exception& e) {
    return error(422, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

void register_routes(httplib::Server& server, ServiceApi& api) {
  auto reply = [](httplib::Response& out, const Response& r) {
    out.status = r.status;
    out.set_content(r.body.dump(), "application/json");
  };
  for (const char* route : {"/suggest", "/generate", "/feedback"})
    server.Post(route, [&api, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, api.handle("POST", req.path, req.body));
    });
  server.Get(R"(/(health|feedback/summary|paper/.+))", [&api, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, api.handle("GET", req.path, ""));
  });
}

void serve(ServiceApi& api, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, api);
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace ccg::service
