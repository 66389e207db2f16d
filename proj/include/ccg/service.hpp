#pragma once

// JSON-over-HTTP boundary for the suggest/select/generate workflow plus an
// append-only preference store. Handlers are plain functions of the request
// body so they can be exercised without a socket.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/generator.hpp"
#include "ccg/pipeline.hpp"
#include "ccg/suggester.hpp"

namespace httplib {
class Server;
}

namespace ccg::service {

inline constexpr int kSchemaVersion = 1;

struct Response {
  int status = 200;
  ordered_json body;
};

enum class Preference { system_a, system_b, neutral };
std::string_view to_string(Preference p);
std::optional<Preference> parse_preference(std::string_view text);

inline constexpr std::array<std::string_view, 3> kCriteria{"informative", "coherent", "intent_matched"};

/// What the service generated for one /generate call.
struct RequestRecord {
  std::string request_id;
  /// System shown first ("system_a") and second; "conditional" or "unconditional".
  std::vector<std::string> presentation_order;
  CitationAttributes attributes;
  std::string timestamp;
};

struct FeedbackRecord {
  std::string request_id;
  std::array<Preference, 3> preferences{Preference::neutral, Preference::neutral, Preference::neutral};
  CitationAttributes selected;
  /// Copied from the request so a record can be de-randomized on its own.
  std::vector<std::string> presentation_order;
  std::string timestamp;
};

ordered_json to_json(const RequestRecord& r);
RequestRecord request_record_from_json(const json& j);
ordered_json to_json(const FeedbackRecord& r);
FeedbackRecord feedback_record_from_json(const json& j);

/// requests.jsonl and feedback.jsonl under one directory; existing lines are
/// loaded on construction and every write is appended and flushed under a lock.
class FeedbackStore {
 public:
  explicit FeedbackStore(std::filesystem::path dir);

  void record_request(const RequestRecord& record);
  std::optional<RequestRecord> find_request(const std::string& request_id) const;
  void append(const FeedbackRecord& record);
  std::vector<FeedbackRecord> feedback() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, RequestRecord> requests_;
  std::vector<FeedbackRecord> feedback_;
};

/// Per criterion: percentages of conditional / neutral / unconditional wins.
struct FeedbackSummary {
  std::size_t n = 0;
  std::array<std::array<double, 3>, 3> percent{};
};

FeedbackSummary summarize(const std::vector<FeedbackRecord>& records);
ordered_json to_json(const FeedbackSummary& s);
std::string render_summary(const FeedbackSummary& s);

/// Read-only model handles; any of them may be absent.
struct Resources {
  std::unique_ptr<corpus::Corpus> corpus;
  std::unique_ptr<suggester::SuggesterModels> suggester;
  std::unique_ptr<generator::GeneratorModel> generator;
  std::map<std::string, dataset::CitationInstance> instances;
  suggester::ExtractorConfig extractor;
  generator::DecodeParams decode;
};

/// Loads whatever the settings name; empty paths leave the handle absent.
Resources load_resources(const pipeline::ServiceSettings& settings, const pipeline::PipelineConfig& config);

class ServiceApi {
 public:
  ServiceApi(const Resources& resources, FeedbackStore& store, std::uint64_t seed);

  Response suggest(const json& request) const;
  Response generate(const json& request);
  Response feedback(const json& request);
  Response feedback_summary() const;
  Response paper(const std::string& paper_id) const;
  Response health() const;

  /// Routes a raw request; bodies that are not JSON get 400.
  Response handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  struct Source {
    ContextBundle context;
    std::vector<std::string> body;
  };
  /// Context plus cited body from a request, or an error response.
  std::variant<Source, Response> resolve_source(const json& request) const;

  const Resources& res_;
  FeedbackStore& store_;
  std::uint64_t seed_;
  std::atomic<std::uint64_t> counter_{0};
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

void register_routes(httplib::Server& server, ServiceApi& api);

/// Blocks until the server stops.
void serve(ServiceApi& api, const std::string& host, int port);

}  // namespace ccg::service
