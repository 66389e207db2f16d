#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccg/json_io.hpp"

namespace ccg::corpus {

struct BodySection {
  std::string section_title;
  std::vector<std::string> sentences;

  bool operator==(const BodySection&) const = default;
};

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract;
  std::vector<BodySection> body;
  int year = 0;
  std::vector<std::string> domains;

  bool operator==(const PaperRecord&) const = default;
};

struct SentenceRef {
  std::size_t section = 0;
  std::size_t sentence = 0;

  auto operator<=>(const SentenceRef&) const = default;
};

struct CitationMention {
  std::string citing_paper_id;
  SentenceRef where;
  std::vector<std::string> cited_paper_ids;
  /// Half-open [begin, end) byte offsets of each marker in the sentence.
  std::vector<std::pair<std::size_t, std::size_t>> marker_spans;

  bool operator==(const CitationMention&) const = default;
};

enum class RecordErrorCode { MissingId, MissingTitle, Malformed, DuplicateId };

class RecordError : public std::runtime_error {
 public:
  RecordError(RecordErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  RecordErrorCode code() const { return code_; }

 private:
  RecordErrorCode code_;
};

/// Per-record problem reported while a stream keeps going.
struct Diagnostic {
  std::string record;
  std::string message;
};

/// Rule-based segmentation on terminal punctuation. A boundary is placed after
/// `.`, `!` or `?` (plus any closing brackets/quotes) when followed by
/// whitespace and a character that is not lowercase, unless the token ending
/// in `.` is a known abbreviation ("et al.", "Fig.", "e.g.", ...) or an
/// initial ("J.").
std::vector<std::string> split_sentences(std::string_view text);

/// Raw document: {paper_id|id, title, abstract?, year?, domains?,
/// body?: [{section_title|section, paragraphs?: [..], text?: ".."}]}.
PaperRecord parse_paper_record(const json& raw);

/// marker string -> cited paper id, looked up per citing paper first and then
/// in the global table.
class Bibliography {
 public:
  Bibliography() = default;
  static Bibliography from_json(const json& j);
  static Bibliography load(const std::filesystem::path& path);

  void add(const std::string& citing_id, const std::string& marker, const std::string& cited_id);
  void add_global(const std::string& marker, const std::string& cited_id);
  const std::string* resolve(const std::string& citing_id, const std::string& marker) const;

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, std::string>> per_paper_;
  std::unordered_map<std::string, std::string> global_;
};

/// Bracketed marker groups such as "[3]" or "[3, 7]"; keys are split on ',' and ';'.
/// Unresolvable keys are reported through `diagnostics` and never produce ids.
std::vector<CitationMention> detect_citation_mentions(const PaperRecord& paper,
                                                      const Bibliography& bibliography,
                                                      std::vector<Diagnostic>* diagnostics = nullptr);

/// Rewrites every resolved marker span to the literal placeholder "[]" and
/// updates the spans so they point at the placeholders.
void normalize_citation_markers(PaperRecord& paper, std::vector<CitationMention>& mentions);

inline constexpr std::string_view kCitationPlaceholder = "[]";

struct CorpusEntry {
  PaperRecord paper;
  std::vector<CitationMention> mentions;

  bool operator==(const CorpusEntry&) const = default;
};

ordered_json to_json(const CorpusEntry& entry);
CorpusEntry entry_from_json(const json& j);

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<CorpusEntry> entries);

  /// Throws RecordError(DuplicateId) when the id is already present.
  void add(CorpusEntry entry);
  const CorpusEntry* find(std::string_view paper_id) const;
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  static Corpus load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<CorpusEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct IngestResult {
  Corpus corpus;
  std::vector<Diagnostic> diagnostics;
  std::size_t rejected = 0;
};

/// Parses raw records (in parallel), detects and normalizes citation markers.
/// Bad records are rejected with a diagnostic; the stream continues.
IngestResult ingest(const std::vector<json>& raw_records, const Bibliography& bibliography);

/// Collects raw records from a .jsonl file or every *.jsonl file in a directory
/// (sorted by name).
std::vector<json> read_raw_documents(const std::filesystem::path& input);

}  // namespace ccg::corpus
