#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/json_io.hpp"
#include "ccg/types.hpp"

namespace ccg::dataset {

struct DatasetConfig {
  std::size_t context_window = 5;
  std::size_t min_words = 5;
  std::size_t max_words = 200;
  int train_year_min = 2000;
  int train_year_max = 2020;
  /// Citing papers from this year feed validation/test.
  int eval_year = 2022;
  /// Share of eval-year citing papers routed to validation (rest: test).
  double validation_fraction = 0.5;
  std::size_t min_citing_sentences = 50;
  /// Empty means no domain restriction.
  std::vector<std::string> domain_filter;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

ordered_json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const json& j);

enum class Split { train = 0, validation = 1, test = 2 };
inline constexpr std::array<Split, 3> kAllSplits{Split::train, Split::validation, Split::test};
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct CitationInstance {
  std::string instance_id;
  std::string citing_paper_id;
  std::string cited_paper_id;
  std::string target_sentence;
  ContextBundle context;
  std::string section_title;
  corpus::SentenceRef where;
  std::optional<CitationAttributes> attributes;

  bool operator==(const CitationInstance&) const = default;
};

ordered_json to_json(const CitationInstance& inst);
CitationInstance instance_from_json(const json& j);

struct SplitManifest {
  std::map<std::string, Split> assignment;
  std::array<std::set<std::string>, 3> citing_ids;
  std::array<std::set<std::string>, 3> cited_ids;

  /// Recomputes the provenance sets from `assignment`.
  void rebuild_provenance(const std::vector<CitationInstance>& instances);
};

struct Violation {
  std::string instance_a;
  std::string instance_b;
  std::string shared_paper_id;
  /// "citing" or "cited"
  std::string role;
};

/// Whitespace-delimited tokens.
std::size_t word_count(std::string_view sentence);

/// Papers in the year range and domain filter cited by at least
/// min_citing_sentences distinct sentences. Sentences are counted before the
/// length filter.
std::set<std::string> filter_training_cited_papers(const corpus::Corpus& corpus, const DatasetConfig& config);

struct BuildResult {
  std::vector<CitationInstance> instances;
  std::vector<corpus::Diagnostic> diagnostics;
  std::size_t dropped_multi_citation = 0;
  std::size_t dropped_length = 0;
  std::size_t dropped_missing_cited = 0;
  std::size_t dropped_ineligible = 0;
};

/// One instance per single-citation sentence whose length is within bounds.
/// `eligible_cited` restricts the cited paper; nullptr accepts every paper.
BuildResult build_instances(const corpus::Corpus& corpus, const std::set<std::string>* eligible_cited,
                            const DatasetConfig& config);

/// Validation or test for an eval-year citing paper, from a hash of its id.
Split eval_split_for(std::string_view citing_paper_id, double validation_fraction);

/// Desired split from the citing paper's year: eval_year goes to validation
/// or test by a hash of the citing id, the training year range goes to train
/// when the cited paper is eligible; everything else is unassigned.
std::vector<std::optional<Split>> initial_assignment(const std::vector<CitationInstance>& instances,
                                                      const corpus::Corpus& corpus,
                                                      const std::set<std::string>& eligible_cited,
                                                      const DatasetConfig& config);

/// Keeps test, then validation, then train instances, dropping any
/// lower-priority instance whose citing or cited paper already appears in a
/// higher-priority split. Unassigned instances are left out.
SplitManifest decouple_splits(const std::vector<CitationInstance>& instances,
                              const std::vector<std::optional<Split>>& initial);

/// One violation per cross-split instance pair per shared paper id.
std::vector<Violation> audit_decoupling(const SplitManifest& manifest,
                                        const std::vector<CitationInstance>& instances);

struct SplitStats {
  std::size_t cited_papers = 0;
  std::size_t citing_papers = 0;
  std::size_t sentences = 0;
  std::array<std::size_t, kIntentCount> intents{};
  std::size_t unlabeled = 0;

  bool operator==(const SplitStats&) const = default;
};

struct DatasetStatistics {
  std::array<SplitStats, 3> splits{};
  bool operator==(const DatasetStatistics&) const = default;
};

DatasetStatistics dataset_statistics(const SplitManifest& manifest, const std::vector<CitationInstance>& instances);
ordered_json to_json(const DatasetStatistics& stats);
/// Plain-text table in the layout of the dataset statistics table.
std::string render_statistics(const DatasetStatistics& stats);

/// Files: manifest.jsonl, {train,validation,test}.jsonl, stats.json.
struct DatasetFiles {
  SplitManifest manifest;
  std::vector<CitationInstance> instances;
};

void save_dataset(const std::filesystem::path& dir, const SplitManifest& manifest,
                  const std::vector<CitationInstance>& instances);
DatasetFiles load_dataset(const std::filesystem::path& dir);
std::vector<CitationInstance> load_split(const std::filesystem::path& dir, Split split);
SplitManifest load_manifest(const std::filesystem::path& manifest_file,
                            const std::vector<CitationInstance>& instances);

/// Filter, build, assign and decouple in one call.
struct DatasetBuild {
  SplitManifest manifest;
  std::vector<CitationInstance> instances;
  BuildResult build;
  std::size_t eligible_cited = 0;
};
DatasetBuild build_dataset(const corpus::Corpus& corpus, const DatasetConfig& config);

}  // namespace ccg::dataset
