#pragma once

// One JSON configuration for every stage, and the training stages shared by
// the CLI, the service and the tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/desk_corpus.hpp"
#include "ccg/encoder.hpp"
#include "ccg/generator.hpp"
#include "ccg/oracle.hpp"
#include "ccg/suggester.hpp"

namespace ccg::pipeline {

struct ClassifierSettings {
  encoder::EncoderConfig encoder;
  std::size_t hidden = 32;
  std::uint64_t seed = 11;
  oracle::ScaffoldConfig scaffold;
  oracle::ClassifierTrainConfig train;
  /// Share of labeled sentences held out for scoring, chosen by hash of position.
  double holdout_fraction = 0.2;
};

struct SuggesterSettings {
  encoder::EncoderConfig encoder;
  std::size_t hidden = 32;
  std::uint64_t seed = 13;
  suggester::ExtractorConfig extractor;
  suggester::IntentTrainConfig intent;
};

struct GeneratorSettings {
  generator::GeneratorConfig model;
  generator::TrainingConfig training;
  generator::DecodeParams decode;
  std::uint64_t seed = 1;
};

struct EvalSettings {
  /// 0 means every test instance.
  std::size_t limit = 0;
  std::uint64_t seed = 1;
};

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string corpus;
  std::string suggester;
  std::string generator;
  /// Optional dataset directory so requests may name an instance id.
  std::string dataset;
  std::string feedback = "feedback";
  std::uint64_t seed = 17;
};

struct PipelineConfig {
  desk::DeskConfig desk;
  dataset::DatasetConfig dataset;
  ClassifierSettings classifier;
  SuggesterSettings suggester;
  GeneratorSettings generator;
  EvalSettings eval;
  ServiceSettings service;
};

/// Missing sections and keys keep their defaults.
PipelineConfig config_from_json(const json& j);
ordered_json to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

bool in_holdout(std::size_t position, double fraction);

struct ClassifierRun {
  std::unique_ptr<oracle::IntentClassifier> model;
  oracle::ClassifierTrainReport report;
  oracle::ClassScores heldout;
  /// Always predicting the most frequent training intent.
  oracle::ClassScores majority;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
};

ClassifierRun train_classifier(const std::vector<oracle::LabeledSentence>& labeled, const ClassifierSettings& settings);
ordered_json to_json(const ClassifierRun& run);

enum class SuggesterTask { intent, keywords, sentences };
std::string_view to_string(SuggesterTask task);
std::optional<SuggesterTask> parse_suggester_task(std::string_view text);

/// Trains one suggester component on labeled training instances and writes
/// it to `out_dir/<task>`. Returns a summary record.
ordered_json train_suggester_task(SuggesterTask task, const std::vector<dataset::CitationInstance>& train,
                                  const corpus::Corpus& corpus, const SuggesterSettings& settings,
                                  const std::filesystem::path& out_dir);

struct GeneratorRun {
  std::unique_ptr<generator::GeneratorModel> model;
  generator::GeneratorTrainReport report;
};

GeneratorRun train_generator(const std::vector<dataset::CitationInstance>& train, const GeneratorSettings& settings);

/// Instances that carry attributes; throws when none do.
std::vector<dataset::CitationInstance> require_labeled(std::vector<dataset::CitationInstance> instances);

}  // namespace ccg::pipeline
