#pragma once

// Synthetic miniature corpus for desk-scale experiments: topic-structured
// papers with bracketed citation markers, a bibliography, and a labeled
// intent set in the SciCite layout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ccg/json_io.hpp"
#include "ccg/oracle.hpp"
#include "ccg/types.hpp"

namespace ccg::desk {

struct DeskConfig {
  std::uint64_t seed = 2023;
  std::size_t train_cited_per_topic = 8;
  std::size_t eval_cited_per_topic = 4;
  std::size_t train_citing_per_topic = 20;
  std::size_t eval_citing_papers = 64;
  std::size_t citations_per_paper = 10;
  std::size_t labeled_sentences = 1500;
  double label_noise = 0.05;
  /// Probability that the sentence before a citation carries a cue for its intent.
  double cue_rate = 0.75;
  int eval_year = 2022;
  /// Must equal the dataset builder's value so eval cited papers stay on one side.
  double validation_fraction = 0.5;
};

ordered_json to_json(const DeskConfig& cfg);
DeskConfig desk_config_from_json(const json& j);

struct DeskCorpus {
  std::vector<ordered_json> raw_records;
  ordered_json bibliography;
  std::vector<oracle::LabeledSentence> labeled;
};

DeskCorpus make_desk_corpus(const DeskConfig& cfg);

/// raw.jsonl, bibliography.json, labeled.jsonl
void write_desk_corpus(const std::filesystem::path& dir, const DeskCorpus& corpus);

/// Every keyphrase in the synthetic vocabulary.
std::vector<std::string> all_keyphrases();

/// A citation sentence with the placeholder marker "[]" for the given intent.
std::string citation_sentence(Intent intent, std::mt19937_64& rng);

}  // namespace ccg::desk
