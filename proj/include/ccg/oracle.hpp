#pragma once

// Pseudo ground-truth attributes: greedy ROUGE-maximizing keyword/sentence
// selection, dense relevance ranks, and the scaffold-trained intent
// classifier used to label citation intent.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/encoder.hpp"
#include "ccg/rouge.hpp"
#include "ccg/types.hpp"

namespace ccg::oracle {

inline constexpr std::size_t kMaxKeywords = 3;
inline constexpr std::size_t kMaxSentences = 2;

/// Mean of ROUGE-1 and ROUGE-2 F1 between the space-joined selection and the target.
double selection_score(const std::vector<std::string>& candidates, const std::vector<std::size_t>& selection,
                       std::string_view target);

struct GreedyResult {
  std::vector<std::size_t> selected;
  /// Gain of each step; all strictly positive.
  std::vector<double> gains;
  /// Running score after each step.
  std::vector<double> scores;
  double final_score = 0.0;
};

/// Appends the candidate with the largest strictly positive gain (ties: lowest
/// index) until nothing improves or `max_items` are selected.
GreedyResult greedy_select(const std::vector<std::string>& candidates, std::string_view target,
                           std::size_t max_items);

struct RankedScore {
  std::size_t index = 0;
  double score = 0.0;
  std::size_t rank = 1;
};

/// Dense ranks: the highest distinct score gets 1, equal scores share a rank.
std::vector<std::size_t> dense_ranks(const std::vector<double>& scores, std::optional<std::size_t> clamp = {});

/// Relevance score and rank of every candidate, in candidate order.
std::vector<RankedScore> assign_relevance_ranks(const std::vector<std::string>& candidates, std::string_view target,
                                                std::optional<std::size_t> clamp = {});

struct ScaffoldConfig {
  double main_weight = 1.0;
  double section_weight = 0.05;
  double worthiness_weight = 0.01;
};

enum class SectionClass { introduction, related_work, method, experiments, conclusion, other };
inline constexpr std::size_t kSectionClassCount = 6;
SectionClass section_class(std::string_view section_title);

/// One item of a SciCite-style set; every label is optional.
struct LabeledSentence {
  std::string text;
  std::optional<Intent> intent;
  std::optional<std::string> section_title;
  std::optional<bool> citation_worthy;
};

/// jsonl rows {text|string, label|intent?, section|section_title?, is_citation|citation_worthy?}
std::vector<LabeledSentence> load_labeled_sentences(const std::filesystem::path& path);
ordered_json to_json(const LabeledSentence& item);

struct ClassifierTrainConfig {
  std::size_t epochs = 8;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  std::uint64_t seed = 7;
};

struct ClassifierTrainReport {
  std::vector<double> epoch_loss;
  bool section_scaffold = false;
  bool worthiness_scaffold = false;
  std::vector<std::string> warnings;
};

class IntentClassifier {
 public:
  explicit IntentClassifier(const encoder::EncoderConfig& config, std::size_t hidden = 32, std::uint64_t seed = 11);

  IntentPrediction predict(std::string_view sentence) const;
  std::array<double, kIntentCount> logits(std::string_view sentence) const;

  /// Weighted sum of the main and the enabled auxiliary cross-entropy terms
  /// for one item; an invalid Var when the item carries no usable label.
  nn::Var loss(nn::Graph& g, const LabeledSentence& item, const ScaffoldConfig& weights, bool use_section,
               bool use_worthiness) const;

  ClassifierTrainReport train(const std::vector<LabeledSentence>& data, const ScaffoldConfig& scaffold,
                              const ClassifierTrainConfig& config);

  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<IntentClassifier> load(const std::filesystem::path& dir);

  nn::ParamSet& params() { return params_; }
  const encoder::EncoderModule& encoder() const { return encoder_; }

 private:
  nn::Var embedding(nn::Graph& g, std::string_view sentence) const;

  nn::ParamSet params_;
  encoder::EncoderModule encoder_;
  encoder::MlpHead intent_head_;
  encoder::MlpHead section_head_;
  encoder::MlpHead worthiness_head_;
  std::size_t hidden_;
  std::uint64_t seed_;
};

Intent pseudo_label_intent(const IntentClassifier& classifier, std::string_view citation_sentence);

/// All body sentences of a paper in document order.
std::vector<std::string> body_sentences(const corpus::PaperRecord& paper);

/// Oracle attributes for one instance (intent taken from `intent`).
CitationAttributes oracle_attributes(const dataset::CitationInstance& instance, const corpus::Corpus& corpus,
                                     Intent intent);

/// Fills `attributes` of every instance.
void label_dataset(std::vector<dataset::CitationInstance>& instances, const corpus::Corpus& corpus,
                   const IntentClassifier& classifier);

struct ClassScores {
  std::array<double, kIntentCount> f1{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};
/// Per-class and macro F1 (in [0, 1]) of predictions against gold labels.
ClassScores classification_scores(const std::vector<Intent>& gold, const std::vector<Intent>& predicted);

}  // namespace ccg::oracle
