#pragma once

// Attribute suggestion: intent prediction from context, cosine ranking of
// keywords/sentences with triplet-loss fine-tuning, and MMR selection.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/encoder.hpp"
#include "ccg/types.hpp"

namespace ccg::suggester {

struct ExtractorConfig {
  double gamma = 0.01;
  double alpha = 0.2;
  std::size_t sentence_rank_clamp = 10;
  std::size_t ui_top_k = 5;
  std::size_t auto_keywords = 3;
  std::size_t auto_sentences = 2;
  bool mmr_for_sentences = false;
  std::size_t max_pairs_per_query = 16;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 5;

  void validate() const;
};

ordered_json to_json(const ExtractorConfig& cfg);
ExtractorConfig extractor_config_from_json(const json& j);

/// Throws std::domain_error for a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// max(0, f_j - f_i + (r_j - r_i)·gamma); requires r_i < r_j.
double triplet_loss(double f_i, double f_j, std::size_t r_i, std::size_t r_j, double gamma);
nn::Var triplet_loss(nn::Graph& g, nn::Var f_i, nn::Var f_j, std::size_t r_i, std::size_t r_j, double gamma);

struct RankedCandidate {
  std::size_t index = 0;
  std::string text;
  std::vector<double> embedding;
  double score = 0.0;
  std::size_t rank = 1;
};

/// Sorted by cosine to the query, descending; ties keep candidate order.
std::vector<RankedCandidate> rank_candidates(const encoder::TextEncoder& encoder, std::string_view query,
                                             const std::vector<std::string>& candidates);

struct MmrPick {
  std::size_t index = 0;
  double score = 0.0;
};

/// MMR over precomputed similarities: `query_sim[i]` = f(q, k_i) and
/// `pair_sim` is the row-major n×n matrix f(k_i, k_j).
std::vector<MmrPick> mmr_select(const std::vector<double>& query_sim, const std::vector<double>& pair_sim,
                                std::size_t k, double alpha);
std::vector<RankedCandidate> mmr_select(const encoder::TextEncoder& encoder, std::string_view query,
                                        const std::vector<std::string>& candidates, std::size_t k, double alpha);

struct IntentTrainConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 16;
  double learning_rate = 2e-3;
  double background_keep = 0.2;
  std::uint64_t seed = 3;
};

struct IntentTrainReport {
  std::vector<double> epoch_loss;
  std::array<std::size_t, kIntentCount> pool{};
};

class IntentPredictor {
 public:
  explicit IntentPredictor(const encoder::EncoderConfig& config, std::size_t hidden = 32, std::uint64_t seed = 13);

  /// "[CLS] local [SEP] title abstract", truncated from the end to the
  /// encoder's maximum length.
  std::vector<std::string> input_pieces(const ContextBundle& context) const;
  /// Throws std::invalid_argument when context, title and abstract are all empty.
  IntentPrediction predict(const ContextBundle& context) const;
  nn::Var loss(nn::Graph& g, const ContextBundle& context, Intent label) const;

  /// Refuses (std::invalid_argument) when fewer than two intents are present.
  IntentTrainReport train(const std::vector<ContextBundle>& contexts, const std::vector<Intent>& labels,
                          const IntentTrainConfig& config);

  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<IntentPredictor> load(const std::filesystem::path& dir);

  nn::ParamSet& params() { return params_; }

 private:
  nn::Var logits(nn::Graph& g, const ContextBundle& context) const;

  nn::ParamSet params_;
  encoder::EncoderModule encoder_;
  encoder::MlpHead head_;
  std::size_t hidden_;
  std::uint64_t seed_;
};

/// Indices kept after reducing background items to round(keep·count), chosen
/// uniformly; other classes are kept whole. Result is sorted.
std::vector<std::size_t> downsample_background(const std::vector<Intent>& labels, double keep, std::mt19937_64& rng);

struct RankingQuery {
  std::string query;
  std::vector<std::string> candidates;
  std::vector<std::size_t> ranks;
};

enum class CandidateKind { keywords, sentences };

/// Query = contextual text; candidates = its noun phrases (keywords) or the
/// cited paper's body sentences (sentences, ranks clamped).
std::vector<RankingQuery> build_ranking_queries(const std::vector<dataset::CitationInstance>& instances,
                                                const corpus::Corpus& corpus, CandidateKind kind,
                                                const ExtractorConfig& config);

/// All (i, j) with ranks[i] < ranks[j]; when more than `max_pairs` exist, a
/// uniform sample without replacement of that size.
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const std::vector<std::size_t>& ranks,
                                                              std::size_t max_pairs, std::mt19937_64& rng);

struct FineTuneReport {
  std::vector<double> epoch_loss;
  std::size_t queries_with_pairs = 0;
};

FineTuneReport triplet_fine_tune(encoder::TextEncoder& encoder, const std::vector<RankingQuery>& queries,
                                 const ExtractorConfig& config);

/// Mean 1-based position, under cosine ranking, of the best-relevance
/// candidate of each query with at least two distinct ranks.
double mean_rank_of_best(const encoder::TextEncoder& encoder, const std::vector<RankingQuery>& queries);

enum class SuggestMode { automatic, ui };

struct ScoredText {
  std::string text;
  double score = 0.0;
};

struct SuggestionBundle {
  IntentPrediction intent;
  std::vector<ScoredText> keywords;
  std::vector<ScoredText> sentences;
};

ordered_json to_json(const SuggestionBundle& bundle);

struct SuggesterModels {
  std::unique_ptr<IntentPredictor> intent;
  std::unique_ptr<encoder::TextEncoder> keyword_encoder;
  std::unique_ptr<encoder::TextEncoder> sentence_encoder;

  /// Loads <dir>/intent, <dir>/keywords and <dir>/sentences.
  static SuggesterModels load(const std::filesystem::path& dir);
};

SuggestionBundle suggest(const ContextBundle& context, const std::vector<std::string>& cited_body,
                         const SuggesterModels& models, const ExtractorConfig& config, SuggestMode mode);

}  // namespace ccg::suggester
