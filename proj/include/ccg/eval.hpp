#pragma once

// Evaluation protocols: ROUGE scoring of generated citations under
// suggested or oracle attributes, intent controllability, and the
// keyword/sentence semantic match rate.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/encoder.hpp"
#include "ccg/generator.hpp"
#include "ccg/oracle.hpp"
#include "ccg/suggester.hpp"
#include "ccg/types.hpp"

namespace ccg::eval {

/// Anything that writes a citation sentence for an instance under given
/// attributes. Implementations must be safe to call concurrently.
class CitationGenerator {
 public:
  virtual ~CitationGenerator() = default;
  virtual std::string generate(const dataset::CitationInstance& instance, const CitationAttributes& attributes) const = 0;
};

class ModelGenerator final : public CitationGenerator {
 public:
  ModelGenerator(const generator::GeneratorModel& model, generator::DecodeParams params)
      : model_(model), params_(params) {}
  std::string generate(const dataset::CitationInstance& instance, const CitationAttributes& attributes) const override;

 private:
  const generator::GeneratorModel& model_;
  generator::DecodeParams params_;
};

/// Test doubles.
class CopyReferenceGenerator final : public CitationGenerator {
 public:
  std::string generate(const dataset::CitationInstance& instance, const CitationAttributes&) const override {
    return instance.target_sentence;
  }
};

class EmptyGenerator final : public CitationGenerator {
 public:
  std::string generate(const dataset::CitationInstance&, const CitationAttributes&) const override { return {}; }
};

/// Output depends on the context only: the last local-context sentence, or
/// the cited title when there is no local context.
class IgnoreAttributesGenerator final : public CitationGenerator {
 public:
  std::string generate(const dataset::CitationInstance& instance, const CitationAttributes&) const override;
};

/// Writes its conditioning keywords (or sentences when there are no keywords).
class EchoAttributeGenerator final : public CitationGenerator {
 public:
  std::string generate(const dataset::CitationInstance&, const CitationAttributes& attributes) const override;
};

/// Emits a fixed template per assigned intent.
class IntentTemplateGenerator final : public CitationGenerator {
 public:
  explicit IntentTemplateGenerator(std::array<std::string, kIntentCount> templates) : templates_(std::move(templates)) {}
  std::string generate(const dataset::CitationInstance&, const CitationAttributes& attributes) const override;

 private:
  std::array<std::string, kIntentCount> templates_;
};

class IntentJudge {
 public:
  virtual ~IntentJudge() = default;
  virtual Intent classify(std::string_view sentence) const = 0;
};

class ClassifierJudge final : public IntentJudge {
 public:
  explicit ClassifierJudge(const oracle::IntentClassifier& classifier) : classifier_(classifier) {}
  Intent classify(std::string_view sentence) const override { return oracle::pseudo_label_intent(classifier_, sentence); }

 private:
  const oracle::IntentClassifier& classifier_;
};

enum class Mode { automatic, controlled };
std::string_view to_string(Mode mode);

struct AttributeMask {
  bool intent = true;
  bool keywords = true;
  bool sentences = true;
};

CitationAttributes apply_mask(CitationAttributes attributes, const AttributeMask& mask);

using AttributeProvider = std::function<CitationAttributes(const dataset::CitationInstance&)>;

/// Oracle labels stored on the instance.
AttributeProvider oracle_provider();
/// No attributes at all.
AttributeProvider empty_provider();
/// Suggestions in automatic mode (1 intent, 3 keywords, 2 sentences).
AttributeProvider suggestion_provider(const corpus::Corpus& corpus, const suggester::SuggesterModels& models,
                                      const suggester::ExtractorConfig& config);

struct EvalRow {
  std::string system;
  Mode mode = Mode::controlled;
  AttributeMask mask;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  std::size_t n = 0;
};

/// Mean ROUGE F1 (×100) of one generation per instance against its target.
EvalRow eval_mode(const std::vector<dataset::CitationInstance>& instances, const CitationGenerator& generator,
                  const AttributeProvider& attributes, Mode mode, const AttributeMask& mask, std::string system);

struct ConfusionMatrix {
  std::array<std::array<std::size_t, kIntentCount>, kIntentCount> counts{};

  std::array<std::array<double, kIntentCount>, kIntentCount> frequencies() const;
  std::size_t row_total(std::size_t row) const;
  /// True when every non-empty row attains its maximum on the diagonal.
  bool diagonal_is_row_max() const;
};

/// For every instance and every intent, generate with that intent substituted
/// and classify the output; counts[assigned][classified].
ConfusionMatrix intent_controllability(const std::vector<dataset::CitationInstance>& instances,
                                       const CitationGenerator& generator, const IntentJudge& judge,
                                       const AttributeProvider& base_attributes);

enum class MatchKind { keywords, sentences };
std::string_view to_string(MatchKind kind);

struct MatchRateReport {
  MatchKind kind = MatchKind::keywords;
  std::size_t matches = 0;
  std::size_t trials = 0;
  std::size_t skipped = 0;

  double frequency() const { return trials ? static_cast<double>(matches) / static_cast<double>(trials) : 0.0; }
  /// Wilson score interval lower bound.
  double wilson_lower(double z = 1.959964) const;
};

using CandidateProvider = std::function<std::vector<std::string>(const dataset::CitationInstance&)>;

/// Top-5 keyword or sentence suggestions for an instance.
CandidateProvider suggestion_candidates(const corpus::Corpus& corpus, const suggester::SuggesterModels& models,
                                        const suggester::ExtractorConfig& config, MatchKind kind);

/// Two trials per instance: pick A != B among the first five candidates,
/// generate with each (other attributes fixed), and count a match when the
/// output embeds closer to its own attribute than to the other one.
/// Instances with fewer than two candidates are skipped.
MatchRateReport attribute_match_rate(const std::vector<dataset::CitationInstance>& instances,
                                     const CitationGenerator& generator, const encoder::TextEncoder& judge,
                                     MatchKind kind, const CandidateProvider& candidates,
                                     const AttributeProvider& base_attributes, std::uint64_t seed);

/// 0 when either vector is zero.
double safe_cosine(const std::vector<double>& a, const std::vector<double>& b);

ordered_json to_json(const EvalRow& row);
ordered_json to_json(const ConfusionMatrix& matrix);
ordered_json to_json(const MatchRateReport& report);

/// Text table with the columns of the generation-results table.
std::string render_rows(const std::vector<EvalRow>& rows);
std::string render_confusion(const ConfusionMatrix& matrix);

}  // namespace ccg::eval
