#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccg {

/// Citation intent taxonomy: background, method, result.
enum class Intent { background = 0, method = 1, result = 2 };

inline constexpr std::size_t kIntentCount = 3;
inline constexpr std::array<Intent, kIntentCount> kAllIntents{
    Intent::background, Intent::method, Intent::result};

std::string_view to_string(Intent intent);
/// Case-insensitive; returns nullopt for anything outside the taxonomy.
std::optional<Intent> parse_intent(std::string_view text);

inline std::size_t index_of(Intent intent) { return static_cast<std::size_t>(intent); }

/// The condition C: each part may be absent/empty.
struct CitationAttributes {
  std::optional<Intent> intent;
  std::vector<std::string> keywords;
  std::vector<std::string> sentences;

  bool operator==(const CitationAttributes&) const = default;
};

/// The contextual text X for one citation.
struct ContextBundle {
  std::vector<std::string> local_context;
  std::string cited_title;
  std::string cited_abstract;

  bool operator==(const ContextBundle&) const = default;
};

/// Local context followed by the cited title and abstract, space-joined.
std::string contextual_text(const ContextBundle& context);

struct IntentPrediction {
  std::array<double, kIntentCount> logits{};
  std::array<double, kIntentCount> probabilities{};
  Intent label = Intent::background;
};

/// Softmax over the three logits plus argmax (lowest index wins ties).
IntentPrediction make_prediction(const std::array<double, kIntentCount>& logits);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace ccg
