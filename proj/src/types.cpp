#include "ccg/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ccg {

std::string_view to_string(Intent intent) {
  switch (intent) {
    case Intent::background:
      return "background";
    case Intent::method:
      return "method";
    case Intent::result:
      return "result";
  }
  return "background";
}

std::optional<Intent> parse_intent(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Intent intent : kAllIntents) {
    if (lowered == to_string(intent)) return intent;
  }
  return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string contextual_text(const ContextBundle& context) {
  std::vector<std::string> parts;
  for (const auto& s : context.local_context) {
    if (!s.empty()) parts.push_back(s);
  }
  if (!context.cited_title.empty()) parts.push_back(context.cited_title);
  if (!context.cited_abstract.empty()) parts.push_back(context.cited_abstract);
  return join(parts, " ");
}

IntentPrediction make_prediction(const std::array<double, kIntentCount>& logits) {
  IntentPrediction p;
  p.logits = logits;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    p.probabilities[i] = std::exp(logits[i] - mx);
    z += p.probabilities[i];
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < kIntentCount; ++i) {
    p.probabilities[i] /= z;
    if (logits[i] > logits[best]) best = i;
  }
  p.label = kAllIntents[best];
  return p;
}

}  // namespace ccg
