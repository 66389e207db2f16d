#pragma once

// Reference implementations written independently of the library, used as
// oracles by the unit and acceptance tests.

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ref {

inline std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Prf {
  double p = 0, r = 0, f = 0;
};

inline Prf prf(double overlap, double n_cand, double n_ref) {
  Prf s;
  s.p = n_cand > 0 ? overlap / n_cand : 0.0;
  s.r = n_ref > 0 ? overlap / n_ref : 0.0;
  s.f = s.p + s.r > 0 ? 2 * s.p * s.r / (s.p + s.r) : 0.0;
  return s;
}

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& t, std::size_t n) {
  std::map<std::vector<std::string>, int> m;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++m[std::vector<std::string>(t.begin() + i, t.begin() + i + n)];
  return m;
}

inline Prf rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& refr, std::size_t n) {
  const auto c = ngram_counts(cand, n), r = ngram_counts(refr, n);
  int overlap = 0, nc = 0, nr = 0;
  for (const auto& [g, k] : c) {
    nc += k;
    if (auto it = r.find(g); it != r.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [g, k] : r) nr += k;
  return prf(overlap, nc, nr);
}

/// Memoized recursion, deliberately not the bottom-up table.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    return memo[key] = best;
  };
  return go(0, 0);
}

inline Prf rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& refr) {
  return prf(static_cast<double>(lcs(cand, refr)), static_cast<double>(cand.size()), static_cast<double>(refr.size()));
}

inline double relevance(std::string_view cand, std::string_view target) {
  const auto c = tokens(cand), t = tokens(target);
  return (rouge_n(c, t, 1).f + rouge_n(c, t, 2).f) / 2;
}

/// Best mean ROUGE-1/2 over every ordered selection of at most `max_items`
/// distinct candidates (joined with spaces); the empty selection scores 0.
inline double best_ordered_subset(const std::vector<std::string>& cands, std::string_view target,
                                  std::size_t max_items) {
  double best = 0.0;
  std::vector<std::size_t> chosen;
  std::vector<bool> used(cands.size(), false);
  std::function<void()> go = [&] {
    if (!chosen.empty()) {
      std::string joined;
      for (auto i : chosen) joined += (joined.empty() ? "" : " ") + cands[i];
      best = std::max(best, relevance(joined, target));
    }
    if (chosen.size() == max_items) return;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      chosen.push_back(i);
      go();
      chosen.pop_back();
      used[i] = false;
    }
  };
  go();
  return best;
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static const std::vector<std::string> words{"the",   "model", "graph",  "neural", "network", "we",
                                              "train", "a",     "data",   "set",    "results", "show",
                                              "new",   "task",  "method", "of",     "in",      "Graph",
                                              "COVID-19", "loss", "and",  "F1",     "score",   "x"};
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), w(0, words.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) {
    if (!s.empty()) s += (w(rng) % 7 == 0) ? ", " : " ";
    s += words[w(rng)];
  }
  return s;
}

}  // namespace ref
