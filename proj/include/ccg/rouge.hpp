#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ccg::rouge {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using Tokens = std::vector<std::string>;

/// Lowercase, split on any non-alphanumeric byte, drop empties. No stemming,
/// no stopword removal.
Tokens tokenize(std::string_view text);

/// f1 = 2PR/(P+R), or 0 when P+R = 0.
RougeScore make_score(double precision, double recall);

/// Clipped n-gram overlap. Zero n-grams on either side gives an all-zero score.
RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n);

/// Longest-common-subsequence based ROUGE-L.
RougeScore rouge_l(const Tokens& candidate, const Tokens& reference);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

/// Mean of ROUGE-1 and ROUGE-2 F1 between two raw texts.
double relevance_score(std::string_view candidate, std::string_view target);
double relevance_score(const Tokens& candidate, const Tokens& target);

struct RougeTriple {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

/// F1 of ROUGE-1/2/L for a pair of raw texts.
RougeTriple score_pair(std::string_view candidate, std::string_view reference);

}  // namespace ccg::rouge
