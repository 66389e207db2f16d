#pragma once

// Rule-based noun-phrase chunking: a small lexicon/suffix part-of-speech
// tagger followed by the pattern (Det)? (Adj|Noun)* Noun.

#include <string>
#include <string_view>
#include <vector>

namespace ccg::chunker {

enum class Tag { Det, Adj, Noun, Verb, Aux, Adv, Prep, Pron, Num, Punct };

struct TaggedToken {
  std::string text;
  Tag tag = Tag::Noun;
};

/// Words keep internal hyphens ("COVID-19"); other punctuation becomes its
/// own token.
std::vector<std::string> words(std::string_view text);

std::vector<TaggedToken> tag(std::string_view text);

/// Chunks from pre-tagged tokens: leading a/an/the removed, other
/// determiners kept, original case preserved, deduplicated on the lowercased
/// text in first-occurrence order.
std::vector<std::string> chunk_tagged(const std::vector<TaggedToken>& tokens);

std::vector<std::string> extract_candidate_keywords(std::string_view text);

}  // namespace ccg::chunker
