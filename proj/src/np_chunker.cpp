#include "ccg/np_chunker.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace ccg::chunker {

namespace {

using WordSet = std::unordered_set<std::string>;

const WordSet kArticles{"a", "an", "the"};

const WordSet kDeterminers{"a",     "an",   "the",     "this",  "that",    "these", "those",
                           "our",   "their", "its",    "his",   "her",     "my",    "your",
                           "some",  "any",  "each",    "every", "all",     "both",  "no",
                           "such",  "several", "many", "most",  "another", "either", "neither"};

const WordSet kPrepositions{"of",      "in",     "on",      "for",     "with",    "by",      "from",
                            "to",      "at",     "as",      "into",    "onto",    "over",    "under",
                            "between", "through", "about",  "against", "during",  "without", "within",
                            "via",     "than",   "and",     "or",      "but",     "nor",     "while",
                            "whereas", "because", "although", "if",    "which",   "who",     "whom",
                            "whose",   "where",  "when",    "after",   "before",  "across",  "among",
                            "upon",    "per",    "like",    "unlike",  "towards", "toward",  "despite",
                            "so",      "whether", "since",  "until",   "beyond",  "along",   "around"};

const WordSet kPronouns{"we",   "i",    "you",  "they",   "he",     "she",        "it",
                        "them", "us",   "him",  "itself", "themselves", "ourselves", "one",
                        "there", "here", "what", "whatever", "others"};

const WordSet kAuxiliaries{"is",    "are",   "was",  "were",  "be",    "been",   "being",
                           "has",   "have",  "had",  "do",    "does",  "did",    "can",
                           "could", "may",   "might", "will", "would", "shall",  "should",
                           "must",  "not",   "cannot"};

const WordSet kAdverbs{"also",   "however", "further", "furthermore", "moreover", "very",  "more",
                       "well",   "then",    "thus",    "hence",       "therefore", "only", "still",
                       "yet",    "even",    "often",   "already",     "again",    "too",   "almost",
                       "instead", "rather", "here",    "now",         "first",    "later", "recently",
                       "less",   "much",    "far",     "just",        "nevertheless", "similarly"};

const WordSet kAdjectives{"new",     "novel",   "large",   "small",    "high",      "low",      "deep",
                          "recent",  "previous", "prior", "different", "similar",  "good",     "better",
                          "best",    "significant", "efficient", "robust", "simple", "strong", "weak",
                          "second",  "last",    "same",    "various",  "main",      "key",      "multiple",
                          "single",  "general", "specific", "current", "existing",  "early",    "late",
                          "full",    "long",    "short",   "higher",   "lower",     "larger",   "smaller",
                          "accurate", "consistent", "important", "few",  "other",   "whole",    "open",
                          "prominent", "common", "relevant", "complex", "sparse",  "dense",    "fast",
                          "slow",    "robust",  "related", "joint",    "latent",   "hidden",   "raw",
                          "modern",  "standard", "available", "clear", "direct",  "overall",  "major",
                          "minor",   "broad",   "narrow",  "rich",     "poor",     "wide",     "true",
                          "false",   "free",    "known",   "unknown",  "independent", "dependent",
                          "effective", "different", "real", "crucial", "promising", "competitive"};

const WordSet kNounExceptions{
    // -al
    "approval", "proposal", "journal", "signal", "interval", "animal", "trial", "material", "rival",
    "survival", "removal", "retrieval", "arrival", "tutorial", "capital", "hospital", "total", "medal",
    "potential", "renewal", "referral", "denial", "portal", "terminal", "principal", "goal", "deal",
    "manual", "festival", "ritual", "protocol", "individual", "chemical", "criminal", "professional",
    "canal", "metal", "crystal", "pedal", "recital", "rehearsal", "dismissal", "disposal", "appraisal",
    "withdrawal", "reversal", "tribunal", "general",
    // -ic
    "topic", "logic", "metric", "music", "clinic", "epidemic", "pandemic", "arithmetic", "traffic",
    "rhetoric", "mechanic", "graphic", "mosaic", "panic", "republic", "fabric", "critic", "tactic",
    "picnic", "characteristic", "statistic", "heuristic", "diagnostic", "logistic",
    // -ive
    "objective", "alternative", "initiative", "directive", "detective", "perspective", "incentive",
    "narrative", "native", "representative", "derivative", "executive", "archive", "relative", "motive",
    "olive", "primitive", "positive", "negative",
    // -ary
    "summary", "dictionary", "vocabulary", "library", "boundary", "anniversary", "glossary", "salary",
    "secretary", "commentary", "itinerary", "diary", "beneficiary", "boundary",
    // -ful / -less / -able / -ous
    "handful", "table", "variable", "cable", "vegetable", "timetable", "syllable", "bus", "corpus",
    "status", "consensus", "focus", "bonus", "virus", "census", "stimulus", "radius", "thesaurus",
    "apparatus", "campus", "nexus", "genus", "fetus", "hippocampus", "sinus", "onus",
    // -ly
    "family", "supply", "anomaly", "assembly", "italy", "reply", "monopoly", "ally", "rally", "belly",
    "jelly", "fly", "butterfly", "july", "bully", "homily",
    // -ed / -ing
    "bed", "seed", "need", "speed", "feed", "reed", "creed", "hundred", "thing", "string", "ring",
    "king", "wing", "spring", "sibling", "ceiling", "evening", "morning", "meaning", "setting",
    "building", "wedding", "pudding", "nothing", "something", "anything", "everything", "embedding",
    "encoding", "finding", "learning", "training", "reasoning", "understanding", "clustering",
    "labeling", "tagging", "parsing", "pooling", "sampling", "modeling", "modelling", "planning",
    "processing", "computing", "mining", "matching", "ranking", "retrieving", "scheduling", "screening",
    "funding", "warning", "heading", "reading", "writing", "drawing", "painting", "meeting", "opening"};

const std::vector<std::string> kAdjSuffixes{"al", "ive", "ous", "ic", "able", "ible", "ful", "less",
                                            "ary", "ular"};

const std::vector<std::string> kVerbBases{
    "use",     "propose", "show",     "present", "train",    "predict",  "introduce", "achieve",
    "improve", "outperform", "demonstrate", "report", "find", "apply",   "follow",    "adopt",
    "develop", "describe", "study",   "investigate", "evaluate", "compare", "suggest", "observe",
    "obtain",  "employ",  "extend",   "build",   "design",   "measure",  "compute",   "estimate",
    "learn",   "generate", "exceed",  "reduce",  "increase", "provide",  "consider",  "examine",
    "analyze", "analyse", "perform",  "leverage", "explore", "address",  "focus",     "yield",
    "reach",   "confirm", "indicate", "reveal",  "establish", "define",  "implement", "combine",
    "capture", "enable",  "allow",    "require", "produce",  "rely",     "adapt",     "tune",
    "vaccinate", "intend", "agree",   "match",   "align",    "surpass",  "support",   "include",
    "contain", "involve", "focus",    "make",    "take",     "give",     "know",      "lead",
    "choose",  "do",      "see",      "write",   "begin",    "become",   "hold",      "keep",
    "leave",   "help",    "meet",    "run",      "bring",   "think",    "set",      "get",       "note",
    "argue",   "claim",   "state",    "remain",  "tend",     "seem",     "appear",    "exist",
    "emerge",  "inspire", "motivate", "rely",    "depend",   "benefit",  "prove",     "explain",
    "select",  "optimize", "minimize", "maximize", "encode", "decode",  "embed",     "extract",
    "classify", "detect", "identify", "recognize", "solve",  "handle",   "replicate", "reproduce",
    "corroborate", "contradict", "echo",  "mirror", "replace", "borrow", "inherit",   "pretrain",
    "finetune", "initialize", "collect", "annotate", "label", "release", "publish",   "tackle",
    "highlight", "emphasize", "address", "enhance", "boost", "lower",    "raise",     "attain",
    "deliver", "offer",   "obtain",   "refine",  "modify",   "simplify", "formulate", "introduce"};

const std::unordered_map<std::string, std::vector<std::string>> kIrregular{
    {"show", {"shown"}},      {"find", {"found"}},   {"build", {"built"}},
    {"make", {"made"}},       {"take", {"took", "taken"}}, {"give", {"gave", "given"}},
    {"know", {"knew", "known"}}, {"lead", {"led"}}, {"choose", {"chose", "chosen"}},
    {"do", {"did", "done", "does"}}, {"see", {"saw", "seen"}}, {"write", {"wrote", "written"}},
    {"begin", {"began", "begun"}}, {"become", {"became"}}, {"hold", {"held"}},
    {"keep", {"kept"}},       {"leave", {"left"}},   {"meet", {"met"}},
    {"run", {"ran", "running"}}, {"bring", {"brought"}}, {"think", {"thought"}},
    {"set", {"setting"}},     {"get", {"got", "gotten", "getting"}}, {"study", {"studies", "studied"}},
    {"rely", {"relies", "relied"}}, {"apply", {"applies", "applied"}}, {"classify", {"classifies", "classified"}},
    {"identify", {"identifies", "identified"}}, {"modify", {"modifies", "modified"}},
    {"simplify", {"simplifies", "simplified"}}};

WordSet build_verb_forms() {
  WordSet forms;
  for (const auto& base : kVerbBases) {
    forms.insert(base);
    const bool ends_e = base.back() == 'e';
    const bool sibilant = base.ends_with("s") || base.ends_with("sh") || base.ends_with("ch") ||
                          base.ends_with("x") || base.ends_with("o");
    forms.insert(sibilant ? base + "es" : base + "s");
    forms.insert(ends_e ? base + "d" : base + "ed");
    forms.insert(ends_e && base != "see" ? base.substr(0, base.size() - 1) + "ing" : base + "ing");
    if (auto it = kIrregular.find(base); it != kIrregular.end())
      for (const auto& f : it->second) forms.insert(f);
  }
  return forms;
}

const WordSet& verb_forms() {
  static const WordSet forms = build_verb_forms();
  return forms;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_alpha(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c); });
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

Tag lexical_tag(const std::string& w) {
  if (!has_alpha(w)) return has_digit(w) ? Tag::Num : Tag::Punct;
  if (kDeterminers.count(w)) return Tag::Det;
  if (kPrepositions.count(w)) return Tag::Prep;
  if (kPronouns.count(w)) return Tag::Pron;
  if (kAuxiliaries.count(w)) return Tag::Aux;
  if (kAdverbs.count(w)) return Tag::Adv;
  if (kAdjectives.count(w)) return Tag::Adj;
  if (kNounExceptions.count(w)) return Tag::Noun;
  if (verb_forms().count(w)) return Tag::Verb;
  // Hyphenated compounds are judged by their last component.
  const auto dash = w.rfind('-');
  const std::string tail = dash == std::string::npos ? w : w.substr(dash + 1);
  if (tail.size() > 4 && tail.ends_with("ly") && !kNounExceptions.count(tail)) return Tag::Adv;
  if (tail.size() > 4 && tail.ends_with("ed")) return Tag::Verb;
  for (const auto& suffix : kAdjSuffixes) {
    if (tail.size() > suffix.size() + 2 && tail.ends_with(suffix) && !kNounExceptions.count(tail))
      return Tag::Adj;
  }
  return Tag::Noun;
}

}  // namespace

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto alnum = [&](std::size_t k) {
    return k < text.size() && std::isalnum(static_cast<unsigned char>(text[k]));
  };
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::isalnum(c)) {
      std::size_t j = i;
      while (alnum(j) || ((text[j] == '-' || text[j] == '\'') && alnum(j + 1) && j > i)) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else if (c == '[' && i + 1 < text.size() && text[i + 1] == ']') {
      out.emplace_back("[]");
      i += 2;
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return out;
}

std::vector<TaggedToken> tag(std::string_view text) {
  const auto ws = words(text);
  std::vector<TaggedToken> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back({w, lexical_tag(lower(w))});
  // Participles directly before a noun act as modifiers ("proposed method").
  for (std::size_t i = out.size(); i-- > 0;) {
    if (out[i].tag != Tag::Verb || i + 1 >= out.size()) continue;
    const Tag next = out[i + 1].tag;
    if (next != Tag::Noun && next != Tag::Adj) continue;
    const std::string w = lower(out[i].text);
    if (w.ends_with("ed") || w.ends_with("en")) {
      out[i].tag = Tag::Adj;
    } else if (w.ends_with("ing") && i > 0 &&
               (out[i - 1].tag == Tag::Det || out[i - 1].tag == Tag::Adj || out[i - 1].tag == Tag::Noun)) {
      out[i].tag = Tag::Adj;
    }
  }
  return out;
}

std::vector<std::string> chunk_tagged(const std::vector<TaggedToken>& tokens) {
  std::vector<std::string> chunks;
  std::unordered_set<std::string> seen;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t origin = i;
    std::size_t start = i;
    bool det = false;
    if (tokens[i].tag == Tag::Det) {
      det = true;
      ++i;
    }
    std::size_t end = i;
    while (end < tokens.size() && (tokens[end].tag == Tag::Adj || tokens[end].tag == Tag::Noun)) ++end;
    std::size_t last = end;
    while (last > i && tokens[last - 1].tag != Tag::Noun) --last;
    if (last > i) {
      if (det && kArticles.count(lower(tokens[start].text))) start += 1;
      std::string phrase;
      for (std::size_t k = start; k < last; ++k) {
        if (!phrase.empty()) phrase += ' ';
        phrase += tokens[k].text;
      }
      if (seen.insert(lower(phrase)).second) chunks.push_back(std::move(phrase));
    }
    i = std::max(end, origin + 1);
  }
  return chunks;
}

std::vector<std::string> extract_candidate_keywords(std::string_view text) { return chunk_tagged(tag(text)); }

}  // namespace ccg::chunker
