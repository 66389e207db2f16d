#include "ccg/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <iostream>
#include <set>

namespace ccg::corpus {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }

bool is_closer(char c) { return c == ')' || c == ']' || c == '"' || c == '\'' || c == '}'; }

constexpr std::array<std::string_view, 22> kAbbreviations{
    "al.",  "fig.", "figs.", "eq.",  "eqs.", "e.g.", "i.e.",  "vs.",  "cf.",  "sec.", "secs.",
    "tab.", "ref.", "refs.", "dr.",  "mr.",  "mrs.", "ms.",   "prof.", "approx.", "resp.", "viz."};

// Token ending at `end` (exclusive) that terminates with '.'.
bool is_abbreviation(std::string_view text, std::size_t end) {
  std::size_t begin = end;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  std::string_view token = text.substr(begin, end - begin);
  while (!token.empty() && (token.front() == '(' || token.front() == '[' || token.front() == '"'))
    token.remove_prefix(1);
  if (token.empty()) return false;
  std::string lowered(token);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto abbr : kAbbreviations) {
    if (lowered == abbr) return true;
  }
  // Initials: "J." or "J.R."
  if (token.size() >= 2 && token.size() % 2 == 0) {
    bool initials = true;
    for (std::size_t i = 0; i < token.size(); i += 2) {
      if (!is_upper(token[i]) || token[i + 1] != '.') {
        initials = false;
        break;
      }
    }
    if (initials) return true;
  }
  return false;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string required_string(const json& raw, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = raw.find(key);
    if (it != raw.end() && it->is_string()) return it->get<std::string>();
    if (it != raw.end() && it->is_number_integer()) return std::to_string(it->get<long long>());
  }
  return {};
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  const std::size_t n = text.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
    while (j < n && is_closer(text[j])) ++j;
    if (j >= n || !is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    while (k < n && is_space(text[k])) ++k;
    if (k >= n) break;
    const bool lower_next = is_lower(text[k]);
    const bool abbreviation = c == '.' && is_abbreviation(text, i + 1);
    if (!lower_next && !abbreviation) {
      auto sentence = trim(text.substr(start, j - start));
      if (!sentence.empty()) out.push_back(std::move(sentence));
      start = k;
    }
    i = k;
  }
  auto tail = trim(text.substr(std::min(start, n)));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

PaperRecord parse_paper_record(const json& raw) {
  if (!raw.is_object()) throw RecordError(RecordErrorCode::Malformed, "record is not an object");
  PaperRecord rec;
  rec.paper_id = required_string(raw, {"paper_id", "id"});
  if (rec.paper_id.empty()) throw RecordError(RecordErrorCode::MissingId, "record has no id");
  rec.title = trim(required_string(raw, {"title"}));
  if (rec.title.empty())
    throw RecordError(RecordErrorCode::MissingTitle, "record " + rec.paper_id + " has no title");
  rec.abstract = trim(required_string(raw, {"abstract"}));
  if (auto it = raw.find("year"); it != raw.end() && it->is_number_integer())
    rec.year = it->get<int>();
  if (auto it = raw.find("domains"); it != raw.end() && it->is_array()) {
    for (const auto& d : *it) {
      if (d.is_string()) rec.domains.push_back(d.get<std::string>());
    }
  }
  if (auto it = raw.find("body"); it != raw.end()) {
    if (!it->is_array())
      throw RecordError(RecordErrorCode::Malformed, "record " + rec.paper_id + ": body is not a list");
    for (const auto& sec : *it) {
      if (!sec.is_object())
        throw RecordError(RecordErrorCode::Malformed,
                          "record " + rec.paper_id + ": body section is not an object");
      BodySection section;
      section.section_title = required_string(sec, {"section_title", "section"});
      auto add_text = [&](const std::string& paragraph) {
        for (auto& s : split_sentences(paragraph)) section.sentences.push_back(std::move(s));
      };
      if (auto p = sec.find("paragraphs"); p != sec.end() && p->is_array()) {
        for (const auto& para : *p) {
          if (para.is_string()) add_text(para.get<std::string>());
        }
      }
      if (auto t = sec.find("text"); t != sec.end() && t->is_string()) add_text(t->get<std::string>());
      if (auto s = sec.find("sentences"); s != sec.end() && s->is_array()) {
        for (const auto& sent : *s) {
          if (sent.is_string()) {
            auto trimmed = trim(sent.get<std::string>());
            if (!trimmed.empty()) section.sentences.push_back(std::move(trimmed));
          }
        }
      }
      rec.body.push_back(std::move(section));
    }
  }
  return rec;
}

Bibliography Bibliography::from_json(const json& j) {
  Bibliography bib;
  if (!j.is_object()) throw std::invalid_argument("bibliography must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_object()) continue;
    for (auto m = it.value().begin(); m != it.value().end(); ++m) {
      if (!m.value().is_string()) continue;
      if (it.key() == "*")
        bib.add_global(m.key(), m.value().get<std::string>());
      else
        bib.add(it.key(), m.key(), m.value().get<std::string>());
    }
  }
  return bib;
}

Bibliography Bibliography::load(const std::filesystem::path& path) {
  return from_json(io::read_json(path));
}

void Bibliography::add(const std::string& citing_id, const std::string& marker,
                       const std::string& cited_id) {
  per_paper_[citing_id][marker] = cited_id;
}

void Bibliography::add_global(const std::string& marker, const std::string& cited_id) {
  global_[marker] = cited_id;
}

const std::string* Bibliography::resolve(const std::string& citing_id,
                                         const std::string& marker) const {
  if (auto p = per_paper_.find(citing_id); p != per_paper_.end()) {
    if (auto m = p->second.find(marker); m != p->second.end()) return &m->second;
  }
  if (auto g = global_.find(marker); g != global_.end()) return &g->second;
  return nullptr;
}

std::vector<CitationMention> detect_citation_mentions(const PaperRecord& paper,
                                                      const Bibliography& bibliography,
                                                      std::vector<Diagnostic>* diagnostics) {
  std::vector<CitationMention> mentions;
  for (std::size_t si = 0; si < paper.body.size(); ++si) {
    const auto& sentences = paper.body[si].sentences;
    for (std::size_t ti = 0; ti < sentences.size(); ++ti) {
      const std::string& s = sentences[ti];
      CitationMention mention;
      mention.citing_paper_id = paper.paper_id;
      mention.where = {si, ti};
      std::size_t pos = 0;
      while ((pos = s.find('[', pos)) != std::string::npos) {
        const std::size_t close = s.find(']', pos + 1);
        if (close == std::string::npos) break;
        const std::string_view inner(s.data() + pos + 1, close - pos - 1);
        if (inner.find('[') != std::string_view::npos) {
          pos = pos + 1;
          continue;
        }
        bool resolved_any = false;
        std::size_t b = 0;
        while (b <= inner.size()) {
          std::size_t e = inner.find_first_of(",;", b);
          if (e == std::string_view::npos) e = inner.size();
          const auto key = trim(inner.substr(b, e - b));
          if (!key.empty()) {
            if (const std::string* cited = bibliography.resolve(paper.paper_id, key)) {
              resolved_any = true;
              if (std::find(mention.cited_paper_ids.begin(), mention.cited_paper_ids.end(),
                            *cited) == mention.cited_paper_ids.end())
                mention.cited_paper_ids.push_back(*cited);
            } else if (diagnostics) {
              diagnostics->push_back({paper.paper_id, "unresolved citation marker '" + key +
                                                          "' in section " + std::to_string(si) +
                                                          ", sentence " + std::to_string(ti)});
            }
          }
          b = e + 1;
        }
        if (resolved_any) mention.marker_spans.emplace_back(pos, close + 1);
        pos = close + 1;
      }
      if (!mention.cited_paper_ids.empty()) mentions.push_back(std::move(mention));
    }
  }
  return mentions;
}

void normalize_citation_markers(PaperRecord& paper, std::vector<CitationMention>& mentions) {
  for (auto& m : mentions) {
    std::string& s = paper.body.at(m.where.section).sentences.at(m.where.sentence);
    std::string rewritten;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t cursor = 0;
    for (const auto& [b, e] : m.marker_spans) {
      rewritten.append(s, cursor, b - cursor);
      spans.emplace_back(rewritten.size(), rewritten.size() + kCitationPlaceholder.size());
      rewritten += kCitationPlaceholder;
      cursor = e;
    }
    rewritten.append(s, cursor, std::string::npos);
    s = std::move(rewritten);
    m.marker_spans = std::move(spans);
  }
}

ordered_json to_json(const CorpusEntry& entry) {
  const auto& p = entry.paper;
  ordered_json j;
  j["paper_id"] = p.paper_id;
  j["title"] = p.title;
  j["abstract"] = p.abstract;
  j["year"] = p.year;
  j["domains"] = p.domains;
  ordered_json body = ordered_json::array();
  for (const auto& sec : p.body) {
    ordered_json js;
    js["section_title"] = sec.section_title;
    js["sentences"] = sec.sentences;
    body.push_back(std::move(js));
  }
  j["body"] = std::move(body);
  ordered_json mentions = ordered_json::array();
  for (const auto& m : entry.mentions) {
    ordered_json jm;
    jm["section_idx"] = m.where.section;
    jm["sentence_idx"] = m.where.sentence;
    jm["cited_ids"] = m.cited_paper_ids;
    ordered_json spans = ordered_json::array();
    for (const auto& [b, e] : m.marker_spans) spans.push_back({b, e});
    jm["marker_spans"] = std::move(spans);
    mentions.push_back(std::move(jm));
  }
  j["mentions"] = std::move(mentions);
  return j;
}

CorpusEntry entry_from_json(const json& j) {
  CorpusEntry entry;
  auto& p = entry.paper;
  p.paper_id = j.at("paper_id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  p.abstract = j.value("abstract", std::string());
  p.year = j.value("year", 0);
  p.domains = j.value("domains", std::vector<std::string>{});
  for (const auto& js : j.value("body", json::array())) {
    BodySection sec;
    sec.section_title = js.value("section_title", std::string());
    sec.sentences = js.value("sentences", std::vector<std::string>{});
    p.body.push_back(std::move(sec));
  }
  for (const auto& jm : j.value("mentions", json::array())) {
    CitationMention m;
    m.citing_paper_id = p.paper_id;
    m.where = {jm.at("section_idx").get<std::size_t>(), jm.at("sentence_idx").get<std::size_t>()};
    m.cited_paper_ids = jm.at("cited_ids").get<std::vector<std::string>>();
    for (const auto& span : jm.value("marker_spans", json::array()))
      m.marker_spans.emplace_back(span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>());
    entry.mentions.push_back(std::move(m));
  }
  return entry;
}

Corpus::Corpus(std::vector<CorpusEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

void Corpus::add(CorpusEntry entry) {
  if (index_.count(entry.paper.paper_id))
    throw RecordError(RecordErrorCode::DuplicateId, "duplicate paper id " + entry.paper.paper_id);
  index_.emplace(entry.paper.paper_id, entries_.size());
  entries_.push_back(std::move(entry));
}

const CorpusEntry* Corpus::find(std::string_view paper_id) const {
  auto it = index_.find(paper_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

Corpus Corpus::load(const std::filesystem::path& path) {
  Corpus c;
  io::for_each_jsonl(path, [&](std::size_t, const json& j) { c.add(entry_from_json(j)); });
  return c;
}

void Corpus::save(const std::filesystem::path& path) const {
  std::vector<ordered_json> rows;
  rows.reserve(entries_.size());
  for (const auto& e : entries_) rows.push_back(to_json(e));
  io::write_jsonl(path, rows);
}

IngestResult ingest(const std::vector<json>& raw_records, const Bibliography& bibliography) {
  const std::size_t n = raw_records.size();
  std::vector<std::optional<CorpusEntry>> parsed(n);
  std::vector<std::vector<Diagnostic>> per_record(n);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      CorpusEntry entry;
      entry.paper = parse_paper_record(raw_records[i]);
      entry.mentions = detect_citation_mentions(entry.paper, bibliography, &per_record[i]);
      normalize_citation_markers(entry.paper, entry.mentions);
      parsed[i] = std::move(entry);
    } catch (const std::exception& e) {
      per_record[i].push_back({"#" + std::to_string(i), e.what()});
    }
  }

  IngestResult result;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& d : per_record[i]) result.diagnostics.push_back(std::move(d));
    if (!parsed[i]) {
      ++result.rejected;
      continue;
    }
    try {
      result.corpus.add(std::move(*parsed[i]));
    } catch (const RecordError& e) {
      ++result.rejected;
      result.diagnostics.push_back({"#" + std::to_string(i), e.what()});
    }
  }
  return result;
}

std::vector<json> read_raw_documents(const std::filesystem::path& input) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(input)) {
    for (const auto& entry : std::filesystem::directory_iterator(input)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(input);
  }
  std::vector<json> records;
  for (const auto& f : files) {
    for (auto& j : io::read_jsonl(f)) records.push_back(std::move(j));
  }
  return records;
}

}  // namespace ccg::corpus
