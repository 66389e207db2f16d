#include "ccg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ccg::dataset {

void DatasetConfig::validate() const {
  if (context_window < 1) throw std::invalid_argument("context_window must be >= 1");
  if (min_words >= max_words) throw std::invalid_argument("min_words must be < max_words");
  if (min_citing_sentences < 1) throw std::invalid_argument("min_citing_sentences must be >= 1");
  if (train_year_min > train_year_max) throw std::invalid_argument("empty training year range");
  if (validation_fraction < 0.0 || validation_fraction > 1.0)
    throw std::invalid_argument("validation_fraction must be in [0, 1]");
}

ordered_json to_json(const DatasetConfig& cfg) {
  ordered_json j;
  j["context_window"] = cfg.context_window;
  j["min_words"] = cfg.min_words;
  j["max_words"] = cfg.max_words;
  j["train_year_range"] = {cfg.train_year_min, cfg.train_year_max};
  j["eval_year"] = cfg.eval_year;
  j["validation_fraction"] = cfg.validation_fraction;
  j["min_citing_sentences"] = cfg.min_citing_sentences;
  j["domain_filter"] = cfg.domain_filter;
  return j;
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig cfg;
  cfg.context_window = j.value("context_window", cfg.context_window);
  cfg.min_words = j.value("min_words", cfg.min_words);
  cfg.max_words = j.value("max_words", cfg.max_words);
  if (j.contains("train_year_range")) {
    const auto& r = j.at("train_year_range");
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument("train_year_range must be [min, max]");
    cfg.train_year_min = r[0].get<int>();
    cfg.train_year_max = r[1].get<int>();
  }
  cfg.eval_year = j.value("eval_year", cfg.eval_year);
  cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
  cfg.min_citing_sentences = j.value("min_citing_sentences", cfg.min_citing_sentences);
  cfg.domain_filter = j.value("domain_filter", cfg.domain_filter);
  cfg.validate();
  return cfg;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) {
  for (Split s : kAllSplits)
    if (text == to_string(s)) return s;
  return std::nullopt;
}

ordered_json to_json(const CitationInstance& inst) {
  ordered_json j;
  j["instance_id"] = inst.instance_id;
  j["citing_paper_id"] = inst.citing_paper_id;
  j["cited_paper_id"] = inst.cited_paper_id;
  j["section_title"] = inst.section_title;
  j["section_idx"] = inst.where.section;
  j["sentence_idx"] = inst.where.sentence;
  j["target_sentence"] = inst.target_sentence;
  j["context"] = ccg::to_json(inst.context);
  if (inst.attributes) j["attributes"] = ccg::to_json(*inst.attributes);
  return j;
}

CitationInstance instance_from_json(const json& j) {
  CitationInstance inst;
  inst.instance_id = j.at("instance_id").get<std::string>();
  inst.citing_paper_id = j.at("citing_paper_id").get<std::string>();
  inst.cited_paper_id = j.at("cited_paper_id").get<std::string>();
  inst.section_title = j.value("section_title", "");
  inst.where.section = j.value("section_idx", std::size_t{0});
  inst.where.sentence = j.value("sentence_idx", std::size_t{0});
  inst.target_sentence = j.at("target_sentence").get<std::string>();
  inst.context = context_from_json(j.at("context"));
  if (j.contains("attributes") && !j.at("attributes").is_null())
    inst.attributes = attributes_from_json(j.at("attributes"));
  return inst;
}

void SplitManifest::rebuild_provenance(const std::vector<CitationInstance>& instances) {
  for (auto& s : citing_ids) s.clear();
  for (auto& s : cited_ids) s.clear();
  for (const auto& inst : instances) {
    auto it = assignment.find(inst.instance_id);
    if (it == assignment.end()) continue;
    const auto k = static_cast<std::size_t>(it->second);
    citing_ids[k].insert(inst.citing_paper_id);
    cited_ids[k].insert(inst.cited_paper_id);
  }
}

std::size_t word_count(std::string_view sentence) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : sentence) {
    const bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

bool domain_ok(const corpus::PaperRecord& paper, const DatasetConfig& config) {
  if (config.domain_filter.empty()) return true;
  for (const auto& d : paper.domains)
    if (std::find(config.domain_filter.begin(), config.domain_filter.end(), d) != config.domain_filter.end())
      return true;
  return false;
}

}  // namespace

std::set<std::string> filter_training_cited_papers(const corpus::Corpus& corpus, const DatasetConfig& config) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& entry : corpus.entries())
    for (const auto& m : entry.mentions)
      for (const auto& id : m.cited_paper_ids) ++counts[id];
  std::set<std::string> out;
  for (const auto& [id, n] : counts) {
    if (n < config.min_citing_sentences) continue;
    const auto* entry = corpus.find(id);
    if (!entry) continue;
    const int year = entry->paper.year;
    if (year < config.train_year_min || year > config.train_year_max) continue;
    if (!domain_ok(entry->paper, config)) continue;
    out.insert(id);
  }
  return out;
}

BuildResult build_instances(const corpus::Corpus& corpus, const std::set<std::string>* eligible_cited,
                            const DatasetConfig& config) {
  config.validate();
  const auto& entries = corpus.entries();
  std::vector<BuildResult> partial(entries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long e = 0; e < static_cast<long>(entries.size()); ++e) {
    const auto& entry = entries[e];
    auto& out = partial[e];
    for (const auto& m : entry.mentions) {
      if (m.cited_paper_ids.size() != 1) {
        ++out.dropped_multi_citation;
        continue;
      }
      const auto& section = entry.paper.body.at(m.where.section);
      const std::string& sentence = section.sentences.at(m.where.sentence);
      const std::size_t words = word_count(sentence);
      if (words < config.min_words || words > config.max_words) {
        ++out.dropped_length;
        continue;
      }
      const std::string& cited_id = m.cited_paper_ids.front();
      if (eligible_cited && !eligible_cited->count(cited_id)) {
        ++out.dropped_ineligible;
        continue;
      }
      const auto* cited = corpus.find(cited_id);
      if (!cited) {
        ++out.dropped_missing_cited;
        out.diagnostics.push_back({entry.paper.paper_id, "cited paper " + cited_id + " not in corpus"});
        continue;
      }
      CitationInstance inst;
      inst.instance_id = entry.paper.paper_id + ":" + std::to_string(m.where.section) + ":" +
                         std::to_string(m.where.sentence);
      inst.citing_paper_id = entry.paper.paper_id;
      inst.cited_paper_id = cited_id;
      inst.target_sentence = sentence;
      inst.section_title = section.section_title;
      inst.where = m.where;
      const std::size_t first = m.where.sentence > config.context_window ? m.where.sentence - config.context_window : 0;
      for (std::size_t k = first; k < m.where.sentence; ++k) inst.context.local_context.push_back(section.sentences[k]);
      inst.context.cited_title = cited->paper.title;
      inst.context.cited_abstract = cited->paper.abstract;
      out.instances.push_back(std::move(inst));
    }
  }
  BuildResult result;
  for (auto& p : partial) {
    std::move(p.instances.begin(), p.instances.end(), std::back_inserter(result.instances));
    std::move(p.diagnostics.begin(), p.diagnostics.end(), std::back_inserter(result.diagnostics));
    result.dropped_multi_citation += p.dropped_multi_citation;
    result.dropped_length += p.dropped_length;
    result.dropped_missing_cited += p.dropped_missing_cited;
    result.dropped_ineligible += p.dropped_ineligible;
  }
  return result;
}

Split eval_split_for(std::string_view citing_paper_id, double validation_fraction) {
  const double u = static_cast<double>(io::fnv1a64(citing_paper_id) % 1000000) / 1e6;
  return u < validation_fraction ? Split::validation : Split::test;
}

std::vector<std::optional<Split>> initial_assignment(const std::vector<CitationInstance>& instances,
                                                      const corpus::Corpus& corpus,
                                                      const std::set<std::string>& eligible_cited,
                                                      const DatasetConfig& config) {
  std::vector<std::optional<Split>> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const auto* citing = corpus.find(inst.citing_paper_id);
    if (!citing || !domain_ok(citing->paper, config)) continue;
    const int year = citing->paper.year;
    if (year == config.eval_year) {
      out[i] = eval_split_for(inst.citing_paper_id, config.validation_fraction);
    } else if (year >= config.train_year_min && year <= config.train_year_max &&
               eligible_cited.count(inst.cited_paper_id)) {
      out[i] = Split::train;
    }
  }
  return out;
}

SplitManifest decouple_splits(const std::vector<CitationInstance>& instances,
                              const std::vector<std::optional<Split>>& initial) {
  if (initial.size() != instances.size()) throw std::invalid_argument("decouple_splits: size mismatch");
  SplitManifest manifest;
  std::set<std::string> taken_citing, taken_cited;
  for (Split split : {Split::test, Split::validation, Split::train}) {
    const auto k = static_cast<std::size_t>(split);
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (initial[i] != split) continue;
      const auto& inst = instances[i];
      if (taken_citing.count(inst.citing_paper_id) || taken_cited.count(inst.cited_paper_id)) continue;
      manifest.assignment[inst.instance_id] = split;
      manifest.citing_ids[k].insert(inst.citing_paper_id);
      manifest.cited_ids[k].insert(inst.cited_paper_id);
    }
    taken_citing.insert(manifest.citing_ids[k].begin(), manifest.citing_ids[k].end());
    taken_cited.insert(manifest.cited_ids[k].begin(), manifest.cited_ids[k].end());
  }
  return manifest;
}

std::vector<Violation> audit_decoupling(const SplitManifest& manifest,
                                        const std::vector<CitationInstance>& instances) {
  struct Member {
    const CitationInstance* inst;
    Split split;
  };
  std::map<std::string, std::vector<Member>> by_citing, by_cited;
  for (const auto& inst : instances) {
    auto it = manifest.assignment.find(inst.instance_id);
    if (it == manifest.assignment.end()) continue;
    by_citing[inst.citing_paper_id].push_back({&inst, it->second});
    by_cited[inst.cited_paper_id].push_back({&inst, it->second});
  }
  std::vector<Violation> out;
  auto scan = [&](const std::map<std::string, std::vector<Member>>& groups, const char* role) {
    for (const auto& [id, members] : groups) {
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
          if (members[a].split != members[b].split)
            out.push_back({members[a].inst->instance_id, members[b].inst->instance_id, id, role});
    }
  };
  scan(by_citing, "citing");
  scan(by_cited, "cited");
  return out;
}

DatasetStatistics dataset_statistics(const SplitManifest& manifest, const std::vector<CitationInstance>& instances) {
  DatasetStatistics stats;
  std::array<std::set<std::string>, 3> citing, cited;
  for (const auto& inst : instances) {
    auto it = manifest.assignment.find(inst.instance_id);
    if (it == manifest.assignment.end()) continue;
    const auto k = static_cast<std::size_t>(it->second);
    auto& s = stats.splits[k];
    ++s.sentences;
    citing[k].insert(inst.citing_paper_id);
    cited[k].insert(inst.cited_paper_id);
    if (inst.attributes && inst.attributes->intent)
      ++s.intents[index_of(*inst.attributes->intent)];
    else
      ++s.unlabeled;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    stats.splits[k].citing_papers = citing[k].size();
    stats.splits[k].cited_papers = cited[k].size();
  }
  return stats;
}

ordered_json to_json(const DatasetStatistics& stats) {
  ordered_json j;
  for (Split split : kAllSplits) {
    const auto& s = stats.splits[static_cast<std::size_t>(split)];
    ordered_json row;
    row["cited_papers"] = s.cited_papers;
    row["citing_papers"] = s.citing_papers;
    row["sentences"] = s.sentences;
    for (Intent intent : kAllIntents) row[std::string(to_string(intent))] = s.intents[index_of(intent)];
    row["unlabeled"] = s.unlabeled;
    j[std::string(to_string(split))] = row;
  }
  return j;
}

std::string render_statistics(const DatasetStatistics& stats) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "" << std::right;
  for (Split split : kAllSplits) out << std::setw(14) << to_string(split);
  out << '\n';
  auto row = [&](const std::string& label, auto get) {
    out << std::left << std::setw(14) << label << std::right;
    for (const auto& s : stats.splits) out << std::setw(14) << get(s);
    out << '\n';
  };
  row("cited papers", [](const SplitStats& s) { return s.cited_papers; });
  row("citing papers", [](const SplitStats& s) { return s.citing_papers; });
  row("sentences", [](const SplitStats& s) { return s.sentences; });
  for (Intent intent : kAllIntents)
    row(std::string("  ") + std::string(to_string(intent)),
        [intent](const SplitStats& s) { return s.intents[index_of(intent)]; });
  return out.str();
}

void save_dataset(const std::filesystem::path& dir, const SplitManifest& manifest,
                  const std::vector<CitationInstance>& instances) {
  std::filesystem::create_directories(dir);
  std::vector<ordered_json> rows;
  std::array<std::vector<ordered_json>, 3> per_split;
  for (const auto& inst : instances) {
    auto it = manifest.assignment.find(inst.instance_id);
    if (it == manifest.assignment.end()) continue;
    rows.push_back(ordered_json{{"instance_id", inst.instance_id}, {"split", to_string(it->second)}});
    per_split[static_cast<std::size_t>(it->second)].push_back(to_json(inst));
  }
  io::write_jsonl(dir / "manifest.jsonl", rows);
  for (Split split : kAllSplits)
    io::write_jsonl(dir / (std::string(to_string(split)) + ".jsonl"), per_split[static_cast<std::size_t>(split)]);
  io::write_json(dir / "stats.json", to_json(dataset_statistics(manifest, instances)));
}

std::vector<CitationInstance> load_split(const std::filesystem::path& dir, Split split) {
  std::vector<CitationInstance> out;
  const auto path = dir / (std::string(to_string(split)) + ".jsonl");
  if (!std::filesystem::exists(path)) return out;
  io::for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(instance_from_json(j)); });
  return out;
}

SplitManifest load_manifest(const std::filesystem::path& manifest_file,
                            const std::vector<CitationInstance>& instances) {
  SplitManifest manifest;
  io::for_each_jsonl(manifest_file, [&](std::size_t line, const json& j) {
    const auto split = parse_split(j.at("split").get<std::string>());
    if (!split) throw std::runtime_error("manifest line " + std::to_string(line) + ": unknown split");
    manifest.assignment[j.at("instance_id").get<std::string>()] = *split;
  });
  manifest.rebuild_provenance(instances);
  return manifest;
}

DatasetFiles load_dataset(const std::filesystem::path& dir) {
  DatasetFiles files;
  for (Split split : kAllSplits) {
    auto part = load_split(dir, split);
    std::move(part.begin(), part.end(), std::back_inserter(files.instances));
  }
  files.manifest = load_manifest(dir / "manifest.jsonl", files.instances);
  return files;
}

DatasetBuild build_dataset(const corpus::Corpus& corpus, const DatasetConfig& config) {
  DatasetBuild out;
  const auto eligible = filter_training_cited_papers(corpus, config);
  out.eligible_cited = eligible.size();
  out.build = build_instances(corpus, nullptr, config);
  const auto initial = initial_assignment(out.build.instances, corpus, eligible, config);
  out.manifest = decouple_splits(out.build.instances, initial);
  for (auto& inst : out.build.instances)
    if (out.manifest.assignment.count(inst.instance_id)) out.instances.push_back(inst);
  return out;
}

}  // namespace ccg::dataset
