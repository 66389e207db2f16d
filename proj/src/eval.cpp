#include "ccg/eval.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "ccg/kernels.hpp"
#include "ccg/rouge.hpp"

namespace ccg::eval {

std::string ModelGenerator::generate(const dataset::CitationInstance& instance,
                                     const CitationAttributes& attributes) const {
  return model_.generate(instance.context, attributes, params_);
}

std::string IgnoreAttributesGenerator::generate(const dataset::CitationInstance& instance,
                                                const CitationAttributes&) const {
  if (!instance.context.local_context.empty()) return instance.context.local_context.back();
  return instance.context.cited_title;
}

std::string EchoAttributeGenerator::generate(const dataset::CitationInstance&,
                                             const CitationAttributes& attributes) const {
  if (!attributes.keywords.empty()) return join(attributes.keywords, " ");
  return join(attributes.sentences, " ");
}

std::string IntentTemplateGenerator::generate(const dataset::CitationInstance&,
                                              const CitationAttributes& attributes) const {
  return templates_[index_of(attributes.intent.value_or(Intent::background))];
}

std::string_view to_string(Mode mode) { return mode == Mode::automatic ? "automatic" : "controlled"; }

std::string_view to_string(MatchKind kind) { return kind == MatchKind::keywords ? "keywords" : "sentences"; }

CitationAttributes apply_mask(CitationAttributes attributes, const AttributeMask& mask) {
  if (!mask.intent) attributes.intent.reset();
  if (!mask.keywords) attributes.keywords.clear();
  if (!mask.sentences) attributes.sentences.clear();
  return attributes;
}

AttributeProvider oracle_provider() {
  return [](const dataset::CitationInstance& inst) { return inst.attributes.value_or(CitationAttributes{}); };
}

AttributeProvider empty_provider() {
  return [](const dataset::CitationInstance&) { return CitationAttributes{}; };
}

namespace {

std::vector<std::string> cited_body(const corpus::Corpus& corpus, const std::string& id) {
  const auto* entry = corpus.find(id);
  return entry ? oracle::body_sentences(entry->paper) : std::vector<std::string>{};
}

}  // namespace

AttributeProvider suggestion_provider(const corpus::Corpus& corpus, const suggester::SuggesterModels& models,
                                      const suggester::ExtractorConfig& config) {
  return [&corpus, &models, config](const dataset::CitationInstance& inst) {
    const auto bundle = suggester::suggest(inst.context, cited_body(corpus, inst.cited_paper_id), models, config,
                                           suggester::SuggestMode::automatic);
    CitationAttributes attrs;
    attrs.intent = bundle.intent.label;
    for (const auto& k : bundle.keywords) attrs.keywords.push_back(k.text);
    for (const auto& s : bundle.sentences) attrs.sentences.push_back(s.text);
    return attrs;
  };
}

EvalRow eval_mode(const std::vector<dataset::CitationInstance>& instances, const CitationGenerator& generator,
                  const AttributeProvider& attributes, Mode mode, const AttributeMask& mask, std::string system) {
  std::vector<std::string> outputs(instances.size()), references(instances.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    outputs[i] = generator.generate(instances[i], apply_mask(attributes(instances[i]), mask));
    references[i] = instances[i].target_sentence;
  }
  const auto scores = kernels::rouge_pairs(outputs, references);
  EvalRow row;
  row.system = std::move(system);
  row.mode = mode;
  row.mask = mask;
  row.n = instances.size();
  for (const auto& s : scores) {
    row.rouge1 += s.r1;
    row.rouge2 += s.r2;
    row.rougeL += s.rl;
  }
  if (row.n) {
    const double scale = 100.0 / static_cast<double>(row.n);
    row.rouge1 *= scale;
    row.rouge2 *= scale;
    row.rougeL *= scale;
  }
  return row;
}

std::array<std::array<double, kIntentCount>, kIntentCount> ConfusionMatrix::frequencies() const {
  std::array<std::array<double, kIntentCount>, kIntentCount> f{};
  for (std::size_t r = 0; r < kIntentCount; ++r) {
    const auto total = row_total(r);
    for (std::size_t c = 0; c < kIntentCount; ++c)
      f[r][c] = total ? static_cast<double>(counts[r][c]) / static_cast<double>(total) : 0.0;
  }
  return f;
}

std::size_t ConfusionMatrix::row_total(std::size_t row) const {
  std::size_t t = 0;
  for (auto c : counts[row]) t += c;
  return t;
}

bool ConfusionMatrix::diagonal_is_row_max() const {
  for (std::size_t r = 0; r < kIntentCount; ++r) {
    if (!row_total(r)) continue;
    for (std::size_t c = 0; c < kIntentCount; ++c)
      if (c != r && counts[r][c] > counts[r][r]) return false;
  }
  return true;
}

ConfusionMatrix intent_controllability(const std::vector<dataset::CitationInstance>& instances,
                                       const CitationGenerator& generator, const IntentJudge& judge,
                                       const AttributeProvider& base_attributes) {
  std::vector<std::array<std::size_t, kIntentCount>> classified(instances.size());
#pragma omp parallel for schedule(dynamic, 2)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    const auto base = base_attributes(instances[i]);
    for (Intent assigned : kAllIntents) {
      auto attrs = base;
      attrs.intent = assigned;
      classified[i][index_of(assigned)] = index_of(judge.classify(generator.generate(instances[i], attrs)));
    }
  }
  ConfusionMatrix m;
  for (const auto& row : classified)
    for (std::size_t a = 0; a < kIntentCount; ++a) ++m.counts[a][row[a]];
  return m;
}

double MatchRateReport::wilson_lower(double z) const {
  if (!trials) return 0.0;
  const double n = static_cast<double>(trials);
  const double p = frequency();
  const double z2 = z * z;
  return (p + z2 / (2 * n) - z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n))) / (1 + z2 / n);
}

CandidateProvider suggestion_candidates(const corpus::Corpus& corpus, const suggester::SuggesterModels& models,
                                        const suggester::ExtractorConfig& config, MatchKind kind) {
  return [&corpus, &models, config, kind](const dataset::CitationInstance& inst) {
    const auto bundle = suggester::suggest(inst.context, cited_body(corpus, inst.cited_paper_id), models, config,
                                           suggester::SuggestMode::ui);
    std::vector<std::string> out;
    for (const auto& item : kind == MatchKind::keywords ? bundle.keywords : bundle.sentences) out.push_back(item.text);
    return out;
  };
}

double safe_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = kernels::dot(a.data(), a.data(), a.size());
  const double nb = kernels::dot(b.data(), b.data(), b.size());
  if (na == 0.0 || nb == 0.0) return 0.0;
  return kernels::dot(a.data(), b.data(), a.size()) / (std::sqrt(na) * std::sqrt(nb));
}

MatchRateReport attribute_match_rate(const std::vector<dataset::CitationInstance>& instances,
                                     const CitationGenerator& generator, const encoder::TextEncoder& judge,
                                     MatchKind kind, const CandidateProvider& candidates,
                                     const AttributeProvider& base_attributes, std::uint64_t seed) {
  struct Outcome {
    bool skipped = false;
    std::size_t matches = 0;
  };
  std::vector<Outcome> outcomes(instances.size());
#pragma omp parallel for schedule(dynamic, 2)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    const auto& inst = instances[i];
    auto pool = candidates(inst);
    if (pool.size() > 5) pool.resize(5);
    if (pool.size() < 2) {
      outcomes[i].skipped = true;
      continue;
    }
    std::mt19937_64 rng(io::fnv1a64(std::to_string(seed) + ":" + inst.instance_id));
    std::uniform_int_distribution<std::size_t> first(0, pool.size() - 1), second(0, pool.size() - 2);
    const std::size_t a = first(rng);
    std::size_t b = second(rng);
    if (b >= a) ++b;
    const auto base = base_attributes(inst);
    const std::string& text_a = pool[a];
    const std::string& text_b = pool[b];
    const auto emb_a = judge.embed(text_a);
    const auto emb_b = judge.embed(text_b);
    for (int trial = 0; trial < 2; ++trial) {
      const std::string& own = trial == 0 ? text_a : text_b;
      auto attrs = base;
      if (kind == MatchKind::keywords)
        attrs.keywords = {own};
      else
        attrs.sentences = {own};
      const auto out = judge.embed(generator.generate(inst, attrs));
      const double to_a = safe_cosine(out, emb_a);
      const double to_b = safe_cosine(out, emb_b);
      if (trial == 0 ? to_a > to_b : to_b > to_a) ++outcomes[i].matches;
    }
  }
  MatchRateReport report;
  report.kind = kind;
  for (const auto& o : outcomes) {
    if (o.skipped) {
      ++report.skipped;
      continue;
    }
    report.trials += 2;
    report.matches += o.matches;
  }
  return report;
}

ordered_json to_json(const EvalRow& row) {
  ordered_json j;
  j["system"] = row.system;
  j["mode"] = to_string(row.mode);
  j["intent"] = row.mask.intent;
  j["keywords"] = row.mask.keywords;
  j["sentences"] = row.mask.sentences;
  j["rouge1"] = row.rouge1;
  j["rouge2"] = row.rouge2;
  j["rougeL"] = row.rougeL;
  j["n"] = row.n;
  return j;
}

ordered_json to_json(const ConfusionMatrix& m) {
  ordered_json j;
  j["labels"] = {"background", "method", "result"};
  j["counts"] = m.counts;
  j["frequencies"] = m.frequencies();
  j["diagonal_is_row_max"] = m.diagonal_is_row_max();
  return j;
}

ordered_json to_json(const MatchRateReport& r) {
  ordered_json j;
  j["kind"] = to_string(r.kind);
  j["matches"] = r.matches;
  j["trials"] = r.trials;
  j["skipped"] = r.skipped;
  j["frequency"] = r.frequency();
  j["wilson_lower_95"] = r.wilson_lower();
  return j;
}

std::string render_rows(const std::vector<EvalRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Mode" << std::setw(22) << "Model" << std::setw(8) << "intent" << std::setw(10)
      << "keywords" << std::setw(11) << "sentences" << std::right << std::setw(8) << "R-1" << std::setw(8) << "R-2"
      << std::setw(8) << "R-L" << '\n';
  auto mark = [](bool on) { return on ? "yes" : "--"; };
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << to_string(r.mode) << std::setw(22) << r.system << std::setw(8)
        << mark(r.mask.intent) << std::setw(10) << mark(r.mask.keywords) << std::setw(11) << mark(r.mask.sentences)
        << std::right << std::setw(8) << r.rouge1 << std::setw(8) << r.rouge2 << std::setw(8) << r.rougeL << '\n';
  }
  return out.str();
}

std::string render_confusion(const ConfusionMatrix& m) {
  std::ostringstream out;
  const auto f = m.frequencies();
  out << std::left << std::setw(14) << "assigned" << std::right;
  for (Intent c : kAllIntents) out << std::setw(12) << to_string(c);
  out << std::setw(8) << "n" << '\n' << std::fixed << std::setprecision(3);
  for (Intent r : kAllIntents) {
    out << std::left << std::setw(14) << to_string(r) << std::right;
    for (Intent c : kAllIntents) out << std::setw(12) << f[index_of(r)][index_of(c)];
    out << std::setw(8) << m.row_total(index_of(r)) << '\n';
  }
  return out.str();
}

}  // namespace ccg::eval
