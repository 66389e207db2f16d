#include "ccg/oracle.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ccg/np_chunker.hpp"

namespace ccg::oracle {

namespace {

rouge::Tokens concat_tokens(const std::vector<rouge::Tokens>& parts, const std::vector<std::size_t>& selection) {
  rouge::Tokens out;
  for (std::size_t i : selection) out.insert(out.end(), parts[i].begin(), parts[i].end());
  return out;
}

}  // namespace

double selection_score(const std::vector<std::string>& candidates, const std::vector<std::size_t>& selection,
                       std::string_view target) {
  std::vector<std::string> chosen;
  for (std::size_t i : selection) chosen.push_back(candidates.at(i));
  return rouge::relevance_score(join(chosen, " "), target);
}

GreedyResult greedy_select(const std::vector<std::string>& candidates, std::string_view target,
                           std::size_t max_items) {
  // Space-joining then tokenizing equals concatenating per-candidate tokens.
  std::vector<rouge::Tokens> parts;
  parts.reserve(candidates.size());
  for (const auto& c : candidates) parts.push_back(rouge::tokenize(c));
  const rouge::Tokens ref = rouge::tokenize(target);

  GreedyResult out;
  std::vector<bool> used(candidates.size(), false);
  double current = 0.0;
  while (out.selected.size() < max_items) {
    std::size_t best = candidates.size();
    double best_score = current;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (used[i]) continue;
      auto trial = out.selected;
      trial.push_back(i);
      const double s = rouge::relevance_score(concat_tokens(parts, trial), ref);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (best == candidates.size()) break;
    used[best] = true;
    out.selected.push_back(best);
    out.gains.push_back(best_score - current);
    out.scores.push_back(best_score);
    current = best_score;
  }
  out.final_score = current;
  return out;
}

std::vector<std::size_t> dense_ranks(const std::vector<double>& scores, std::optional<std::size_t> clamp) {
  std::vector<double> distinct(scores);
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto pos = std::lower_bound(distinct.begin(), distinct.end(), scores[i], std::greater<>()) - distinct.begin();
    ranks[i] = static_cast<std::size_t>(pos) + 1;
    if (clamp) ranks[i] = std::min(ranks[i], *clamp);
  }
  return ranks;
}

std::vector<RankedScore> assign_relevance_ranks(const std::vector<std::string>& candidates, std::string_view target,
                                                std::optional<std::size_t> clamp) {
  const rouge::Tokens ref = rouge::tokenize(target);
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(rouge::relevance_score(rouge::tokenize(c), ref));
  const auto ranks = dense_ranks(scores, clamp);
  std::vector<RankedScore> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) out.push_back({i, scores[i], ranks[i]});
  return out;
}

SectionClass section_class(std::string_view title) {
  std::string t(title);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto has = [&](const char* s) { return t.find(s) != std::string::npos; };
  if (has("intro")) return SectionClass::introduction;
  if (has("related") || has("background") || has("prior work") || has("literature"))
    return SectionClass::related_work;
  if (has("method") || has("approach") || has("model") || has("material")) return SectionClass::method;
  if (has("experiment") || has("result") || has("evaluation")) return SectionClass::experiments;
  if (has("conclusion") || has("discussion") || has("future")) return SectionClass::conclusion;
  return SectionClass::other;
}

std::vector<LabeledSentence> load_labeled_sentences(const std::filesystem::path& path) {
  std::vector<LabeledSentence> out;
  io::for_each_jsonl(path, [&](std::size_t line, const json& j) {
    LabeledSentence item;
    if (j.contains("text"))
      item.text = j.at("text").get<std::string>();
    else if (j.contains("string"))
      item.text = j.at("string").get<std::string>();
    else
      throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": missing text");
    for (const char* key : {"label", "intent"}) {
      if (j.contains(key) && j.at(key).is_string() && !j.at(key).get<std::string>().empty()) {
        item.intent = parse_intent(j.at(key).get<std::string>());
        if (!item.intent)
          throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": unknown intent label");
      }
    }
    for (const char* key : {"section", "section_title", "sectionName"})
      if (j.contains(key) && j.at(key).is_string()) item.section_title = j.at(key).get<std::string>();
    for (const char* key : {"is_citation", "citation_worthy"}) {
      if (!j.contains(key)) continue;
      const auto& v = j.at(key);
      if (v.is_boolean())
        item.citation_worthy = v.get<bool>();
      else if (v.is_string())
        item.citation_worthy = v.get<std::string>() == "True" || v.get<std::string>() == "true";
    }
    out.push_back(std::move(item));
  });
  return out;
}

ordered_json to_json(const LabeledSentence& item) {
  ordered_json j;
  j["text"] = item.text;
  j["label"] = item.intent ? std::string(to_string(*item.intent)) : std::string();
  if (item.section_title) j["section"] = *item.section_title;
  if (item.citation_worthy) j["is_citation"] = *item.citation_worthy;
  return j;
}

IntentClassifier::IntentClassifier(const encoder::EncoderConfig& config, std::size_t hidden, std::uint64_t seed)
    : encoder_(params_, config, "enc."),
      intent_head_(params_, "head.intent.", config.dim, hidden, kIntentCount),
      section_head_(params_, "head.section.", config.dim, hidden, kSectionClassCount),
      worthiness_head_(params_, "head.worthiness.", config.dim, hidden, 2),
      hidden_(hidden),
      seed_(seed) {
  encoder_.init_pretrained();
  std::mt19937_64 rng(seed);
  intent_head_.init(rng);
  section_head_.init(rng);
  worthiness_head_.init(rng);
}

nn::Var IntentClassifier::embedding(nn::Graph& g, std::string_view sentence) const {
  return encoder_.embed(g, encoder_.token_ids(sentence));
}

std::array<double, kIntentCount> IntentClassifier::logits(std::string_view sentence) const {
  nn::Graph g;
  const auto v = g.value(intent_head_.forward(g, embedding(g, sentence)));
  std::array<double, kIntentCount> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

IntentPrediction IntentClassifier::predict(std::string_view sentence) const { return make_prediction(logits(sentence)); }

nn::Var IntentClassifier::loss(nn::Graph& g, const LabeledSentence& item, const ScaffoldConfig& w, bool use_section,
                               bool use_worthiness) const {
  const bool has_main = item.intent.has_value();
  const bool has_section = use_section && item.section_title.has_value();
  const bool has_worthy = use_worthiness && item.citation_worthy.has_value();
  if (!has_main && !has_section && !has_worthy) return {};
  nn::Var e = embedding(g, item.text);
  std::vector<nn::Var> terms;
  if (has_main) terms.push_back(g.scale(g.cross_entropy(intent_head_.forward(g, e), index_of(*item.intent)), w.main_weight));
  if (has_section)
    terms.push_back(g.scale(
        g.cross_entropy(section_head_.forward(g, e), static_cast<std::size_t>(section_class(*item.section_title))),
        w.section_weight));
  if (has_worthy)
    terms.push_back(
        g.scale(g.cross_entropy(worthiness_head_.forward(g, e), *item.citation_worthy ? 1 : 0), w.worthiness_weight));
  return g.sum(terms);
}

ClassifierTrainReport IntentClassifier::train(const std::vector<LabeledSentence>& data, const ScaffoldConfig& scaffold,
                                              const ClassifierTrainConfig& config) {
  if (scaffold.main_weight <= 0 || scaffold.section_weight <= 0 || scaffold.worthiness_weight <= 0)
    throw std::invalid_argument("scaffold weights must be positive");
  ClassifierTrainReport report;
  const bool any_main = std::any_of(data.begin(), data.end(), [](const auto& d) { return d.intent.has_value(); });
  if (!any_main) throw std::invalid_argument("training data carries no intent labels");
  report.section_scaffold =
      std::any_of(data.begin(), data.end(), [](const auto& d) { return d.section_title.has_value(); });
  report.worthiness_scaffold =
      std::any_of(data.begin(), data.end(), [](const auto& d) { return d.citation_worthy.has_value(); });
  if (!report.section_scaffold) report.warnings.push_back("no section titles: section scaffold disabled");
  if (!report.worthiness_scaffold)
    report.warnings.push_back("no citation-worthiness flags: worthiness scaffold disabled");
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';

  nn::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  nn::Trainer trainer(params_, adam);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const nn::LossFn fn = [&](nn::Graph& g, std::size_t i) {
    return loss(g, data[i], scaffold, report.section_scaffold, report.worthiness_scaffold);
  };
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      total += trainer.step(std::span(order).subspan(start, end - start), fn);
    }
    report.epoch_loss.push_back(total / static_cast<double>(std::max<std::size_t>(1, data.size())));
  }
  return report;
}

void IntentClassifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["kind"] = "intent_classifier";
  meta["encoder"] = encoder::to_json(encoder_.config());
  meta["hidden"] = hidden_;
  meta["seed"] = seed_;
  io::write_json(dir / "meta.json", meta);
  params_.save(dir / "params.bin");
}

std::unique_ptr<IntentClassifier> IntentClassifier::load(const std::filesystem::path& dir) {
  const json meta = io::read_json(dir / "meta.json");
  if (meta.value("kind", "") != "intent_classifier")
    throw std::runtime_error(dir.string() + " is not an intent classifier");
  auto cfg = encoder::encoder_config_from_json(meta.at("encoder"));
  auto model = std::make_unique<IntentClassifier>(cfg, meta.at("hidden").get<std::size_t>(),
                                                  meta.at("seed").get<std::uint64_t>());
  model->params_.load(dir / "params.bin");
  return model;
}

Intent pseudo_label_intent(const IntentClassifier& classifier, std::string_view citation_sentence) {
  return classifier.predict(citation_sentence).label;
}

std::vector<std::string> body_sentences(const corpus::PaperRecord& paper) {
  std::vector<std::string> out;
  for (const auto& section : paper.body) out.insert(out.end(), section.sentences.begin(), section.sentences.end());
  return out;
}

CitationAttributes oracle_attributes(const dataset::CitationInstance& instance, const corpus::Corpus& corpus,
                                     Intent intent) {
  CitationAttributes attrs;
  attrs.intent = intent;
  const auto keywords = chunker::extract_candidate_keywords(contextual_text(instance.context));
  for (std::size_t i : greedy_select(keywords, instance.target_sentence, kMaxKeywords).selected)
    attrs.keywords.push_back(keywords[i]);
  if (const auto* cited = corpus.find(instance.cited_paper_id)) {
    const auto sentences = body_sentences(cited->paper);
    for (std::size_t i : greedy_select(sentences, instance.target_sentence, kMaxSentences).selected)
      attrs.sentences.push_back(sentences[i]);
  }
  return attrs;
}

void label_dataset(std::vector<dataset::CitationInstance>& instances, const corpus::Corpus& corpus,
                   const IntentClassifier& classifier) {
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    auto& inst = instances[i];
    inst.attributes = oracle_attributes(inst, corpus, pseudo_label_intent(classifier, inst.target_sentence));
  }
}

ClassScores classification_scores(const std::vector<Intent>& gold, const std::vector<Intent>& predicted) {
  if (gold.size() != predicted.size()) throw std::invalid_argument("classification_scores: size mismatch");
  ClassScores out;
  std::array<std::size_t, kIntentCount> tp{}, fp{}, fn{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = index_of(gold[i]);
    const auto p = index_of(predicted[i]);
    if (g == p) {
      ++tp[g];
      ++correct;
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  for (std::size_t c = 0; c < kIntentCount; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    out.f1[c] = denom > 0 ? 2.0 * tp[c] / denom : 0.0;
    out.macro_f1 += out.f1[c] / kIntentCount;
  }
  out.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / gold.size();
  return out;
}

}  // namespace ccg::oracle
