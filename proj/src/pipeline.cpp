#include "ccg/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace ccg::pipeline {

namespace {

ordered_json scaffold_json(const oracle::ScaffoldConfig& s) {
  return {{"main_weight", s.main_weight}, {"section_weight", s.section_weight},
          {"worthiness_weight", s.worthiness_weight}};
}

oracle::ScaffoldConfig scaffold_from(const json& j) {
  oracle::ScaffoldConfig s;
  s.main_weight = j.value("main_weight", s.main_weight);
  s.section_weight = j.value("section_weight", s.section_weight);
  s.worthiness_weight = j.value("worthiness_weight", s.worthiness_weight);
  return s;
}

template <class T>
ordered_json train_json(const T& t) {
  return {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate}, {"seed", t.seed}};
}

template <class T>
void train_from(const json& j, T& t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.seed = j.value("seed", t.seed);
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_object()) throw std::invalid_argument(std::string("config section '") + key + "' must be an object");
  return *it;
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  PipelineConfig c;
  c.desk = desk::desk_config_from_json(section(j, "desk"));
  c.dataset = dataset::dataset_config_from_json(section(j, "dataset"));
  c.dataset.validate();

  const json& cl = section(j, "classifier");
  c.classifier.encoder = encoder::encoder_config_from_json(section(cl, "encoder"));
  c.classifier.hidden = cl.value("hidden", c.classifier.hidden);
  c.classifier.seed = cl.value("seed", c.classifier.seed);
  c.classifier.scaffold = scaffold_from(section(cl, "scaffold"));
  train_from(section(cl, "train"), c.classifier.train);
  c.classifier.holdout_fraction = cl.value("holdout_fraction", c.classifier.holdout_fraction);

  const json& su = section(j, "suggester");
  c.suggester.encoder = encoder::encoder_config_from_json(section(su, "encoder"));
  c.suggester.hidden = su.value("hidden", c.suggester.hidden);
  c.suggester.seed = su.value("seed", c.suggester.seed);
  c.suggester.extractor = suggester::extractor_config_from_json(section(su, "extractor"));
  const json& it = section(su, "intent");
  train_from(it, c.suggester.intent);
  c.suggester.intent.background_keep = it.value("background_keep", c.suggester.intent.background_keep);

  const json& ge = section(j, "generator");
  c.generator.model = generator::generator_config_from_json(section(ge, "model"));
  c.generator.training = generator::training_config_from_json(section(ge, "training"));
  c.generator.decode = generator::decode_params_from_json(section(ge, "decode"));
  c.generator.seed = ge.value("seed", c.generator.seed);

  const json& ev = section(j, "eval");
  c.eval.limit = ev.value("limit", c.eval.limit);
  c.eval.seed = ev.value("seed", c.eval.seed);

  const json& se = section(j, "service");
  c.service.host = se.value("host", c.service.host);
  c.service.port = se.value("port", c.service.port);
  c.service.corpus = se.value("corpus", c.service.corpus);
  c.service.suggester = se.value("suggester", c.service.suggester);
  c.service.generator = se.value("generator", c.service.generator);
  c.service.dataset = se.value("dataset", c.service.dataset);
  c.service.feedback = se.value("feedback", c.service.feedback);
  c.service.seed = se.value("seed", c.service.seed);
  return c;
}

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["desk"] = desk::to_json(c.desk);
  j["dataset"] = dataset::to_json(c.dataset);
  j["classifier"] = {{"encoder", encoder::to_json(c.classifier.encoder)},
                     {"hidden", c.classifier.hidden},
                     {"seed", c.classifier.seed},
                     {"scaffold", scaffold_json(c.classifier.scaffold)},
                     {"train", train_json(c.classifier.train)},
                     {"holdout_fraction", c.classifier.holdout_fraction}};
  auto intent = train_json(c.suggester.intent);
  intent["background_keep"] = c.suggester.intent.background_keep;
  j["suggester"] = {{"encoder", encoder::to_json(c.suggester.encoder)},
                    {"hidden", c.suggester.hidden},
                    {"seed", c.suggester.seed},
                    {"extractor", suggester::to_json(c.suggester.extractor)},
                    {"intent", intent}};
  j["generator"] = {{"model", generator::to_json(c.generator.model)},
                    {"training", generator::to_json(c.generator.training)},
                    {"decode", generator::to_json(c.generator.decode)},
                    {"seed", c.generator.seed}};
  j["eval"] = {{"limit", c.eval.limit}, {"seed", c.eval.seed}};
  j["service"] = {{"host", c.service.host},         {"port", c.service.port},
                  {"corpus", c.service.corpus},     {"suggester", c.service.suggester},
                  {"generator", c.service.generator}, {"dataset", c.service.dataset},
                  {"feedback", c.service.feedback},
                  {"seed", c.service.seed}};
  return j;
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(io::read_json(path)); }

bool in_holdout(std::size_t position, double fraction) {
  const double u = static_cast<double>(io::fnv1a64("holdout:" + std::to_string(position)) % 1000000) / 1e6;
  return u < fraction;
}

ClassifierRun train_classifier(const std::vector<oracle::LabeledSentence>& labeled,
                               const ClassifierSettings& settings) {
  std::vector<oracle::LabeledSentence> train, heldout;
  for (std::size_t i = 0; i < labeled.size(); ++i) (in_holdout(i, settings.holdout_fraction) ? heldout : train).push_back(labeled[i]);
  ClassifierRun run;
  run.model = std::make_unique<oracle::IntentClassifier>(settings.encoder, settings.hidden, settings.seed);
  run.report = run.model->train(train, settings.scaffold, settings.train);
  run.train_size = train.size();

  std::array<std::size_t, kIntentCount> counts{};
  for (const auto& item : train)
    if (item.intent) ++counts[index_of(*item.intent)];
  const auto majority =
      kAllIntents[static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin())];
  std::vector<Intent> gold, predicted, constant;
  for (const auto& item : heldout) {
    if (!item.intent) continue;
    gold.push_back(*item.intent);
    predicted.push_back(run.model->predict(item.text).label);
    constant.push_back(majority);
  }
  run.heldout_size = gold.size();
  if (!gold.empty()) {
    run.heldout = oracle::classification_scores(gold, predicted);
    run.majority = oracle::classification_scores(gold, constant);
  }
  return run;
}

ordered_json to_json(const ClassifierRun& run) {
  auto scores = [](const oracle::ClassScores& s) {
    return ordered_json{{"macro_f1", s.macro_f1 * 100}, {"accuracy", s.accuracy * 100},
                        {"f1", {s.f1[0] * 100, s.f1[1] * 100, s.f1[2] * 100}}};
  };
  ordered_json j;
  j["train_size"] = run.train_size;
  j["heldout_size"] = run.heldout_size;
  j["heldout"] = scores(run.heldout);
  j["majority_baseline"] = scores(run.majority);
  j["epoch_loss"] = run.report.epoch_loss;
  j["section_scaffold"] = run.report.section_scaffold;
  j["worthiness_scaffold"] = run.report.worthiness_scaffold;
  j["warnings"] = run.report.warnings;
  return j;
}

std::string_view to_string(SuggesterTask task) {
  switch (task) {
    case SuggesterTask::intent:
      return "intent";
    case SuggesterTask::keywords:
      return "keywords";
    case SuggesterTask::sentences:
      return "sentences";
  }
  return "?";
}

std::optional<SuggesterTask> parse_suggester_task(std::string_view text) {
  for (auto t : {SuggesterTask::intent, SuggesterTask::keywords, SuggesterTask::sentences})
    if (text == to_string(t)) return t;
  return std::nullopt;
}

ordered_json train_suggester_task(SuggesterTask task, const std::vector<dataset::CitationInstance>& train,
                                  const corpus::Corpus& corpus, const SuggesterSettings& settings,
                                  const std::filesystem::path& out_dir) {
  const auto labeled = require_labeled(train);
  const auto dir = out_dir / std::string(to_string(task));
  ordered_json summary;
  summary["task"] = to_string(task);
  summary["instances"] = labeled.size();
  if (task == SuggesterTask::intent) {
    std::vector<ContextBundle> contexts;
    std::vector<Intent> labels;
    for (const auto& inst : labeled) {
      if (!inst.attributes->intent) continue;
      contexts.push_back(inst.context);
      labels.push_back(*inst.attributes->intent);
    }
    suggester::IntentPredictor predictor(settings.encoder, settings.hidden, settings.seed);
    const auto report = predictor.train(contexts, labels, settings.intent);
    predictor.save(dir);
    summary["epoch_loss"] = report.epoch_loss;
    summary["pool"] = report.pool;
    return summary;
  }
  const auto kind = task == SuggesterTask::keywords ? suggester::CandidateKind::keywords
                                                    : suggester::CandidateKind::sentences;
  const auto queries = suggester::build_ranking_queries(labeled, corpus, kind, settings.extractor);
  auto enc = encoder::TextEncoder::pretrained(settings.encoder);
  summary["mean_rank_before"] = suggester::mean_rank_of_best(*enc, queries);
  const auto report = suggester::triplet_fine_tune(*enc, queries, settings.extractor);
  summary["mean_rank_after"] = suggester::mean_rank_of_best(*enc, queries);
  summary["queries"] = queries.size();
  summary["queries_with_pairs"] = report.queries_with_pairs;
  summary["epoch_loss"] = report.epoch_loss;
  enc->save(dir, {{"task", to_string(task)}});
  return summary;
}

GeneratorRun train_generator(const std::vector<dataset::CitationInstance>& train, const GeneratorSettings& settings) {
  const auto labeled = require_labeled(train);
  GeneratorRun run;
  run.model = std::make_unique<generator::GeneratorModel>(
      settings.model, generator::build_vocab(labeled, settings.model), settings.seed);
  run.report = generator::train_generator(labeled, *run.model, settings.training);
  return run;
}

std::vector<dataset::CitationInstance> require_labeled(std::vector<dataset::CitationInstance> instances) {
  std::erase_if(instances, [](const auto& inst) { return !inst.attributes.has_value(); });
  if (instances.empty()) throw std::invalid_argument("no labeled instances: run the label stage first");
  return instances;
}

}  // namespace ccg::pipeline
