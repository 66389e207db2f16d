// Command-line front end for every pipeline stage.

#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ccg/corpus.hpp"
#include "ccg/dataset.hpp"
#include "ccg/desk_corpus.hpp"
#include "ccg/eval.hpp"
#include "ccg/generator.hpp"
#include "ccg/kernels.hpp"
#include "ccg/oracle.hpp"
#include "ccg/pipeline.hpp"
#include "ccg/rouge.hpp"
#include "ccg/service.hpp"
#include "ccg/suggester.hpp"

namespace fs = std::filesystem;
using namespace ccg;

namespace {

pipeline::PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(path);
}

void emit(const ordered_json& report, const std::string& path) {
  if (!path.empty()) io::write_json(path, report);
  std::cout << report.dump(2) << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(';', start), text.size());
    auto item = text.substr(start, end - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.erase(item.begin());
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.pop_back();
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> non_empty_lines(const fs::path& path) {
  std::vector<std::string> out;
  for (auto& line : io::read_lines(path))
    if (!line.empty()) out.push_back(line);
  return out;
}

ContextBundle context_for(const std::string& context_file, const corpus::Corpus& corpus, const std::string& cited,
                          std::vector<std::string>* body) {
  ContextBundle ctx;
  if (!context_file.empty()) ctx.local_context = corpus::split_sentences(io::read_text(context_file));
  const auto* e = corpus.find(cited);
  if (!e) throw std::invalid_argument("unknown paper " + cited);
  ctx.cited_title = e->paper.title;
  ctx.cited_abstract = e->paper.abstract;
  if (body) *body = oracle::body_sentences(e->paper);
  return ctx;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controllable citation generation toolkit"};
  app.require_subcommand(1);

  std::string config_path, report_path;

  // make-desk-corpus
  auto* desk_cmd = app.add_subcommand("make-desk-corpus", "Write the synthetic miniature corpus");
  std::string desk_out;
  desk_cmd->add_option("--config", config_path, "Pipeline config");
  desk_cmd->add_option("--out", desk_out, "Output directory")->required();

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse raw documents into a corpus");
  std::string ingest_input, ingest_output, bib_path;
  ingest_cmd->add_option("--input", ingest_input, "Raw .jsonl file or directory")->required();
  ingest_cmd->add_option("--output", ingest_output, "Corpus .jsonl")->required();
  ingest_cmd->add_option("--bibliography", bib_path, "Marker map (JSON)")->required();
  ingest_cmd->add_option("--report", report_path, "Write the summary here");

  // build-dataset
  auto* build_cmd = app.add_subcommand("build-dataset", "Build decoupled train/validation/test splits");
  std::string corpus_path, out_dir;
  build_cmd->add_option("--corpus", corpus_path)->required();
  build_cmd->add_option("--config", config_path);
  build_cmd->add_option("--out", out_dir)->required();

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "Check a split manifest for shared papers");
  std::string manifest_path;
  audit_cmd->add_option("--manifest", manifest_path, "manifest.jsonl inside a dataset directory")->required();

  // score
  auto* score_cmd = app.add_subcommand("score", "Mean ROUGE F1 of aligned candidate/reference lines");
  std::string cand_path, ref_path;
  score_cmd->add_option("--candidates", cand_path)->required();
  score_cmd->add_option("--references", ref_path)->required();

  // train-classifier
  auto* clf_cmd = app.add_subcommand("train-classifier", "Train the scaffolded intent classifier");
  std::string labeled_path;
  clf_cmd->add_option("--labeled", labeled_path, "Labeled sentences (.jsonl)")->required();
  clf_cmd->add_option("--config", config_path);
  clf_cmd->add_option("--out", out_dir)->required();
  clf_cmd->add_option("--report", report_path);

  // label
  auto* label_cmd = app.add_subcommand("label", "Attach oracle attributes to every instance");
  std::string dataset_dir, intent_model;
  label_cmd->add_option("--dataset", dataset_dir)->required();
  label_cmd->add_option("--corpus", corpus_path)->required();
  label_cmd->add_option("--intent-model", intent_model)->required();
  label_cmd->add_option("--out", out_dir)->required();

  // train-suggester
  auto* ts_cmd = app.add_subcommand("train-suggester", "Train one suggestion component");
  std::string task_name;
  ts_cmd->add_option("--task", task_name)->required()->check(CLI::IsMember({"intent", "keywords", "sentences"}));
  ts_cmd->add_option("--dataset", dataset_dir)->required();
  ts_cmd->add_option("--corpus", corpus_path, "Needed for sentence candidates")->required();
  ts_cmd->add_option("--config", config_path);
  ts_cmd->add_option("--out", out_dir, "Suggester model directory")->required();
  ts_cmd->add_option("--report", report_path);

  // suggest
  auto* sg_cmd = app.add_subcommand("suggest", "Suggest intent, keywords and sentences");
  std::string context_file, cited_id, suggester_dir, mode_name = "ui";
  sg_cmd->add_option("--context", context_file, "Text file with the local context")->required();
  sg_cmd->add_option("--cited", cited_id)->required();
  sg_cmd->add_option("--corpus", corpus_path)->required();
  sg_cmd->add_option("--suggester", suggester_dir)->required();
  sg_cmd->add_option("--mode", mode_name)->check(CLI::IsMember({"auto", "ui"}));
  sg_cmd->add_option("--config", config_path);

  // train-generator
  auto* tg_cmd = app.add_subcommand("train-generator", "Train the conditional generator");
  tg_cmd->add_option("--dataset", dataset_dir)->required();
  tg_cmd->add_option("--config", config_path);
  tg_cmd->add_option("--out", out_dir)->required();
  tg_cmd->add_option("--report", report_path);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Generate one citation sentence");
  std::string generator_dir, intent_name, keywords_arg, sentences_file;
  gen_cmd->add_option("--context", context_file);
  gen_cmd->add_option("--cited", cited_id)->required();
  gen_cmd->add_option("--corpus", corpus_path)->required();
  gen_cmd->add_option("--generator", generator_dir)->required();
  gen_cmd->add_option("--intent", intent_name);
  gen_cmd->add_option("--keywords", keywords_arg, "Semicolon-separated");
  gen_cmd->add_option("--sentences", sentences_file, "One sentence per line");
  gen_cmd->add_option("--config", config_path);

  // evaluate
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a generator on the test split");
  std::string eval_mode = "controlled";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t limit = 0;
  ev_cmd->add_option("--dataset", dataset_dir)->required();
  ev_cmd->add_option("--generator", generator_dir)->required();
  ev_cmd->add_option("--suggester", suggester_dir);
  ev_cmd->add_option("--corpus", corpus_path);
  ev_cmd->add_option("--intent-model", intent_model);
  ev_cmd->add_option("--mode", eval_mode)
      ->check(CLI::IsMember({"auto", "controlled", "intent-ctrl", "match-rate", "all"}));
  ev_cmd->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s, seed_given = true; });
  ev_cmd->add_option("--limit", limit, "Use the first N test instances (0 = all)");
  ev_cmd->add_option("--config", config_path);
  ev_cmd->add_option("--report", report_path);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  int port = 0;
  serve_cmd->add_option("--config", config_path)->required();
  serve_cmd->add_option("--port", port, "Overrides the configured port");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto started = std::chrono::steady_clock::now();
    if (*desk_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto desk = desk::make_desk_corpus(cfg.desk);
      desk::write_desk_corpus(desk_out, desk);
      emit({{"raw_records", desk.raw_records.size()}, {"labeled_sentences", desk.labeled.size()}, {"out", desk_out}},
           "");
    } else if (*ingest_cmd) {
      const auto raw = corpus::read_raw_documents(ingest_input);
      auto result = corpus::ingest(raw, corpus::Bibliography::load(bib_path));
      result.corpus.save(ingest_output);
      for (const auto& d : result.diagnostics) std::cerr << "warning: " << d.record << ": " << d.message << '\n';
      std::size_t mentions = 0;
      for (const auto& e : result.corpus.entries()) mentions += e.mentions.size();
      emit({{"papers", result.corpus.size()},
            {"mentions", mentions},
            {"rejected", result.rejected},
            {"diagnostics", result.diagnostics.size()}},
           report_path);
    } else if (*build_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto corpus = corpus::Corpus::load(corpus_path);
      const auto built = dataset::build_dataset(corpus, cfg.dataset);
      dataset::save_dataset(out_dir, built.manifest, built.instances);
      for (const auto& d : built.build.diagnostics) std::cerr << "warning: " << d.record << ": " << d.message << '\n';
      const auto stats = dataset::dataset_statistics(built.manifest, built.instances);
      std::cerr << dataset::render_statistics(stats);
      emit({{"instances", built.instances.size()},
            {"eligible_cited_papers", built.eligible_cited},
            {"dropped_multi_citation", built.build.dropped_multi_citation},
            {"dropped_length", built.build.dropped_length},
            {"dropped_missing_cited", built.build.dropped_missing_cited},
            {"violations", dataset::audit_decoupling(built.manifest, built.instances).size()},
            {"statistics", dataset::to_json(stats)}},
           "");
    } else if (*audit_cmd) {
      const fs::path dir = fs::path(manifest_path).parent_path();
      std::vector<dataset::CitationInstance> instances;
      for (auto split : dataset::kAllSplits) {
        auto part = dataset::load_split(dir, split);
        instances.insert(instances.end(), part.begin(), part.end());
      }
      const auto manifest = dataset::load_manifest(manifest_path, instances);
      const auto violations = dataset::audit_decoupling(manifest, instances);
      ordered_json rows = ordered_json::array();
      for (const auto& v : violations)
        rows.push_back({{"instance_a", v.instance_a},
                        {"instance_b", v.instance_b},
                        {"shared_paper_id", v.shared_paper_id},
                        {"role", v.role}});
      emit({{"violations", violations.size()}, {"details", rows}}, "");
      return violations.empty() ? 0 : 2;
    } else if (*score_cmd) {
      const auto cands = io::read_lines(cand_path);
      const auto refs = io::read_lines(ref_path);
      if (cands.size() != refs.size())
        throw std::invalid_argument("candidate and reference files have different line counts");
      const auto scores = kernels::rouge_pairs(cands, refs);
      double r1 = 0, r2 = 0, rl = 0;
      for (const auto& s : scores) r1 += s.r1, r2 += s.r2, rl += s.rl;
      const double n = static_cast<double>(std::max<std::size_t>(scores.size(), 1));
      std::printf("%-8s %8s %8s %8s\n%-8zu %8.2f %8.2f %8.2f\n", "n", "R-1", "R-2", "R-L", scores.size(),
                  100 * r1 / n, 100 * r2 / n, 100 * rl / n);
    } else if (*clf_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto labeled = oracle::load_labeled_sentences(labeled_path);
      auto run = pipeline::train_classifier(labeled, cfg.classifier);
      for (const auto& w : run.report.warnings) std::cerr << "warning: " << w << '\n';
      run.model->save(out_dir);
      auto report = pipeline::to_json(run);
      report["seconds"] = seconds_since(started);
      emit(report, report_path);
    } else if (*label_cmd) {
      auto files = dataset::load_dataset(dataset_dir);
      const auto corpus = corpus::Corpus::load(corpus_path);
      const auto classifier = oracle::IntentClassifier::load(intent_model);
      oracle::label_dataset(files.instances, corpus, *classifier);
      dataset::save_dataset(out_dir, files.manifest, files.instances);
      const auto stats = dataset::dataset_statistics(files.manifest, files.instances);
      std::cerr << dataset::render_statistics(stats);
      emit({{"instances", files.instances.size()}, {"statistics", dataset::to_json(stats)}}, "");
    } else if (*ts_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto corpus = corpus::Corpus::load(corpus_path);
      const auto train = dataset::load_split(dataset_dir, dataset::Split::train);
      auto report = pipeline::train_suggester_task(*pipeline::parse_suggester_task(task_name), train, corpus,
                                                   cfg.suggester, out_dir);
      report["seconds"] = seconds_since(started);
      emit(report, report_path);
    } else if (*sg_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto corpus = corpus::Corpus::load(corpus_path);
      std::vector<std::string> body;
      const auto ctx = context_for(context_file, corpus, cited_id, &body);
      const auto models = suggester::SuggesterModels::load(suggester_dir);
      const auto bundle = suggester::suggest(ctx, body, models, cfg.suggester.extractor,
                                             mode_name == "auto" ? suggester::SuggestMode::automatic
                                                                 : suggester::SuggestMode::ui);
      emit(suggester::to_json(bundle), "");
    } else if (*tg_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto train = dataset::load_split(dataset_dir, dataset::Split::train);
      auto run = pipeline::train_generator(train, cfg.generator);
      run.model->save(out_dir, {{"data_hash", run.report.data_hash}});
      emit({{"instances", train.size()},
            {"vocab", run.model->vocab().size()},
            {"epoch_nll", run.report.epoch_nll},
            {"data_hash", run.report.data_hash},
            {"seconds", seconds_since(started)}},
           report_path);
    } else if (*gen_cmd) {
      const auto cfg = config_or_default(config_path);
      const auto corpus = corpus::Corpus::load(corpus_path);
      const auto ctx = context_for(context_file, corpus, cited_id, nullptr);
      CitationAttributes attrs;
      if (!intent_name.empty()) {
        attrs.intent = parse_intent(intent_name);
        if (!attrs.intent) throw std::invalid_argument("unknown intent " + intent_name);
      }
      attrs.keywords = split_list(keywords_arg);
      if (!sentences_file.empty()) attrs.sentences = non_empty_lines(sentences_file);
      const auto model = generator::GeneratorModel::load(generator_dir);
      emit({{"sentence", model->generate(ctx, attrs, cfg.generator.decode)}, {"attributes", to_json(attrs)}}, "");
    } else if (*ev_cmd) {
      const auto cfg = config_or_default(config_path);
      if (!seed_given) seed = cfg.eval.seed;
      if (!limit) limit = cfg.eval.limit;
      auto test = pipeline::require_labeled(dataset::load_split(dataset_dir, dataset::Split::test));
      if (limit && test.size() > limit) test.resize(limit);
      const auto model = generator::GeneratorModel::load(generator_dir);
      const eval::ModelGenerator gen(*model, cfg.generator.decode);
      const bool all = eval_mode == "all";

      std::unique_ptr<corpus::Corpus> corpus;
      std::unique_ptr<suggester::SuggesterModels> models;
      auto need_suggester = [&] {
        if (suggester_dir.empty() || corpus_path.empty())
          throw std::invalid_argument("this mode needs --suggester and --corpus");
        if (!corpus) corpus = std::make_unique<corpus::Corpus>(corpus::Corpus::load(corpus_path));
        if (!models)
          models = std::make_unique<suggester::SuggesterModels>(suggester::SuggesterModels::load(suggester_dir));
      };

      ordered_json report;
      report["v"] = 1;
      report["mode"] = eval_mode;
      report["seed"] = seed;
      report["n"] = test.size();
      report["generator"] = generator_dir;
      std::vector<eval::EvalRow> rows;
      std::string table;
      if (all || eval_mode == "controlled") {
        const auto oracle = eval::oracle_provider();
        const std::vector<std::pair<eval::AttributeMask, const char*>> masks{
            {{true, true, true}, "ccg"},       {{true, false, false}, "ccg"}, {{false, true, false}, "ccg"},
            {{false, false, true}, "ccg"},     {{false, false, false}, "ccg-unconditional"}};
        for (const auto& [mask, name] : masks)
          rows.push_back(eval::eval_mode(test, gen, oracle, eval::Mode::controlled, mask, name));
      }
      if (all || eval_mode == "auto") {
        need_suggester();
        const auto suggested = eval::suggestion_provider(*corpus, *models, cfg.suggester.extractor);
        rows.push_back(eval::eval_mode(test, gen, suggested, eval::Mode::automatic, {}, "ccg"));
        rows.push_back(
            eval::eval_mode(test, gen, suggested, eval::Mode::automatic, {false, false, false}, "ccg-unconditional"));
      }
      if (!rows.empty()) {
        ordered_json r = ordered_json::array();
        for (const auto& row : rows) r.push_back(eval::to_json(row));
        report["rows"] = r;
        table += eval::render_rows(rows);
      }
      if (all || eval_mode == "intent-ctrl") {
        if (intent_model.empty()) throw std::invalid_argument("intent-ctrl needs --intent-model");
        const auto classifier = oracle::IntentClassifier::load(intent_model);
        const eval::ClassifierJudge judge(*classifier);
        const auto m = eval::intent_controllability(test, gen, judge, eval::oracle_provider());
        report["confusion"] = eval::to_json(m);
        table += eval::render_confusion(m);
      }
      if (all || eval_mode == "match-rate") {
        need_suggester();
        const auto judge = encoder::TextEncoder::pretrained(cfg.suggester.encoder);
        ordered_json rates = ordered_json::array();
        for (auto kind : {eval::MatchKind::keywords, eval::MatchKind::sentences}) {
          const auto cands = eval::suggestion_candidates(*corpus, *models, cfg.suggester.extractor, kind);
          // The sampled keyword or sentence is the only condition.
          const auto r = eval::attribute_match_rate(test, gen, *judge, kind, cands, eval::empty_provider(), seed);
          rates.push_back(eval::to_json(r));
          char line[160];
          std::snprintf(line, sizeof line, "%-10s match %.4f  (%zu/%zu trials, %zu skipped, 95%% lower %.4f)\n",
                        std::string(eval::to_string(kind)).c_str(), r.frequency(), r.matches, r.trials, r.skipped,
                        r.wilson_lower());
          table += line;
        }
        report["match_rate"] = rates;
      }
      report["table"] = table;
      report["seconds"] = seconds_since(started);
      std::cerr << table;
      if (!report_path.empty()) io::write_json(report_path, report);
      std::cout << report.dump(2) << '\n';
    } else if (*serve_cmd) {
      const auto cfg = pipeline::load_config(config_path);
      auto settings = cfg.service;
      if (port) settings.port = port;
      const auto resources = service::load_resources(settings, cfg);
      service::FeedbackStore store(settings.feedback);
      service::ServiceApi api(resources, store, settings.seed);
      std::cerr << "listening on " << settings.host << ':' << settings.port << '\n';
      service::serve(api, settings.host, settings.port);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
