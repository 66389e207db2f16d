#include "ccg/desk_corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "ccg/dataset.hpp"

namespace ccg::desk {

namespace {

struct Topic {
  const char* field;
  const char* domain;
  std::vector<std::string> phrases;
  std::vector<std::string> tasks;
  std::vector<std::string> datasets;
};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t{
      {"graph learning", "computer science",
       {"graph neural network", "message passing scheme", "graph attention layer", "spectral convolution",
        "link prediction model", "node embedding table"},
       {"node classification", "molecule property prediction", "community detection"},
       {"cora", "citeseer", "ogb"}},
      {"language modeling", "computer science",
       {"transformer language model", "masked token objective", "subword tokenizer", "attention head",
        "pretrained encoder", "summarization model"},
       {"question answering", "text summarization", "machine translation"},
       {"wikitext", "glue", "squad"}},
      {"computer vision", "computer science",
       {"convolutional backbone", "object detector", "segmentation network", "residual block",
        "augmentation policy", "vision transformer"},
       {"image classification", "object detection", "scene parsing"},
       {"imagenet", "coco", "cityscapes"}},
      {"speech processing", "computer science",
       {"acoustic model", "speech recognition system", "spectrogram feature", "speaker embedding",
        "beam search decoder", "pronunciation lexicon"},
       {"speech recognition", "speaker verification", "keyword spotting"},
       {"librispeech", "voxceleb", "timit"}},
      {"reinforcement learning", "computer science",
       {"policy gradient method", "reward model", "value function", "replay buffer", "actor critic architecture",
        "exploration bonus"},
       {"robot control", "game playing", "navigation"},
       {"atari", "mujoco", "procgen"}},
      {"computational biology", "biology",
       {"protein structure predictor", "gene expression profile", "sequence alignment tool", "single cell atlas",
        "variant calling pipeline", "protein language model"},
       {"protein folding", "cell type annotation", "variant detection"},
       {"uniprot", "gtex", "encode"}},
      {"clinical informatics", "medicine",
       {"clinical trial protocol", "diagnostic classifier", "electronic health record", "risk prediction model",
        "image registration method", "drug interaction graph"},
       {"mortality prediction", "disease diagnosis", "treatment recommendation"},
       {"mimic", "eicu", "ukbiobank"}},
      {"numerical optimization", "computer science",
       {"stochastic gradient descent", "cosine learning rate schedule", "adaptive optimizer",
        "weight decay regularizer", "batch normalization layer", "quasi-newton method"},
       {"large batch training", "hyperparameter tuning", "model compression"},
       {"cifar", "imagenet", "wikitext"}},
  };
  return t;
}

const Topic kHistory{"medieval history", "history",
                     {"trade route", "manuscript archive", "monastic chronicle"},
                     {"archival research"},
                     {"vatican"}};

const std::vector<std::string> kMetrics{"accuracy", "recall", "precision", "calibration", "robustness",
                                        "efficiency"};

const std::vector<std::string> kClaimTemplates{
    "the {kw} improves {metric} on the {dataset} benchmark",
    "the {kw} reduces training cost without hurting {metric}",
    "the {kw} remains stable under heavy label noise",
    "the {kw} scales to the full {dataset} corpus",
};

const std::array<std::vector<std::string>, kIntentCount> kCitationTemplates{{
    {"The {kw} has been widely studied in prior work {cite}.",
     "Previous studies have explored the {kw} for {task} {cite}.", "Earlier work showed that {claim} {cite}.",
     "A large body of work investigates the {kw} {cite}."},
    {"We adopt the {kw} proposed in {cite} for our experiments.",
     "Following {cite}, we use the {kw} to implement {task}.",
     "Our implementation builds on the {kw} described in {cite}.",
     "We use the {kw} from {cite} because {claim}."},
    {"Our results outperform the {kw} reported in {cite}.", "Consistent with {cite}, we find that {claim}.",
     "Compared to {cite}, our model improves over the {kw} baseline.",
     "These results confirm the findings of {cite} that {claim}."},
}};

const std::array<std::vector<std::string>, kIntentCount> kCues{{
    {"This problem has a long history in the literature.", "Many approaches have been proposed for {task}.",
     "We first review related approaches."},
    {"We now describe our training setup.", "Our pipeline consists of three stages.",
     "This section details the model architecture."},
    {"Table 2 summarizes our main results.", "We now compare against strong baselines.",
     "Our model achieves the best score on {dataset}."},
}};

const std::vector<std::string> kFiller{
    "We focus on {task} in this paper.",
    "Our approach targets {task} at scale.",
    "The {kw} is a central component of modern systems.",
    "Data quality remains a practical concern.",
    "All experiments use a single workstation.",
    "We release our code and data.",
};

const std::array<std::vector<std::string>, kIntentCount> kSectionsFor{{
    {"Introduction", "Related Work"},
    {"Method", "Implementation"},
    {"Experiments", "Results"},
}};

const std::vector<std::string> kSectionOrder{"Introduction", "Related Work", "Method", "Implementation",
                                             "Experiments", "Results", "Conclusion"};

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

struct Slots {
  std::string kw, claim, task, dataset, metric, cite;
};

std::string render(const std::string& tmpl, const Slots& s) {
  std::string out = tmpl;
  out = replace_all(out, "{kw}", s.kw);
  out = replace_all(out, "{claim}", s.claim);
  out = replace_all(out, "{task}", s.task);
  out = replace_all(out, "{dataset}", s.dataset);
  out = replace_all(out, "{metric}", s.metric);
  out = replace_all(out, "{cite}", s.cite);
  return capitalize(out);
}

Intent draw_intent(std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return u < 0.5 ? Intent::background : (u < 0.8 ? Intent::method : Intent::result);
}

struct CitedPaper {
  std::string id;
  const Topic* topic;
  std::vector<std::string> phrases;
  /// One claim clause per phrase, lowercase, no final period.
  std::vector<std::string> claims;
  std::string dataset;
};

CitedPaper make_cited(const std::string& id, const Topic& topic, std::mt19937_64& rng) {
  CitedPaper p{id, &topic, topic.phrases, {}, pick(topic.datasets, rng)};
  std::shuffle(p.phrases.begin(), p.phrases.end(), rng);
  p.phrases.resize(std::min<std::size_t>(3, p.phrases.size()));
  for (const auto& kw : p.phrases) {
    Slots s{kw, "", pick(topic.tasks, rng), p.dataset, pick(kMetrics, rng), ""};
    p.claims.push_back(render(pick(kClaimTemplates, rng), s));
    p.claims.back()[0] = 't';
  }
  return p;
}

ordered_json section(const std::string& title, const std::vector<std::string>& sentences) {
  ordered_json s;
  s["section_title"] = title;
  s["paragraphs"] = {join(sentences, " ")};
  return s;
}

ordered_json cited_record(const CitedPaper& p, int year, std::mt19937_64& rng) {
  const Topic& t = *p.topic;
  const std::string task = pick(t.tasks, rng);
  ordered_json r;
  r["paper_id"] = p.id;
  r["title"] = capitalize(p.phrases[0]) + " for " + task;
  std::vector<std::string> abstract{
      "We study " + task + " in the setting of " + t.field + ".",
      "We propose a " + p.phrases[0] + " combined with the " + p.phrases[1] + ".",
      "Experiments on " + p.dataset + " show that the " + p.phrases[2] + " is effective."};
  r["abstract"] = join(abstract, " ");
  r["year"] = year;
  r["domains"] = {t.domain};
  std::vector<std::string> intro{capitalize(task) + " is a core problem in " + t.field + ".",
                                 "Existing systems often ignore the " + p.phrases[1] + ".",
                                 "We address this gap with a simple design."};
  std::vector<std::string> method, results;
  for (std::size_t k = 0; k < p.phrases.size(); ++k) {
    method.push_back("We describe the " + p.phrases[k] + " in detail.");
    results.push_back(capitalize(p.claims[k]) + ".");
  }
  results.push_back("We report the mean of three runs.");
  r["body"] = {section("Introduction", intro), section("Method", method), section("Results", results)};
  return r;
}

struct CitationSlot {
  Intent intent;
  std::string sentence;  // with "{cite}" still in place
  std::vector<std::string> context;
};

/// Builds one citing paper around the chosen cited papers; returns the raw
/// record and fills its bibliography entry.
ordered_json citing_record(const std::string& id, int year, const Topic& topic,
                           const std::vector<const CitedPaper*>& cited, ordered_json& bib_entry,
                           const DeskConfig& cfg, bool unresolved_marker, std::mt19937_64& rng) {
  std::map<std::string, std::vector<std::string>> sections;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t key = 1;
  for (const CitedPaper* p : cited) {
    const std::string marker = std::to_string(key++);
    bib_entry[marker] = p->id;
    const Intent intent = draw_intent(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, p->phrases.size() - 1)(rng);
    Slots s{p->phrases[k], p->claims[k], pick(p->topic->tasks, rng), p->dataset, pick(kMetrics, rng),
            "[" + marker + "]"};
    const auto& sec_title = pick(kSectionsFor[index_of(intent)], rng);
    auto& body = sections[sec_title];
    Slots filler_slots = s;
    filler_slots.kw = unit(rng) < 0.3 ? s.kw : pick(topic.phrases, rng);
    filler_slots.task = pick(topic.tasks, rng);
    body.push_back(render(pick(kFiller, rng), filler_slots));
    const Intent cue_intent = unit(rng) < cfg.cue_rate ? intent : draw_intent(rng);
    body.push_back(render(pick(kCues[index_of(cue_intent)], rng), s));
    body.push_back(render(pick(kCitationTemplates[index_of(intent)], rng), s));
  }
  if (cited.size() >= 2) {
    sections["Introduction"].insert(sections["Introduction"].begin(),
                                    "Several methods have been proposed for " + pick(topic.tasks, rng) + " [1, 2].");
  }
  if (unresolved_marker) sections["Conclusion"].push_back("Future work could extend the ideas of [99].");
  sections["Conclusion"].push_back("We plan to extend this study to " + pick(topic.tasks, rng) + ".");

  ordered_json r;
  r["paper_id"] = id;
  r["title"] = "Revisiting " + pick(topic.phrases, rng) + " for " + pick(topic.tasks, rng);
  r["abstract"] = "We revisit " + pick(topic.tasks, rng) + " with a focus on " + pick(topic.phrases, rng) + ".";
  r["year"] = year;
  r["domains"] = {topic.domain};
  ordered_json body = ordered_json::array();
  for (const auto& title : kSectionOrder)
    if (auto it = sections.find(title); it != sections.end()) body.push_back(section(title, it->second));
  r["body"] = body;
  return r;
}

std::vector<const CitedPaper*> choose_cited(const std::vector<CitedPaper>& pool, const Topic& topic,
                                            std::size_t count, std::mt19937_64& rng) {
  std::vector<const CitedPaper*> same, other;
  for (const auto& p : pool) (p.topic == &topic ? same : other).push_back(&p);
  std::vector<const CitedPaper*> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& from = (unit(rng) < 0.85 && !same.empty()) || other.empty() ? same : other;
    out.push_back(pick(from, rng));
  }
  return out;
}

}  // namespace

ordered_json to_json(const DeskConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["train_cited_per_topic"] = c.train_cited_per_topic;
  j["eval_cited_per_topic"] = c.eval_cited_per_topic;
  j["train_citing_per_topic"] = c.train_citing_per_topic;
  j["eval_citing_papers"] = c.eval_citing_papers;
  j["citations_per_paper"] = c.citations_per_paper;
  j["labeled_sentences"] = c.labeled_sentences;
  j["label_noise"] = c.label_noise;
  j["cue_rate"] = c.cue_rate;
  j["eval_year"] = c.eval_year;
  j["validation_fraction"] = c.validation_fraction;
  return j;
}

DeskConfig desk_config_from_json(const json& j) {
  DeskConfig c;
  c.seed = j.value("seed", c.seed);
  c.train_cited_per_topic = j.value("train_cited_per_topic", c.train_cited_per_topic);
  c.eval_cited_per_topic = j.value("eval_cited_per_topic", c.eval_cited_per_topic);
  c.train_citing_per_topic = j.value("train_citing_per_topic", c.train_citing_per_topic);
  c.eval_citing_papers = j.value("eval_citing_papers", c.eval_citing_papers);
  c.citations_per_paper = j.value("citations_per_paper", c.citations_per_paper);
  c.labeled_sentences = j.value("labeled_sentences", c.labeled_sentences);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.cue_rate = j.value("cue_rate", c.cue_rate);
  c.eval_year = j.value("eval_year", c.eval_year);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  return c;
}

std::vector<std::string> all_keyphrases() {
  std::vector<std::string> out;
  for (const auto& t : topics()) out.insert(out.end(), t.phrases.begin(), t.phrases.end());
  out.insert(out.end(), kHistory.phrases.begin(), kHistory.phrases.end());
  return out;
}

std::string citation_sentence(Intent intent, std::mt19937_64& rng) {
  const Topic& t = pick(topics(), rng);
  const CitedPaper p = make_cited("", t, rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(0, p.phrases.size() - 1)(rng);
  Slots s{p.phrases[k], p.claims[k], pick(t.tasks, rng), p.dataset, pick(kMetrics, rng), "[]"};
  return render(pick(kCitationTemplates[index_of(intent)], rng), s);
}

DeskCorpus make_desk_corpus(const DeskConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> train_year(2008, 2020), cited_year(2003, 2019);
  DeskCorpus out;
  out.bibliography = ordered_json::object();

  std::vector<CitedPaper> train_pool, eval_pool[2];
  for (const auto& t : topics()) {
    const std::string stem = replace_all(t.field, " ", "-");
    for (std::size_t i = 0; i < cfg.train_cited_per_topic; ++i) {
      train_pool.push_back(make_cited("ref-" + stem + "-" + std::to_string(i), t, rng));
      out.raw_records.push_back(cited_record(train_pool.back(), cited_year(rng), rng));
    }
    for (std::size_t i = 0; i < cfg.eval_cited_per_topic; ++i) {
      // Alternate between the validation and test pools so an eval cited
      // paper is only ever cited from one side.
      auto& pool = eval_pool[i % 2];
      pool.push_back(make_cited("new-" + stem + "-" + std::to_string(i), t, rng));
      out.raw_records.push_back(cited_record(pool.back(), cited_year(rng), rng));
    }
  }
  std::vector<CitedPaper> history;
  for (std::size_t i = 0; i < 2; ++i) {
    history.push_back(make_cited("hist-" + std::to_string(i), kHistory, rng));
    out.raw_records.push_back(cited_record(history.back(), cited_year(rng), rng));
  }

  std::size_t serial = 0;
  for (const auto& t : topics()) {
    for (std::size_t i = 0; i < cfg.train_citing_per_topic; ++i) {
      const std::string id = "paper-" + std::to_string(serial++);
      auto cited = choose_cited(train_pool, t, cfg.citations_per_paper, rng);
      if (serial % 9 == 0) cited.back() = &history[serial % 2];
      ordered_json bib = ordered_json::object();
      // A few papers fall outside both the training range and the eval year.
      const int year = serial % 25 == 0 ? 2021 : train_year(rng);
      out.raw_records.push_back(citing_record(id, year, t, cited, bib, cfg, serial % 20 == 0, rng));
      out.bibliography[id] = bib;
    }
  }
  for (std::size_t i = 0; i < cfg.eval_citing_papers; ++i) {
    const std::string id = "paper-" + std::to_string(serial++);
    const Topic& t = topics()[i % topics().size()];
    const bool validation =
        dataset::eval_split_for(id, cfg.validation_fraction) == dataset::Split::validation;
    auto cited = choose_cited(eval_pool[validation ? 0 : 1], t, cfg.citations_per_paper, rng);
    ordered_json bib = ordered_json::object();
    out.raw_records.push_back(citing_record(id, cfg.eval_year, t, cited, bib, cfg, false, rng));
    out.bibliography[id] = bib;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < cfg.labeled_sentences; ++i) {
    oracle::LabeledSentence item;
    const Topic& t = pick(topics(), rng);
    if (unit(rng) < 0.25) {
      Slots s{pick(t.phrases, rng), "", pick(t.tasks, rng), pick(t.datasets, rng), pick(kMetrics, rng), ""};
      const bool cue = unit(rng) < 0.5;
      const Intent which = draw_intent(rng);
      item.text = render(cue ? pick(kCues[index_of(which)], rng) : pick(kFiller, rng), s);
      item.section_title = pick(kSectionsFor[index_of(which)], rng);
      item.citation_worthy = false;
    } else {
      const Intent intent = draw_intent(rng);
      item.text = citation_sentence(intent, rng);
      item.section_title = pick(kSectionsFor[index_of(intent)], rng);
      item.citation_worthy = true;
      Intent label = intent;
      if (unit(rng) < cfg.label_noise) label = kAllIntents[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
      item.intent = label;
    }
    out.labeled.push_back(std::move(item));
  }
  return out;
}

void write_desk_corpus(const std::filesystem::path& dir, const DeskCorpus& corpus) {
  std::filesystem::create_directories(dir);
  io::write_jsonl(dir / "raw.jsonl", corpus.raw_records);
  io::write_json(dir / "bibliography.json", corpus.bibliography);
  std::vector<ordered_json> rows;
  rows.reserve(corpus.labeled.size());
  for (const auto& l : corpus.labeled) rows.push_back(oracle::to_json(l));
  io::write_jsonl(dir / "labeled.jsonl", rows);
}

}  // namespace ccg::desk
