#include "ccg/suggester.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ccg/kernels.hpp"
#include "ccg/np_chunker.hpp"
#include "ccg/oracle.hpp"

namespace ccg::suggester {

void ExtractorConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0, 1]");
  if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (sentence_rank_clamp < 1) throw std::invalid_argument("sentence_rank_clamp must be >= 1");
}

ordered_json to_json(const ExtractorConfig& c) {
  ordered_json j;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["sentence_rank_clamp"] = c.sentence_rank_clamp;
  j["ui_top_k"] = c.ui_top_k;
  j["auto_keywords"] = c.auto_keywords;
  j["auto_sentences"] = c.auto_sentences;
  j["mmr_for_sentences"] = c.mmr_for_sentences;
  j["max_pairs_per_query"] = c.max_pairs_per_query;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  return j;
}

ExtractorConfig extractor_config_from_json(const json& j) {
  ExtractorConfig c;
  c.gamma = j.value("gamma", c.gamma);
  c.alpha = j.value("alpha", c.alpha);
  c.sentence_rank_clamp = j.value("sentence_rank_clamp", c.sentence_rank_clamp);
  c.ui_top_k = j.value("ui_top_k", c.ui_top_k);
  c.auto_keywords = j.value("auto_keywords", c.auto_keywords);
  c.auto_sentences = j.value("auto_sentences", c.auto_sentences);
  c.mmr_for_sentences = j.value("mmr_for_sentences", c.mmr_for_sentences);
  c.max_pairs_per_query = j.value("max_pairs_per_query", c.max_pairs_per_query);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
  const double na = kernels::dot(a.data(), a.data(), a.size());
  const double nb = kernels::dot(b.data(), b.data(), b.size());
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero vector");
  return kernels::dot(a.data(), b.data(), a.size()) / (std::sqrt(na) * std::sqrt(nb));
}

double triplet_loss(double f_i, double f_j, std::size_t r_i, std::size_t r_j, double gamma) {
  if (r_i >= r_j) throw std::invalid_argument("triplet_loss requires r_i < r_j");
  return std::max(0.0, f_j - f_i + static_cast<double>(r_j - r_i) * gamma);
}

nn::Var triplet_loss(nn::Graph& g, nn::Var f_i, nn::Var f_j, std::size_t r_i, std::size_t r_j, double gamma) {
  if (r_i >= r_j) throw std::invalid_argument("triplet_loss requires r_i < r_j");
  return g.relu(g.add_scalar(g.sub(f_j, f_i), static_cast<double>(r_j - r_i) * gamma));
}

std::vector<RankedCandidate> rank_candidates(const encoder::TextEncoder& encoder, std::string_view query,
                                             const std::vector<std::string>& candidates) {
  const auto q = encoder.embed(query);
  const auto emb = encoder.embed_all(candidates);
  const std::size_t d = encoder.dim();
  std::vector<RankedCandidate> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RankedCandidate c;
    c.index = i;
    c.text = candidates[i];
    c.embedding.assign(emb.begin() + i * d, emb.begin() + (i + 1) * d);
    c.score = cosine(q, c.embedding);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

std::vector<MmrPick> mmr_select(const std::vector<double>& query_sim, const std::vector<double>& pair_sim,
                                std::size_t k, double alpha) {
  const std::size_t n = query_sim.size();
  if (pair_sim.size() != n * n) throw std::invalid_argument("mmr_select: similarity matrix shape");
  std::vector<MmrPick> picks;
  std::vector<bool> used(n, false);
  while (picks.size() < std::min(k, n)) {
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      double penalty = 0.0;
      if (!picks.empty()) {
        penalty = -std::numeric_limits<double>::infinity();
        for (const auto& p : picks) penalty = std::max(penalty, pair_sim[i * n + p.index]);
      }
      const double s = (1.0 - alpha) * query_sim[i] - alpha * penalty;
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    used[best] = true;
    picks.push_back({best, best_score});
  }
  return picks;
}

std::vector<RankedCandidate> mmr_select(const encoder::TextEncoder& encoder, std::string_view query,
                                        const std::vector<std::string>& candidates, std::size_t k, double alpha) {
  const std::size_t n = candidates.size();
  const std::size_t d = encoder.dim();
  const auto q = encoder.embed(query);
  const auto emb = encoder.embed_all(candidates);
  std::vector<double> query_sim(n);
  for (std::size_t i = 0; i < n; ++i) query_sim[i] = cosine(q, std::span(emb).subspan(i * d, d));
  const auto pair_sim = kernels::cosine_matrix(emb.data(), n, emb.data(), n, d);
  std::vector<RankedCandidate> out;
  for (const auto& pick : mmr_select(query_sim, pair_sim, k, alpha)) {
    RankedCandidate c;
    c.index = pick.index;
    c.text = candidates[pick.index];
    c.embedding.assign(emb.begin() + pick.index * d, emb.begin() + (pick.index + 1) * d);
    c.score = query_sim[pick.index];
    c.rank = out.size() + 1;
    out.push_back(std::move(c));
  }
  return out;
}

IntentPredictor::IntentPredictor(const encoder::EncoderConfig& config, std::size_t hidden, std::uint64_t seed)
    : encoder_(params_, config, "enc."),
      head_(params_, "head.", config.dim, hidden, kIntentCount),
      hidden_(hidden),
      seed_(seed) {
  encoder_.init_pretrained();
  std::mt19937_64 rng(seed);
  head_.init(rng);
}

std::vector<std::string> IntentPredictor::input_pieces(const ContextBundle& context) const {
  std::string text(encoder::kClsToken);
  text += ' ';
  text += join(context.local_context, " ");
  text += ' ';
  text += encoder::kSepToken;
  text += ' ';
  text += context.cited_title;
  text += ' ';
  text += context.cited_abstract;
  auto ps = encoder::pieces(text);
  if (ps.size() > encoder_.config().max_tokens) ps.resize(encoder_.config().max_tokens);
  return ps;
}

nn::Var IntentPredictor::logits(nn::Graph& g, const ContextBundle& context) const {
  const bool empty = std::all_of(context.local_context.begin(), context.local_context.end(),
                                 [](const auto& s) { return s.empty(); }) &&
                     context.cited_title.empty() && context.cited_abstract.empty();
  if (empty) throw std::invalid_argument("predict_intent: context, title and abstract are all empty");
  return head_.forward(g, encoder_.embed(g, encoder_.token_ids(input_pieces(context))));
}

IntentPrediction IntentPredictor::predict(const ContextBundle& context) const {
  nn::Graph g;
  const auto v = g.value(logits(g, context));
  std::array<double, kIntentCount> l{};
  std::copy(v.begin(), v.end(), l.begin());
  return make_prediction(l);
}

nn::Var IntentPredictor::loss(nn::Graph& g, const ContextBundle& context, Intent label) const {
  return g.cross_entropy(logits(g, context), index_of(label));
}

std::vector<std::size_t> downsample_background(const std::vector<Intent>& labels, double keep, std::mt19937_64& rng) {
  std::vector<std::size_t> background, out;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Intent::background ? background : out).push_back(i);
  std::shuffle(background.begin(), background.end(), rng);
  const auto n = static_cast<std::size_t>(std::llround(keep * static_cast<double>(background.size())));
  out.insert(out.end(), background.begin(), background.begin() + std::min(n, background.size()));
  std::sort(out.begin(), out.end());
  return out;
}

IntentTrainReport IntentPredictor::train(const std::vector<ContextBundle>& contexts, const std::vector<Intent>& labels,
                                         const IntentTrainConfig& config) {
  if (contexts.size() != labels.size()) throw std::invalid_argument("contexts/labels size mismatch");
  std::set<Intent> present(labels.begin(), labels.end());
  if (present.size() < 2) throw std::invalid_argument("intent predictor needs at least two intent classes");
  IntentTrainReport report;
  std::mt19937_64 rng(config.seed);
  auto pool = downsample_background(labels, config.background_keep, rng);
  for (std::size_t i : pool) ++report.pool[index_of(labels[i])];

  nn::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  nn::Trainer trainer(params_, adam);
  const nn::LossFn fn = [&](nn::Graph& g, std::size_t i) { return loss(g, contexts[i], labels[i]); };
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
      const std::size_t end = std::min(pool.size(), start + config.batch_size);
      total += trainer.step(std::span(pool).subspan(start, end - start), fn);
    }
    report.epoch_loss.push_back(total / static_cast<double>(std::max<std::size_t>(1, pool.size())));
  }
  return report;
}

void IntentPredictor::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["kind"] = "intent_predictor";
  meta["encoder"] = encoder::to_json(encoder_.config());
  meta["hidden"] = hidden_;
  meta["seed"] = seed_;
  io::write_json(dir / "meta.json", meta);
  params_.save(dir / "params.bin");
}

std::unique_ptr<IntentPredictor> IntentPredictor::load(const std::filesystem::path& dir) {
  const json meta = io::read_json(dir / "meta.json");
  if (meta.value("kind", "") != "intent_predictor")
    throw std::runtime_error(dir.string() + " is not an intent predictor");
  auto model = std::make_unique<IntentPredictor>(encoder::encoder_config_from_json(meta.at("encoder")),
                                                 meta.at("hidden").get<std::size_t>(),
                                                 meta.at("seed").get<std::uint64_t>());
  model->params_.load(dir / "params.bin");
  return model;
}

std::vector<RankingQuery> build_ranking_queries(const std::vector<dataset::CitationInstance>& instances,
                                                const corpus::Corpus& corpus, CandidateKind kind,
                                                const ExtractorConfig& config) {
  std::vector<RankingQuery> out(instances.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    const auto& inst = instances[i];
    RankingQuery q;
    q.query = contextual_text(inst.context);
    std::optional<std::size_t> clamp;
    if (kind == CandidateKind::keywords) {
      q.candidates = chunker::extract_candidate_keywords(q.query);
    } else {
      if (const auto* cited = corpus.find(inst.cited_paper_id)) q.candidates = oracle::body_sentences(cited->paper);
      clamp = config.sentence_rank_clamp;
    }
    std::erase_if(q.candidates, [](const std::string& c) { return encoder::pieces(c).empty(); });
    for (const auto& r : oracle::assign_relevance_ranks(q.candidates, inst.target_sentence, clamp))
      q.ranks.push_back(r.rank);
    out[i] = std::move(q);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const std::vector<std::size_t>& ranks,
                                                              std::size_t max_pairs, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    for (std::size_t j = 0; j < ranks.size(); ++j)
      if (ranks[i] < ranks[j]) pairs.emplace_back(i, j);
  if (pairs.size() > max_pairs) {
    // Partial Fisher-Yates: the first max_pairs entries are a uniform sample.
    for (std::size_t k = 0; k < max_pairs; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pairs.size() - 1);
      std::swap(pairs[k], pairs[pick(rng)]);
    }
    pairs.resize(max_pairs);
  }
  return pairs;
}

FineTuneReport triplet_fine_tune(encoder::TextEncoder& encoder, const std::vector<RankingQuery>& queries,
                                 const ExtractorConfig& config) {
  config.validate();
  FineTuneReport report;
  nn::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  nn::Trainer trainer(encoder.params(), adam);
  std::mt19937_64 rng(config.seed);
  const auto& module = encoder.module();

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::set<std::size_t> distinct(queries[i].ranks.begin(), queries[i].ranks.end());
    if (distinct.size() >= 2) active.push_back(i);
  }
  report.queries_with_pairs = active.size();

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs(queries.size());
  const nn::LossFn fn = [&](nn::Graph& g, std::size_t qi) -> nn::Var {
    const auto& q = queries[qi];
    const auto& ps = pairs[qi];
    if (ps.empty()) return {};
    const nn::Var vq = module.embed(g, module.token_ids(q.query));
    std::vector<nn::Var> sims(q.candidates.size());
    auto sim = [&](std::size_t c) {
      if (!sims[c].valid()) sims[c] = g.cosine(vq, module.embed(g, module.token_ids(q.candidates[c])));
      return sims[c];
    };
    std::vector<nn::Var> terms;
    for (const auto& [i, j] : ps) terms.push_back(triplet_loss(g, sim(i), sim(j), q.ranks[i], q.ranks[j], config.gamma));
    return g.scale(g.sum(terms), 1.0 / static_cast<double>(terms.size()));
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(active.begin(), active.end(), rng);
    for (std::size_t qi : active) pairs[qi] = sample_pairs(queries[qi].ranks, config.max_pairs_per_query, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < active.size(); start += config.batch_size) {
      const std::size_t end = std::min(active.size(), start + config.batch_size);
      total += trainer.step(std::span(active).subspan(start, end - start), fn);
    }
    report.epoch_loss.push_back(total / static_cast<double>(std::max<std::size_t>(1, active.size())));
  }
  return report;
}

double mean_rank_of_best(const encoder::TextEncoder& encoder, const std::vector<RankingQuery>& queries) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& q : queries) {
    std::set<std::size_t> distinct(q.ranks.begin(), q.ranks.end());
    if (distinct.size() < 2) continue;
    const auto ranked = rank_candidates(encoder, q.query, q.candidates);
    for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
      if (q.ranks[ranked[pos].index] == 1) {
        total += static_cast<double>(pos + 1);
        break;
      }
    }
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

ordered_json to_json(const SuggestionBundle& bundle) {
  ordered_json j;
  j["intent"] = {{"label", to_string(bundle.intent.label)}, {"probabilities", bundle.intent.probabilities}};
  auto list = [](const std::vector<ScoredText>& items) {
    ordered_json arr = ordered_json::array();
    for (const auto& it : items) arr.push_back({{"text", it.text}, {"score", it.score}});
    return arr;
  };
  j["keywords"] = list(bundle.keywords);
  j["sentences"] = list(bundle.sentences);
  return j;
}

SuggesterModels SuggesterModels::load(const std::filesystem::path& dir) {
  SuggesterModels m;
  m.intent = IntentPredictor::load(dir / "intent");
  m.keyword_encoder = encoder::TextEncoder::load(dir / "keywords");
  m.sentence_encoder = encoder::TextEncoder::load(dir / "sentences");
  return m;
}

SuggestionBundle suggest(const ContextBundle& context, const std::vector<std::string>& cited_body,
                         const SuggesterModels& models, const ExtractorConfig& config, SuggestMode mode) {
  SuggestionBundle out;
  out.intent = models.intent->predict(context);
  const std::string query = contextual_text(context);
  const std::size_t k_kw = mode == SuggestMode::ui ? config.ui_top_k : config.auto_keywords;
  const std::size_t k_sent = mode == SuggestMode::ui ? config.ui_top_k : config.auto_sentences;

  auto keywords = chunker::extract_candidate_keywords(query);
  std::erase_if(keywords, [](const std::string& c) { return encoder::pieces(c).empty(); });
  for (const auto& c : mmr_select(*models.keyword_encoder, query, keywords, k_kw, config.alpha))
    out.keywords.push_back({c.text, c.score});

  std::vector<std::string> sentences;
  std::set<std::string> seen;
  for (const auto& s : cited_body)
    if (!encoder::pieces(s).empty() && seen.insert(s).second) sentences.push_back(s);
  if (config.mmr_for_sentences) {
    for (const auto& c : mmr_select(*models.sentence_encoder, query, sentences, k_sent, config.alpha))
      out.sentences.push_back({c.text, c.score});
  } else {
    const auto ranked = rank_candidates(*models.sentence_encoder, query, sentences);
    for (std::size_t i = 0; i < std::min(k_sent, ranked.size()); ++i)
      out.sentences.push_back({ranked[i].text, ranked[i].score});
  }
  return out;
}

}  // namespace ccg::suggester
