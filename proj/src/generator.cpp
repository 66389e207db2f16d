#include "ccg/generator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ccg::generator {

std::string serialize_prompt(const ContextBundle& context, const CitationAttributes& attributes) {
  std::string out;
  out += "intent: ";
  if (attributes.intent) out += to_string(*attributes.intent);
  out += " keywords: ";
  out += join(attributes.keywords, "; ");
  out += " sentences: ";
  out += join(attributes.sentences, " ");
  out += " context: ";
  out += join(context.local_context, " ");
  out += " title: ";
  out += context.cited_title;
  out += " abstract: ";
  out += context.cited_abstract;
  return out;
}

namespace {

std::vector<std::string> random_subset(const std::vector<std::string>& items, std::mt19937_64& rng) {
  const std::size_t n = items.size();
  std::uniform_int_distribution<std::size_t> size_dist(0, n);
  const std::size_t m = size_dist(rng);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace

CitationAttributes attribute_dropout(const CitationAttributes& attributes, std::mt19937_64& rng,
                                     const DropoutConfig& config) {
  CitationAttributes out = attributes;
  std::bernoulli_distribution drop(config.intent_drop);
  if (drop(rng)) out.intent.reset();
  if (config.subset_dropout) {
    out.keywords = random_subset(attributes.keywords, rng);
    out.sentences = random_subset(attributes.sentences, rng);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::isalnum(c)) {
      std::string word;
      while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i])))
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++])));
      if (i < text.size() && text[i] == ':' &&
          std::find(kFieldMarkers.begin(), kFieldMarkers.end(), word + ":") != kFieldMarkers.end()) {
        word += ':';
        ++i;
      }
      out.push_back(std::move(word));
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

std::string detokenize(const std::vector<std::string>& tokens) {
  static const std::set<std::string> no_space_before{".", ",", ";", ":", "!", "?", ")", "]", "}", "%"};
  static const std::set<std::string> no_space_after{"(", "[", "{"};
  std::string out;
  bool glue = true;
  for (const auto& t : tokens) {
    if (!glue && !no_space_before.count(t)) out += ' ';
    out += t;
    glue = no_space_after.count(t) > 0;
  }
  return out;
}

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<unk>", "<s>", "</s>"}) {
    index_[s] = tokens_.size();
    tokens_.emplace_back(s);
  }
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  // Field markers are always representable.
  for (auto marker : kFieldMarkers) {
    const std::string m(marker);
    v.index_[m] = v.tokens_.size();
    v.tokens_.push_back(m);
  }
  for (const auto& [tok, n] : sorted) {
    if (v.size() >= max_size || n < min_count) break;
    if (v.index_.count(tok)) continue;
    v.index_[tok] = v.tokens_.size();
    v.tokens_.push_back(tok);
  }
  return v;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

json Vocab::to_json() const { return tokens_; }

Vocab Vocab::from_json(const json& j) {
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  for (const auto& t : j) {
    v.index_[t.get<std::string>()] = v.tokens_.size();
    v.tokens_.push_back(t.get<std::string>());
  }
  if (v.tokens_.size() < 4 || v.tokens_[kEos] != "</s>") throw std::runtime_error("vocabulary lacks special tokens");
  return v;
}

ordered_json to_json(const GeneratorConfig& c) {
  ordered_json j;
  j["dim"] = c.dim;
  j["max_vocab"] = c.max_vocab;
  j["min_count"] = c.min_count;
  j["max_input_tokens"] = c.max_input_tokens;
  j["max_output_tokens"] = c.max_output_tokens;
  j["use_copy"] = c.use_copy;
  return j;
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  c.dim = j.value("dim", c.dim);
  c.max_vocab = j.value("max_vocab", c.max_vocab);
  c.min_count = j.value("min_count", c.min_count);
  c.max_input_tokens = j.value("max_input_tokens", c.max_input_tokens);
  c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
  c.use_copy = j.value("use_copy", c.use_copy);
  return c;
}

ordered_json to_json(const TrainingConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["intent_drop"] = c.dropout.intent_drop;
  j["subset_dropout"] = c.dropout.subset_dropout;
  j["clip_norm"] = c.clip_norm;
  return j;
}

TrainingConfig training_config_from_json(const json& j) {
  TrainingConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.dropout.intent_drop = j.value("intent_drop", c.dropout.intent_drop);
  c.dropout.subset_dropout = j.value("subset_dropout", c.dropout.subset_dropout);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  if (c.dropout.intent_drop < 0.0 || c.dropout.intent_drop > 1.0)
    throw std::invalid_argument("intent_drop must be in [0, 1]");
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  return c;
}

ordered_json to_json(const DecodeParams& p) {
  ordered_json j;
  j["beam_width"] = p.beam_width;
  j["length_penalty"] = p.length_penalty;
  j["block_repeat_trigrams"] = p.block_repeat_trigrams;
  j["max_tokens"] = p.max_tokens;
  return j;
}

DecodeParams decode_params_from_json(const json& j) {
  DecodeParams p;
  p.beam_width = j.value("beam_width", p.beam_width);
  p.length_penalty = j.value("length_penalty", p.length_penalty);
  p.block_repeat_trigrams = j.value("block_repeat_trigrams", p.block_repeat_trigrams);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  if (p.beam_width == 0) throw std::invalid_argument("beam_width must be positive");
  return p;
}

struct GeneratorModel::Encoded {
  nn::Var hidden;
  const EncodedSource* src = nullptr;
};

struct GeneratorModel::Step {
  nn::Var state, ctx, logits, attn, gate;
};

GeneratorModel::GeneratorModel(GeneratorConfig config, Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), seed_(seed) {
  const std::size_t d = config_.dim;
  const std::size_t v = vocab_.size();
  std::mt19937_64 rng(seed);
  auto add = [&](const std::string& name, std::size_t r, std::size_t c, double stddev) {
    nn::Param& p = params_.add(name, r, c);
    if (stddev > 0) p.fill_normal(rng, stddev);
    return &p;
  };
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  emb_ = add("emb", v, d, 0.3);
  field_emb_ = add("field_emb", kFieldMarkers.size(), d, 0.3);
  conv_w_ = add("enc.conv.w", d, 3 * d, s / std::sqrt(3.0));
  conv_b_ = add("enc.conv.b", 1, d, 0);
  init_w_ = add("dec.init.w", d, 3 * d, s / std::sqrt(3.0));
  init_b_ = add("dec.init.b", 1, d, 0);
  gru_z_w_ = add("dec.gru.z.w", d, 3 * d, s / std::sqrt(3.0));
  gru_z_b_ = add("dec.gru.z.b", 1, d, 0);
  gru_r_w_ = add("dec.gru.r.w", d, 3 * d, s / std::sqrt(3.0));
  gru_r_b_ = add("dec.gru.r.b", 1, d, 0);
  gru_h_w_ = add("dec.gru.h.w", d, 3 * d, s / std::sqrt(3.0));
  gru_h_b_ = add("dec.gru.h.b", 1, d, 0);
  attn_w_ = add("dec.attn.w", d, d, s);
  out_w_ = add("dec.out.w", d, 2 * d, s / std::sqrt(2.0));
  out_b_ = add("dec.out.b", 1, d, 0);
  vocab_b_ = add("dec.vocab.b", 1, v, 0);
  gate_w_ = add("dec.gate.w", 1, 3 * d, s / std::sqrt(3.0));
  gate_b_ = add("dec.gate.b", 1, 1, 0);
}

EncodedSource GeneratorModel::encode_source(const std::string& prompt) const {
  EncodedSource src;
  auto toks = tokenize(prompt);
  if (toks.size() > config_.max_input_tokens) toks.resize(config_.max_input_tokens);
  std::size_t field = 0;
  std::map<std::string, std::size_t> oov_index;
  for (const auto& t : toks) {
    const auto marker = std::find(kFieldMarkers.begin(), kFieldMarkers.end(), t);
    if (marker != kFieldMarkers.end()) field = static_cast<std::size_t>(marker - kFieldMarkers.begin());
    const std::size_t id = vocab_.id(t);
    src.ids.push_back(id);
    src.fields.push_back(field);
    if (id != Vocab::kUnk || t == "<unk>") {
      src.ext_ids.push_back(id);
    } else {
      auto [it, inserted] = oov_index.emplace(t, vocab_.size() + src.oov.size());
      if (inserted) src.oov.push_back(t);
      src.ext_ids.push_back(it->second);
    }
  }
  return src;
}

std::vector<std::size_t> GeneratorModel::encode_target(const std::string& target, const EncodedSource& src) const {
  auto toks = tokenize(target);
  if (toks.size() > config_.max_output_tokens) toks.resize(config_.max_output_tokens);
  std::vector<std::size_t> out;
  for (const auto& t : toks) {
    std::size_t id = vocab_.id(t);
    if (id == Vocab::kUnk && config_.use_copy) {
      auto it = std::find(src.oov.begin(), src.oov.end(), t);
      if (it != src.oov.end()) id = vocab_.size() + static_cast<std::size_t>(it - src.oov.begin());
    }
    out.push_back(id);
  }
  out.push_back(Vocab::kEos);
  return out;
}

GeneratorModel::Encoded GeneratorModel::run_encoder(nn::Graph& g, const EncodedSource& src) const {
  nn::Var x = g.add(g.gather_rows(*emb_, src.ids), g.gather_rows(*field_emb_, src.fields));
  const nn::Var window[] = {g.shift_rows(x, -1), x, g.shift_rows(x, 1)};
  nn::Var h = g.add(x, g.tanh(g.linear(g.concat_cols(window), g.param(*conv_w_), g.param(*conv_b_))));
  return {h, &src};
}

nn::Var GeneratorModel::initial_state(nn::Graph& g, const Encoded& enc, nn::Var& mean_hidden) const {
  const EncodedSource& src = *enc.src;
  std::vector<std::size_t> intent_rows, keyword_rows;
  for (std::size_t i = 0; i < src.ids.size(); ++i) {
    const bool marker = std::find(kFieldMarkers.begin(), kFieldMarkers.end(), vocab_.token(src.ids[i])) !=
                        kFieldMarkers.end();
    if (marker) continue;
    if (src.fields[i] == 0) intent_rows.push_back(i);
    if (src.fields[i] == 1) keyword_rows.push_back(i);
  }
  mean_hidden = g.mean_rows(enc.hidden);
  const nn::Var parts[] = {mean_hidden, g.mean_rows_subset(enc.hidden, intent_rows),
                           g.mean_rows_subset(enc.hidden, keyword_rows)};
  return g.tanh(g.linear(g.concat_cols(parts), g.param(*init_w_), g.param(*init_b_)));
}

GeneratorModel::Step GeneratorModel::run_step(nn::Graph& g, const Encoded& enc, nn::Var state, nn::Var ctx,
                                              std::size_t prev_token) const {
  const std::size_t prev = prev_token < vocab_.size() ? prev_token : Vocab::kUnk;
  const std::size_t prev_ids[] = {prev};
  nn::Var e = g.gather_rows(*emb_, prev_ids);
  const nn::Var xin[] = {e, ctx};
  nn::Var x = g.concat_cols(xin);
  const nn::Var xs_parts[] = {x, state};
  nn::Var xs = g.concat_cols(xs_parts);
  nn::Var z = g.sigmoid(g.linear(xs, g.param(*gru_z_w_), g.param(*gru_z_b_)));
  nn::Var r = g.sigmoid(g.linear(xs, g.param(*gru_r_w_), g.param(*gru_r_b_)));
  const nn::Var xh_parts[] = {x, g.mul(r, state)};
  nn::Var cand = g.tanh(g.linear(g.concat_cols(xh_parts), g.param(*gru_h_w_), g.param(*gru_h_b_)));
  nn::Var s = g.add(state, g.mul(z, g.sub(cand, state)));

  nn::Var q = g.linear(s, g.param(*attn_w_));
  nn::Var attn = g.softmax(g.matvec(enc.hidden, q));
  nn::Var c = g.vecmat(attn, enc.hidden);
  const nn::Var sc_parts[] = {s, c};
  nn::Var o = g.tanh(g.linear(g.concat_cols(sc_parts), g.param(*out_w_), g.param(*out_b_)));
  nn::Var logits = g.linear(o, g.param(*emb_), g.param(*vocab_b_));
  const nn::Var gate_parts[] = {s, c, e};
  nn::Var gate = g.sigmoid(g.linear(g.concat_cols(gate_parts), g.param(*gate_w_), g.param(*gate_b_)));
  return {s, c, logits, attn, gate};
}

nn::Var GeneratorModel::loss(nn::Graph& g, const std::string& prompt, const std::string& target) const {
  const EncodedSource src = encode_source(prompt);
  if (src.ids.empty()) throw std::invalid_argument("empty prompt");
  const auto tgt = encode_target(target, src);
  Encoded enc = run_encoder(g, src);

  nn::Var ctx;
  nn::Var state = initial_state(g, enc, ctx);

  std::vector<nn::Var> terms;
  std::size_t prev = Vocab::kBos;
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    Step st = run_step(g, enc, state, ctx, prev);
    if (config_.use_copy) {
      terms.push_back(g.pointer_nll(st.logits, st.gate, st.attn, src.ext_ids, tgt[t]));
    } else {
      const std::size_t y = tgt[t] < vocab_.size() ? tgt[t] : Vocab::kUnk;
      terms.push_back(g.cross_entropy(st.logits, y));
    }
    state = st.state;
    ctx = st.ctx;
    prev = tgt[t];
  }
  return g.scale(g.sum(terms), 1.0 / static_cast<double>(terms.size()));
}

NllResult GeneratorModel::nll(const std::string& prompt, const std::string& target) const {
  nn::Graph g;
  const EncodedSource src = encode_source(prompt);
  const std::size_t n = encode_target(target, src).size();
  const double mean = g.scalar(loss(g, prompt, target));
  return {mean * static_cast<double>(n), n};
}

namespace {

struct Hypothesis {
  std::vector<std::size_t> tokens;
  double logp = 0.0;
  std::vector<double> state;
  std::vector<double> ctx;
  bool done = false;
};

double normalized(const Hypothesis& h, double penalty) {
  const double len = static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
  return h.logp / std::pow(len, penalty);
}

bool repeats_trigram(const std::vector<std::size_t>& toks, std::size_t next) {
  if (toks.size() < 2) return false;
  const std::size_t a = toks[toks.size() - 2], b = toks.back();
  for (std::size_t i = 0; i + 2 < toks.size(); ++i)
    if (toks[i] == a && toks[i + 1] == b && toks[i + 2] == next) return true;
  return false;
}

}  // namespace

std::vector<std::string> GeneratorModel::generate_tokens(const std::string& prompt, const DecodeParams& params) const {
  const EncodedSource src = encode_source(prompt);
  if (src.ids.empty()) return {};
  const std::size_t d = config_.dim;
  const std::size_t v = vocab_.size();
  const std::size_t ext = v + src.oov.size();
  const std::size_t max_tokens = std::min(params.max_tokens, config_.max_output_tokens);

  std::vector<double> hidden_vals;
  Hypothesis start;
  {
    nn::Graph g;
    Encoded enc = run_encoder(g, src);
    nn::Var mean_h;
    nn::Var state = initial_state(g, enc, mean_h);
    const auto hv = g.value(enc.hidden);
    hidden_vals.assign(hv.begin(), hv.end());
    const auto sv = g.value(state);
    const auto cv = g.value(mean_h);
    start.state.assign(sv.begin(), sv.end());
    start.ctx.assign(cv.begin(), cv.end());
  }

  std::vector<Hypothesis> beam{start};
  std::vector<Hypothesis> finished;
  const std::size_t width = std::max<std::size_t>(1, params.beam_width);
  for (std::size_t step = 0; step < max_tokens && !beam.empty(); ++step) {
    struct Expansion {
      std::size_t hyp;
      std::size_t token;
      double logp;
      std::vector<double> state, ctx;
    };
    std::vector<Expansion> expansions;
    for (std::size_t h = 0; h < beam.size(); ++h) {
      const auto& hyp = beam[h];
      nn::Graph g;
      Encoded enc{g.input(hidden_vals, src.ids.size(), d), &src};
      const std::size_t prev = hyp.tokens.empty() ? Vocab::kBos : hyp.tokens.back();
      Step st = run_step(g, enc, g.input(hyp.state, 1, d), g.input(hyp.ctx, 1, d), prev);
      const auto logits = g.value(st.logits);
      const double mx = *std::max_element(logits.begin(), logits.end());
      std::vector<double> prob(ext, 0.0);
      double z = 0.0;
      for (std::size_t k = 0; k < v; ++k) z += (prob[k] = std::exp(logits[k] - mx));
      const double gate = config_.use_copy ? g.scalar(st.gate) : 1.0;
      for (std::size_t k = 0; k < v; ++k) prob[k] = gate * prob[k] / z;
      if (config_.use_copy) {
        const auto attn = g.value(st.attn);
        for (std::size_t i = 0; i < src.ext_ids.size(); ++i) prob[src.ext_ids[i]] += (1.0 - gate) * attn[i];
      }
      prob[Vocab::kPad] = prob[Vocab::kBos] = prob[Vocab::kUnk] = 0.0;
      for (auto marker : kFieldMarkers) prob[vocab_.id(std::string(marker))] = 0.0;
      if (params.block_repeat_trigrams)
        for (std::size_t k = 0; k < ext; ++k)
          if (prob[k] > 0.0 && repeats_trigram(hyp.tokens, k)) prob[k] = 0.0;
      std::vector<std::size_t> order(ext);
      std::iota(order.begin(), order.end(), 0);
      const std::size_t take = std::min(width, ext);
      std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](std::size_t a, std::size_t b) {
        return prob[a] > prob[b] || (prob[a] == prob[b] && a < b);
      });
      const auto sv = g.value(st.state);
      const auto cv = g.value(st.ctx);
      for (std::size_t k = 0; k < take; ++k) {
        if (prob[order[k]] <= 0.0) break;
        expansions.push_back({h, order[k], hyp.logp + std::log(prob[order[k]]), {sv.begin(), sv.end()},
                              {cv.begin(), cv.end()}});
      }
    }
    std::stable_sort(expansions.begin(), expansions.end(),
                     [](const Expansion& a, const Expansion& b) { return a.logp > b.logp; });
    std::vector<Hypothesis> next;
    for (auto& ex : expansions) {
      if (next.size() >= width) break;
      Hypothesis h;
      h.tokens = beam[ex.hyp].tokens;
      h.logp = ex.logp;
      if (ex.token == Vocab::kEos) {
        h.done = true;
        finished.push_back(std::move(h));
        continue;
      }
      h.tokens.push_back(ex.token);
      h.state = std::move(ex.state);
      h.ctx = std::move(ex.ctx);
      next.push_back(std::move(h));
    }
    beam = std::move(next);
    if (finished.size() >= width) break;
  }
  if (finished.empty()) finished = beam;
  const Hypothesis* best = nullptr;
  for (const auto& h : finished)
    if (!best || normalized(h, params.length_penalty) > normalized(*best, params.length_penalty)) best = &h;
  std::vector<std::string> out;
  if (!best) return out;
  for (std::size_t t : best->tokens) out.push_back(t < v ? vocab_.token(t) : src.oov[t - v]);
  return out;
}

std::string GeneratorModel::generate(const ContextBundle& context, const CitationAttributes& attributes,
                                     const DecodeParams& params) const {
  return detokenize(generate_tokens(serialize_prompt(context, attributes), params));
}

void GeneratorModel::save(const std::filesystem::path& dir, const ordered_json& extra) const {
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["kind"] = "generator";
  meta["template_version"] = kTemplateVersion;
  meta["config"] = to_json(config_);
  meta["seed"] = seed_;
  if (!extra.is_null()) meta["run"] = extra;
  meta["vocab"] = vocab_.to_json();
  io::write_json(dir / "meta.json", meta);
  params_.save(dir / "params.bin");
}

std::unique_ptr<GeneratorModel> GeneratorModel::load(const std::filesystem::path& dir) {
  const json meta = io::read_json(dir / "meta.json");
  if (meta.value("kind", "") != "generator") throw std::runtime_error(dir.string() + " is not a generator model");
  if (meta.value("template_version", "") != kTemplateVersion)
    throw std::runtime_error("generator template version mismatch in " + dir.string());
  auto model = std::make_unique<GeneratorModel>(generator_config_from_json(meta.at("config")),
                                                Vocab::from_json(meta.at("vocab")), meta.at("seed").get<std::uint64_t>());
  model->params_.load(dir / "params.bin");
  return model;
}

Vocab build_vocab(const std::vector<dataset::CitationInstance>& instances, const GeneratorConfig& config) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& inst : instances) {
    docs.push_back(tokenize(inst.target_sentence));
    docs.push_back(tokenize(serialize_prompt(inst.context, inst.attributes.value_or(CitationAttributes{}))));
  }
  return Vocab::build(docs, config.max_vocab, config.min_count);
}

std::string data_hash(const std::vector<dataset::CitationInstance>& instances) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& inst : instances) h = io::fnv1a64(dataset::to_json(inst).dump(), h);
  return io::hex64(h);
}

GeneratorTrainReport train_generator(const std::vector<dataset::CitationInstance>& instances, GeneratorModel& model,
                                     const TrainingConfig& config) {
  if (instances.empty()) throw std::invalid_argument("train_generator: empty training set");
  GeneratorTrainReport report;
  report.data_hash = data_hash(instances);
  nn::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  adam.clip_norm = config.clip_norm;
  nn::Trainer trainer(model.params(), adam);
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed);
  std::size_t epoch = 0;
  const nn::LossFn fn = [&](nn::Graph& g, std::size_t i) {
    const auto& inst = instances[i];
    std::mt19937_64 rng(io::fnv1a64(std::to_string(config.seed) + ":" + std::to_string(epoch) + ":" + std::to_string(i)));
    const auto attrs = attribute_dropout(inst.attributes.value_or(CitationAttributes{}), rng, config.dropout);
    return model.loss(g, serialize_prompt(inst.context, attrs), inst.target_sentence);
  };
  for (epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      total += trainer.step(std::span(order).subspan(start, end - start), fn);
    }
    report.epoch_nll.push_back(total / static_cast<double>(order.size()));
  }
  return report;
}

double mean_nll(const std::vector<dataset::CitationInstance>& instances, const GeneratorModel& model, bool blank) {
  std::vector<NllResult> parts(instances.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < static_cast<long>(instances.size()); ++i) {
    const auto& inst = instances[i];
    const CitationAttributes attrs = blank ? CitationAttributes{} : inst.attributes.value_or(CitationAttributes{});
    parts[i] = model.nll(serialize_prompt(inst.context, attrs), inst.target_sentence);
  }
  NllResult total;
  for (const auto& p : parts) {
    total.total += p.total;
    total.tokens += p.tokens;
  }
  return total.per_token();
}

}  // namespace ccg::generator
