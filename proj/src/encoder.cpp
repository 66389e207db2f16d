#include "ccg/encoder.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "ccg/kernels.hpp"

namespace ccg::encoder {

ordered_json to_json(const EncoderConfig& cfg) {
  ordered_json j;
  j["dim"] = cfg.dim;
  j["buckets"] = cfg.buckets;
  j["max_tokens"] = cfg.max_tokens;
  j["seed"] = cfg.seed;
  j["checkpoint"] = cfg.checkpoint;
  return j;
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.dim = j.value("dim", cfg.dim);
  cfg.buckets = j.value("buckets", cfg.buckets);
  cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
  if (cfg.dim == 0 || cfg.buckets == 0 || cfg.max_tokens == 0)
    throw std::invalid_argument("encoder dim, buckets and max_tokens must be positive");
  return cfg;
}

std::vector<std::string> pieces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '[') {
      for (std::string_view special : {kClsToken, kSepToken, std::string_view("[]")}) {
        if (text.substr(i, special.size()) == special) {
          out.emplace_back(special);
          i += special.size();
          goto next;
        }
      }
    }
    if (std::isalnum(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(text[j])));
        ++j;
      }
      out.push_back(std::move(word));
      i = j;
      continue;
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  next:;
  }
  return out;
}

EncoderModule::EncoderModule(nn::ParamSet& params, EncoderConfig config, std::string prefix)
    : config_(std::move(config)),
      prefix_(std::move(prefix)),
      table_(params.add(prefix_ + "embed", config_.buckets, config_.dim)),
      conv_w_(params.add(prefix_ + "conv.w", config_.dim, 3 * config_.dim)),
      conv_b_(params.add(prefix_ + "conv.b", 1, config_.dim)) {}

void EncoderModule::init_pretrained() {
  std::mt19937_64 rng(config_.seed);
  table_.fill_normal(rng, 1.0);
  conv_w_.fill_normal(rng, 0.5 / std::sqrt(3.0 * static_cast<double>(config_.dim)));
  conv_b_.fill(0.0);
}

std::vector<std::size_t> EncoderModule::token_ids(const std::vector<std::string>& ps) const {
  std::vector<std::size_t> ids;
  const std::size_t n = std::min(ps.size(), config_.max_tokens);
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(io::fnv1a64(ps[i]) % config_.buckets);
  return ids;
}

std::vector<std::size_t> EncoderModule::token_ids(std::string_view text) const {
  return token_ids(pieces(text));
}

nn::Var EncoderModule::hidden(nn::Graph& g, const std::vector<std::size_t>& ids) const {
  nn::Var x = g.gather_rows(table_, ids);
  const nn::Var window[] = {g.shift_rows(x, -1), x, g.shift_rows(x, 1)};
  nn::Var conv = g.tanh(g.linear(g.concat_cols(window), g.param(conv_w_), g.param(conv_b_)));
  return g.add(x, conv);
}

nn::Var EncoderModule::embed(nn::Graph& g, const std::vector<std::size_t>& ids) const {
  if (ids.empty()) return g.zeros(1, config_.dim);
  return g.mean_rows(hidden(g, ids));
}

std::vector<double> EncoderModule::embed(std::string_view text) const {
  nn::Graph g;
  const auto v = g.value(embed(g, token_ids(text)));
  return {v.begin(), v.end()};
}

MlpHead::MlpHead(nn::ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden,
                 std::size_t out)
    : w1_(params.add(prefix + "w1", hidden, in)),
      b1_(params.add(prefix + "b1", 1, hidden)),
      w2_(params.add(prefix + "w2", out, hidden)),
      b2_(params.add(prefix + "b2", 1, out)) {}

void MlpHead::init(std::mt19937_64& rng) {
  w1_.fill_normal(rng, 1.0 / std::sqrt(static_cast<double>(w1_.cols())));
  b1_.fill(0.0);
  w2_.fill_normal(rng, 1.0 / std::sqrt(static_cast<double>(w2_.cols())));
  b2_.fill(0.0);
}

nn::Var MlpHead::forward(nn::Graph& g, nn::Var x) const {
  nn::Var h = g.tanh(g.linear(x, g.param(w1_), g.param(b1_)));
  return g.linear(h, g.param(w2_), g.param(b2_));
}

TextEncoder::TextEncoder(EncoderConfig config) : module_(params_, std::move(config), "enc.") {
  module_.init_pretrained();
}

std::unique_ptr<TextEncoder> TextEncoder::pretrained(const EncoderConfig& config) {
  auto enc = std::make_unique<TextEncoder>(config);
  if (!config.checkpoint.empty()) {
    const std::filesystem::path path(config.checkpoint);
    if (std::filesystem::exists(path)) enc->params_.load(path);
  }
  return enc;
}

std::vector<double> TextEncoder::embed_all(const std::vector<std::string>& texts) const {
  const std::size_t d = dim();
  std::vector<double> out(texts.size() * d);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < static_cast<long>(texts.size()); ++i) {
    const auto v = module_.embed(texts[i]);
    std::copy(v.begin(), v.end(), out.begin() + i * d);
  }
  return out;
}

void TextEncoder::save(const std::filesystem::path& dir, const ordered_json& extra_meta) const {
  std::filesystem::create_directories(dir);
  ordered_json meta;
  meta["kind"] = "text_encoder";
  meta["encoder"] = to_json(module_.config());
  if (!extra_meta.is_null()) meta["info"] = extra_meta;
  io::write_json(dir / "meta.json", meta);
  params_.save(dir / "params.bin");
}

std::unique_ptr<TextEncoder> TextEncoder::load(const std::filesystem::path& dir) {
  const json meta = io::read_json(dir / "meta.json");
  if (meta.value("kind", "") != "text_encoder")
    throw std::runtime_error(dir.string() + " is not a text encoder");
  auto cfg = encoder_config_from_json(meta.at("encoder"));
  cfg.checkpoint.clear();
  auto enc = std::make_unique<TextEncoder>(cfg);
  enc->params_.load(dir / "params.bin");
  return enc;
}

}  // namespace ccg::encoder
