#pragma once

// Miniature text encoder: hashed token embeddings followed by one width-3
// convolution with a residual connection. embed(text) is the mean of the
// final hidden states of all tokens.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ccg/json_io.hpp"
#include "ccg/nn.hpp"

namespace ccg::encoder {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t buckets = 8192;
  std::size_t max_tokens = 256;
  /// Seed of the deterministic "pretrained" initialization.
  std::uint64_t seed = 20230601;
  /// Optional parameter file overriding the seeded initialization.
  std::string checkpoint;

  bool operator==(const EncoderConfig&) const = default;
};

ordered_json to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const json& j);

/// Lowercased word pieces: alphanumeric runs and single punctuation marks.
/// "[CLS]", "[SEP]" and the "[]" placeholder are kept whole.
std::vector<std::string> pieces(std::string_view text);

/// Registers its tensors in a caller-owned ParamSet under `prefix`.
class EncoderModule {
 public:
  EncoderModule(nn::ParamSet& params, EncoderConfig config, std::string prefix);

  /// Seeded initialization shared by every module built from the same config.
  void init_pretrained();

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }
  std::size_t dim() const { return config_.dim; }

  /// Bucket ids of the first max_tokens pieces.
  std::vector<std::size_t> token_ids(std::string_view text) const;
  std::vector<std::size_t> token_ids(const std::vector<std::string>& pieces) const;

  /// n×d final hidden states.
  nn::Var hidden(nn::Graph& g, const std::vector<std::size_t>& ids) const;
  /// 1×d mean of the hidden states. Empty input yields a zero row.
  nn::Var embed(nn::Graph& g, const std::vector<std::size_t>& ids) const;
  std::vector<double> embed(std::string_view text) const;

 private:
  EncoderConfig config_;
  std::string prefix_;
  nn::Param& table_;
  nn::Param& conv_w_;
  nn::Param& conv_b_;
};

/// Two-layer fully connected head with a tanh hidden layer.
class MlpHead {
 public:
  MlpHead(nn::ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden,
          std::size_t out);
  void init(std::mt19937_64& rng);
  nn::Var forward(nn::Graph& g, nn::Var x) const;
  std::size_t out_dim() const { return w2_.rows(); }

 private:
  nn::Param& w1_;
  nn::Param& b1_;
  nn::Param& w2_;
  nn::Param& b2_;
};

/// A standalone encoder with its own parameters; used for the keyword and
/// sentence rankers and for the evaluation judge.
class TextEncoder {
 public:
  explicit TextEncoder(EncoderConfig config = {});

  /// Seeded init, or the configured checkpoint when it exists.
  static std::unique_ptr<TextEncoder> pretrained(const EncoderConfig& config);

  EncoderModule& module() { return module_; }
  const EncoderModule& module() const { return module_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  std::size_t dim() const { return module_.dim(); }

  std::vector<double> embed(std::string_view text) const { return module_.embed(text); }
  /// Row-major (texts.size() × dim) embedding matrix.
  std::vector<double> embed_all(const std::vector<std::string>& texts) const;

  void save(const std::filesystem::path& dir, const ordered_json& extra_meta = {}) const;
  static std::unique_ptr<TextEncoder> load(const std::filesystem::path& dir);

 private:
  nn::ParamSet params_;
  EncoderModule module_;
};

}  // namespace ccg::encoder
