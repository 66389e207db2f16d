#pragma once

// Conditional citation generator: prompt serialization, attribute dropout,
// a word-level tokenizer, and a miniature pointer-generator encoder-decoder
// (convolutional encoder, GRU decoder with attention and a copy gate).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccg/dataset.hpp"
#include "ccg/json_io.hpp"
#include "ccg/nn.hpp"
#include "ccg/types.hpp"

namespace ccg::generator {

inline constexpr std::string_view kTemplateVersion = "1";
inline constexpr std::array<std::string_view, 6> kFieldMarkers{"intent:", "keywords:", "sentences:",
                                                               "context:", "title:",   "abstract:"};

/// `intent: {i} keywords: {k1; k2} sentences: {s1 s2} context: {c1 c2} title: {t} abstract: {a}`
std::string serialize_prompt(const ContextBundle& context, const CitationAttributes& attributes);

struct DropoutConfig {
  double intent_drop = 0.5;
  bool subset_dropout = true;
};

/// Intent becomes absent with probability intent_drop; keywords and
/// sentences each keep a uniformly random order-preserving subset whose size
/// m is uniform on {0..n}.
CitationAttributes attribute_dropout(const CitationAttributes& attributes, std::mt19937_64& rng,
                                     const DropoutConfig& config = {});

/// Lowercased words, "[]" and field markers as single tokens, other
/// punctuation one token per character.
std::vector<std::string> tokenize(std::string_view text);
/// Inverse-ish of tokenize for display: spaces between words, none before
/// closing punctuation.
std::string detokenize(const std::vector<std::string>& tokens);

class Vocab {
 public:
  static constexpr std::size_t kPad = 0, kUnk = 1, kBos = 2, kEos = 3;

  Vocab();
  /// Specials, then the field markers, then the most frequent tokens (ties:
  /// lexicographic) with count >= min_count, up to max_size entries in total.
  static Vocab build(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size, std::size_t min_count);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  json to_json() const;
  static Vocab from_json(const json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GeneratorConfig {
  std::size_t dim = 64;
  std::size_t max_vocab = 2000;
  std::size_t min_count = 2;
  std::size_t max_input_tokens = 512;
  std::size_t max_output_tokens = 75;
  bool use_copy = true;
};

ordered_json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const json& j);

struct TrainingConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  DropoutConfig dropout;
  double clip_norm = 5.0;
};

ordered_json to_json(const TrainingConfig& cfg);
TrainingConfig training_config_from_json(const json& j);

struct DecodeParams {
  /// 1 means greedy decoding.
  std::size_t beam_width = 4;
  double length_penalty = 1.0;
  bool block_repeat_trigrams = true;
  std::size_t max_tokens = 75;
};

ordered_json to_json(const DecodeParams& params);
DecodeParams decode_params_from_json(const json& j);

/// A prompt prepared for the network.
struct EncodedSource {
  std::vector<std::size_t> ids;       // vocabulary ids (unknown words -> <unk>)
  std::vector<std::size_t> ext_ids;   // extended ids: source-only words get size()+k
  std::vector<std::size_t> fields;    // field index per token
  std::vector<std::string> oov;       // extended-id words, in order
};

struct NllResult {
  double total = 0.0;
  std::size_t tokens = 0;
  double per_token() const { return tokens ? total / static_cast<double>(tokens) : 0.0; }
};

class GeneratorModel {
 public:
  GeneratorModel(GeneratorConfig config, Vocab vocab, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  EncodedSource encode_source(const std::string& prompt) const;
  /// Target ids in the source's extended vocabulary, truncated to
  /// max_output_tokens, followed by </s>.
  std::vector<std::size_t> encode_target(const std::string& target, const EncodedSource& src) const;

  /// Mean per-token negative log-likelihood of the target.
  nn::Var loss(nn::Graph& g, const std::string& prompt, const std::string& target) const;
  NllResult nll(const std::string& prompt, const std::string& target) const;

  std::vector<std::string> generate_tokens(const std::string& prompt, const DecodeParams& params) const;
  std::string generate(const ContextBundle& context, const CitationAttributes& attributes,
                       const DecodeParams& params) const;

  /// meta.json (config, vocab, seed, template version, `extra`) + params.bin
  void save(const std::filesystem::path& dir, const ordered_json& extra = {}) const;
  static std::unique_ptr<GeneratorModel> load(const std::filesystem::path& dir);

 private:
  struct Step;
  struct Encoded;
  Encoded run_encoder(nn::Graph& g, const EncodedSource& src) const;
  /// Decoder start state; `mean_hidden` receives the mean encoder state.
  nn::Var initial_state(nn::Graph& g, const Encoded& enc, nn::Var& mean_hidden) const;
  Step run_step(nn::Graph& g, const Encoded& enc, nn::Var state, nn::Var ctx, std::size_t prev_token) const;

  GeneratorConfig config_;
  Vocab vocab_;
  std::uint64_t seed_;
  nn::ParamSet params_;
  const nn::Param* emb_;
  const nn::Param* field_emb_;
  const nn::Param* conv_w_;
  const nn::Param* conv_b_;
  const nn::Param* init_w_;
  const nn::Param* init_b_;
  const nn::Param* gru_z_w_;
  const nn::Param* gru_z_b_;
  const nn::Param* gru_r_w_;
  const nn::Param* gru_r_b_;
  const nn::Param* gru_h_w_;
  const nn::Param* gru_h_b_;
  const nn::Param* attn_w_;
  const nn::Param* out_w_;
  const nn::Param* out_b_;
  const nn::Param* vocab_b_;
  const nn::Param* gate_w_;
  const nn::Param* gate_b_;
};

/// Vocabulary over serialized oracle prompts and targets of the given instances.
Vocab build_vocab(const std::vector<dataset::CitationInstance>& instances, const GeneratorConfig& config);

struct GeneratorTrainReport {
  std::vector<double> epoch_nll;
  std::string data_hash;
};

/// Hash of the training instances (ids, targets and attributes).
std::string data_hash(const std::vector<dataset::CitationInstance>& instances);

/// Dropout is drawn per example per epoch from a generator seeded by
/// (seed, epoch, example index), so results do not depend on threading.
GeneratorTrainReport train_generator(const std::vector<dataset::CitationInstance>& instances, GeneratorModel& model,
                                     const TrainingConfig& config);

/// Corpus-level mean per-token NLL; `blank` replaces attributes by empty ones.
double mean_nll(const std::vector<dataset::CitationInstance>& instances, const GeneratorModel& model, bool blank);

}  // namespace ccg::generator
