#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices, plus parameter storage and an Adam optimizer. Values are double
// precision so finite-difference checks are meaningful.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccg::nn {

class Param {
 public:
  Param(std::string name, std::size_t rows, std::size_t cols, std::size_t index)
      : name_(std::move(name)), rows_(rows), cols_(cols), index_(index), values_(rows * cols, 0.0) {}

  const std::string& name() const { return name_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  std::size_t index() const { return index_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* row(std::size_t r) { return values_.data() + r * cols_; }
  const double* row(std::size_t r) const { return values_.data() + r * cols_; }

  void fill_normal(std::mt19937_64& rng, double stddev);
  void fill(double value);

 private:
  std::string name_;
  std::size_t rows_, cols_, index_;
  std::vector<double> values_;
};

class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;

  Param& add(const std::string& name, std::size_t rows, std::size_t cols);
  Param* find(std::string_view name);
  const Param* find(std::string_view name) const;
  Param& at(std::string_view name);
  const std::vector<std::unique_ptr<Param>>& params() const { return params_; }
  std::size_t total_values() const;

  /// Binary format: "CCGP" magic, count, then (name, rows, cols, values) per param.
  void save(const std::filesystem::path& path) const;
  /// Loads every stored tensor by name; shapes must match the registered ones.
  void load(const std::filesystem::path& path);
  /// Copies `src_prefix*` tensors of `other` into `dst_prefix*` tensors here.
  void copy_from(const ParamSet& other, std::string_view src_prefix, std::string_view dst_prefix);

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

class GradBuffer {
 public:
  explicit GradBuffer(const ParamSet& params);

  double* data(const Param& p) { return grads_[p.index()].data(); }
  const double* data(const Param& p) const { return grads_[p.index()].data(); }
  std::vector<double>& slot(std::size_t index) { return grads_[index]; }
  const std::vector<double>& slot(std::size_t index) const { return grads_[index]; }
  std::size_t slots() const { return grads_.size(); }

  void zero();
  void add(const GradBuffer& other);
  void scale(double factor);
  double squared_norm() const;

 private:
  std::vector<std::vector<double>> grads_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
};

class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config);
  void step(GradBuffer& grads);
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const AdamConfig& config() const { return config_; }
  std::size_t steps() const { return t_; }

 private:
  ParamSet& params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// A tape of operations. Construct with a GradBuffer to record gradients for
/// parameters; construct with nullptr for inference only.
class Graph {
 public:
  explicit Graph(GradBuffer* grads = nullptr) : grads_(grads) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return grads_ != nullptr; }

  Var param(const Param& p);
  Var gather_rows(const Param& table, std::span<const std::size_t> rows);
  Var input(std::vector<double> values, std::size_t rows, std::size_t cols);
  Var zeros(std::size_t rows, std::size_t cols);

  /// x(n×in)·Wᵀ(in×out) + b(1×out); `bias` may be invalid.
  Var linear(Var x, Var weight, Var bias = {});
  /// Elementwise; `b` may also be a single row broadcast over the rows of `a`.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var add_scalar(Var a, double value);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t start, std::size_t len);
  /// Row i of the result is row i+offset of `a`, or zeros when out of range.
  Var shift_rows(Var a, long offset);
  Var row(Var a, std::size_t r);
  Var mean_rows(Var a);
  /// Mean of the selected rows; an empty selection yields a zero row.
  Var mean_rows_subset(Var a, std::span<const std::size_t> rows);
  /// M(n×d) · vᵀ -> 1×n
  Var matvec(Var m, Var v);
  /// a(1×n) · M(n×d) -> 1×d
  Var vecmat(Var a, Var m);
  Var softmax(Var a);
  Var dot(Var a, Var b);
  Var cosine(Var a, Var b);
  Var sum(std::span<const Var> scalars);
  /// -log softmax(logits)[target]
  Var cross_entropy(Var logits, std::size_t target);
  /// Pointer-generator negative log-likelihood:
  ///   p = gate·softmax(logits)[target] + (1-gate)·Σ_{i: src[i]==target} attn[i]
  /// `target` and `src` use the extended vocabulary (ids >= logits width are
  /// source-only words).
  Var pointer_nll(Var logits, Var gate, Var attn, std::span<const std::size_t> src, std::size_t target);

  std::span<const double> value(Var v) const;
  double scalar(Var v) const { return value(v)[0]; }
  std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  /// Gradient of a node after backward(); empty for parameter leaves.
  std::span<const double> grad(Var v) const;

  void backward(Var loss);

 private:
  struct Node {
    std::size_t rows = 0, cols = 0;
    std::vector<double> value;
    const double* external = nullptr;
    const Param* param = nullptr;
    std::vector<double> grad;
    std::function<void()> backward;
    bool needs_grad = false;
  };

  Var push(Node node);
  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }
  const double* val(Var v) const;
  double* gradp(Var v);
  bool needs(Var v) const { return v.valid() && nodes_[v.id].needs_grad; }
  Var unary(Var a, const std::function<double(double)>& f,
            const std::function<double(double, double)>& df_from_xy);

  GradBuffer* grads_;
  std::vector<Node> nodes_;
};

/// Builds the loss for one batch item; an invalid Var means the item contributes nothing.
using LossFn = std::function<Var(Graph&, std::size_t)>;

/// Mini-batch driver: items are assigned round-robin to a fixed number of
/// gradient shards, shards run in parallel, and are reduced in shard order,
/// so results do not depend on the thread count. Gradients are averaged
/// over the batch before the optimizer step.
class Trainer {
 public:
  Trainer(ParamSet& params, AdamConfig config, std::size_t shards = 4);

  /// Returns the summed loss over the batch.
  double step(std::span<const std::size_t> batch, const LossFn& loss_fn);
  /// Same gradient as step() but without updating parameters.
  double accumulate(std::span<const std::size_t> batch, const LossFn& loss_fn);
  const GradBuffer& gradients() const { return total_; }
  Adam& optimizer() { return adam_; }

 private:
  ParamSet& params_;
  Adam adam_;
  std::vector<GradBuffer> shards_;
  GradBuffer total_;
};

/// Reference (single-buffer, sequential) gradient accumulation used in tests.
double accumulate_serial(const ParamSet& params, std::span<const std::size_t> batch,
                         const LossFn& loss_fn, GradBuffer& out);

}  // namespace ccg::nn
