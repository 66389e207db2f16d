#include "ccg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <stdexcept>

#include "ccg/kernels.hpp"

namespace ccg::nn {

void Param::fill_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : values_) v = dist(rng);
}

void Param::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Param& ParamSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
  params_.push_back(std::make_unique<Param>(name, rows, cols, params_.size()));
  return *params_.back();
}

Param* ParamSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

const Param* ParamSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

Param& ParamSet::at(std::string_view name) {
  if (Param* p = find(name)) return *p;
  throw std::out_of_range("no parameter named " + std::string(name));
}

std::size_t ParamSet::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

namespace {
constexpr char kMagic[4] = {'C', 'C', 'G', 'P'};

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw std::runtime_error("truncated parameter file");
  return v;
}
}  // namespace

void ParamSet::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 4);
  write_u64(out, params_.size());
  for (const auto& p : params_) {
    write_u64(out, p->name().size());
    out.write(p->name().data(), static_cast<std::streamsize>(p->name().size()));
    write_u64(out, p->rows());
    write_u64(out, p->cols());
    out.write(reinterpret_cast<const char*>(p->values().data()),
              static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
}

void ParamSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad parameter file " + path.string());
  const auto count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_u64(in);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = read_u64(in);
    const auto cols = read_u64(in);
    Param* p = find(name);
    if (!p) throw std::runtime_error("unexpected parameter " + name + " in " + path.string());
    if (p->rows() != rows || p->cols() != cols)
      throw std::runtime_error("shape mismatch for parameter " + name);
    in.read(reinterpret_cast<char*>(p->values().data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw std::runtime_error("truncated parameter file " + path.string());
  }
}

void ParamSet::copy_from(const ParamSet& other, std::string_view src_prefix,
                         std::string_view dst_prefix) {
  for (const auto& src : other.params()) {
    if (!src->name().starts_with(src_prefix)) continue;
    const std::string target = std::string(dst_prefix) + src->name().substr(src_prefix.size());
    Param& dst = at(target);
    if (dst.rows() != src->rows() || dst.cols() != src->cols())
      throw std::runtime_error("shape mismatch copying " + src->name());
    dst.values() = src->values();
  }
}

GradBuffer::GradBuffer(const ParamSet& params) {
  for (const auto& p : params.params()) grads_.emplace_back(p->size(), 0.0);
}

void GradBuffer::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i)
    kernels::axpy(grads_[i].data(), other.grads_[i].data(), 1.0, grads_[i].size());
}

void GradBuffer::scale(double factor) {
  for (auto& g : grads_)
    for (auto& v : g) v *= factor;
}

double GradBuffer::squared_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) s += kernels::dot(g.data(), g.data(), g.size());
  return s;
}

Adam::Adam(ParamSet& params, AdamConfig config) : params_(params), config_(config) {
  for (const auto& p : params.params()) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(GradBuffer& grads) {
  if (config_.clip_norm > 0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > config_.clip_norm) grads.scale(config_.clip_norm / norm);
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (const auto& p : params_.params()) {
    auto& values = p->values();
    const auto& g = grads.slot(p->index());
    auto& m = m_[p->index()];
    auto& v = v_[p->index()];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g[i];
      if (gi == 0.0 && m[i] == 0.0) continue;
      m[i] = b1 * m[i] + (1 - b1) * gi;
      v[i] = b2 * v[i] + (1 - b2) * gi * gi;
      values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const double* Graph::val(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? n.external : n.value.data();
}

double* Graph::gradp(Var v) {
  Node& n = nodes_[v.id];
  if (n.param) return grads_->data(*n.param);
  return n.grad.data();
}

std::span<const double> Graph::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return {val(v), n.rows * n.cols};
}

std::span<const double> Graph::grad(Var v) const { return nodes_.at(v.id).grad; }

Var Graph::param(const Param& p) {
  Node n;
  n.rows = p.rows();
  n.cols = p.cols();
  n.external = p.values().data();
  n.param = &p;
  n.needs_grad = recording();
  return push(std::move(n));
}

Var Graph::gather_rows(const Param& table, std::span<const std::size_t> rows) {
  Node n;
  n.rows = rows.size();
  n.cols = table.cols();
  n.value.resize(n.rows * n.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= table.rows()) throw std::out_of_range("gather_rows: row out of range");
    std::copy_n(table.row(rows[r]), n.cols, n.value.data() + r * n.cols);
  }
  n.needs_grad = recording();
  Var out = push(std::move(n));
  if (recording()) {
    std::vector<std::size_t> ids(rows.begin(), rows.end());
    const Param* tp = &table;
    node(out).backward = [this, out, ids = std::move(ids), tp]() {
      const Node& o = node(out);
      double* g = grads_->data(*tp);
      for (std::size_t r = 0; r < ids.size(); ++r)
        kernels::serial::axpy(g + ids[r] * o.cols, o.grad.data() + r * o.cols, 1.0, o.cols);
    };
  }
  return out;
}

Var Graph::input(std::vector<double> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw std::invalid_argument("input: size mismatch");
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(values);
  return push(std::move(n));
}

Var Graph::zeros(std::size_t rows, std::size_t cols) {
  return input(std::vector<double>(rows * cols, 0.0), rows, cols);
}

Var Graph::linear(Var x, Var w, Var b) {
  const std::size_t n = rows(x), in = cols(x), out_dim = rows(w);
  if (cols(w) != in) throw std::invalid_argument("linear: weight/input width mismatch");
  if (b.valid() && (rows(b) != 1 || cols(b) != out_dim)) throw std::invalid_argument("linear: bias shape");
  Node o;
  o.rows = n;
  o.cols = out_dim;
  o.value.assign(n * out_dim, 0.0);
  if (b.valid()) {
    const double* bv = val(b);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(bv, out_dim, o.value.data() + i * out_dim);
  }
  kernels::gemm_nt(val(x), val(w), o.value.data(), n, out_dim, in);
  o.needs_grad = needs(x) || needs(w) || needs(b);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, x, w, b, n, in, out_dim]() {
      const double* dy = node(out).grad.data();
      if (needs(x)) kernels::gemm_nn(dy, val(w), gradp(x), n, out_dim, in);
      if (needs(w)) kernels::gemm_tn(dy, val(x), gradp(w), n, out_dim, in);
      if (needs(b)) {
        double* db = gradp(b);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < out_dim; ++j) db[j] += dy[i * out_dim + j];
      }
    };
  }
  return out;
}

Var Graph::add(Var a, Var b) {
  const std::size_t r = rows(a), c = cols(a);
  const bool broadcast = rows(b) == 1 && r != 1;
  if (cols(b) != c || (!broadcast && rows(b) != r)) throw std::invalid_argument("add: shape mismatch");
  Node o;
  o.rows = r;
  o.cols = c;
  o.value.assign(val(a), val(a) + r * c);
  const double* bv = val(b);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) o.value[i * c + j] += broadcast ? bv[j] : bv[i * c + j];
  o.needs_grad = needs(a) || needs(b);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, b, r, c, broadcast]() {
      const double* g = node(out).grad.data();
      if (needs(a)) kernels::serial::axpy(gradp(a), g, 1.0, r * c);
      if (needs(b)) {
        double* gb = gradp(b);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gb[broadcast ? j : i * c + j] += g[i * c + j];
      }
    };
  }
  return out;
}

Var Graph::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Graph::mul(Var a, Var b) {
  const std::size_t r = rows(a), c = cols(a);
  if (rows(b) != r || cols(b) != c) throw std::invalid_argument("mul: shape mismatch");
  Node o;
  o.rows = r;
  o.cols = c;
  o.value.resize(r * c);
  const double* av = val(a);
  const double* bv = val(b);
  for (std::size_t i = 0; i < r * c; ++i) o.value[i] = av[i] * bv[i];
  o.needs_grad = needs(a) || needs(b);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, b, r, c]() {
      const double* g = node(out).grad.data();
      const double* av = val(a);
      const double* bv = val(b);
      if (needs(a)) {
        double* ga = gradp(a);
        for (std::size_t i = 0; i < r * c; ++i) ga[i] += g[i] * bv[i];
      }
      if (needs(b)) {
        double* gb = gradp(b);
        for (std::size_t i = 0; i < r * c; ++i) gb[i] += g[i] * av[i];
      }
    };
  }
  return out;
}

Var Graph::scale(Var a, double factor) {
  const std::size_t size = rows(a) * cols(a);
  Node o;
  o.rows = rows(a);
  o.cols = cols(a);
  o.value.resize(size);
  const double* av = val(a);
  for (std::size_t i = 0; i < size; ++i) o.value[i] = av[i] * factor;
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, size, factor]() {
      kernels::serial::axpy(gradp(a), node(out).grad.data(), factor, size);
    };
  }
  return out;
}

Var Graph::add_scalar(Var a, double value) {
  const std::size_t size = rows(a) * cols(a);
  Node o;
  o.rows = rows(a);
  o.cols = cols(a);
  o.value.assign(val(a), val(a) + size);
  for (auto& v : o.value) v += value;
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, size]() {
      kernels::serial::axpy(gradp(a), node(out).grad.data(), 1.0, size);
    };
  }
  return out;
}

Var Graph::unary(Var a, const std::function<double(double)>& f,
                 const std::function<double(double, double)>& df_from_xy) {
  const std::size_t size = rows(a) * cols(a);
  Node o;
  o.rows = rows(a);
  o.cols = cols(a);
  o.value.resize(size);
  const double* av = val(a);
  for (std::size_t i = 0; i < size; ++i) o.value[i] = f(av[i]);
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, size, df_from_xy]() {
      const Node& on = node(out);
      const double* x = val(a);
      double* ga = gradp(a);
      for (std::size_t i = 0; i < size; ++i) ga[i] += on.grad[i] * df_from_xy(x[i], on.value[i]);
    };
  }
  return out;
}

Var Graph::tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var Graph::sigmoid(Var a) {
  return unary(
      a, [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var Graph::relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const std::size_t r = rows(parts[0]);
  std::size_t total = 0;
  for (Var p : parts) {
    if (rows(p) != r) throw std::invalid_argument("concat_cols: row mismatch");
    total += cols(p);
  }
  Node o;
  o.rows = r;
  o.cols = total;
  o.value.resize(r * total);
  std::size_t offset = 0;
  bool any = false;
  for (Var p : parts) {
    const std::size_t c = cols(p);
    const double* pv = val(p);
    for (std::size_t i = 0; i < r; ++i) std::copy_n(pv + i * c, c, o.value.data() + i * total + offset);
    offset += c;
    any = any || needs(p);
  }
  o.needs_grad = any;
  Var out = push(std::move(o));
  if (any) {
    std::vector<Var> ps(parts.begin(), parts.end());
    node(out).backward = [this, out, ps = std::move(ps), r, total]() {
      const double* g = node(out).grad.data();
      std::size_t offset = 0;
      for (Var p : ps) {
        const std::size_t c = cols(p);
        if (needs(p)) {
          double* gp = gradp(p);
          for (std::size_t i = 0; i < r; ++i)
            kernels::serial::axpy(gp + i * c, g + i * total + offset, 1.0, c);
        }
        offset += c;
      }
    };
  }
  return out;
}

Var Graph::slice_cols(Var a, std::size_t start, std::size_t len) {
  const std::size_t r = rows(a), c = cols(a);
  if (start + len > c) throw std::invalid_argument("slice_cols: out of range");
  Node o;
  o.rows = r;
  o.cols = len;
  o.value.resize(r * len);
  const double* av = val(a);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(av + i * c + start, len, o.value.data() + i * len);
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, r, c, start, len]() {
      const double* g = node(out).grad.data();
      double* ga = gradp(a);
      for (std::size_t i = 0; i < r; ++i) kernels::serial::axpy(ga + i * c + start, g + i * len, 1.0, len);
    };
  }
  return out;
}

Var Graph::shift_rows(Var a, long offset) {
  const long r = static_cast<long>(rows(a));
  const std::size_t c = cols(a);
  Node o;
  o.rows = rows(a);
  o.cols = c;
  o.value.assign(o.rows * c, 0.0);
  const double* av = val(a);
  for (long i = 0; i < r; ++i) {
    const long src = i + offset;
    if (src >= 0 && src < r) std::copy_n(av + src * c, c, o.value.data() + i * c);
  }
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, r, c, offset]() {
      const double* g = node(out).grad.data();
      double* ga = gradp(a);
      for (long i = 0; i < r; ++i) {
        const long src = i + offset;
        if (src >= 0 && src < r) kernels::serial::axpy(ga + src * c, g + i * c, 1.0, c);
      }
    };
  }
  return out;
}

Var Graph::row(Var a, std::size_t r) {
  if (r >= rows(a)) throw std::out_of_range("row: index out of range");
  const std::size_t c = cols(a);
  Node o;
  o.rows = 1;
  o.cols = c;
  o.value.assign(val(a) + r * c, val(a) + (r + 1) * c);
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, r, c]() {
      kernels::serial::axpy(gradp(a) + r * c, node(out).grad.data(), 1.0, c);
    };
  }
  return out;
}

Var Graph::mean_rows(Var a) {
  std::vector<std::size_t> all(rows(a));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return mean_rows_subset(a, all);
}

Var Graph::mean_rows_subset(Var a, std::span<const std::size_t> sel) {
  const std::size_t c = cols(a);
  Node o;
  o.rows = 1;
  o.cols = c;
  o.value.assign(c, 0.0);
  if (sel.empty()) return push(std::move(o));
  const double inv = 1.0 / static_cast<double>(sel.size());
  const double* av = val(a);
  for (std::size_t r : sel) {
    if (r >= rows(a)) throw std::out_of_range("mean_rows_subset: row out of range");
    kernels::serial::axpy(o.value.data(), av + r * c, inv, c);
  }
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    std::vector<std::size_t> ids(sel.begin(), sel.end());
    node(out).backward = [this, out, a, c, inv, ids = std::move(ids)]() {
      const double* g = node(out).grad.data();
      double* ga = gradp(a);
      for (std::size_t r : ids) kernels::serial::axpy(ga + r * c, g, inv, c);
    };
  }
  return out;
}

Var Graph::matvec(Var m, Var v) {
  const std::size_t n = rows(m), d = cols(m);
  if (rows(v) != 1 || cols(v) != d) throw std::invalid_argument("matvec: shape mismatch");
  Node o;
  o.rows = 1;
  o.cols = n;
  o.value.assign(n, 0.0);
  kernels::gemm_nt(val(v), val(m), o.value.data(), 1, n, d);
  o.needs_grad = needs(m) || needs(v);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, m, v, n, d]() {
      const double* g = node(out).grad.data();
      if (needs(v)) kernels::gemm_nn(g, val(m), gradp(v), 1, n, d);
      if (needs(m)) kernels::gemm_tn(g, val(v), gradp(m), 1, n, d);
    };
  }
  return out;
}

Var Graph::vecmat(Var a, Var m) {
  const std::size_t n = rows(m), d = cols(m);
  if (rows(a) != 1 || cols(a) != n) throw std::invalid_argument("vecmat: shape mismatch");
  Node o;
  o.rows = 1;
  o.cols = d;
  o.value.assign(d, 0.0);
  kernels::gemm_nn(val(a), val(m), o.value.data(), 1, n, d);
  o.needs_grad = needs(a) || needs(m);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, m, n, d]() {
      const double* g = node(out).grad.data();
      if (needs(a)) kernels::gemm_nt(g, val(m), gradp(a), 1, n, d);
      if (needs(m)) kernels::gemm_tn(val(a), g, gradp(m), 1, n, d);
    };
  }
  return out;
}

Var Graph::softmax(Var a) {
  const std::size_t r = rows(a), c = cols(a);
  Node o;
  o.rows = r;
  o.cols = c;
  o.value.resize(r * c);
  const double* av = val(a);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av + i * c;
    double* y = o.value.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  o.needs_grad = needs(a);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, r, c]() {
      const Node& on = node(out);
      double* ga = gradp(a);
      for (std::size_t i = 0; i < r; ++i) {
        const double* y = on.value.data() + i * c;
        const double* g = on.grad.data() + i * c;
        const double gy = kernels::dot(g, y, c);
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[j] * (g[j] - gy);
      }
    };
  }
  return out;
}

Var Graph::dot(Var a, Var b) {
  const std::size_t size = rows(a) * cols(a);
  if (rows(b) * cols(b) != size) throw std::invalid_argument("dot: size mismatch");
  Node o;
  o.rows = o.cols = 1;
  o.value = {kernels::dot(val(a), val(b), size)};
  o.needs_grad = needs(a) || needs(b);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, b, size]() {
      const double g = node(out).grad[0];
      if (needs(a)) kernels::serial::axpy(gradp(a), val(b), g, size);
      if (needs(b)) kernels::serial::axpy(gradp(b), val(a), g, size);
    };
  }
  return out;
}

Var Graph::cosine(Var a, Var b) {
  const std::size_t size = rows(a) * cols(a);
  if (rows(b) * cols(b) != size) throw std::invalid_argument("cosine: size mismatch");
  const double* av = val(a);
  const double* bv = val(b);
  const double na = std::sqrt(kernels::dot(av, av, size));
  const double nb = std::sqrt(kernels::dot(bv, bv, size));
  if (na == 0.0 || nb == 0.0) throw std::domain_error("cosine: zero vector");
  const double c = kernels::dot(av, bv, size) / (na * nb);
  Node o;
  o.rows = o.cols = 1;
  o.value = {c};
  o.needs_grad = needs(a) || needs(b);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, a, b, size, na, nb, c]() {
      const double g = node(out).grad[0];
      const double* av = val(a);
      const double* bv = val(b);
      if (needs(a)) {
        double* ga = gradp(a);
        for (std::size_t i = 0; i < size; ++i) ga[i] += g * (bv[i] / (na * nb) - c * av[i] / (na * na));
      }
      if (needs(b)) {
        double* gb = gradp(b);
        for (std::size_t i = 0; i < size; ++i) gb[i] += g * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
      }
    };
  }
  return out;
}

Var Graph::sum(std::span<const Var> scalars) {
  Node o;
  o.rows = o.cols = 1;
  double s = 0.0;
  bool any = false;
  for (Var v : scalars) {
    s += val(v)[0];
    any = any || needs(v);
  }
  o.value = {s};
  o.needs_grad = any;
  Var out = push(std::move(o));
  if (any) {
    std::vector<Var> vs(scalars.begin(), scalars.end());
    node(out).backward = [this, out, vs = std::move(vs)]() {
      const double g = node(out).grad[0];
      for (Var v : vs)
        if (needs(v)) gradp(v)[0] += g;
    };
  }
  return out;
}

Var Graph::cross_entropy(Var logits, std::size_t target) {
  const std::size_t c = cols(logits);
  if (rows(logits) != 1 || target >= c) throw std::invalid_argument("cross_entropy: bad shape/target");
  const double* x = val(logits);
  const double mx = *std::max_element(x, x + c);
  std::vector<double> p(c);
  double z = 0.0;
  for (std::size_t j = 0; j < c; ++j) z += (p[j] = std::exp(x[j] - mx));
  for (auto& v : p) v /= z;
  Node o;
  o.rows = o.cols = 1;
  o.value = {-(x[target] - mx - std::log(z))};
  o.needs_grad = needs(logits);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    node(out).backward = [this, out, logits, target, p = std::move(p)]() {
      const double g = node(out).grad[0];
      double* gl = gradp(logits);
      for (std::size_t j = 0; j < p.size(); ++j) gl[j] += g * (p[j] - (j == target ? 1.0 : 0.0));
    };
  }
  return out;
}

Var Graph::pointer_nll(Var logits, Var gate, Var attn, std::span<const std::size_t> src,
                       std::size_t target) {
  const std::size_t v = cols(logits);
  const std::size_t s = cols(attn);
  if (rows(logits) != 1 || rows(gate) * cols(gate) != 1 || rows(attn) != 1 || src.size() != s)
    throw std::invalid_argument("pointer_nll: bad shapes");
  const double* x = val(logits);
  const double mx = *std::max_element(x, x + v);
  std::vector<double> pv(v);
  double z = 0.0;
  for (std::size_t j = 0; j < v; ++j) z += (pv[j] = std::exp(x[j] - mx));
  for (auto& e : pv) e /= z;
  const double g = val(gate)[0];
  const double* a = val(attn);
  double copy = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    if (src[i] == target) copy += a[i];
  const double pvy = target < v ? pv[target] : 0.0;
  const double p = std::max(g * pvy + (1.0 - g) * copy, 1e-12);
  Node o;
  o.rows = o.cols = 1;
  o.value = {-std::log(p)};
  o.needs_grad = needs(logits) || needs(gate) || needs(attn);
  Var out = push(std::move(o));
  if (node(out).needs_grad) {
    std::vector<std::size_t> src_ids(src.begin(), src.end());
    node(out).backward = [this, out, logits, gate, attn, target, v, s, g, p, pvy, copy,
                          pv = std::move(pv), src_ids = std::move(src_ids)]() {
      const double up = node(out).grad[0];
      if (needs(logits) && target < v) {
        double* gl = gradp(logits);
        const double coef = -up * g * pvy / p;
        for (std::size_t k = 0; k < v; ++k) gl[k] += coef * ((k == target ? 1.0 : 0.0) - pv[k]);
      }
      if (needs(gate)) gradp(gate)[0] += -up * (pvy - copy) / p;
      if (needs(attn)) {
        double* ga = gradp(attn);
        const double coef = -up * (1.0 - g) / p;
        for (std::size_t i = 0; i < s; ++i)
          if (src_ids[i] == target) ga[i] += coef;
      }
    };
  }
  return out;
}

void Graph::backward(Var loss) {
  if (!loss.valid() || rows(loss) * cols(loss) != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!recording()) throw std::logic_error("backward on a non-recording graph");
  if (!nodes_[loss.id].needs_grad) return;
  for (auto& n : nodes_) {
    if (n.needs_grad && !n.param) n.grad.assign(n.rows * n.cols, 0.0);
  }
  gradp(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backward) n.backward();
  }
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(ParamSet& params, AdamConfig config, std::size_t shards)
    : params_(params), adam_(params, config), total_(params) {
  for (std::size_t s = 0; s < std::max<std::size_t>(1, shards); ++s) shards_.emplace_back(params);
}

double Trainer::accumulate(std::span<const std::size_t> batch, const LossFn& loss_fn) {
  const std::size_t nshards = std::min(shards_.size(), std::max<std::size_t>(1, batch.size()));
  std::vector<double> losses(nshards, 0.0);
  std::vector<std::exception_ptr> errors(nshards);
#pragma omp parallel for schedule(static, 1)
  for (long s = 0; s < static_cast<long>(nshards); ++s) {
    try {
      shards_[s].zero();
      for (std::size_t i = static_cast<std::size_t>(s); i < batch.size(); i += nshards) {
        Graph g(&shards_[s]);
        Var loss = loss_fn(g, batch[i]);
        if (!loss.valid()) continue;
        losses[s] += g.scalar(loss);
        g.backward(loss);
      }
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  total_.zero();
  double sum = 0.0;
  for (std::size_t s = 0; s < nshards; ++s) {
    total_.add(shards_[s]);
    sum += losses[s];
  }
  if (!batch.empty()) total_.scale(1.0 / static_cast<double>(batch.size()));
  return sum;
}

double Trainer::step(std::span<const std::size_t> batch, const LossFn& loss_fn) {
  const double loss = accumulate(batch, loss_fn);
  adam_.step(total_);
  return loss;
}

double accumulate_serial(const ParamSet& params, std::span<const std::size_t> batch,
                         const LossFn& loss_fn, GradBuffer& out) {
  (void)params;
  out.zero();
  double sum = 0.0;
  for (std::size_t item : batch) {
    Graph g(&out);
    Var loss = loss_fn(g, item);
    if (!loss.valid()) continue;
    sum += g.scalar(loss);
    g.backward(loss);
  }
  if (!batch.empty()) out.scale(1.0 / static_cast<double>(batch.size()));
  return sum;
}

}  // namespace ccg::nn
