#include "t2t/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "t2t/error.hpp"

namespace t2t {

namespace {

thread_local Tape* g_active_tape = nullptr;

#ifdef NDEBUG
bool g_debug_checks = false;
#else
bool g_debug_checks = true;
#endif

using Data = detail::TensorData;
using DataPtr = std::shared_ptr<Data>;

DataPtr new_data(std::size_t rows, std::size_t cols, std::vector<double> value) {
  auto d = std::make_shared<Data>();
  d->shape = {rows, cols};
  d->value = std::move(value);
  return d;
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

// Grad buffer of input `i` of a node, or nullptr if that input is constant.
double* in_grad(const Tape::Node& n, std::size_t i) {
  Data& d = *n.inputs[i];
  if (!d.requires_grad) return nullptr;
  d.ensure_grad();
  return d.grad.data();
}

const double* out_grad(const Tape::Node& n) { return n.output->grad.data(); }

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": produced a non-finite value");
  }
}

enum class Bcast { Same, Row, Col, Scalar };

Bcast broadcast_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Bcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::Col;
  dim_error(op, a, b);
}

inline std::size_t bidx(Bcast m, std::size_t r, std::size_t c, std::size_t cols) {
  switch (m) {
    case Bcast::Same: return r * cols + c;
    case Bcast::Row: return c;
    case Bcast::Col: return r;
    case Bcast::Scalar: return 0;
  }
  return 0;
}

template <class Fwd, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const Bcast mode = broadcast_mode(op, a, b);
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * cols);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = fwd(av[r * cols + c], bv[bidx(mode, r, c, cols)]);
  return make_op(op, {a, b}, rows, cols, std::move(out),
                 [=](const Tape::Node& n) {
                   const double* g = out_grad(n);
                   const auto& x = n.inputs[0]->value;
                   const auto& y = n.inputs[1]->value;
                   double* ga = in_grad(n, 0);
                   double* gb = in_grad(n, 1);
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t c = 0; c < cols; ++c) {
                       const std::size_t i = r * cols + c;
                       const std::size_t j = bidx(mode, r, c, cols);
                       if (ga) ga[i] += g[i] * da(x[i], y[j]);
                       if (gb) gb[j] += g[i] * db(x[i], y[j]);
                     }
                   }
                 });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_op(op, {a}, a.rows(), a.cols(), std::move(out), [=](const Tape::Node& n) {
    const double* g = out_grad(n);
    double* ga = in_grad(n, 0);
    if (!ga) return;
    const auto& x = n.inputs[0]->value;
    const auto& y = n.output->value;
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

// Sum of a multiset; the result depends only on the values, not their order.
double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

void softmax_row_inplace(double* row, const std::uint8_t* mask, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t c = 0; c < n; ++c) {
    if (mask && !mask[c]) continue;
    mx = std::max(mx, row[c]);
    any = true;
  }
  if (!any) {
    std::fill(row, row + n, 0.0);
    return;
  }
  thread_local std::vector<double> terms;
  terms.clear();
  for (std::size_t c = 0; c < n; ++c) {
    if (mask && !mask[c]) {
      row[c] = 0.0;
      continue;
    }
    row[c] = std::exp(row[c] - mx);
    terms.push_back(row[c]);
  }
  const double sum = order_free_sum(terms);
  for (std::size_t c = 0; c < n; ++c) row[c] /= sum;
}

// d softmax: ga_i += y_i (g_i - sum_k g_k y_k) within one normalization group.
void softmax_backward_rows(const Tape::Node& n, std::size_t rows, std::size_t cols) {
  double* ga = in_grad(n, 0);
  if (!ga) return;
  const double* g = out_grad(n);
  const auto& y = n.output->value;
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c)
      ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
  }
}

void check_segments(const char* op, const Tensor& x, const std::vector<std::size_t>& segment,
                    std::size_t num_segments) {
  if (segment.size() != x.rows())
    throw DimensionError(std::string(op) + ": segment list of length " +
                         std::to_string(segment.size()) + " for " + shape_str(x.shape()));
  for (std::size_t s : segment)
    if (s >= num_segments) throw DimensionError(std::string(op) + ": segment id out of range");
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return constant(rows, cols, 0.0);
}

Tensor Tensor::constant(std::size_t rows, std::size_t cols, double v) {
  return from(rows, cols, std::vector<double>(rows * cols, v));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (rows == 0 || cols == 0)
    throw DimensionError("tensor: shape " + shape_str({rows, cols}) + " has a zero extent");
  if (values.size() != rows * cols)
    throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                         shape_str({rows, cols}));
  return Tensor(new_data(rows, cols, std::move(values)));
}

Tensor Tensor::leaf(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = from(rows, cols, std::move(values));
  t.p_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!p_) throw ContractError("tensor: use of an undefined tensor");
  return p_->shape;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("tensor: item() on shape " + shape_str(shape()));
  return p_->value[0];
}

std::vector<double> Tensor::row(std::size_t r) const {
  auto d = data();
  return {d.begin() + static_cast<std::ptrdiff_t>(r * cols()),
          d.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols())};
}

std::vector<double> Tensor::grad() const {
  if (p_->grad.empty()) return std::vector<double>(p_->value.size(), 0.0);
  return p_->grad;
}

void Tensor::zero_grad() {
  if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
}

Tensor Tensor::detach(bool trainable) const {
  Tensor t(new_data(rows(), cols(), p_->value));
  t.p_->requires_grad = trainable;
  return t;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ']';
  return os.str();
}

// --- Tape ---------------------------------------------------------------------

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

NoGradScope::NoGradScope() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = saved_; }

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  const std::vector<double> seed{1.0};
  backward(std::span<const Tensor>(&loss, 1), std::span<const std::vector<double>>(&seed, 1));
}

void Tape::backward(std::span<const Tensor> outputs, std::span<const std::vector<double>> seeds) {
  if (outputs.size() != seeds.size())
    throw ContractError("backward: one seed is required per output");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    auto d = outputs[i].impl();
    if (!d->requires_grad) throw ContractError("backward: output is not recorded on the tape");
    if (seeds[i].size() != d->value.size())
      throw DimensionError("backward: seed size does not match output " + shape_str(d->shape));
    d->ensure_grad();
    for (std::size_t k = 0; k < seeds[i].size(); ++k) d->grad[k] += seeds[i][k];
  }
  run_backward();
}

void Tape::run_backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // unreachable from the loss
    it->backward(*it);
  }
  nodes_.clear();
}

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks() { return g_debug_checks; }

Tensor make_op(const char* op, std::vector<Tensor> inputs, std::size_t rows, std::size_t cols,
               std::vector<double> value, std::function<void(const Tape::Node&)> backward) {
  if (g_debug_checks) check_finite(op, value);
  auto out = new_data(rows, cols, std::move(value));
  Tape* tape = g_active_tape;
  if (tape) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      out->requires_grad = true;
      Tape::Node node{op, {}, out, std::move(backward)};
      node.inputs.reserve(inputs.size());
      for (const auto& t : inputs) node.inputs.push_back(t.impl());
      tape->push(std::move(node));
    }
  }
  return Tensor(std::move(out));
}

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) dim_error("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * bv[p * n + j];
    }
  return make_op("matmul", {a, b}, m, n, std::move(out), [m, k, n](const Tape::Node& node) {
    const double* g = out_grad(node);
    const auto& x = node.inputs[0]->value;
    const auto& y = node.inputs[1]->value;
    if (double* ga = in_grad(node, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (double* gb = in_grad(node, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xv * g[i * n + j];
        }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) dim_error("matmul_nt", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
      out[i * n + j] = s;
    }
  return make_op("matmul_nt", {a, b}, m, n, std::move(out), [m, k, n](const Tape::Node& node) {
    const double* g = out_grad(node);
    const auto& x = node.inputs[0]->value;
    const auto& y = node.inputs[1]->value;
    double* ga = in_grad(node, 0);
    double* gb = in_grad(node, 1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gv = g[i * n + j];
        if (gv == 0.0) continue;
        if (ga)
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gv * y[j * k + p];
        if (gb)
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gv * x[i * k + p];
      }
  });
}

Tensor set_matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) dim_error("set_matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> terms;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      terms.clear();
      for (std::size_t p = 0; p < k; ++p)
        if (av[i * k + p] != 0.0) terms.push_back(av[i * k + p] * bv[p * n + j]);
      out[i * n + j] = order_free_sum(terms);
    }
  return make_op("set_matmul", {a, b}, m, n, std::move(out), [m, k, n](const Tape::Node& node) {
    const double* g = out_grad(node);
    const auto& x = node.inputs[0]->value;
    const auto& y = node.inputs[1]->value;
    if (double* ga = in_grad(node, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (double* gb = in_grad(node, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += xv * g[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_op("transpose", {a}, n, m, std::move(out), [m, n](const Tape::Node& node) {
    double* ga = in_grad(node, 0);
    if (!ga) return;
    const double* g = out_grad(node);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      "scale", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor shift(const Tensor& a, double s) {
  return unary(
      "shift", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor one_minus(const Tensor& a) {
  return unary(
      "one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) dim_error("concat_cols", parts[0], p);
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    auto pv = p.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(),
                  out.begin() + static_cast<std::ptrdiff_t>(r * cols + off));
    off += p.cols();
  }
  return make_op("concat_cols", parts, rows, cols, std::move(out),
                 [rows, cols, offsets](const Tape::Node& node) {
                   const double* g = out_grad(node);
                   for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                     double* gk = in_grad(node, k);
                     if (!gk) continue;
                     const std::size_t w = node.inputs[k]->shape[1];
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < w; ++c)
                         gk[r * w + c] += g[r * cols + offsets[k] + c];
                   }
                 });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.cols() != cols) dim_error("concat_rows", parts[0], p);
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return make_op("concat_rows", parts, rows, cols, std::move(out),
                 [offsets](const Tape::Node& node) {
                   const double* g = out_grad(node);
                   for (std::size_t k = 0; k < node.inputs.size(); ++k) {
                     double* gk = in_grad(node, k);
                     if (!gk) continue;
                     const std::size_t sz = node.inputs[k]->value.size();
                     for (std::size_t i = 0; i < sz; ++i) gk[i] += g[offsets[k] + i];
                   }
                 });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.cols())
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols(), w = end - begin;
  std::vector<double> out(rows * w);
  auto av = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = av[r * cols + begin + c];
  return make_op("slice_cols", {a}, rows, w, std::move(out),
                 [rows, cols, w, begin](const Tape::Node& node) {
                   double* ga = in_grad(node, 0);
                   if (!ga) return;
                   const double* g = out_grad(node);
                   for (std::size_t r = 0; r < rows; ++r)
                     for (std::size_t c = 0; c < w; ++c) ga[r * cols + begin + c] += g[r * w + c];
                 });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.rows())
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(a.shape()));
  const std::size_t cols = a.cols();
  auto av = a.data();
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          av.begin() + static_cast<std::ptrdiff_t>(end * cols));
  return make_op("slice_rows", {a}, end - begin, cols, std::move(out),
                 [begin, cols](const Tape::Node& node) {
                   double* ga = in_grad(node, 0);
                   if (!ga) return;
                   const double* g = out_grad(node);
                   const std::size_t sz = node.output->value.size();
                   for (std::size_t i = 0; i < sz; ++i) ga[begin * cols + i] += g[i];
                 });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < rows; ++r) softmax_row_inplace(&out[r * cols], nullptr, cols);
  return make_op("softmax", {a}, rows, cols, std::move(out),
                 [rows, cols](const Tape::Node& n) { softmax_backward_rows(n, rows, cols); });
}

Tensor masked_softmax_rows(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != a.size())
    throw DimensionError("masked_softmax: mask of size " + std::to_string(mask.size()) +
                         " for " + shape_str(a.shape()));
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t r = 0; r < rows; ++r)
    softmax_row_inplace(&out[r * cols], &mask[r * cols], cols);
  // Masked entries have y = 0, so the generic rule leaves them untouched.
  return make_op("masked_softmax", {a}, rows, cols, std::move(out),
                 [rows, cols](const Tape::Node& n) { softmax_backward_rows(n, rows, cols); });
}

Tensor mean_over_axis(const Tensor& a, int axis) {
  const std::size_t rows = a.rows(), cols = a.cols();
  auto av = a.data();
  if (axis == 0) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[c] += av[r * cols + c];
    for (double& v : out) v /= static_cast<double>(rows);
    return make_op("mean_over_axis", {a}, 1, cols, std::move(out),
                   [rows, cols](const Tape::Node& n) {
                     double* ga = in_grad(n, 0);
                     if (!ga) return;
                     const double* g = out_grad(n);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < cols; ++c)
                         ga[r * cols + c] += g[c] / static_cast<double>(rows);
                   });
  }
  if (axis == 1) {
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[r] += av[r * cols + c];
      out[r] /= static_cast<double>(cols);
    }
    return make_op("mean_over_axis", {a}, rows, 1, std::move(out),
                   [rows, cols](const Tape::Node& n) {
                     double* ga = in_grad(n, 0);
                     if (!ga) return;
                     const double* g = out_grad(n);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t c = 0; c < cols; ++c)
                         ga[r * cols + c] += g[r] / static_cast<double>(cols);
                   });
  }
  throw DimensionError("mean_over_axis: axis must be 0 or 1");
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op("sum_all", {a}, 1, 1, {s}, [](const Tape::Node& n) {
    double* ga = in_grad(n, 0);
    if (!ga) return;
    const double g = out_grad(n)[0];
    for (std::size_t i = 0; i < n.inputs[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
  const std::size_t cols = table.cols();
  std::vector<double> out(ids.size() * cols);
  auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows())
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table " +
                           shape_str(table.shape()));
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  return make_op("embedding_lookup", {table}, ids.size(), cols, std::move(out),
                 [ids, cols](const Tape::Node& n) {
                   double* ga = in_grad(n, 0);
                   if (!ga) return;
                   const double* g = out_grad(n);
                   for (std::size_t i = 0; i < ids.size(); ++i)
                     for (std::size_t c = 0; c < cols; ++c) ga[ids[i] * cols + c] += g[i * cols + c];
                 });
}

Tensor segment_softmax(const Tensor& scores, const std::vector<std::size_t>& segment,
                       std::size_t num_segments) {
  if (scores.cols() != 1)
    throw DimensionError("segment_softmax: expects a column, got " + shape_str(scores.shape()));
  check_segments("segment_softmax", scores, segment, num_segments);
  const std::size_t m = scores.rows();
  auto sv = scores.data();
  std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m; ++i) mx[segment[i]] = std::max(mx[segment[i]], sv[i]);
  std::vector<double> out(m), sum(num_segments, 0.0);
  std::vector<std::vector<double>> terms(num_segments);
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = std::exp(sv[i] - mx[segment[i]]);
    terms[segment[i]].push_back(out[i]);
  }
  for (std::size_t s = 0; s < num_segments; ++s) sum[s] = order_free_sum(terms[s]);
  for (std::size_t i = 0; i < m; ++i) out[i] /= sum[segment[i]];
  return make_op("segment_softmax", {scores}, m, 1, std::move(out),
                 [segment, num_segments](const Tape::Node& n) {
                   double* ga = in_grad(n, 0);
                   if (!ga) return;
                   const double* g = out_grad(n);
                   const auto& y = n.output->value;
                   std::vector<double> dot(num_segments, 0.0);
                   for (std::size_t i = 0; i < y.size(); ++i) dot[segment[i]] += g[i] * y[i];
                   for (std::size_t i = 0; i < y.size(); ++i)
                     ga[i] += y[i] * (g[i] - dot[segment[i]]);
                 });
}

Tensor segment_sum(const Tensor& x, const std::vector<std::size_t>& segment,
                   std::size_t num_segments) {
  check_segments("segment_sum", x, segment, num_segments);
  const std::size_t cols = x.cols();
  std::vector<double> out(num_segments * cols, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < segment.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) out[segment[i] * cols + c] += xv[i * cols + c];
  return make_op("segment_sum", {x}, num_segments, cols, std::move(out),
                 [segment, cols](const Tape::Node& n) {
                   double* ga = in_grad(n, 0);
                   if (!ga) return;
                   const double* g = out_grad(n);
                   for (std::size_t i = 0; i < segment.size(); ++i)
                     for (std::size_t c = 0; c < cols; ++c)
                       ga[i * cols + c] += g[segment[i] * cols + c];
                 });
}

Tensor segment_mean(const Tensor& x, const std::vector<std::size_t>& segment,
                    std::size_t num_segments) {
  check_segments("segment_mean", x, segment, num_segments);
  std::vector<double> count(num_segments, 0.0);
  for (std::size_t s : segment) count[s] += 1.0;
  const std::size_t cols = x.cols();
  std::vector<double> out(num_segments * cols, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < segment.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) out[segment[i] * cols + c] += xv[i * cols + c];
  for (std::size_t s = 0; s < num_segments; ++s)
    if (count[s] > 0)
      for (std::size_t c = 0; c < cols; ++c) out[s * cols + c] /= count[s];
  return make_op("segment_mean", {x}, num_segments, cols, std::move(out),
                 [segment, cols, count](const Tape::Node& n) {
                   double* ga = in_grad(n, 0);
                   if (!ga) return;
                   const double* g = out_grad(n);
                   for (std::size_t i = 0; i < segment.size(); ++i)
                     for (std::size_t c = 0; c < cols; ++c)
                       ga[i * cols + c] += g[segment[i] * cols + c] / count[segment[i]];
                 });
}

Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool train) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  const double keep = 1.0 - p;
  std::vector<double> factor(a.size());
  for (double& f : factor) {
    // 53 random bits -> uniform [0, 1); identical on every platform.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    f = u < keep ? 1.0 / keep : 0.0;
  }
  std::vector<double> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor[i];
  return make_op("dropout", {a}, a.rows(), a.cols(), std::move(out),
                 [factor](const Tape::Node& n) {
                   double* ga = in_grad(n, 0);
                   if (!ga) return;
                   const double* g = out_grad(n);
                   for (std::size_t i = 0; i < factor.size(); ++i) ga[i] += g[i] * factor[i];
                 });
}

}  // namespace t2t
