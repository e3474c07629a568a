#pragma once

// Dense double-precision matrices with tape-based reverse-mode
// differentiation. Every tensor is rank 2 (rows x cols); a vector is a 1 x n
// row and a scalar is 1 x 1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace t2t {

using Shape = std::vector<std::size_t>;

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor constant(std::size_t rows, std::size_t cols, double v);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double v) { return from(1, 1, {v}); }
  /// A trainable leaf: gradients accumulate into it across tapes.
  static Tensor leaf(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const;
  std::size_t rows() const { return shape()[0]; }
  std::size_t cols() const { return shape()[1]; }
  std::size_t size() const { return p_->value.size(); }

  std::span<const double> data() const { return p_->value; }
  std::span<double> mutable_data() { return p_->value; }
  double at(std::size_t r, std::size_t c) const { return p_->value[r * cols() + c]; }
  double item() const;
  std::vector<double> row(std::size_t r) const;

  /// Gradient buffer; all zeros when nothing has flowed into this tensor.
  std::vector<double> grad() const;
  void zero_grad();
  bool requires_grad() const { return p_ && p_->requires_grad; }

  /// Same values, cut from any tape. The copy is a leaf iff `trainable`.
  Tensor detach(bool trainable = false) const;

  std::shared_ptr<detail::TensorData> impl() const { return p_; }
  explicit Tensor(std::shared_ptr<detail::TensorData> p) : p_(std::move(p)) {}

 private:
  std::shared_ptr<detail::TensorData> p_;
};

std::string shape_str(const Shape& s);

/// Records differentiable operations issued on this thread while alive.
/// Nodes are appended in execution order, which is a topological order.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Back-propagates d loss / d x into every leaf reachable from `loss`.
  void backward(const Tensor& loss);
  /// Back-propagates externally supplied output gradients.
  void backward(std::span<const Tensor> outputs, std::span<const std::vector<double>> seeds);

  std::size_t size() const { return nodes_.size(); }

  static Tape* active();

  struct Node {
    const char* op;
    std::vector<std::shared_ptr<detail::TensorData>> inputs;
    std::shared_ptr<detail::TensorData> output;
    std::function<void(const Node&)> backward;
  };
  void push(Node node) { nodes_.push_back(std::move(node)); }

 private:
  void run_backward();

  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
};

/// Suspends recording on this thread while alive; ops inside it build
/// constants even when some inputs require gradients.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* saved_;
};

/// Turns on finite-value checks after every primitive. Defaults to on in
/// debug builds.
void set_debug_checks(bool on);
bool debug_checks();

// Extension point: builds an op from precomputed output values and a rule
// that maps (node) -> accumulation into the inputs' grad buffers.
Tensor make_op(const char* op, std::vector<Tensor> inputs, std::size_t rows, std::size_t cols,
               std::vector<double> value, std::function<void(const Tape::Node&)> backward);

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // (m x k)(k x n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m x k)(n x k)^T
/// matmul whose inner sums do not depend on the order of the inner index:
/// the nonzero products are summed in sorted order. Attention contexts over
/// sets use it so that permuting the set permutes the output bit-exactly.
Tensor set_matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Element-wise binary ops. `b` may equal a's shape, or be a 1 x n row,
// an m x 1 column, or a 1 x 1 scalar broadcast against `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor shift(const Tensor& a, double s);  // a + s
Tensor one_minus(const Tensor& a);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

/// Softmax along each row (max-subtracted). Normalizers of the softmax
/// family are summed in sorted order, so they are permutation invariant.
Tensor softmax_rows(const Tensor& a);
/// Row softmax restricted to entries with mask != 0. A row with no allowed
/// entry yields all zeros.
Tensor masked_softmax_rows(const Tensor& a, const std::vector<std::uint8_t>& mask);

/// axis 0 averages over rows (-> 1 x n); axis 1 over columns (-> m x 1).
Tensor mean_over_axis(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);

/// Gathers rows of `table` (embedding lookup).
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);

/// Softmax of an m x 1 column within groups given by `segment[i]`.
Tensor segment_softmax(const Tensor& scores, const std::vector<std::size_t>& segment,
                       std::size_t num_segments);
/// Sums rows of `x` into `num_segments` buckets.
Tensor segment_sum(const Tensor& x, const std::vector<std::size_t>& segment,
                   std::size_t num_segments);
/// Averages rows of `x` per bucket; empty buckets are zero rows.
Tensor segment_mean(const Tensor& x, const std::vector<std::size_t>& segment,
                    std::size_t num_segments);

/// Inverted dropout. Identity when `train` is false or p == 0.
Tensor dropout(const Tensor& a, double p, std::mt19937_64& rng, bool train);

}  // namespace t2t
