#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskvec {

class DimensionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first touched

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};
}  // namespace detail

/// Dense 64-bit float tensor. A Tensor is a shared handle: copies alias the
/// same storage, which is how gradients reach the parameters they belong to.
/// Values are immutable once an op has produced them; only grad accumulates.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  std::size_t size() const { return p_->data.size(); }
  bool is_scalar() const { return size() == 1; }

  /// Rank-2 helpers; a rank-1 tensor counts as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& data() const { return p_->data; }
  std::vector<double>& mutable_data() const { return p_->data; }
  double item() const;
  double at(std::size_t i) const { return p_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return p_->data[r * cols() + c]; }

  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool v) { p_->requires_grad = v; }

  bool has_grad() const { return !p_->grad.empty(); }
  std::vector<double>& grad() const {
    p_->ensure_grad();
    return p_->grad;
  }
  void zero_grad() {
    if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
  }

  bool same_storage(const Tensor& other) const { return p_ == other.p_; }

  detail::TensorData* impl() const { return p_.get(); }

private:
  explicit Tensor(std::shared_ptr<detail::TensorData> p) : p_(std::move(p)) {}
  std::shared_ptr<detail::TensorData> p_;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Reverse-mode tape. Records one backward closure per op, replayed in exact
/// reverse order by backward(). A tape and the tensors created under it are
/// confined to one worker; independent tapes may run in parallel. Tapes are
/// rebuilt per forward pass.
class Tape {
public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- primitives ------------------------------------------------------
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  /// Binary elementwise. Shapes must match exactly, or b's shape must be a
  /// trailing suffix of a's (b is then broadcast over the leading dims).
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);

  Tensor relu(const Tensor& a);
  Tensor tanh(const Tensor& a);
  /// tanh approximation of gelu; the approximation is a fixed constant of
  /// this implementation.
  Tensor gelu(const Tensor& a);
  /// Requires a >= 0 elementwise. d/dx sqrt at x == 0 is taken as 0.
  Tensor sqrt(const Tensor& a);
  /// log(1 + e^x), evaluated in the overflow-safe form.
  Tensor softplus(const Tensor& a);

  /// Normalized along `axis` (negative counts from the back). Stabilized by
  /// max subtraction; rows sum to 1 within 1e-12.
  Tensor softmax(const Tensor& a, int axis = -1);
  /// Last axis only.
  Tensor log_softmax(const Tensor& a);

  /// Per-row normalization over the last axis, then affine by gain and bias
  /// (both shaped like the last axis).
  Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

  /// Gather rows of `table` ([V,H]) by id; backward scatter-adds into the
  /// table's grad rows.
  Tensor embedding(const Tensor& table, const std::vector<int>& ids);

  Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len);
  Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);

  /// a [n,m] scaled per row by s (length n).
  Tensor scale_rows(const Tensor& a, const Tensor& s);

  /// Same data, new shape (element count preserved). Gradient passes through.
  Tensor reshape(const Tensor& a, Shape shape);

  Tensor sum(const Tensor& a);       // -> scalar
  Tensor mean(const Tensor& a);      // -> scalar
  Tensor sum_last(const Tensor& a);  // [n,m] -> [n]

  /// a [n,K]; picks a[i, index[i]] -> [n].
  Tensor pick(const Tensor& a, const std::vector<int>& index);

  // -- driver ----------------------------------------------------------
  /// Seeds d(loss)/d(loss) = 1 and replays recorded nodes in reverse,
  /// accumulating (+=) into every requires_grad tensor reachable from loss.
  /// loss must be scalar and produced under this tape.
  void backward(const Tensor& loss);

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    std::function<void()> back;
  };

  Tensor make_result(Shape shape, std::vector<double> values, bool needs_grad);
  bool track(const Tensor& a) const { return recording_ && a.requires_grad(); }
  void record(std::function<void()> fn) { nodes_.push_back({std::move(fn)}); }

  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace taskvec
