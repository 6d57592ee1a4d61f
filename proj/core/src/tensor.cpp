#include "taskvec/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace taskvec {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

constexpr double kGeluCoeff = 0.044715;
const double kGeluScale = std::sqrt(2.0 / std::numbers::pi);

void check_rank2(const Tensor& t, const char* op) {
  if (t.shape().size() > 2) {
    throw DimensionError(std::string(op) + ": rank > 2 not supported, got " + shape_str(t.shape()));
  }
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (const auto d : s) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto p = std::make_shared<detail::TensorData>();
  const std::size_t n = shape_numel(shape);
  p->shape = std::move(shape);
  p->data.assign(n, value);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  auto p = std::make_shared<detail::TensorData>();
  p->shape = std::move(shape);
  p->data = std::move(values);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

std::size_t Tensor::rows() const {
  const auto& s = p_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("rows(): tensor is not rank <= 2: " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const auto& s = p_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("cols(): tensor is not rank <= 2: " + shape_str(s));
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw ContractError("item(): tensor has " + std::to_string(size()) + " elements");
  }
  return p_->data[0];
}

Tensor Tape::make_result(Shape shape, std::vector<double> values, bool needs_grad) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  out.set_requires_grad(needs_grad);
  return out;
}

// ---------------------------------------------------------------- matmul

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  {
    ConstMap am(a.data().data(), m, k);
    ConstMap bm(b.data().data(), k, n);
    MutMap(out.data(), m, n).noalias() = am * bm;
  }
  const bool needs = track(a) || track(b);
  Tensor c = make_result({m, n}, std::move(out), needs);
  if (needs) {
    record([a, b, c, m, k, n]() {
      ConstMap dc(c.grad().data(), m, n);
      if (a.requires_grad()) {
        ConstMap bm(b.data().data(), k, n);
        MutMap(a.grad().data(), m, k).noalias() += dc * bm.transpose();
      }
      if (b.requires_grad()) {
        ConstMap am(a.data().data(), m, k);
        MutMap(b.grad().data(), k, n).noalias() += am.transpose() * dc;
      }
    });
  }
  return c;
}

Tensor Tape::transpose(const Tensor& a) {
  if (a.shape().size() != 2) {
    throw DimensionError("transpose: expected rank 2, got " + shape_str(a.shape()));
  }
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[c * m + r] = a.data()[r * n + c];
  const bool needs = track(a);
  Tensor t = make_result({n, m}, std::move(out), needs);
  if (needs) {
    record([a, t, m, n]() {
      auto& da = a.grad();
      const auto& dt = t.grad();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) da[r * n + c] += dt[c * m + r];
    });
  }
  return t;
}

// ----------------------------------------------------- binary elementwise

namespace {

// b must have the same shape as a, or b's shape must be a trailing suffix of
// a's. Returns the tile length (== b.size()).
std::size_t broadcast_inner(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(bs) +
                         " does not broadcast onto " + shape_str(as));
  }
  const std::size_t off = as.size() - bs.size();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    if (as[off + i] != bs[i]) {
      throw DimensionError(std::string(op) + ": shape " + shape_str(bs) +
                           " is not a trailing suffix of " + shape_str(as));
    }
  }
  return b.size();
}

}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const std::size_t inner = broadcast_inner(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] + b.data()[i % inner];
  const bool needs = track(a) || track(b);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, b, c, inner]() {
      const auto& dc = c.grad();
      if (a.requires_grad()) {
        auto& da = a.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
      }
      if (b.requires_grad()) {
        auto& db = b.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) db[i % inner] += dc[i];
      }
    });
  }
  return c;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  const std::size_t inner = broadcast_inner(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] - b.data()[i % inner];
  const bool needs = track(a) || track(b);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, b, c, inner]() {
      const auto& dc = c.grad();
      if (a.requires_grad()) {
        auto& da = a.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
      }
      if (b.requires_grad()) {
        auto& db = b.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) db[i % inner] -= dc[i];
      }
    });
  }
  return c;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  const std::size_t inner = broadcast_inner(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * b.data()[i % inner];
  const bool needs = track(a) || track(b);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, b, c, inner]() {
      const auto& dc = c.grad();
      if (a.requires_grad()) {
        auto& da = a.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * b.data()[i % inner];
      }
      if (b.requires_grad()) {
        auto& db = b.grad();
        for (std::size_t i = 0; i < dc.size(); ++i) db[i % inner] += dc[i] * a.data()[i];
      }
    });
  }
  return c;
}

Tensor Tape::scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * s;
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c, s]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * s;
    });
  }
  return c;
}

// -------------------------------------------------------------- unary ops

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    // Subgradient at the kink is 0.
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i)
        if (a.data()[i] > 0.0) da[i] += dc[i];
    });
  }
  return c;
}

Tensor Tape::tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a.data()[i]);
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) {
        const double y = c.data()[i];
        da[i] += dc[i] * (1.0 - y * y);
      }
    });
  }
  return c;
}

Tensor Tape::gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double u = kGeluScale * (x + kGeluCoeff * x * x * x);
    out[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) {
        const double x = a.data()[i];
        const double u = kGeluScale * (x + kGeluCoeff * x * x * x);
        const double t = std::tanh(u);
        const double du = kGeluScale * (1.0 + 3.0 * kGeluCoeff * x * x);
        da[i] += dc[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
      }
    });
  }
  return c;
}

Tensor Tape::sqrt(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    if (x < 0.0) throw NumericError("sqrt: negative input " + std::to_string(x));
    out[i] = std::sqrt(x);
  }
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) {
        const double y = c.data()[i];
        if (y > 0.0) da[i] += dc[i] * 0.5 / y;
      }
    });
  }
  return c;
}

Tensor Tape::softplus(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) {
        const double x = a.data()[i];
        const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        da[i] += dc[i] * sig;
      }
    });
  }
  return c;
}

// ----------------------------------------------------- softmax / layernorm

Tensor Tape::softmax(const Tensor& a, int axis) {
  const Shape& s = a.shape();
  const int rank = static_cast<int>(s.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("softmax: axis out of range");
  const std::size_t n = s[axis];
  if (n < 1) throw DimensionError("softmax: empty axis");
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];

  std::vector<double> out(a.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = a.data()[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.data()[base + j * inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(a.data()[base + j * inner] - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= sum;
    }
  }
  const bool needs = track(a);
  Tensor c = make_result(s, std::move(out), needs);
  if (needs) {
    record([a, c, outer, n, inner]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      const auto& y = c.data();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += dc[base + j * inner] * y[base + j * inner];
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = base + j * inner;
            da[k] += y[k] * (dc[k] - dot);
          }
        }
      }
    });
  }
  return c;
}

Tensor Tape::log_softmax(const Tensor& a) {
  check_rank2(a, "log_softmax");
  const std::size_t rows = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    double mx = a.data()[base];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.data()[base + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(a.data()[base + j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < n; ++j) out[base + j] = a.data()[base + j] - lse;
  }
  const bool needs = track(a);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, c, rows, n]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      const auto& y = c.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += dc[base + j];
        for (std::size_t j = 0; j < n; ++j) da[base + j] += dc[base + j] - std::exp(y[base + j]) * total;
      }
    });
  }
  return c;
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  check_rank2(a, "layer_norm");
  const std::size_t rows = a.rows(), h = a.cols();
  if (gain.size() != h || bias.size() != h) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match row width " + std::to_string(h));
  }
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be > 0");

  std::vector<double> out(a.size());
  std::vector<double> xhat(a.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * h;
    double mean = 0.0;
    for (std::size_t j = 0; j < h; ++j) mean += a.data()[base + j];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = a.data()[base + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < h; ++j) {
      const double xh = (a.data()[base + j] - mean) * inv;
      xhat[base + j] = xh;
      out[base + j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  const bool needs = track(a) || track(gain) || track(bias);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
    auto inv_p = std::make_shared<std::vector<double>>(std::move(inv_std));
    record([a, gain, bias, c, xhat_p, inv_p, rows, h]() {
      const auto& dc = c.grad();
      const auto& xh = *xhat_p;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * h;
        if (a.requires_grad()) {
          const double inv = (*inv_p)[r];
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < h; ++j) {
            const double dxh = dc[base + j] * gain.data()[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[base + j];
          }
          auto& da = a.grad();
          const double hd = static_cast<double>(h);
          for (std::size_t j = 0; j < h; ++j) {
            const double dxh = dc[base + j] * gain.data()[j];
            da[base + j] += inv * (dxh - sum_dxhat / hd - xh[base + j] * sum_dxhat_xhat / hd);
          }
        }
        if (gain.requires_grad()) {
          auto& dg = gain.grad();
          for (std::size_t j = 0; j < h; ++j) dg[j] += dc[base + j] * xh[base + j];
        }
        if (bias.requires_grad()) {
          auto& db = bias.grad();
          for (std::size_t j = 0; j < h; ++j) db[j] += dc[base + j];
        }
      }
    });
  }
  return c;
}

// --------------------------------------------------- gather / slice / cat

Tensor Tape::embedding(const Tensor& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) {
    throw DimensionError("embedding: table must be rank 2, got " + shape_str(table.shape()));
  }
  const std::size_t v = table.shape()[0], h = table.shape()[1];
  std::vector<double> out(ids.size() * h);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw DimensionError("embedding: id " + std::to_string(id) + " outside table of " +
                           std::to_string(v) + " rows");
    }
    std::copy_n(table.data().begin() + static_cast<std::size_t>(id) * h, h, out.begin() + t * h);
  }
  const bool needs = track(table);
  Tensor c = make_result({ids.size(), h}, std::move(out), needs);
  if (needs) {
    record([table, c, ids, h]() {
      auto& dt = table.grad();
      const auto& dc = c.grad();
      for (std::size_t t = 0; t < ids.size(); ++t) {
        const std::size_t row = static_cast<std::size_t>(ids[t]) * h;
        for (std::size_t j = 0; j < h; ++j) dt[row + j] += dc[t * h + j];
      }
    });
  }
  return c;
}

Tensor Tape::slice_rows(const Tensor& a, std::size_t start, std::size_t len) {
  check_rank2(a, "slice_rows");
  const std::size_t rows = a.rows(), cols = a.cols();
  if (start + len > rows) throw DimensionError("slice_rows: range exceeds " + std::to_string(rows));
  std::vector<double> out(len * cols);
  std::copy_n(a.data().begin() + start * cols, len * cols, out.begin());
  const bool needs = track(a);
  Tensor c = make_result({len, cols}, std::move(out), needs);
  if (needs) {
    record([a, c, start, len, cols]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < len * cols; ++i) da[start * cols + i] += dc[i];
    });
  }
  return c;
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
  check_rank2(a, "slice_cols");
  const std::size_t rows = a.rows(), cols = a.cols();
  if (start + len > cols) throw DimensionError("slice_cols: range exceeds " + std::to_string(cols));
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.data().begin() + r * cols + start, len, out.begin() + r * len);
  const bool needs = track(a);
  Tensor c = make_result({rows, len}, std::move(out), needs);
  if (needs) {
    record([a, c, start, len, rows, cols]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) da[r * cols + start + j] += dc[r * len + j];
    });
  }
  return c;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(p.shape()));
    }
    rows += p.rows();
    needs = needs || track(p);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor c = make_result({rows, cols}, std::move(out), needs);
  if (needs) {
    record([parts, c]() {
      const auto& dc = c.grad();
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p.requires_grad()) {
          auto& dp = p.grad();
          for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += dc[off + i];
        }
        off += p.size();
      }
    });
  }
  return c;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(p.shape()));
    }
    cols += p.cols();
    needs = needs || track(p);
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(p.data().begin() + r * pc, pc, out.begin() + r * cols + off);
    off += pc;
  }
  Tensor c = make_result({rows, cols}, std::move(out), needs);
  if (needs) {
    record([parts, c, rows, cols]() {
      const auto& dc = c.grad();
      std::size_t off2 = 0;
      for (const auto& p : parts) {
        const std::size_t pc = p.cols();
        if (p.requires_grad()) {
          auto& dp = p.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < pc; ++j) dp[r * pc + j] += dc[r * cols + off2 + j];
        }
        off2 += pc;
      }
    });
  }
  return c;
}

Tensor Tape::scale_rows(const Tensor& a, const Tensor& s) {
  check_rank2(a, "scale_rows");
  const std::size_t rows = a.rows(), cols = a.cols();
  if (s.size() != rows) {
    throw DimensionError("scale_rows: scale length " + std::to_string(s.size()) +
                         " != row count " + std::to_string(rows));
  }
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] = a.data()[r * cols + j] * s.data()[r];
  const bool needs = track(a) || track(s);
  Tensor c = make_result(a.shape(), std::move(out), needs);
  if (needs) {
    record([a, s, c, rows, cols]() {
      const auto& dc = c.grad();
      if (a.requires_grad()) {
        auto& da = a.grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cols; ++j) da[r * cols + j] += dc[r * cols + j] * s.data()[r];
      }
      if (s.requires_grad()) {
        auto& ds = s.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) acc += dc[r * cols + j] * a.data()[r * cols + j];
          ds[r] += acc;
        }
      }
    });
  }
  return c;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " does not reshape to " +
                         shape_str(shape));
  }
  const bool needs = track(a);
  Tensor c = make_result(std::move(shape), a.data(), needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
    });
  }
  return c;
}

// ------------------------------------------------------------- reductions

Tensor Tape::sum(const Tensor& a) {
  double total = 0.0;
  for (const double v : a.data()) total += v;
  const bool needs = track(a);
  Tensor c = make_result({1}, {total}, needs);
  if (needs) {
    record([a, c]() {
      auto& da = a.grad();
      const double g = c.grad()[0];
      for (auto& v : da) v += g;
    });
  }
  return c;
}

Tensor Tape::mean(const Tensor& a) {
  double total = 0.0;
  for (const double v : a.data()) total += v;
  const double n = static_cast<double>(a.size());
  const bool needs = track(a);
  Tensor c = make_result({1}, {total / n}, needs);
  if (needs) {
    record([a, c, n]() {
      auto& da = a.grad();
      const double g = c.grad()[0] / n;
      for (auto& v : da) v += g;
    });
  }
  return c;
}

Tensor Tape::sum_last(const Tensor& a) {
  check_rank2(a, "sum_last");
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r] += a.data()[r * cols + j];
  const bool needs = track(a);
  Tensor c = make_result({rows}, std::move(out), needs);
  if (needs) {
    record([a, c, rows, cols]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) da[r * cols + j] += dc[r];
    });
  }
  return c;
}

Tensor Tape::pick(const Tensor& a, const std::vector<int>& index) {
  check_rank2(a, "pick");
  const std::size_t rows = a.rows(), cols = a.cols();
  if (index.size() != rows) {
    throw DimensionError("pick: index length " + std::to_string(index.size()) + " != rows " +
                         std::to_string(rows));
  }
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const int j = index[r];
    if (j < 0 || static_cast<std::size_t>(j) >= cols) {
      throw DimensionError("pick: index " + std::to_string(j) + " outside row width " +
                           std::to_string(cols));
    }
    out[r] = a.data()[r * cols + static_cast<std::size_t>(j)];
  }
  const bool needs = track(a);
  Tensor c = make_result({rows}, std::move(out), needs);
  if (needs) {
    record([a, c, index, cols]() {
      auto& da = a.grad();
      const auto& dc = c.grad();
      for (std::size_t r = 0; r < index.size(); ++r)
        da[r * cols + static_cast<std::size_t>(index[r])] += dc[r];
    });
  }
  return c;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw ContractError("backward: loss must be a scalar tensor");
  }
  if (!recording_) {
    throw ContractError("backward: tape was created non-recording");
  }
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
}

}  // namespace taskvec
