#include "taskvec/probes.hpp"

#include "taskvec/data.hpp"
#include "taskvec/metrics.hpp"
#include "taskvec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace taskvec {

void ProbeConfig::validate() const {
  if (c_grid.empty()) throw ConfigError("probe config: empty C grid");
  for (const double c : c_grid) {
    if (c <= 0.0) throw ConfigError("probe config: C values must be positive");
  }
  if (val_fraction <= 0.0 || val_fraction >= 1.0) {
    throw ConfigError("probe config: validation fraction must be in (0,1)");
  }
  if (max_epochs < 1) throw ConfigError("probe config: max_epochs must be >= 1");
}

int LinearModel::predict_class(const std::vector<double>& x) const {
  int best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    double s = bias[c];
    for (std::size_t j = 0; j < x.size(); ++j) s += weights[c][j] * x[j];
    if (c == 0 || s > best_score) {
      best_score = s;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> LinearModel::predict_labels(const std::vector<double>& x) const {
  std::vector<int> out(weights.size(), 0);
  for (std::size_t c = 0; c < weights.size(); ++c) {
    double s = bias[c];
    for (std::size_t j = 0; j < x.size(); ++j) s += weights[c][j] * x[j];
    out[c] = s > 0.0 ? 1 : 0;
  }
  return out;
}

double LinearModel::predict_value(const std::vector<double>& x) const {
  double s = bias[0];
  for (std::size_t j = 0; j < x.size(); ++j) s += weights[0][j] * x[j];
  return s;
}

namespace {

using Matrix = std::vector<std::vector<double>>;

struct BinaryFit {
  std::vector<double> w;
  double b = 0.0;
};

// Full-batch projected subgradient descent on
//   (1/(2C)) ||w||^2 + mean hinge(1 - y (w x + b)),
// step 1/(lambda t), with the usual ||w|| <= sqrt(C) ball projection.
BinaryFit fit_binary_hinge(const Matrix& x, const std::vector<double>& y, double c_value,
                           const ProbeConfig& cfg) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  const double lambda = 1.0 / c_value;
  BinaryFit fit;
  fit.w.assign(d, 0.0);
  double prev_loss = -1.0;
  std::vector<double> grad(d);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    double hinge_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = fit.b;
      for (std::size_t j = 0; j < d; ++j) s += fit.w[j] * x[i][j];
      const double margin = 1.0 - y[i] * s;
      if (margin > 0.0) {
        hinge_sum += margin;
        for (std::size_t j = 0; j < d; ++j) grad[j] -= y[i] * x[i][j];
        grad_b -= y[i];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = hinge_sum * inv_n;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm2 += fit.w[j] * fit.w[j];
    loss += 0.5 * lambda * norm2;
    if (prev_loss >= 0.0 && std::abs(prev_loss - loss) < cfg.loss_delta) break;
    prev_loss = loss;

    const double eta = 1.0 / (lambda * static_cast<double>(epoch));
    for (std::size_t j = 0; j < d; ++j) {
      fit.w[j] -= eta * (lambda * fit.w[j] + grad[j] * inv_n);
    }
    fit.b -= eta * grad_b * inv_n;

    norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm2 += fit.w[j] * fit.w[j];
    const double limit = std::sqrt(c_value);
    if (norm2 > limit * limit) {
      const double shrink = limit / std::sqrt(norm2);
      for (auto& wj : fit.w) wj *= shrink;
    }
  }
  return fit;
}

BinaryFit fit_epsilon_band(const Matrix& x, const std::vector<double>& y, double c_value,
                           const ProbeConfig& cfg) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  const double lambda = 1.0 / c_value;
  BinaryFit fit;
  fit.w.assign(d, 0.0);
  fit.b = 0.0;
  double prev_loss = -1.0;
  std::vector<double> grad(d);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    double band_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = fit.b;
      for (std::size_t j = 0; j < d; ++j) s += fit.w[j] * x[i][j];
      const double r = s - y[i];
      const double excess = std::abs(r) - cfg.epsilon;
      if (excess > 0.0) {
        band_sum += excess;
        const double sign = r > 0.0 ? 1.0 : -1.0;
        for (std::size_t j = 0; j < d; ++j) grad[j] += sign * x[i][j];
        grad_b += sign;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = band_sum * inv_n;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm2 += fit.w[j] * fit.w[j];
    loss += 0.5 * lambda * norm2;
    if (prev_loss >= 0.0 && std::abs(prev_loss - loss) < cfg.loss_delta) break;
    prev_loss = loss;

    const double eta = 1.0 / (lambda * static_cast<double>(epoch));
    for (std::size_t j = 0; j < d; ++j) {
      fit.w[j] -= eta * (lambda * fit.w[j] + grad[j] * inv_n);
    }
    fit.b -= eta * grad_b * inv_n;
  }
  return fit;
}

LinearModel fit_ovr(const Matrix& x, const std::vector<int>& y, int label_count, double c_value,
                    const ProbeConfig& cfg) {
  LinearModel model;
  model.chosen_c = c_value;
  std::vector<double> signs(x.size());
  for (int c = 0; c < label_count; ++c) {
    for (std::size_t i = 0; i < x.size(); ++i) signs[i] = y[i] == c ? 1.0 : -1.0;
    BinaryFit fit = fit_binary_hinge(x, signs, c_value, cfg);
    model.weights.push_back(std::move(fit.w));
    model.bias.push_back(fit.b);
  }
  return model;
}

LinearModel fit_ovr_multilabel(const Matrix& x, const std::vector<std::vector<int>>& y,
                               int label_count, double c_value, const ProbeConfig& cfg) {
  LinearModel model;
  model.chosen_c = c_value;
  std::vector<double> signs(x.size());
  for (int c = 0; c < label_count; ++c) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      signs[i] = y[i][static_cast<std::size_t>(c)] == 1 ? 1.0 : -1.0;
    }
    BinaryFit fit = fit_binary_hinge(x, signs, c_value, cfg);
    model.weights.push_back(std::move(fit.w));
    model.bias.push_back(fit.b);
  }
  return model;
}

/// Seeded split into (train, validation) index sets.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> val_split(std::size_t n,
                                                                        const ProbeConfig& cfg) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed ^ 0x5eedULL);
  rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n)));
  n_val = std::max<std::size_t>(1, std::min(n_val, n - 1));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

LinearModel fit_linear_svc(const Matrix& x, const std::vector<int>& y, int label_count,
                           const ProbeConfig& cfg) {
  cfg.validate();
  if (x.empty() || x.size() != y.size()) throw FormatError("svc: bad training set");
  if (std::set<int>(y.begin(), y.end()).size() < 2) {
    throw FormatError("svc: training labels contain a single class");
  }
  const auto [train_idx, val_idx] = val_split(x.size(), cfg);
  const Matrix tx = take(x, train_idx);
  const auto ty = take(y, train_idx);
  const Matrix vx = take(x, val_idx);
  const auto vy = take(y, val_idx);

  double best_c = cfg.c_grid.front();
  double best_score = -1.0;
  for (const double c : cfg.c_grid) {
    const LinearModel m = fit_ovr(tx, ty, label_count, c, cfg);
    std::vector<int> pred;
    pred.reserve(vx.size());
    for (const auto& row : vx) pred.push_back(m.predict_class(row));
    const double score = f1_macro(pred, vy, label_count);
    if (score > best_score) {  // ties keep the smaller C seen first
      best_score = score;
      best_c = c;
    }
  }
  return fit_ovr(x, y, label_count, best_c, cfg);
}

LinearModel fit_linear_svc_multilabel(const Matrix& x, const std::vector<std::vector<int>>& y,
                                      int label_count, const ProbeConfig& cfg) {
  cfg.validate();
  if (x.empty() || x.size() != y.size()) throw FormatError("svc: bad training set");
  const auto [train_idx, val_idx] = val_split(x.size(), cfg);
  const Matrix tx = take(x, train_idx);
  const auto ty = take(y, train_idx);
  const Matrix vx = take(x, val_idx);
  const auto vy = take(y, val_idx);

  double best_c = cfg.c_grid.front();
  double best_score = -1.0;
  for (const double c : cfg.c_grid) {
    const LinearModel m = fit_ovr_multilabel(tx, ty, label_count, c, cfg);
    std::vector<std::vector<int>> pred;
    pred.reserve(vx.size());
    for (const auto& row : vx) pred.push_back(m.predict_labels(row));
    const double score = f1_macro_multilabel(pred, vy, label_count);
    if (score > best_score) {
      best_score = score;
      best_c = c;
    }
  }
  return fit_ovr_multilabel(x, y, label_count, best_c, cfg);
}

LinearModel fit_linear_svr(const Matrix& x, const std::vector<double>& y,
                           const ProbeConfig& cfg) {
  cfg.validate();
  if (x.empty() || x.size() != y.size()) throw FormatError("svr: bad training set");
  const double first = y.front();
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == first; })) {
    throw FormatError("svr: constant targets make rank correlation undefined");
  }
  const auto [train_idx, val_idx] = val_split(x.size(), cfg);
  const Matrix tx = take(x, train_idx);
  const auto ty = take(y, train_idx);
  const Matrix vx = take(x, val_idx);
  const auto vy = take(y, val_idx);

  double best_c = cfg.c_grid.front();
  double best_score = -2.0;
  for (const double c : cfg.c_grid) {
    BinaryFit fit = fit_epsilon_band(tx, ty, c, cfg);
    LinearModel m;
    m.weights.push_back(fit.w);
    m.bias.push_back(fit.b);
    std::vector<double> pred;
    pred.reserve(vx.size());
    for (const auto& row : vx) pred.push_back(m.predict_value(row));
    const double score = kendall_tau(pred, vy).value_or(0.0);
    if (score > best_score) {
      best_score = score;
      best_c = c;
    }
  }
  BinaryFit fit = fit_epsilon_band(x, y, best_c, cfg);
  LinearModel model;
  model.chosen_c = best_c;
  model.weights.push_back(std::move(fit.w));
  model.bias.push_back(fit.b);
  return model;
}

KshotResult kshot_eval(const Matrix& train_x, const std::vector<int>& train_y,
                       const Matrix& test_x, const std::vector<int>& test_y, int label_count,
                       const std::vector<int>& ks, bool binary_f1_mode, const ProbeConfig& cfg) {
  if (test_x.empty()) throw ConfigError("kshot: empty test split");
  if (ks.empty()) throw ConfigError("kshot: no k values");
  KshotResult result;
  result.ks = ks;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    std::vector<std::size_t> chosen;
    if (k <= 0) {
      chosen.resize(train_x.size());
      for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
    } else {
      // Per-class seeded sample of k points (clipped to the class size).
      Rng rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(ki));
      for (int c = 0; c < label_count; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < train_y.size(); ++i) {
          if (train_y[i] == c) members.push_back(i);
        }
        rng.shuffle(members);
        const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k), members.size());
        chosen.insert(chosen.end(), members.begin(),
                      members.begin() + static_cast<std::ptrdiff_t>(want));
      }
      std::sort(chosen.begin(), chosen.end());
    }
    const Matrix sx = take(train_x, chosen);
    const auto sy = take(train_y, chosen);
    const LinearModel m = fit_linear_svc(sx, sy, label_count, cfg);
    std::vector<int> pred;
    pred.reserve(test_x.size());
    for (const auto& row : test_x) pred.push_back(m.predict_class(row));
    const double score =
        binary_f1_mode ? f1_binary(pred, test_y) : f1_macro(pred, test_y, label_count);
    result.sub_scores.push_back(100.0 * score);
  }
  result.task_score = benchmark_average(result.sub_scores);
  return result;
}

}  // namespace taskvec
