#pragma once

#include "taskvec/rng.hpp"

#include <cstdint>
#include <vector>

namespace taskvec {

struct ProbeConfig {
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  double val_fraction = 0.2;
  int max_epochs = 400;
  double loss_delta = 1e-8;  // stop when the epoch loss moves less than this
  double epsilon = 0.1;      // SVR insensitive band
  std::uint64_t seed = 1;

  void validate() const;
};

/// One-vs-rest linear model: weight row and bias per class (one row for
/// regression).
struct LinearModel {
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
  double chosen_c = 0.0;

  int predict_class(const std::vector<double>& x) const;
  std::vector<int> predict_labels(const std::vector<double>& x) const;  // multilabel, score > 0
  double predict_value(const std::vector<double>& x) const;             // regression
};

/// Hinge + L2 (strength 1/C) one-vs-rest classifier fit by deterministic
/// full-batch subgradient descent. C is chosen on a carved-out validation
/// split by macro F1 (ties toward smaller C), then the model is refit on
/// train+validation. Needs at least two classes.
LinearModel fit_linear_svc(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           int label_count, const ProbeConfig& cfg);

/// Multilabel variant: independent binary fits per label column.
LinearModel fit_linear_svc_multilabel(const std::vector<std::vector<double>>& x,
                                      const std::vector<std::vector<int>>& y, int label_count,
                                      const ProbeConfig& cfg);

/// Epsilon-insensitive + L2 regression; C chosen by validation Kendall tau.
/// Constant targets are a degenerate error.
LinearModel fit_linear_svr(const std::vector<std::vector<double>>& x,
                           const std::vector<double>& y, const ProbeConfig& cfg);

struct KshotResult {
  std::vector<int> ks;               // 0 means full data
  std::vector<double> sub_scores;    // one per k, 0-100
  double task_score = 0.0;           // mean of sub-scores
};

/// For each k: sample k training points per class (seeded), fit the probe,
/// score macro F1 (or binary F1 when label_count == 2 and binary_f1 is set)
/// on the fixed test split; the task score is the mean over ks. k larger
/// than a class is clipped with a logged warning.
KshotResult kshot_eval(const std::vector<std::vector<double>>& train_x,
                       const std::vector<int>& train_y,
                       const std::vector<std::vector<double>>& test_x,
                       const std::vector<int>& test_y, int label_count,
                       const std::vector<int>& ks, bool binary_f1, const ProbeConfig& cfg);

}  // namespace taskvec
