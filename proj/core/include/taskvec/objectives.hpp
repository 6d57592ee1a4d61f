#pragma once

#include "taskvec/rng.hpp"
#include "taskvec/tensor.hpp"

#include <vector>

namespace taskvec {

/// Linear head mapping embeddings [n,H] to logits [n,K]. Heads exist only
/// during training; evaluation always works on raw embeddings.
struct TaskHead {
  enum class Kind { Multiclass, Multilabel, Regression };
  Kind kind = Kind::Multiclass;
  Tensor weight;  // [H,K]
  Tensor bias;    // [K]

  static TaskHead make(Kind kind, int hidden, int k, Rng& rng);
  Tensor logits(Tape& tape, const Tensor& embeddings) const;  // [n,K]
  std::vector<Tensor> parameters() const;
};

/// Mean negative log softmax probability of the true class.
Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

/// Mean over n*K elements of the stable binary cross entropy with logits:
/// softplus(z) - y*z.
Tensor bce_multilabel(Tape& tape, const Tensor& logits, const std::vector<double>& labels);

/// Mean squared error; pred is [n] or [n,1].
Tensor mse(Tape& tape, const Tensor& pred, const std::vector<double>& target);

/// Mean over triplets of max(d(q,pos) - d(q,neg) + margin, 0) with Euclidean
/// d; subgradient 0 at the hinge point.
Tensor triplet_margin(Tape& tape, const Tensor& query, const Tensor& pos, const Tensor& neg,
                      double margin = 1.0);

}  // namespace taskvec
