#include "taskvec/objectives.hpp"

#include "taskvec/data.hpp"

namespace taskvec {

TaskHead TaskHead::make(Kind kind, int hidden, int k, Rng& rng) {
  TaskHead head;
  head.kind = kind;
  if (kind == Kind::Regression) k = 1;
  if (k < 1) throw ContractError("task head: needs at least one output");
  std::vector<double> w(static_cast<std::size_t>(hidden) * static_cast<std::size_t>(k));
  for (auto& x : w) x = rng.gaussian(0.0, 0.02);
  head.weight = Tensor::from({static_cast<std::size_t>(hidden), static_cast<std::size_t>(k)},
                             std::move(w), true);
  head.bias = Tensor::zeros({static_cast<std::size_t>(k)}, true);
  return head;
}

Tensor TaskHead::logits(Tape& tape, const Tensor& embeddings) const {
  return tape.add(tape.matmul(embeddings, weight), bias);
}

std::vector<Tensor> TaskHead::parameters() const { return {weight, bias}; }

Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  const int k = static_cast<int>(logits.cols());
  for (const int y : labels) {
    if (y < 0 || y >= k) {
      throw FormatError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                        std::to_string(k) + ")");
    }
  }
  const Tensor log_probs = tape.log_softmax(logits);
  return tape.scale(tape.mean(tape.pick(log_probs, labels)), -1.0);
}

Tensor bce_multilabel(Tape& tape, const Tensor& logits, const std::vector<double>& labels) {
  if (labels.size() != logits.size()) {
    throw DimensionError("bce: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.size()) + " logits");
  }
  for (const double y : labels) {
    if (y != 0.0 && y != 1.0) throw FormatError("bce: labels must be 0 or 1");
  }
  const Tensor y = Tensor::from(logits.shape(), labels);
  // softplus(z) - y*z is the stable form of -[y ln s(z) + (1-y) ln(1-s(z))].
  return tape.mean(tape.sub(tape.softplus(logits), tape.mul(logits, y)));
}

Tensor mse(Tape& tape, const Tensor& pred, const std::vector<double>& target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse: " + std::to_string(target.size()) + " targets for " +
                         std::to_string(pred.size()) + " predictions");
  }
  const Tensor t = Tensor::from(pred.shape(), target);
  const Tensor diff = tape.sub(pred, t);
  return tape.mean(tape.mul(diff, diff));
}

namespace {

Tensor pairwise_distance(Tape& tape, const Tensor& a, const Tensor& b) {
  const Tensor diff = tape.sub(a, b);
  return tape.sqrt(tape.sum_last(tape.mul(diff, diff)));  // [n]
}

}  // namespace

Tensor triplet_margin(Tape& tape, const Tensor& query, const Tensor& pos, const Tensor& neg,
                      double margin) {
  if (query.shape() != pos.shape() || query.shape() != neg.shape()) {
    throw DimensionError("triplet: query/positive/negative shapes differ");
  }
  if (margin <= 0.0) throw ContractError("triplet: margin must be positive");
  const Tensor d_pos = pairwise_distance(tape, query, pos);
  const Tensor d_neg = pairwise_distance(tape, query, neg);
  const Tensor shift = Tensor::full(d_pos.shape(), margin);
  return tape.mean(tape.relu(tape.add(tape.sub(d_pos, d_neg), shift)));
}

}  // namespace taskvec
