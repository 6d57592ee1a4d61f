#include "taskvec/gradcheck.hpp"

#include "taskvec/objectives.hpp"
#include "taskvec/rng.hpp"
#include "taskvec/tensor.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace taskvec {

namespace {

constexpr double kStep = 1e-5;

/// Values bounded away from zero so kinked ops (relu, hinge) stay on one side
/// of the kink across the finite-difference window.
std::vector<double> rand_away_from_zero(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double m = 0.2 + 1.8 * rng.uniform();
    x = rng.bernoulli(0.5) ? m : -m;
  }
  return v;
}

std::vector<double> rand_signed(Rng& rng, std::size_t n, double scale = 1.5) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

std::vector<double> rand_positive(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = 0.2 + 2.0 * rng.uniform();
  return v;
}

struct Case {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Tensor(Tape&)> forward;  // returns a scalar loss
};

/// Scalarizes a tensor with fixed random weights so element gradients differ.
Tensor weighted_sum(Tape& tape, const Tensor& t, const Tensor& w) {
  return tape.sum(tape.mul(t, w));
}

Tensor make_weights(Rng& rng, const Shape& shape) {
  return Tensor::from(shape, rand_signed(rng, shape_numel(shape)));
}

std::vector<Case> build_cases(Rng& rng) {
  std::vector<Case> cases;
  auto input = [&](Shape shape, std::vector<double> vals) {
    return Tensor::from(std::move(shape), std::move(vals), true);
  };

  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({3, 2}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 2});
    cases.push_back({"matmul", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.matmul(a, b), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {3, 2});
    cases.push_back({"transpose", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.transpose(a), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"add", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.add(a, b), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({3}, rand_signed(rng, 3));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"add broadcast", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.add(a, b), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"sub", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.sub(a, b), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({3}, rand_signed(rng, 3));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"mul broadcast", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.mul(a, b), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"scale", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.scale(a, 0.731), w);
                     }});
  }
  {
    Tensor a = input({2, 4}, rand_away_from_zero(rng, 8));
    Tensor w = make_weights(rng, {2, 4});
    cases.push_back({"relu", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.relu(a), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"tanh", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.tanh(a), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6, 2.5));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"gelu", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.gelu(a), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_positive(rng, 6));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"sqrt", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.sqrt(a), w);
                     }});
  }
  {
    std::vector<double> vals = rand_signed(rng, 6, 3.0);
    vals[0] = 25.0 + rng.uniform();   // overflow-safe branch
    vals[1] = -25.0 - rng.uniform();
    Tensor a = input({2, 3}, vals);
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"softplus", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.softplus(a), w);
                     }});
  }
  {
    Tensor a = input({2, 4}, rand_signed(rng, 8, 2.0));
    Tensor w = make_weights(rng, {2, 4});
    cases.push_back({"softmax last", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.softmax(a, -1), w);
                     }});
  }
  {
    Tensor a = input({3, 2}, rand_signed(rng, 6, 2.0));
    Tensor w = make_weights(rng, {3, 2});
    cases.push_back({"softmax axis0", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.softmax(a, 0), w);
                     }});
  }
  {
    Tensor a = input({2, 4}, rand_signed(rng, 8, 2.0));
    Tensor w = make_weights(rng, {2, 4});
    cases.push_back({"log_softmax", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.log_softmax(a), w);
                     }});
  }
  {
    Tensor a = input({2, 4}, rand_signed(rng, 8, 2.0));
    Tensor g = input({4}, rand_positive(rng, 4));
    Tensor b = input({4}, rand_signed(rng, 4));
    Tensor w = make_weights(rng, {2, 4});
    cases.push_back({"layer_norm", {a, g, b}, [=](Tape& t) {
                       return weighted_sum(t, t.layer_norm(a, g, b), w);
                     }});
  }
  {
    Tensor table = input({5, 3}, rand_signed(rng, 15));
    const std::vector<int> ids{1, 3, 3, 0};
    Tensor w = make_weights(rng, {4, 3});
    cases.push_back({"embedding", {table}, [=](Tape& t) {
                       return weighted_sum(t, t.embedding(table, ids), w);
                     }});
  }
  {
    Tensor a = input({4, 3}, rand_signed(rng, 12));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"slice_rows", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.slice_rows(a, 1, 2), w);
                     }});
  }
  {
    Tensor a = input({2, 5}, rand_signed(rng, 10));
    Tensor w = make_weights(rng, {2, 3});
    cases.push_back({"slice_cols", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.slice_cols(a, 1, 3), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor b = input({1, 3}, rand_signed(rng, 3));
    Tensor w = make_weights(rng, {3, 3});
    cases.push_back({"concat_rows", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.concat_rows({a, b}), w);
                     }});
  }
  {
    Tensor a = input({2, 2}, rand_signed(rng, 4));
    Tensor b = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2, 5});
    cases.push_back({"concat_cols", {a, b}, [=](Tape& t) {
                       return weighted_sum(t, t.concat_cols({a, b}), w);
                     }});
  }
  {
    Tensor a = input({3, 4}, rand_signed(rng, 12));
    Tensor s = input({3}, rand_signed(rng, 3));
    Tensor w = make_weights(rng, {3, 4});
    cases.push_back({"scale_rows", {a, s}, [=](Tape& t) {
                       return weighted_sum(t, t.scale_rows(a, s), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {3, 2});
    cases.push_back({"reshape", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.reshape(a, {3, 2}), w);
                     }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    cases.push_back({"sum", {a}, [=](Tape& t) { return t.sum(a); }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    cases.push_back({"mean", {a}, [=](Tape& t) { return t.mean(a); }});
  }
  {
    Tensor a = input({2, 3}, rand_signed(rng, 6));
    Tensor w = make_weights(rng, {2});
    cases.push_back({"sum_last", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.sum_last(a), w);
                     }});
  }
  {
    Tensor a = input({3, 4}, rand_signed(rng, 12));
    const std::vector<int> idx{2, 0, 3};
    Tensor w = make_weights(rng, {3});
    cases.push_back({"pick", {a}, [=](Tape& t) {
                       return weighted_sum(t, t.pick(a, idx), w);
                     }});
  }
  {
    Tensor logits = input({3, 4}, rand_signed(rng, 12, 2.0));
    const std::vector<int> labels{1, 3, 0};
    cases.push_back({"cross_entropy", {logits}, [=](Tape& t) {
                       return cross_entropy(t, logits, labels);
                     }});
  }
  {
    Tensor logits = input({2, 3}, rand_signed(rng, 6, 2.0));
    std::vector<double> y(6);
    for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    cases.push_back({"bce", {logits}, [=](Tape& t) {
                       return bce_multilabel(t, logits, y);
                     }});
  }
  {
    Tensor pred = input({3, 1}, rand_signed(rng, 3));
    const std::vector<double> target = rand_signed(rng, 3);
    cases.push_back({"mse", {pred}, [=](Tape& t) { return mse(t, pred, target); }});
  }
  {
    // Resample until every triplet sits away from the hinge kink.
    Tensor q, p, n;
    for (int attempt = 0; attempt < 64; ++attempt) {
      q = input({2, 4}, rand_signed(rng, 8));
      p = input({2, 4}, rand_signed(rng, 8));
      n = input({2, 4}, rand_signed(rng, 8));
      bool ok = true;
      for (int row = 0; row < 2; ++row) {
        double dp = 0.0, dn = 0.0;
        for (int j = 0; j < 4; ++j) {
          const std::size_t k = static_cast<std::size_t>(row * 4 + j);
          dp += (q.data()[k] - p.data()[k]) * (q.data()[k] - p.data()[k]);
          dn += (q.data()[k] - n.data()[k]) * (q.data()[k] - n.data()[k]);
        }
        if (std::fabs(std::sqrt(dp) - std::sqrt(dn) + 1.0) < 1e-2) ok = false;
      }
      if (ok) break;
    }
    cases.push_back({"triplet", {q, p, n}, [=](Tape& t) {
                       return triplet_margin(t, q, p, n, 1.0);
                     }});
  }
  return cases;
}

}  // namespace

GradCheckResult run_grad_check(int seeds, double tol) {
  GradCheckResult result;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(0x6ead5eedULL + static_cast<std::uint64_t>(s) * 7919ULL);
    for (auto& c : build_cases(rng)) {
      Tape tape;
      const Tensor loss = c.forward(tape);
      tape.backward(loss);
      std::vector<std::vector<double>> analytic;
      for (const auto& in : c.inputs) analytic.push_back(in.grad());

      for (std::size_t t = 0; t < c.inputs.size(); ++t) {
        Tensor in = c.inputs[t];
        for (std::size_t e = 0; e < in.size(); ++e) {
          const double keep = in.data()[e];
          in.mutable_data()[e] = keep + kStep;
          Tape fwd_hi(false);
          const double hi = c.forward(fwd_hi).item();
          in.mutable_data()[e] = keep - kStep;
          Tape fwd_lo(false);
          const double lo = c.forward(fwd_lo).item();
          in.mutable_data()[e] = keep;

          const double numeric = (hi - lo) / (2.0 * kStep);
          const double a = analytic[t][e];
          const double rel =
              std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
          result.max_rel_err = std::max(result.max_rel_err, rel);
          ++result.checks;
          if (rel > tol || !std::isfinite(rel)) {
            ++result.failures;
            std::ostringstream os;
            os << c.name << " seed " << s << " input " << t << " elem " << e << ": analytic "
               << a << " vs numeric " << numeric;
            result.messages.push_back(os.str());
          }
        }
      }
    }
  }
  return result;
}

}  // namespace taskvec
