#include "taskvec/metrics.hpp"

#include "taskvec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace taskvec {

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw FormatError("distance: dimension mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw FormatError("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw FormatError("cosine: zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RankedList euclidean_rank(const std::string& query_id, const std::vector<double>& query,
                          const std::vector<std::pair<std::string, std::vector<double>>>& candidates,
                          const std::map<std::string, int>& grades) {
  std::vector<std::pair<double, const std::string*>> order;
  order.reserve(candidates.size());
  for (const auto& [id, vec] : candidates) {
    order.emplace_back(euclidean_distance(query, vec), &id);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return *a.second < *b.second;
  });
  RankedList r;
  r.query_id = query_id;
  r.ids.reserve(order.size());
  r.grades.reserve(order.size());
  for (const auto& [dist, id] : order) {
    (void)dist;
    r.ids.push_back(*id);
    const auto it = grades.find(*id);
    r.grades.push_back(it == grades.end() ? 0 : it->second);
  }
  return r;
}

std::optional<double> average_precision(const RankedList& r, int threshold) {
  int positives = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < r.grades.size(); ++i) {
    if (r.grades[i] >= threshold) {
      ++positives;
      sum += static_cast<double>(positives) / static_cast<double>(i + 1);
    }
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

MeanResult mean_average_precision(const std::vector<RankedList>& lists, int threshold) {
  MeanResult out;
  double sum = 0.0;
  for (const auto& r : lists) {
    const auto ap = average_precision(r, threshold);
    if (ap) {
      sum += *ap;
      ++out.scored;
    } else {
      ++out.skipped;
    }
  }
  out.value = out.scored > 0 ? sum / out.scored : 0.0;
  return out;
}

std::optional<double> ndcg(const RankedList& r) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < r.grades.size(); ++i) {
    dcg += static_cast<double>(r.grades[i]) / std::log2(static_cast<double>(i + 2));
  }
  std::vector<int> ideal = r.grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  if (ideal.empty() || ideal[0] == 0) return std::nullopt;
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    idcg += static_cast<double>(ideal[i]) / std::log2(static_cast<double>(i + 2));
  }
  return dcg / idcg;
}

MeanResult mean_ndcg(const std::vector<RankedList>& lists) {
  MeanResult out;
  double sum = 0.0;
  for (const auto& r : lists) {
    const auto v = ndcg(r);
    if (v) {
      sum += *v;
      ++out.scored;
    } else {
      ++out.skipped;
    }
  }
  out.value = out.scored > 0 ? sum / out.scored : 0.0;
  return out;
}

double precision_at_k(const RankedList& r, int k, int threshold) {
  if (k < 1) throw ContractError("precision_at_k: k must be >= 1");
  int hits = 0;
  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), r.grades.size());
  for (std::size_t i = 0; i < top; ++i) {
    if (r.grades[i] >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> kendall_tau(const std::vector<double>& pred,
                                  const std::vector<double>& gold) {
  if (pred.size() != gold.size()) throw FormatError("kendall: length mismatch");
  if (pred.size() < 2) throw FormatError("kendall: needs at least 2 points");
  long long concordant = 0, discordant = 0, tie_pred = 0, tie_gold = 0;
  const std::size_t n = pred.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dp = pred[i] - pred[j];
      const double dg = gold[i] - gold[j];
      if (dp == 0.0 && dg == 0.0) continue;
      if (dp == 0.0) {
        ++tie_pred;
      } else if (dg == 0.0) {
        ++tie_gold;
      } else if ((dp > 0.0) == (dg > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double np = static_cast<double>(concordant + discordant + tie_pred);
  const double ng = static_cast<double>(concordant + discordant + tie_gold);
  if (np == 0.0 || ng == 0.0) return std::nullopt;
  return static_cast<double>(concordant - discordant) / std::sqrt(np * ng);
}

double b3_f1(const Clustering& pred, const Clustering& gold) {
  if (pred.size() != gold.size()) {
    throw FormatError("b3: clusterings cover different element counts");
  }
  std::map<std::string, int> pred_size, gold_size;
  std::map<std::pair<std::string, std::string>, int> joint;
  for (const auto& [el, pc] : pred) {
    const auto git = gold.find(el);
    if (git == gold.end()) throw FormatError("b3: element '" + el + "' missing from gold");
    ++pred_size[pc];
    ++gold_size[git->second];
    ++joint[{pc, git->second}];
  }
  double p_sum = 0.0, r_sum = 0.0;
  for (const auto& [el, pc] : pred) {
    const auto& gc = gold.at(el);
    const int both = joint.at({pc, gc});
    p_sum += static_cast<double>(both) / pred_size.at(pc);
    r_sum += static_cast<double>(both) / gold_size.at(gc);
  }
  const double p = p_sum / static_cast<double>(pred.size());
  const double r = r_sum / static_cast<double>(pred.size());
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

namespace {

double f1_from_counts(long long tp, long long fp, long long fn) {
  const long long denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double f1_binary(const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size()) throw FormatError("f1: length mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && gold[i] == 1) ++tp;
    else if (pred[i] == 1 && gold[i] != 1) ++fp;
    else if (pred[i] != 1 && gold[i] == 1) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

double f1_macro(const std::vector<int>& pred, const std::vector<int>& gold, int label_count) {
  if (pred.size() != gold.size()) throw FormatError("f1: length mismatch");
  if (label_count < 1) throw ContractError("f1_macro: label_count must be >= 1");
  double sum = 0.0;
  for (int c = 0; c < label_count; ++c) {
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      else if (pred[i] == c && gold[i] != c) ++fp;
      else if (pred[i] != c && gold[i] == c) ++fn;
    }
    sum += f1_from_counts(tp, fp, fn);
  }
  return sum / static_cast<double>(label_count);
}

double f1_macro_multilabel(const std::vector<std::vector<int>>& pred,
                           const std::vector<std::vector<int>>& gold, int label_count) {
  if (pred.size() != gold.size()) throw FormatError("f1: row count mismatch");
  double sum = 0.0;
  for (int c = 0; c < label_count; ++c) {
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const int p = pred[i][static_cast<std::size_t>(c)];
      const int g = gold[i][static_cast<std::size_t>(c)];
      if (p == 1 && g == 1) ++tp;
      else if (p == 1 && g != 1) ++fp;
      else if (p != 1 && g == 1) ++fn;
    }
    sum += f1_from_counts(tp, fp, fn);
  }
  return sum / static_cast<double>(label_count);
}

double reviewer_score(const std::vector<double>& query,
                      const std::vector<std::vector<double>>& reviewer_papers) {
  if (reviewer_papers.empty()) throw FormatError("reviewer_score: reviewer has no papers");
  std::vector<double> sims;
  sims.reserve(reviewer_papers.size());
  for (const auto& p : reviewer_papers) sims.push_back(cosine(query, p));
  std::sort(sims.begin(), sims.end(), std::greater<double>());
  const std::size_t top = std::min<std::size_t>(3, sims.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += sims[i];
  return sum / static_cast<double>(top);
}

double benchmark_average(const std::vector<double>& task_scores) {
  if (task_scores.empty()) throw ContractError("benchmark_average: no task scores");
  return std::accumulate(task_scores.begin(), task_scores.end(), 0.0) /
         static_cast<double>(task_scores.size());
}

Clustering agglomerative_cluster(
    const std::vector<std::pair<std::string, std::vector<double>>>& items, double threshold) {
  const std::size_t n = items.size();
  Clustering out;
  if (n == 0) return out;

  // Cluster state: member indices plus the lexicographically smallest id,
  // used for deterministic tie-breaking and final naming.
  struct Cluster {
    std::vector<std::size_t> members;
    std::string rep;
    bool alive = true;
  };
  std::vector<Cluster> clusters(n);
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i].members = {i};
    clusters[i].rep = items[i].first;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = 1.0 - cosine(items[i].second, items[j].second);
      dist[i][j] = d;
      dist[j][i] = d;
    }
  }

  while (true) {
    double best = threshold;
    std::size_t bi = n, bj = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!clusters[i].alive) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!clusters[j].alive) continue;
        const double d = dist[i][j];
        const bool better =
            d < best ||
            (d == best && bi < n &&
             std::minmax(clusters[i].rep, clusters[j].rep) <
                 std::minmax(clusters[bi].rep, clusters[bj].rep));
        if (d < threshold && better) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi == n) break;

    // Average linkage: merged distances are size-weighted means.
    const double wi = static_cast<double>(clusters[bi].members.size());
    const double wj = static_cast<double>(clusters[bj].members.size());
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      if (!clusters[k2].alive || k2 == bi || k2 == bj) continue;
      const double d = (wi * dist[bi][k2] + wj * dist[bj][k2]) / (wi + wj);
      dist[bi][k2] = d;
      dist[k2][bi] = d;
    }
    auto& ci = clusters[bi];
    auto& cj = clusters[bj];
    ci.members.insert(ci.members.end(), cj.members.begin(), cj.members.end());
    ci.rep = std::min(ci.rep, cj.rep);
    cj.alive = false;
  }

  // Name clusters by the order of their smallest member id.
  std::vector<const Cluster*> alive;
  for (const auto& c : clusters) {
    if (c.alive) alive.push_back(&c);
  }
  std::sort(alive.begin(), alive.end(),
            [](const Cluster* a, const Cluster* b) { return a->rep < b->rep; });
  for (std::size_t ci = 0; ci < alive.size(); ++ci) {
    for (const std::size_t m : alive[ci]->members) {
      out[items[m].first] = "c" + std::to_string(ci);
    }
  }
  return out;
}

}  // namespace taskvec
