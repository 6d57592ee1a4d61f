#pragma once

#include "taskvec/data.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace taskvec {

/// Candidates of one query ordered by ascending Euclidean distance, ties by
/// ascending candidate id, with aligned gold grades.
struct RankedList {
  std::string query_id;
  std::vector<std::string> ids;
  std::vector<int> grades;
};

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Cosine similarity; zero-norm input is an input error.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Ranks `candidates` (id -> vector, any order) by distance to `query`.
/// Grades default to 0 for candidates absent from `grades`.
RankedList euclidean_rank(const std::string& query_id, const std::vector<double>& query,
                          const std::vector<std::pair<std::string, std::vector<double>>>& candidates,
                          const std::map<std::string, int>& grades);

/// AP over candidates with grade >= threshold; nullopt when the list has no
/// positive (callers skip and count these).
std::optional<double> average_precision(const RankedList& r, int threshold = 1);

struct MeanResult {
  double value = 0.0;
  int scored = 0;
  int skipped = 0;
};

/// Mean AP over queries; queries without positives are skipped and counted.
MeanResult mean_average_precision(const std::vector<RankedList>& lists, int threshold = 1);

/// Linear gain, log2(rank+1) discount, normalized by the ideal ordering.
/// nullopt when all grades are zero.
std::optional<double> ndcg(const RankedList& r);

MeanResult mean_ndcg(const std::vector<RankedList>& lists);

/// Fraction of the top k with grade >= threshold; the denominator is k even
/// when fewer candidates exist.
double precision_at_k(const RankedList& r, int k, int threshold = 1);

/// Kendall tau-b: (C - D) / sqrt((C+D+Tp)(C+D+Tg)); nullopt when either side
/// is all ties.
std::optional<double> kendall_tau(const std::vector<double>& pred, const std::vector<double>& gold);

/// element id -> cluster id.
using Clustering = std::map<std::string, std::string>;

/// Harmonic mean of element-averaged B-cubed precision and recall. The two
/// clusterings must cover the same element set.
double b3_f1(const Clustering& pred, const Clustering& gold);

/// F1 of the positive class (label 1).
double f1_binary(const std::vector<int>& pred, const std::vector<int>& gold);

/// Unweighted mean of per-class F1 over the declared label space [0,K).
double f1_macro(const std::vector<int>& pred, const std::vector<int>& gold, int label_count);

/// Macro F1 over binary indicator columns (multilabel).
double f1_macro_multilabel(const std::vector<std::vector<int>>& pred,
                           const std::vector<std::vector<int>>& gold, int label_count);

/// Mean of the top min(3, count) cosine similarities between the query and
/// the reviewer's papers. The reviewer must have at least one paper.
double reviewer_score(const std::vector<double>& query,
                      const std::vector<std::vector<double>>& reviewer_papers);

/// Unweighted mean of 0-100 task scores. Few-shot tasks average their
/// sub-scores into one task score before entering this mean.
double benchmark_average(const std::vector<double>& task_scores);

/// Greedy agglomerative average-linkage clustering over cosine distance:
/// repeatedly merges the closest pair of clusters while the linkage distance
/// stays below `threshold`. Returns element -> cluster id (cluster ids are
/// deterministic). Items must have unique ids.
Clustering agglomerative_cluster(const std::vector<std::pair<std::string, std::vector<double>>>& items,
                                 double threshold);

}  // namespace taskvec
