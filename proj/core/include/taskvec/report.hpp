#pragma once

#include "taskvec/data.hpp"

#include <array>
#include <string>
#include <vector>

namespace taskvec {

struct TaskScore {
  std::string task;
  TaskFormat format = TaskFormat::CLF;
  std::string metric;      // map, ndcg, tau, macro_f1, binary_f1, b3_f1, reviewer
  double value = 0.0;      // 0-100
  bool in_train = true;
  bool failed = false;     // missing embedding or degenerate input
  std::string note;        // skip counts, failure reason
  std::vector<double> sub_scores;  // few-shot components, 0-100
};

struct BenchmarkReport {
  std::vector<TaskScore> rows;

  double format_average(TaskFormat f) const;
  double in_train_average() const;
  double out_of_train_average() const;
  double overall_average() const;
  std::size_t failed_count() const;
};

struct CrossFormatMatrix {
  // rows: task formats CLF, RGN, PRX, SRCH; cols: codes CLF, RGN, PRX, QRY.
  // Scores within a row share one task and metric, so codes are comparable.
  std::array<std::array<double, 4>, 4> values{};
  std::array<std::string, 4> row_tasks{};

  bool diagonal_is_row_max(int row) const;
  int diagonal_row_max_count() const;
};

/// Human-readable tables.
std::string render_report(const BenchmarkReport& report);
std::string render_matrix(const CrossFormatMatrix& matrix);

/// Machine-readable rows: task,format,metric,value,in_train,failed,note.
std::string report_csv(const BenchmarkReport& report);
std::string matrix_csv(const CrossFormatMatrix& matrix);

}  // namespace taskvec
