#include "taskvec/report.hpp"

#include "taskvec/metrics.hpp"

#include <iomanip>
#include <sstream>

namespace taskvec {

namespace {

double average_where(const std::vector<TaskScore>& rows, bool (*pred)(const TaskScore&),
                     const TaskScore* extra_filter = nullptr) {
  (void)extra_filter;
  std::vector<double> vals;
  for (const auto& r : rows) {
    if (!r.failed && pred(r)) vals.push_back(r.value);
  }
  return vals.empty() ? 0.0 : benchmark_average(vals);
}

const char* kFormatNames[] = {"CLF", "RGN", "PRX", "SRCH"};
const char* kCodeNames[] = {"CLF", "RGN", "PRX", "QRY"};

}  // namespace

double BenchmarkReport::format_average(TaskFormat f) const {
  std::vector<double> vals;
  for (const auto& r : rows) {
    if (!r.failed && r.format == f) vals.push_back(r.value);
  }
  return vals.empty() ? 0.0 : benchmark_average(vals);
}

double BenchmarkReport::in_train_average() const {
  return average_where(rows, [](const TaskScore& r) { return r.in_train; });
}

double BenchmarkReport::out_of_train_average() const {
  return average_where(rows, [](const TaskScore& r) { return !r.in_train; });
}

double BenchmarkReport::overall_average() const {
  return average_where(rows, [](const TaskScore&) { return true; });
}

std::size_t BenchmarkReport::failed_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.failed ? 1 : 0;
  return n;
}

bool CrossFormatMatrix::diagonal_is_row_max(int row) const {
  const auto& r = values[static_cast<std::size_t>(row)];
  for (int c = 0; c < 4; ++c) {
    if (c != row && r[static_cast<std::size_t>(c)] >= r[static_cast<std::size_t>(row)]) {
      return false;
    }
  }
  return true;
}

int CrossFormatMatrix::diagonal_row_max_count() const {
  int n = 0;
  for (int i = 0; i < 4; ++i) n += diagonal_is_row_max(i) ? 1 : 0;
  return n;
}

std::string render_report(const BenchmarkReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(24) << "task" << std::setw(7) << "format" << std::setw(11)
     << "metric" << std::right << std::setw(8) << "score" << "  note\n";
  os << std::string(60, '-') << "\n";
  for (const auto& r : report.rows) {
    os << std::left << std::setw(24) << r.task << std::setw(7) << to_string(r.format)
       << std::setw(11) << r.metric << std::right << std::setw(8);
    if (r.failed) {
      os << "--";
    } else {
      os << r.value;
    }
    os << "  " << (r.in_train ? "in-train" : "held-out");
    if (!r.note.empty()) os << "; " << r.note;
    os << "\n";
  }
  os << std::string(60, '-') << "\n";
  for (int f = 0; f < 4; ++f) {
    os << std::left << std::setw(42) << (std::string("average ") + kFormatNames[f]) << std::right
       << std::setw(8) << report.format_average(static_cast<TaskFormat>(f)) << "\n";
  }
  os << std::left << std::setw(42) << "average in-train" << std::right << std::setw(8)
     << report.in_train_average() << "\n";
  os << std::left << std::setw(42) << "average held-out" << std::right << std::setw(8)
     << report.out_of_train_average() << "\n";
  os << std::left << std::setw(42) << "average overall" << std::right << std::setw(8)
     << report.overall_average() << "\n";
  if (report.failed_count() > 0) {
    os << "failed tasks: " << report.failed_count() << "\n";
  }
  return os.str();
}

std::string render_matrix(const CrossFormatMatrix& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(20) << "format (task)";
  for (int c = 0; c < 4; ++c) os << std::right << std::setw(10) << kCodeNames[c];
  os << "\n" << std::string(60, '-') << "\n";
  for (int r = 0; r < 4; ++r) {
    const std::string label =
        std::string(kFormatNames[r]) + " (" + m.row_tasks[static_cast<std::size_t>(r)] + ")";
    os << std::left << std::setw(20) << label;
    for (int c = 0; c < 4; ++c) {
      os << std::right << std::setw(10)
         << m.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    if (m.diagonal_is_row_max(r)) os << "  *";
    os << "\n";
  }
  os << "matched code is best in " << m.diagonal_row_max_count() << "/4 formats\n";
  return os.str();
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

std::string report_csv(const BenchmarkReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "task,format,metric,score,in_train,failed,note\n";
  for (const auto& r : report.rows) {
    os << csv_escape(r.task) << "," << to_string(r.format) << "," << r.metric << "," << r.value
       << "," << (r.in_train ? 1 : 0) << "," << (r.failed ? 1 : 0) << "," << csv_escape(r.note)
       << "\n";
  }
  return os.str();
}

std::string matrix_csv(const CrossFormatMatrix& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "format,task,CLF,RGN,PRX,QRY\n";
  for (int r = 0; r < 4; ++r) {
    os << kFormatNames[r] << "," << csv_escape(m.row_tasks[static_cast<std::size_t>(r)]);
    for (int c = 0; c < 4; ++c) {
      os << "," << m.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace taskvec
