#include <doctest.h>

#include "taskvec/report.hpp"

#include <string>

using namespace taskvec;

namespace {

TaskScore row(const std::string& task, TaskFormat f, double value, bool in_train,
              bool failed = false) {
  TaskScore r;
  r.task = task;
  r.format = f;
  r.metric = "macro_f1";
  r.value = value;
  r.in_train = in_train;
  r.failed = failed;
  if (failed) r.note = "degenerate input";
  return r;
}

BenchmarkReport sample_report() {
  BenchmarkReport rep;
  rep.rows = {row("topic", TaskFormat::CLF, 80.0, true),
              row("recency", TaskFormat::RGN, 60.0, true),
              row("cites", TaskFormat::PRX, 40.0, true, true),
              row("groups", TaskFormat::CLF, 20.0, false)};
  return rep;
}

}  // namespace

TEST_CASE("report averages skip failed rows") {
  const BenchmarkReport rep = sample_report();
  CHECK(rep.format_average(TaskFormat::CLF) == 50.0);  // 80 and 20
  CHECK(rep.format_average(TaskFormat::RGN) == 60.0);
  CHECK(rep.format_average(TaskFormat::PRX) == 0.0);  // only a failed row
  CHECK(rep.in_train_average() == 70.0);              // 80, 60; failed 40 excluded
  CHECK(rep.out_of_train_average() == 20.0);
  CHECK(rep.overall_average() == doctest::Approx((80.0 + 60.0 + 20.0) / 3.0));
  CHECK(rep.failed_count() == 1);

  const BenchmarkReport empty;
  CHECK(empty.overall_average() == 0.0);
  CHECK(empty.failed_count() == 0);
}

TEST_CASE("rendered reports mark failures and split the averages") {
  const std::string text = render_report(sample_report());
  CHECK(text.find("topic") != std::string::npos);
  CHECK(text.find("--") != std::string::npos);  // failed score placeholder
  CHECK(text.find("degenerate input") != std::string::npos);
  CHECK(text.find("held-out") != std::string::npos);
  CHECK(text.find("average in-train") != std::string::npos);
  CHECK(text.find("70.00") != std::string::npos);
  CHECK(text.find("failed tasks: 1") != std::string::npos);
}

TEST_CASE("report csv is machine readable") {
  BenchmarkReport rep = sample_report();
  rep.rows[0].note = "queries scored 3, skipped 1";  // comma forces quoting
  const std::string csv = report_csv(rep);
  CHECK(csv.find("task,format,metric,score,in_train,failed,note\n") == 0);
  CHECK(csv.find("topic,CLF,macro_f1,80,1,0,\"queries scored 3, skipped 1\"") !=
        std::string::npos);
  CHECK(csv.find("cites,PRX,macro_f1,40,1,1,degenerate input") != std::string::npos);
  CHECK(csv.find("groups,CLF,macro_f1,20,0,0,") != std::string::npos);
}

TEST_CASE("the matrix diagonal test requires a strict maximum") {
  CrossFormatMatrix m;
  m.row_tasks = {"topic", "recency", "cites", "kwsearch"};
  m.values = {{{9.0, 1.0, 1.0, 1.0},     // diagonal strictly best
               {2.0, 2.0, 1.0, 1.0},     // tied: not a strict max
               {5.0, 6.0, 4.0, 1.0},     // off-diagonal wins
               {1.0, 1.0, 1.0, 7.0}}};
  CHECK(m.diagonal_is_row_max(0));
  CHECK(!m.diagonal_is_row_max(1));
  CHECK(!m.diagonal_is_row_max(2));
  CHECK(m.diagonal_is_row_max(3));
  CHECK(m.diagonal_row_max_count() == 2);
}

TEST_CASE("matrix renderings carry the row task names") {
  CrossFormatMatrix m;
  m.row_tasks = {"topic", "recency", "cites", "kwsearch"};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = r == c ? 90.0 : 10.0;
    }
  }

  const std::string text = render_matrix(m);
  CHECK(text.find("format (task)") != std::string::npos);
  CHECK(text.find("CLF (topic)") != std::string::npos);
  CHECK(text.find("SRCH (kwsearch)") != std::string::npos);
  CHECK(text.find("QRY") != std::string::npos);
  CHECK(text.find("*") != std::string::npos);
  CHECK(text.find("matched code is best in 4/4 formats") != std::string::npos);

  const std::string csv = matrix_csv(m);
  CHECK(csv.find("format,task,CLF,RGN,PRX,QRY\n") == 0);
  CHECK(csv.find("CLF,topic,90,10,10,10") != std::string::npos);
  CHECK(csv.find("SRCH,kwsearch,10,10,10,90") != std::string::npos);
}
