#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace taskvec {

/// Bad option, flag, or config value (CLI exit 1).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable data (CLI exit 2).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The four task formats. Each learns its own document embedding.
enum class TaskFormat { CLF, RGN, PRX, SRCH };

/// Training objective attached to a task.
enum class Objective { Multiclass, Multilabel, Regression, Triplet };

std::string to_string(TaskFormat f);
std::string to_string(Objective o);
std::optional<TaskFormat> parse_format(const std::string& s);
std::optional<Objective> parse_objective(const std::string& s);

/// PRX/SRCH pair with triplet; CLF with multiclass or multilabel; RGN with
/// regression.
bool format_objective_compatible(TaskFormat f, Objective o);

struct Document {
  std::string id;
  std::string title;
  std::string abstract_text;
  std::string venue;       // optional, empty when absent
  std::optional<int> year; // optional
};

struct Corpus {
  std::vector<Document> docs;  // sorted by id
  std::unordered_map<std::string, std::size_t> index;

  const Document& at(const std::string& id) const;
  const Document* find(const std::string& id) const;
  void rebuild_index();
};

/// One training sample: either a labeled document or a triplet. A triplet
/// query is a document id, or raw text for ad-hoc search queries.
struct Sample {
  enum class Kind { Label, Triplet };
  Kind kind = Kind::Label;

  // Kind::Label
  std::string doc_id;
  int label = 0;                  // multiclass
  std::vector<int> labels;        // multilabel (indices of active labels)
  double target = 0.0;            // regression

  // Kind::Triplet
  std::string query_id;    // doc id, empty when the query is raw text
  std::string query_text;  // raw search query text
  std::string pos_id;
  std::string neg_id;
};

struct TaskSpec {
  std::string name;
  TaskFormat format = TaskFormat::CLF;
  Objective objective = Objective::Multiclass;
  std::string train_path;
  std::string test_path;
  std::size_t cap = 2000;  // per-task sample cap

  // Extensions beyond the base schema, used by specific protocols.
  std::string metric;         // macro_f1, binary_f1, tau, map, ndcg, b3_f1, reviewer
  std::string queries_path;   // SRCH: query id -> text
  std::string profiles_path;  // reviewer matching: reviewer -> authored doc ids
};

/// A qrels record: graded relevance of a candidate for a query.
struct QrelRow {
  std::string query_id;
  std::string candidate_id;
  int grade = 0;
};

/// Fully materialized task: spec plus loaded data, ready to train/evaluate.
struct TaskData {
  TaskSpec spec;
  bool in_train = true;
  int label_count = 0;                       // classes (multiclass) or labels (multilabel)
  std::vector<Sample> train;
  std::vector<Sample> test;                  // labeled protocols
  std::vector<QrelRow> test_qrels;           // ranking protocols
  std::map<std::string, std::string> query_texts;        // SRCH: query id -> text
  std::map<std::string, std::vector<std::string>> profiles;  // reviewer -> doc ids
  std::map<std::string, std::string> blocks;    // clustering: doc id -> block
  std::map<std::string, std::string> clusters;  // clustering: doc id -> gold cluster
  std::vector<int> kshot;                    // few-shot k values; 0 = full data
};

/// Per-(document, format) embedding table; the principal output artifact.
struct EmbeddingMatrix {
  std::uint32_t dim = 0;
  std::string format_tag;  // CLS, CLF, RGN, PRX, SRCH
  std::vector<std::string> ids;             // ascending
  std::vector<std::vector<double>> vecs;    // aligned with ids

  const std::vector<double>* find(const std::string& id) const;
  void insert(const std::string& id, std::vector<double> vec);
  std::size_t count() const { return ids.size(); }
};

/// Elementwise mean of two matrices over identical key sets. Key or
/// dimension mismatch is an input error.
EmbeddingMatrix ensemble_embeddings(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

}  // namespace taskvec
