#pragma once

#include "taskvec/data.hpp"
#include "taskvec/encoder.hpp"
#include "taskvec/report.hpp"
#include "taskvec/trainer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace taskvec {

struct SynthCorpusConfig {
  int topics = 8;
  int docs_per_topic = 150;
  int topic_vocab = 40;       // topic-specific word pool size
  int shared_vocab = 120;     // shared noise pool size
  int title_words_min = 3;
  int title_words_max = 6;
  int abstract_words_min = 8;
  int abstract_words_max = 16;
  double intra_cite_p = 0.2;
  double inter_cite_p = 0.005;
  int authors = 60;
  int queries_per_topic = 3;
  std::uint64_t seed = 2024;

  void validate() const;
};

/// Per-document planted structure that tasks are built from. Kept separate
/// from the Document text so the corpus file stays schema-clean.
struct DocTruth {
  int topic = 0;
  int group = 0;                 // label partition unseen during training
  int method = 0;                // drives influential-citation structure
  std::vector<int> flags;        // planted binary attributes (4 families)
  double recency = 0.0;          // era scalar, also drives the year field
  double breadth = 0.0;          // shared-vocab mixing ratio
  std::vector<std::string> cited;
  std::map<std::string, int> cite_counts;  // cited doc id -> times cited here
  std::vector<std::string> authors;
};

struct SynthQuery {
  std::string id;
  std::string text;
  int topic = 0;
  bool held_out = false;
};

struct SynthCorpus {
  SynthCorpusConfig cfg;
  Corpus corpus;
  std::vector<DocTruth> truth;  // aligned with corpus.docs
  std::vector<SynthQuery> queries;
};

/// Pure function of the config: same config, byte-identical corpus.
SynthCorpus generate_corpus(const SynthCorpusConfig& cfg);

/// Materializes the benchmark: in-train tasks (topic CLF, attribute
/// multilabel CLF, two RGN scalars, citation / influential-citation /
/// same-author PRX, keyword SRCH) and held-out tasks (few-shot CLFs, a
/// transformed RGN, nearest-neighbor PRX, clustering, reviewer matching,
/// unseen-query SRCH). Train/test doc splits are disjoint per task.
std::vector<TaskData> build_tasks(const SynthCorpus& sc, const TrainConfig& tc);

/// Embeddings for every format a task set needs, keyed by format tag.
using EmbeddingsByFormat = std::map<std::string, EmbeddingMatrix>;

EmbeddingsByFormat embed_for_tasks(const EncoderModel& model, const SynthCorpus& sc,
                                   const std::vector<TaskData>& tasks);

/// Scores every task with its format's embedding. A missing embedding marks
/// the task failed in the report and the run continues.
BenchmarkReport run_benchmark(const EmbeddingsByFormat& embeddings,
                              const std::vector<TaskData>& tasks, std::uint64_t probe_seed);

/// 4x4 analysis: entry (format, code) scores the format's sampled in-train
/// task using embeddings produced under `code`, so every row compares the
/// four codes on one task. Row order CLF, RGN, PRX, SRCH; column order CLF,
/// RGN, PRX, QRY.
CrossFormatMatrix cross_format_matrix(const EncoderModel& model, const SynthCorpus& sc,
                                      const std::vector<TaskData>& tasks,
                                      std::uint64_t probe_seed);

}  // namespace taskvec
