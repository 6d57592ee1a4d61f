#pragma once

#include "taskvec/data.hpp"
#include "taskvec/encoder.hpp"
#include "taskvec/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace taskvec {

struct TrainConfig {
  int batch = 32;
  int epochs = 2;
  double peak_lr = 5e-5;
  int warmup = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double margin = 1.0;
  int triplet_cap = 5;       // triplets kept per query
  std::size_t task_cap = 2000;  // samples kept per task
  std::uint64_t seed = 7;

  void validate() const;
};

/// CI-scale defaults (the constructor's values).
TrainConfig desk_profile();

/// Full-scale defaults: batch 256, warmup 700, per-task cap 600000.
TrainConfig paper_profile();

/// Samples up to k triplets for one query from scored candidates: each pairs
/// a strictly higher-scored positive with a lower-scored negative, drawn
/// without replacement from the valid pair set. No valid pair yields an
/// empty result.
std::vector<Sample> sample_triplets(const std::string& query_id, const std::string& query_text,
                                    const std::vector<std::pair<std::string, int>>& scored,
                                    int k, Rng& rng);

/// Cycling sample feed: deterministic reshuffle on every wrap.
class TaskIterator {
public:
  TaskIterator(std::size_t n, Rng rng);
  std::size_t next();

private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

/// Equal-per-task share: floor(batch / tasks), with a warning when the
/// division is not exact. Zero tasks or a zero share is a config error.
int per_task_share(int batch, int task_count, std::vector<std::string>* warnings = nullptr);

struct TraceRow {
  std::int64_t step = 0;
  std::string task;
  double loss = 0.0;
  double lr = 0.0;
};

/// Parameter-group hashes captured when a training stage finishes. Freeze
/// contracts (frozen trunk, frozen adapters in the fusion stage) are checked
/// by comparing these across stages.
struct StageHashes {
  std::string stage;  // "all", "adapters", "fusion"
  std::uint64_t trunk = 0;
  std::uint64_t adapter = 0;
  std::uint64_t pal = 0;
  std::uint64_t fusion = 0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::int64_t steps = 0;
  std::vector<std::string> warnings;
  std::vector<StageHashes> stage_hashes;  // one per completed stage
};

/// Multi-task training over the in-train tasks; held-out tasks in the list
/// are ignored. Every step draws an equal share from each task, averages the
/// per-task losses, and applies one AdamW update on the variant's trainable
/// set:
///   CLS_ONLY / CTRL / PALS : the whole network,
///   ADAPTER                : format adapters only (trunk frozen),
///   FUSION                 : stage 1 adapters, stage 2 fusion blocks only.
/// One epoch is ceil(largest capped task / share) steps; smaller tasks
/// cycle with reshuffles. A non-finite loss aborts with the task and step.
TrainResult train(EncoderModel& model, const Corpus& corpus, std::vector<TaskData>& tasks,
                  const TrainConfig& cfg);

}  // namespace taskvec
