#include "taskvec/trainer.hpp"

#include "taskvec/objectives.hpp"
#include "taskvec/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace taskvec {

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("train config: batch must be >= 1");
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (peak_lr <= 0.0) throw ConfigError("train config: peak_lr must be positive");
  if (warmup < 1) throw ConfigError("train config: warmup must be >= 1");
  if (margin <= 0.0) throw ConfigError("train config: margin must be positive");
  if (triplet_cap < 1) throw ConfigError("train config: triplet_cap must be >= 1");
  if (task_cap < 1) throw ConfigError("train config: task_cap must be >= 1");
}

TrainConfig desk_profile() { return TrainConfig{}; }

TrainConfig paper_profile() {
  TrainConfig cfg;
  cfg.batch = 256;
  cfg.warmup = 700;
  cfg.task_cap = 600000;
  cfg.epochs = 2;
  return cfg;
}

std::vector<Sample> sample_triplets(const std::string& query_id, const std::string& query_text,
                                    const std::vector<std::pair<std::string, int>>& scored,
                                    int k, Rng& rng) {
  if (k < 1) throw ContractError("sample_triplets: k must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    for (std::size_t j = 0; j < scored.size(); ++j) {
      if (scored[i].second > scored[j].second) pairs.emplace_back(i, j);
    }
  }
  if (pairs.size() > static_cast<std::size_t>(k)) {
    rng.shuffle(pairs);
    pairs.resize(static_cast<std::size_t>(k));
  }
  std::vector<Sample> out;
  out.reserve(pairs.size());
  for (const auto& [pi, ni] : pairs) {
    Sample s;
    s.kind = Sample::Kind::Triplet;
    s.query_id = query_id;
    s.query_text = query_text;
    s.pos_id = scored[pi].first;
    s.neg_id = scored[ni].first;
    out.push_back(std::move(s));
  }
  return out;
}

TaskIterator::TaskIterator(std::size_t n, Rng rng) : rng_(rng) {
  if (n == 0) throw ContractError("task iterator: empty sample set");
  order_.resize(n);
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  rng_.shuffle(order_);
}

std::size_t TaskIterator::next() {
  if (pos_ == order_.size()) {
    rng_.shuffle(order_);
    pos_ = 0;
  }
  return order_[pos_++];
}

int per_task_share(int batch, int task_count, std::vector<std::string>* warnings) {
  if (task_count < 1) throw ConfigError("batching: no active tasks");
  const int share = batch / task_count;
  if (share < 1) {
    throw ConfigError("batching: batch " + std::to_string(batch) + " too small for " +
                      std::to_string(task_count) + " tasks");
  }
  if (batch % task_count != 0 && warnings) {
    warnings->push_back("batch " + std::to_string(batch) + " not divisible by " +
                        std::to_string(task_count) + " tasks; using " + std::to_string(share) +
                        " per task (effective batch " + std::to_string(share * task_count) + ")");
  }
  return share;
}

namespace {

struct PreppedSample {
  std::vector<int> seq_a;  // document, or triplet query
  std::vector<int> seq_b;  // triplet positive
  std::vector<int> seq_c;  // triplet negative
  int label = 0;
  std::vector<double> multihot;
  double target = 0.0;
};

struct PreppedTask {
  std::string name;
  TaskFormat format = TaskFormat::CLF;
  Objective objective = Objective::Multiclass;
  std::vector<PreppedSample> samples;
  TaskHead head;
  bool has_head = false;
};

std::vector<int> tokenize_for_training(const EncoderModel& model, const Corpus& corpus,
                                       const Sample& s, TaskFormat format, bool query_side) {
  const bool ctrl = model.cfg.variant == Variant::CTRL;
  const ControlCode code = ctrl ? code_for(format, query_side) : ControlCode::CLS;
  const bool metadata = format == TaskFormat::SRCH && !query_side;
  if (query_side && s.kind == Sample::Kind::Triplet && s.query_id.empty()) {
    Document q;
    q.id = "(query)";
    q.title = s.query_text;
    return tokenize(q, code, model.cfg, false);
  }
  const std::string& id = query_side ? s.query_id : s.doc_id;
  return tokenize(corpus.at(id), code, model.cfg, metadata);
}

PreppedTask prep_task(const EncoderModel& model, const Corpus& corpus, const TaskData& task,
                      const TrainConfig& cfg, Rng& rng) {
  if (!format_objective_compatible(task.spec.format, task.spec.objective)) {
    throw ConfigError("task " + task.spec.name + ": objective " + to_string(task.spec.objective) +
                      " incompatible with format " + to_string(task.spec.format));
  }
  if (task.train.empty()) {
    throw ConfigError("task " + task.spec.name + ": no training samples");
  }
  std::vector<Sample> samples = task.train;
  const std::size_t cap = std::min(task.spec.cap, cfg.task_cap);
  if (samples.size() > cap) {
    rng.shuffle(samples);
    samples.resize(cap);
  }

  PreppedTask p;
  p.name = task.spec.name;
  p.format = task.spec.format;
  p.objective = task.spec.objective;
  p.samples.reserve(samples.size());
  for (const auto& s : samples) {
    PreppedSample ps;
    if (s.kind == Sample::Kind::Triplet) {
      ps.seq_a = tokenize_for_training(model, corpus, s, task.spec.format, true);
      Sample pos_side;
      pos_side.doc_id = s.pos_id;
      ps.seq_b = tokenize_for_training(model, corpus, pos_side, task.spec.format, false);
      Sample neg_side;
      neg_side.doc_id = s.neg_id;
      ps.seq_c = tokenize_for_training(model, corpus, neg_side, task.spec.format, false);
    } else {
      ps.seq_a = tokenize_for_training(model, corpus, s, task.spec.format, false);
      ps.label = s.label;
      ps.target = s.target;
      if (task.spec.objective == Objective::Multilabel) {
        ps.multihot.assign(static_cast<std::size_t>(task.label_count), 0.0);
        for (const int li : s.labels) {
          if (li < 0 || li >= task.label_count) {
            throw FormatError("task " + task.spec.name + ": label index " + std::to_string(li) +
                              " outside [0," + std::to_string(task.label_count) + ")");
          }
          ps.multihot[static_cast<std::size_t>(li)] = 1.0;
        }
      }
    }
    p.samples.push_back(std::move(ps));
  }

  switch (task.spec.objective) {
    case Objective::Multiclass:
      p.head = TaskHead::make(TaskHead::Kind::Multiclass, model.cfg.hidden, task.label_count, rng);
      p.has_head = true;
      break;
    case Objective::Multilabel:
      p.head = TaskHead::make(TaskHead::Kind::Multilabel, model.cfg.hidden, task.label_count, rng);
      p.has_head = true;
      break;
    case Objective::Regression:
      p.head = TaskHead::make(TaskHead::Kind::Regression, model.cfg.hidden, 1, rng);
      p.has_head = true;
      break;
    case Objective::Triplet: break;
  }
  return p;
}

enum class Stage { All, Adapters, Fusion };

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::All: return "all";
    case Stage::Adapters: return "adapters";
    case Stage::Fusion: return "fusion";
  }
  return "";
}

bool trainable_in_stage(const std::string& name, Stage stage) {
  switch (stage) {
    case Stage::All: return true;
    case Stage::Adapters:
      return name.rfind("adapter.", 0) == 0 || name.rfind("pal.", 0) == 0;
    case Stage::Fusion: return name.rfind("fusion.", 0) == 0;
  }
  return false;
}

void run_stage(EncoderModel& model, std::vector<PreppedTask>& tasks, const TrainConfig& cfg,
               Stage stage, std::uint64_t iter_salt, TrainResult& result) {
  const int share = per_task_share(cfg.batch, static_cast<int>(tasks.size()), &result.warnings);

  // Frozen tensors drop out of gradient tracking entirely, so backward stops
  // at the stage boundary instead of walking the whole trunk.
  std::vector<Tensor> trainable;
  auto params = model.parameters();
  for (auto& entry : params) {
    const bool on = trainable_in_stage(entry.name, stage);
    entry.value.set_requires_grad(on);
    if (on) trainable.push_back(entry.value);
  }
  for (auto& t : tasks) {
    if (t.has_head) {
      for (const auto& p : t.head.parameters()) trainable.push_back(p);
    }
  }

  AdamWConfig ocfg;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.eps;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW opt(trainable, ocfg);

  std::size_t largest = 0;
  for (const auto& t : tasks) largest = std::max(largest, t.samples.size());
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(
      (largest + static_cast<std::size_t>(share) - 1) / static_cast<std::size_t>(share));
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

  Rng iter_root(cfg.seed ^ iter_salt);
  std::vector<TaskIterator> iters;
  iters.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    iters.emplace_back(tasks[i].samples.size(), iter_root.fork(i));
  }

  for (std::int64_t step = 1; step <= total_steps; ++step) {
    const double lr = lr_schedule(step, cfg.peak_lr, cfg.warmup);
    Tape tape;
    std::vector<Tensor> losses;
    losses.reserve(tasks.size());
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      auto& task = tasks[ti];
      std::vector<const PreppedSample*> drawn;
      drawn.reserve(static_cast<std::size_t>(share));
      for (int i = 0; i < share; ++i) drawn.push_back(&task.samples[iters[ti].next()]);

      Tensor loss;
      if (task.objective == Objective::Triplet) {
        std::vector<std::vector<int>> qs, ps, ns;
        for (const auto* s : drawn) {
          qs.push_back(s->seq_a);
          ps.push_back(s->seq_b);
          ns.push_back(s->seq_c);
        }
        const Tensor q = encode_batch(tape, model, qs, task.format);
        const Tensor pp = encode_batch(tape, model, ps, task.format);
        const Tensor nn = encode_batch(tape, model, ns, task.format);
        loss = triplet_margin(tape, q, pp, nn, cfg.margin);
      } else {
        std::vector<std::vector<int>> seqs;
        for (const auto* s : drawn) seqs.push_back(s->seq_a);
        const Tensor emb = encode_batch(tape, model, seqs, task.format);
        const Tensor logits = task.head.logits(tape, emb);
        if (task.objective == Objective::Multiclass) {
          std::vector<int> labels;
          for (const auto* s : drawn) labels.push_back(s->label);
          loss = cross_entropy(tape, logits, labels);
        } else if (task.objective == Objective::Multilabel) {
          std::vector<double> flat;
          for (const auto* s : drawn) flat.insert(flat.end(), s->multihot.begin(), s->multihot.end());
          loss = bce_multilabel(tape, logits, flat);
        } else {
          std::vector<double> targets;
          for (const auto* s : drawn) targets.push_back(s->target);
          loss = mse(tape, logits, targets);
        }
      }
      if (!std::isfinite(loss.item())) {
        throw NumericError("training aborted: non-finite loss on task " + task.name + " at step " +
                           std::to_string(step));
      }
      result.trace.push_back({result.steps + step, task.name, loss.item(), lr});
      losses.push_back(loss);
    }
    Tensor total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = tape.add(total, losses[i]);
    total = tape.scale(total, 1.0 / static_cast<double>(losses.size()));
    tape.backward(total);
    opt.step(lr);
  }
  result.steps += total_steps;
  result.stage_hashes.push_back({stage_name(stage), param_group_hash(model, "trunk"),
                                 param_group_hash(model, "adapter"),
                                 param_group_hash(model, "pal"),
                                 param_group_hash(model, "fusion")});
}

}  // namespace

TrainResult train(EncoderModel& model, const Corpus& corpus, std::vector<TaskData>& tasks,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw ConfigError("train: no tasks");
  const Variant variant = model.cfg.variant;
  if ((variant == Variant::ADAPTER || variant == Variant::PALS || variant == Variant::FUSION) &&
      !model.has_variant_modules()) {
    throw ContractError("train: variant modules not attached");
  }

  TrainResult result;
  Rng prep_rng(cfg.seed);
  std::vector<PreppedTask> prepped;
  prepped.reserve(tasks.size());
  for (const auto& t : tasks) prepped.push_back(prep_task(model, corpus, t, cfg, prep_rng));

  switch (variant) {
    case Variant::CLS_ONLY:
    case Variant::CTRL:
    case Variant::PALS:
      run_stage(model, prepped, cfg, Stage::All, 0x57a9e01ULL, result);
      break;
    case Variant::ADAPTER:
      run_stage(model, prepped, cfg, Stage::Adapters, 0x57a9e01ULL, result);
      break;
    case Variant::FUSION:
      run_stage(model, prepped, cfg, Stage::Adapters, 0x57a9e01ULL, result);
      run_stage(model, prepped, cfg, Stage::Fusion, 0x57a9e02ULL, result);
      break;
  }

  auto params = model.parameters();
  for (auto& entry : params) entry.value.set_requires_grad(true);
  return result;
}

}  // namespace taskvec
