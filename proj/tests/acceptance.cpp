// Acceptance gate: every release-blocking behavior gets one pass/fail line.
// Runs the full desk-scale experiment three times with different seeds, so
// the empirical criteria see genuine training runs rather than fixtures.

#include "oracles.hpp"
#include "taskvec/gradcheck.hpp"
#include "taskvec/io.hpp"
#include "taskvec/metrics.hpp"
#include "taskvec/objectives.hpp"
#include "taskvec/optimizer.hpp"
#include "taskvec/probes.hpp"
#include "taskvec/synth.hpp"
#include "taskvec/tensor.hpp"
#include "taskvec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace taskvec;

namespace {

int g_failures = 0;

void line(int index, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", index, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ------------------------------------------------------------ 1: gradients

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckResult r = run_grad_check(100, 1e-4);
  const double secs = seconds_since(t0);
  const bool pass = r.passed() && secs < 60.0;
  std::ostringstream os;
  os << r.checks << " checks, max rel err " << r.max_rel_err << ", " << fmt(secs) << "s";
  if (!r.messages.empty()) os << "; first failure: " << r.messages.front();
  line(1, "finite-difference gradients over all primitives and losses", pass, os.str());
}

// -------------------------------------------------------------- 2: oracles

void criterion_metric_oracles() {
  Rng rng(777);
  int checked = 0;
  std::string failure;

  auto expect = [&](bool ok, const std::string& what) {
    ++checked;
    if (!ok && failure.empty()) failure = what;
  };

  for (int i = 0; i < 200; ++i) {
    // Ranking metrics on one list.
    const RankedList r = oracle::random_ranked_list(rng);
    const double oap = oracle::ap(r.grades, 1);
    const auto ap = average_precision(r);
    expect(oap == oracle::kUndefined ? !ap.has_value() : ap && close(*ap, oap), "ap");
    const double on = oracle::ndcg(r.grades);
    const auto nd = ndcg(r);
    expect(on == oracle::kUndefined ? !nd.has_value() : nd && close(*nd, on), "ndcg");
    const int k = 1 + static_cast<int>(rng.uniform_index(12));
    expect(close(precision_at_k(r, k), oracle::p_at_k(r.grades, k, 1)), "p@k");

    // Mean variants over a small query batch.
    std::vector<RankedList> lists;
    const std::size_t nl = 1 + rng.uniform_index(4);
    for (std::size_t q = 0; q < nl; ++q) lists.push_back(oracle::random_ranked_list(rng));
    double sum = 0.0;
    int scored = 0;
    for (const auto& l : lists) {
      const double a = oracle::ap(l.grades, 1);
      if (a == oracle::kUndefined) continue;
      sum += a;
      ++scored;
    }
    const MeanResult mr = mean_average_precision(lists, 1);
    expect(mr.scored == scored && mr.skipped == static_cast<int>(lists.size()) - scored &&
               (scored == 0 || close(mr.value, sum / scored)),
           "map");

    // Rank correlation with ties.
    const std::size_t n = 2 + rng.uniform_index(11);
    const auto pred = oracle::random_tied_scores(rng, n);
    const auto gold = oracle::random_tied_scores(rng, n);
    const double ot = oracle::tau_b(pred, gold);
    const auto tau = kendall_tau(pred, gold);
    expect(ot == oracle::kUndefined ? !tau.has_value() : tau && close(*tau, ot), "tau");

    // Clustering agreement.
    const auto pv = oracle::random_clustering(rng, n, "p");
    const auto gv = oracle::random_clustering(rng, n, "g");
    Clustering pc, gc;
    for (std::size_t e = 0; e < n; ++e) {
      pc["e" + std::to_string(e)] = pv[e];
      gc["e" + std::to_string(e)] = gv[e];
    }
    expect(close(b3_f1(pc, gc), oracle::b3(pv, gv)), "b3");

    // Classification scores.
    const std::size_t m = 1 + rng.uniform_index(12);
    const int kc = 2 + static_cast<int>(rng.uniform_index(4));
    std::vector<int> cp(m), cg(m), bp(m), bg(m);
    for (std::size_t e = 0; e < m; ++e) {
      cp[e] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(kc)));
      cg[e] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(kc)));
      bp[e] = static_cast<int>(rng.uniform_index(2));
      bg[e] = static_cast<int>(rng.uniform_index(2));
    }
    expect(close(f1_macro(cp, cg, kc), oracle::f1_macro(cp, cg, kc)), "macro f1");
    expect(close(f1_binary(bp, bg), oracle::f1_binary(bp, bg)), "binary f1");

    // Reviewer aggregation.
    const auto query = oracle::random_unit_free_vec(rng, 5);
    std::vector<std::vector<double>> papers;
    const std::size_t np = 1 + rng.uniform_index(8);
    for (std::size_t p = 0; p < np; ++p) papers.push_back(oracle::random_unit_free_vec(rng, 5));
    expect(close(reviewer_score(query, papers), oracle::reviewer(query, papers)), "reviewer");
  }

  std::ostringstream os;
  os << checked << " comparisons within 1e-9";
  if (!failure.empty()) os << "; first mismatch in " << failure;
  line(2, "benchmark metrics match brute-force oracles", failure.empty(), os.str());
}

// -------------------------------------------------------- 3: triplet spots

void criterion_triplet_spots() {
  auto loss_of = [](std::vector<double> q, std::vector<double> p, std::vector<double> n) {
    Tape tape(false);
    const Tensor tq = Tensor::from({1, 2}, q, false);
    const Tensor tp = Tensor::from({1, 2}, p, false);
    const Tensor tn = Tensor::from({1, 2}, n, false);
    return triplet_margin(tape, tq, tp, tn, 1.0).data()[0];
  };
  const double zero = loss_of({0, 0}, {1, 0}, {0, 2});
  const double two = loss_of({0, 0}, {0, 2}, {1, 0});
  const double one = loss_of({0, 0}, {0, 3}, {3, 0});
  const bool pass = zero == 0.0 && two == 2.0 && one == 1.0;
  std::ostringstream os;
  os << "losses " << zero << ", " << two << ", " << one << " (want 0, 2, 1 exactly)";
  line(3, "triplet hinge hits its closed-form spot values", pass, os.str());
}

// ----------------------------------------------------- 4: parameter counts

std::size_t hand_adapter(int hidden, int layers, int bottleneck) {
  const std::size_t per_layer =
      static_cast<std::size_t>(2 * hidden) +                              // layer norm
      static_cast<std::size_t>(hidden * bottleneck + bottleneck) +        // down
      static_cast<std::size_t>(bottleneck * hidden + hidden);             // up
  return static_cast<std::size_t>(layers) * per_layer;
}

std::size_t hand_pals(int hidden, int layers) {
  const int r = hidden / 4;
  const std::size_t per_layer = static_cast<std::size_t>(2 * hidden * r) +  // down and up
                                static_cast<std::size_t>(3 * r * r);        // q, k, v
  return static_cast<std::size_t>(layers) * per_layer;
}

std::size_t hand_fusion(int hidden, int layers, int bottleneck) {
  return static_cast<std::size_t>(layers) * 3u *
             static_cast<std::size_t>(hidden) * static_cast<std::size_t>(hidden) +
         hand_adapter(hidden, layers, bottleneck);
}

void criterion_param_accounting() {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };

  const TaskFormat formats[] = {TaskFormat::CLF, TaskFormat::RGN, TaskFormat::PRX,
                                TaskFormat::SRCH};
  for (const int hidden : {32, 64}) {
    for (const int layers : {1, 2, 3}) {
      for (const int bottleneck : {8, 16}) {
        EncoderConfig cfg;
        cfg.hidden = hidden;
        cfg.layers = layers;
        cfg.heads = 4;
        cfg.ffn = 2 * hidden;
        cfg.max_len = 32;
        cfg.bottleneck = bottleneck;
        cfg.vocab.buckets = 64;

        std::map<Variant, std::size_t> counts;
        for (const Variant v :
             {Variant::CLS_ONLY, Variant::CTRL, Variant::ADAPTER, Variant::PALS,
              Variant::FUSION}) {
          cfg.variant = v;
          const auto model = EncoderModel::build_full(cfg);
          std::size_t per_format = param_count(model, TaskFormat::CLF);
          for (const auto f : formats) {
            expect(param_count(model, f) == per_format, "format symmetry");
          }
          counts[v] = per_format;
        }

        expect(counts[Variant::CLS_ONLY] == 0, "cls count");
        expect(counts[Variant::CTRL] == static_cast<std::size_t>(hidden), "ctrl count");
        expect(counts[Variant::ADAPTER] == hand_adapter(hidden, layers, bottleneck),
               "adapter hand formula");
        expect(counts[Variant::ADAPTER] == adapter_param_count(cfg), "adapter closed form");
        expect(counts[Variant::PALS] == hand_pals(hidden, layers), "pals hand formula");
        expect(counts[Variant::PALS] == pals_param_count(cfg), "pals closed form");
        expect(counts[Variant::FUSION] == hand_fusion(hidden, layers, bottleneck),
               "fusion hand formula");
        expect(counts[Variant::FUSION] == fusion_param_count(cfg), "fusion closed form");

        expect(counts[Variant::FUSION] > counts[Variant::ADAPTER] &&
                   counts[Variant::FUSION] > counts[Variant::PALS] &&
                   counts[Variant::ADAPTER] > counts[Variant::CTRL] &&
                   counts[Variant::PALS] > counts[Variant::CTRL] &&
                   counts[Variant::CTRL] > counts[Variant::CLS_ONLY],
               "ordinal chain");
      }
    }
  }

  // Reference configuration spot values.
  EncoderConfig ref;
  ref.vocab.buckets = 64;
  ref.variant = Variant::ADAPTER;
  expect(adapter_param_count(ref) == 4512, "reference adapter 4512");
  expect(pals_param_count(ref) == 5632, "reference pals 5632");
  expect(fusion_param_count(ref) == 29088, "reference fusion 29088");

  line(4, "per-format parameter accounting and capacity ordering", failure.empty(),
       failure.empty() ? "12 configs, all variants" : failure);
}

// ------------------------------------------------------------- 5: batching

void criterion_batching() {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };

  expect(per_task_share(32, 4) == 8, "32/4 share");

  // A real run: four tasks, one larger than its cap, one epoch.
  Corpus corpus;
  for (int i = 0; i < 40; ++i) {
    Document d;
    d.id = "d" + std::to_string(100 + i);
    d.title = "w" + std::to_string(i % 13) + " base";
    corpus.docs.push_back(std::move(d));
  }
  corpus.rebuild_index();

  auto clf = [&](const std::string& name, int size, std::size_t cap) {
    TaskData t;
    t.spec = {name, TaskFormat::CLF, Objective::Multiclass, "", "", cap};
    t.label_count = 2;
    for (int i = 0; i < size; ++i) {
      Sample s;
      s.doc_id = corpus.docs[static_cast<std::size_t>(i % 40)].id;
      s.label = i % 2;
      t.train.push_back(std::move(s));
    }
    return t;
  };
  std::vector<TaskData> tasks{clf("big", 40, 12), clf("mid", 25, 2000), clf("small", 16, 2000),
                              clf("tiny", 10, 2000)};

  EncoderConfig ec;
  ec.hidden = 32;
  ec.layers = 1;
  ec.heads = 4;
  ec.ffn = 64;
  ec.max_len = 16;
  ec.bottleneck = 8;
  ec.variant = Variant::CTRL;
  ec.vocab.buckets = 64;
  auto model = EncoderModel::build_full(ec);

  TrainConfig tc;
  tc.batch = 32;
  tc.epochs = 1;
  tc.peak_lr = 1e-3;
  tc.warmup = 2;
  const TrainResult result = train(model, corpus, tasks, tc);

  // Capped largest task is 25, share 8: four steps, every task in each step.
  expect(result.steps == 4, "steps honor the per-task cap");
  expect(result.trace.size() == 16, "one trace row per task per step");
  std::map<std::int64_t, std::set<std::string>> per_step;
  for (const auto& row : result.trace) per_step[row.step].insert(row.task);
  for (const auto& [step, names] : per_step) {
    expect(names.size() == 4, "equal share covers all tasks each step");
  }

  // Triplet sampling cap across random pools.
  Rng rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<std::string, int>> pool;
    const std::size_t n = 2 + rng.uniform_index(9);
    for (std::size_t i = 0; i < n; ++i) {
      pool.emplace_back("c" + std::to_string(i), static_cast<int>(rng.uniform_index(4)));
    }
    const auto trips = sample_triplets("q", "", pool, 5, rng);
    expect(trips.size() <= 5, "triplet cap");
    for (const auto& s : trips) expect(s.pos_id != s.neg_id, "triplet pair validity");
  }

  // The generated benchmark obeys the cap too.
  SynthCorpusConfig cc;
  cc.topics = 3;
  cc.docs_per_topic = 14;
  cc.authors = 9;
  cc.seed = 31;
  const SynthCorpus sc = generate_corpus(cc);
  const TrainConfig desk = desk_profile();
  for (const auto& task : build_tasks(sc, desk)) {
    std::map<std::string, int> per_query;
    for (const auto& s : task.train) {
      if (s.kind != Sample::Kind::Triplet) continue;
      ++per_query[s.query_id.empty() ? s.query_text : s.query_id];
    }
    for (const auto& [q, count] : per_query) {
      expect(count <= desk.triplet_cap, "benchmark triplet cap");
    }
  }

  line(5, "heterogeneous batching shares, caps, and triplet limits", failure.empty(),
       failure.empty() ? "share 8 of 32, 4 steps, caps hold" : failure);
}

// ------------------------------------------------------------- 6: schedule

void criterion_schedule() {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };
  for (const double peak : {5e-5, 1e-3, 0.3}) {
    for (const int warmup : {1, 50, 700}) {
      expect(lr_schedule(warmup, peak, warmup) == peak, "peak hit exactly at warmup");
      expect(std::abs(lr_schedule(4 * warmup, peak, warmup) - peak / 2.0) <= 1e-12,
             "inverse-sqrt halves at 4x warmup");
    }
  }
  line(6, "warmup peaks exactly and decays by inverse square root", failure.empty(),
       failure.empty() ? "9 peak/warmup combinations" : failure);
}

// ----------------------------------------------- shared experiment fixture

struct SeedRun {
  SynthCorpus sc;
  std::vector<TaskData> tasks;
  TrainConfig tc;
  EncoderConfig ec;

  EncoderModel cls{EncoderModel::build_full(EncoderConfig{})};
  EncoderModel ctrl{EncoderModel::build_full(EncoderConfig{})};
  EncoderModel adapter{EncoderModel::build_full(EncoderConfig{})};
  std::uint64_t adapter_trunk_before = 0;
  std::uint64_t adapter_trunk_after = 0;

  BenchmarkReport rep_cls, rep_ctrl, rep_adapter, rep_ens;
  EmbeddingsByFormat emb_ctrl, emb_adapter;
  CrossFormatMatrix matrix;
  double train_ctrl_secs = 0.0;
  double matrix_secs = 0.0;
};

EncoderConfig experiment_encoder(Variant v, std::uint64_t init_seed) {
  EncoderConfig ec;
  ec.hidden = 64;
  ec.layers = 2;
  ec.heads = 4;
  ec.ffn = 256;
  ec.max_len = 64;
  ec.bottleneck = 16;
  ec.variant = v;
  ec.vocab.buckets = 1024;
  ec.init_seed = init_seed;
  return ec;
}

TrainConfig experiment_train(std::uint64_t seed) {
  TrainConfig tc = desk_profile();
  tc.batch = 32;
  tc.epochs = 2;
  tc.peak_lr = 2e-3;
  tc.warmup = 20;
  tc.seed = seed;
  return tc;
}

EncoderModel train_variant(const SeedRun& run, Variant v, double* secs_out = nullptr) {
  auto model = EncoderModel::build_full(experiment_encoder(v, run.ec.init_seed));
  auto tasks = run.tasks;
  const auto t0 = std::chrono::steady_clock::now();
  train(model, run.sc.corpus, tasks, run.tc);
  if (secs_out) *secs_out = seconds_since(t0);
  return model;
}

SeedRun build_seed_run(int seed_index) {
  SeedRun run;
  SynthCorpusConfig cc;
  cc.topics = 6;
  cc.docs_per_topic = 40;
  cc.authors = 18;
  cc.queries_per_topic = 3;
  cc.seed = 2024 + static_cast<std::uint64_t>(seed_index);
  run.sc = generate_corpus(cc);
  run.tc = experiment_train(7 + static_cast<std::uint64_t>(seed_index));
  run.ec = experiment_encoder(Variant::CTRL, 42 + static_cast<std::uint64_t>(seed_index));
  run.tasks = build_tasks(run.sc, run.tc);

  run.cls = train_variant(run, Variant::CLS_ONLY);
  run.ctrl = train_variant(run, Variant::CTRL, &run.train_ctrl_secs);

  {
    auto model = EncoderModel::build_full(experiment_encoder(Variant::ADAPTER, run.ec.init_seed));
    run.adapter_trunk_before = param_group_hash(model, "trunk");
    auto tasks = run.tasks;
    train(model, run.sc.corpus, tasks, run.tc);
    run.adapter_trunk_after = param_group_hash(model, "trunk");
    run.adapter = std::move(model);
  }

  const std::uint64_t probe_seed = 1000 + static_cast<std::uint64_t>(seed_index);
  run.rep_cls = run_benchmark(embed_for_tasks(run.cls, run.sc, run.tasks), run.tasks, probe_seed);
  run.emb_ctrl = embed_for_tasks(run.ctrl, run.sc, run.tasks);
  run.rep_ctrl = run_benchmark(run.emb_ctrl, run.tasks, probe_seed);
  run.emb_adapter = embed_for_tasks(run.adapter, run.sc, run.tasks);
  run.rep_adapter = run_benchmark(run.emb_adapter, run.tasks, probe_seed);

  EmbeddingsByFormat ens;
  for (const auto& [tag, m] : run.emb_ctrl) {
    ens.emplace(tag, ensemble_embeddings(m, run.emb_adapter.at(tag)));
  }
  run.rep_ens = run_benchmark(ens, run.tasks, probe_seed);

  const auto t0 = std::chrono::steady_clock::now();
  run.matrix = cross_format_matrix(run.ctrl, run.sc, run.tasks, probe_seed);
  run.matrix_secs = seconds_since(t0);
  return run;
}

// ------------------------------------------------------- 7: specialization

void criterion_matrix(const std::vector<SeedRun>& runs) {
  int good_seeds = 0;
  double total_secs = 0.0;
  std::ostringstream os;
  os << "diagonal best rows:";
  for (const auto& run : runs) {
    const int rows = run.matrix.diagonal_row_max_count();
    good_seeds += rows >= 3 ? 1 : 0;
    total_secs += run.train_ctrl_secs + run.matrix_secs;
    os << " " << rows << "/4";
  }
  os << "; " << fmt(total_secs) << "s for training plus matrices";
  const bool pass = good_seeds >= 2 && total_secs < 600.0;
  line(7, "control codes specialize their own format", pass, os.str());
}

// ------------------------------------------------- 8: conditioning benefit

void criterion_conditioning(const std::vector<SeedRun>& runs) {
  int good_seeds = 0;
  std::ostringstream os;
  os << "overall averages (cls/ctrl/adapter):";
  for (const auto& run : runs) {
    const double cls = run.rep_cls.overall_average();
    const double ctrl = run.rep_ctrl.overall_average();
    const double adapter = run.rep_adapter.overall_average();
    good_seeds += (ctrl >= cls && adapter >= cls) ? 1 : 0;
    os << " " << fmt(cls) << "/" << fmt(ctrl) << "/" << fmt(adapter);
  }
  const bool pass = good_seeds >= 2;
  line(8, "conditioned variants beat the unconditioned baseline", pass, os.str());
}

// ---------------------------------------------------------- 9: ensembling

void criterion_ensemble(const std::vector<SeedRun>& runs) {
  std::string failure;
  std::ostringstream os;
  os << "ensemble vs min:";
  for (const auto& run : runs) {
    const double ens = run.rep_ens.overall_average();
    const double floor = std::min(run.rep_ctrl.overall_average(),
                                  run.rep_adapter.overall_average());
    os << " " << fmt(ens) << ">=" << fmt(floor);
    if (ens < floor && failure.empty()) failure = "ensemble below the weaker member";
  }

  // The combination rule itself is exact elementwise averaging.
  const auto& a = runs.front().emb_ctrl.at("CLF");
  const auto& b = runs.front().emb_adapter.at("CLF");
  const EmbeddingMatrix e = ensemble_embeddings(a, b);
  for (const std::size_t i : {std::size_t{0}, a.ids.size() / 2, a.ids.size() - 1}) {
    for (std::size_t d = 0; d < a.dim; ++d) {
      if (e.vecs[i][d] != (a.vecs[i][d] + b.vecs[i][d]) / 2.0 && failure.empty()) {
        failure = "averaging is not exact";
      }
    }
  }

  line(9, "embedding ensembles never trail the weaker member", failure.empty(),
       failure.empty() ? os.str() : failure);
}

// ------------------------------------------------------ 10: reproducibility

void criterion_reproducibility(const SeedRun& base) {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };

  auto m1 = train_variant(base, Variant::CTRL);
  auto m2 = train_variant(base, Variant::CTRL);
  expect(params_hash(m1) == params_hash(m2), "trained weights differ");
  expect(params_hash(m1) == params_hash(base.ctrl), "weights differ from fixture run");

  namespace fs = std::filesystem;
  const fs::path dir = "tmp_acceptance";
  fs::create_directories(dir);
  const std::string p1 = (dir / "a.tvck").string();
  const std::string p2 = (dir / "b.tvck").string();
  save_checkpoint(p1, m1, base.sc.corpus.docs.front());
  save_checkpoint(p2, m2, base.sc.corpus.docs.front());
  expect(file_hash(p1) == file_hash(p2), "checkpoint files differ");
  fs::remove_all(dir);

  const std::uint64_t probe_seed = 1000;
  const BenchmarkReport r1 = run_benchmark(embed_for_tasks(m1, base.sc, base.tasks),
                                           base.tasks, probe_seed);
  const BenchmarkReport r2 = run_benchmark(embed_for_tasks(m2, base.sc, base.tasks),
                                           base.tasks, probe_seed);
  expect(r1.rows.size() == r2.rows.size(), "report row counts differ");
  double max_delta = 0.0;
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    expect(r1.rows[i].failed == r2.rows[i].failed, "failure flags differ");
    max_delta = std::max(max_delta, std::abs(r1.rows[i].value - r2.rows[i].value));
  }
  expect(max_delta <= 1e-9, "report scores drift");

  line(10, "identical configurations reproduce bit-identical runs", failure.empty(),
       failure.empty() ? "hashes equal, report delta " + fmt(max_delta) : failure);
}

// ------------------------------------------------------- 11: stage freezing

void criterion_freezing(const std::vector<SeedRun>& runs, const SeedRun& base) {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };

  for (const auto& run : runs) {
    expect(run.adapter_trunk_before == run.adapter_trunk_after,
           "adapter training moved the trunk");
  }

  auto model = EncoderModel::build_full(experiment_encoder(Variant::FUSION, 99));
  const auto trunk0 = param_group_hash(model, "trunk");
  const auto fusion0 = param_group_hash(model, "fusion");
  auto tasks = base.tasks;
  TrainConfig tc = base.tc;
  tc.epochs = 1;
  const TrainResult result = train(model, base.sc.corpus, tasks, tc);

  expect(result.stage_hashes.size() == 2, "fusion trains in two stages");
  if (result.stage_hashes.size() == 2) {
    const StageHashes& s1 = result.stage_hashes[0];
    const StageHashes& s2 = result.stage_hashes[1];
    expect(s1.stage == "adapters" && s2.stage == "fusion", "stage order");
    expect(s1.adapter == s2.adapter, "fusion stage moved the adapters");
    expect(s1.fusion == fusion0, "adapter stage moved the fusion blocks");
    expect(s2.fusion != fusion0, "fusion stage left fusion blocks untouched");
    expect(s1.trunk == trunk0 && s2.trunk == trunk0, "fusion training moved the trunk");
  }

  line(11, "staged training freezes what it promises to freeze", failure.empty(),
       failure.empty() ? "trunk and adapter hashes stable across stages" : failure);
}

// --------------------------------------------------------- 12: probe sanity

void criterion_probe_sanity() {
  std::string failure;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  };

  int tau_skips = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(9000 + static_cast<std::uint64_t>(seed));
    ProbeConfig pc;
    pc.seed = 60 + static_cast<std::uint64_t>(seed);

    // Separable classification: one clean blob per class.
    const int k = 4;
    std::vector<std::vector<double>> train_x, test_x;
    std::vector<int> train_y, test_y;
    auto blob_point = [&](int c) {
      std::vector<double> v(8, 0.0);
      for (auto& e : v) e = rng.gaussian() * 0.3;
      v[static_cast<std::size_t>(c)] += 4.0;
      return v;
    };
    for (int c = 0; c < k; ++c) {
      for (int i = 0; i < 24; ++i) {
        train_x.push_back(blob_point(c));
        train_y.push_back(c);
      }
      for (int i = 0; i < 60; ++i) {
        test_x.push_back(blob_point(c));
        test_y.push_back(c);
      }
    }
    const LinearModel svc = fit_linear_svc(train_x, train_y, k, pc);
    std::vector<int> pred;
    for (const auto& x : test_x) pred.push_back(svc.predict_class(x));
    expect(f1_macro(pred, test_y, k) == 1.0, "separable classification below 1.0");

    // Realizable regression: targets linear in the inputs, no near-ties.
    std::vector<std::vector<double>> rx, rtx;
    std::vector<double> ry, rty;
    const std::vector<double> dir = {0.6, -0.8, 0.2};
    for (int i = 0; i < 80; ++i) {
      const double t = -4.0 + 8.0 * i / 79.0;
      rx.push_back({dir[0] * t, dir[1] * t, dir[2] * t});
      ry.push_back(2.0 * t + 0.5);
    }
    for (int i = 0; i < 60; ++i) {
      const double t = -3.9 + 7.8 * (i + 0.37) / 60.0;
      rtx.push_back({dir[0] * t, dir[1] * t, dir[2] * t});
      rty.push_back(2.0 * t + 0.5);
    }
    const LinearModel svr = fit_linear_svr(rx, ry, pc);
    std::vector<double> rpred;
    for (const auto& x : rtx) rpred.push_back(svr.predict_value(x));
    const auto rtau = kendall_tau(rpred, rty);
    expect(rtau.has_value() && *rtau == 1.0, "realizable regression below tau 1.0");

    // Random labels: scores stay inside the chance band.
    std::vector<std::vector<double>> nx, ntx;
    std::vector<int> ny, nty;
    for (int i = 0; i < 120; ++i) {
      std::vector<double> v(8);
      for (auto& e : v) e = rng.gaussian();
      nx.push_back(std::move(v));
      ny.push_back(static_cast<int>(rng.uniform_index(4)));
    }
    for (int i = 0; i < 400; ++i) {
      std::vector<double> v(8);
      for (auto& e : v) e = rng.gaussian();
      ntx.push_back(std::move(v));
      nty.push_back(static_cast<int>(rng.uniform_index(4)));
    }
    const LinearModel noise_svc = fit_linear_svc(nx, ny, 4, pc);
    std::vector<int> npred;
    for (const auto& x : ntx) npred.push_back(noise_svc.predict_class(x));
    const double nf1 = f1_macro(npred, nty, 4);
    expect(std::abs(nf1 - 0.25) <= 0.1,
           "random-label macro f1 " + fmt(nf1) + " outside 0.25 +/- 0.1");

    std::vector<double> gy(nx.size()), gty(ntx.size());
    for (auto& t : gy) t = rng.gaussian();
    for (auto& t : gty) t = rng.gaussian();
    const LinearModel noise_svr = fit_linear_svr(nx, gy, pc);
    std::vector<double> gpred;
    for (const auto& x : ntx) gpred.push_back(noise_svr.predict_value(x));
    const auto gtau = kendall_tau(gpred, gty);
    if (!gtau.has_value()) {
      ++tau_skips;  // constant predictions carry no rank signal
    } else {
      expect(std::abs(*gtau) < 0.15, "random-target tau " + fmt(*gtau) + " outside the band");
    }
  }

  std::ostringstream os;
  os << "20 seeds";
  if (tau_skips > 0) os << ", " << tau_skips << " constant-prediction tau skips";
  line(12, "probes max out on plants and stay at chance on noise", failure.empty(),
       failure.empty() ? os.str() : failure);
}

}  // namespace

int main() {
  std::printf("acceptance: desk-scale end-to-end gate\n");
  const auto t0 = std::chrono::steady_clock::now();

  criterion_gradients();
  criterion_metric_oracles();
  criterion_triplet_spots();
  criterion_param_accounting();
  criterion_batching();
  criterion_schedule();

  std::printf("building the three-seed experiment fixture...\n");
  std::fflush(stdout);
  std::vector<SeedRun> runs;
  for (int i = 0; i < 3; ++i) {
    runs.push_back(build_seed_run(i));
    std::printf("  seed %d ready (%0.1fs elapsed)\n", i, seconds_since(t0));
    std::fflush(stdout);
  }

  criterion_matrix(runs);
  criterion_conditioning(runs);
  criterion_ensemble(runs);
  criterion_reproducibility(runs.front());
  criterion_freezing(runs, runs.front());
  criterion_probe_sanity();

  std::printf("acceptance finished in %0.1fs: %d of 12 criteria failed\n", seconds_since(t0),
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
