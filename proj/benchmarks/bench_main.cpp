#include "taskvec/encoder.hpp"
#include "taskvec/metrics.hpp"
#include "taskvec/probes.hpp"
#include "taskvec/rng.hpp"
#include "taskvec/synth.hpp"
#include "taskvec/trainer.hpp"

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

namespace {

using namespace taskvec;

EncoderConfig bench_config(Variant v) {
  EncoderConfig cfg;
  cfg.max_len = 64;
  cfg.vocab.buckets = 1024;
  cfg.variant = v;
  return cfg;
}

Document bench_doc() {
  Document d;
  d.id = "d00001";
  d.title = "sparse retrieval with learned document representations";
  d.abstract_text =
      "we study compact encoders for heterogeneous corpus tasks and compare "
      "conditioning strategies under a fixed parameter budget across formats";
  d.venue = "conf0";
  d.year = 2001;
  return d;
}

void BM_Tokenize(benchmark::State& state) {
  const auto cfg = bench_config(Variant::CTRL);
  const auto doc = bench_doc();
  for (auto _ : state) {
    benchmark::DoNotOptimize(tokenize(doc, ControlCode::CLF, cfg, true));
  }
}
BENCHMARK(BM_Tokenize);

void BM_EmbedDoc(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const auto model = EncoderModel::build_full(bench_config(variant));
  const auto doc = bench_doc();
  for (auto _ : state) {
    benchmark::DoNotOptimize(embed_doc(model, doc, TaskFormat::CLF));
  }
}
BENCHMARK(BM_EmbedDoc)
    ->Arg(static_cast<int>(Variant::CLS_ONLY))
    ->Arg(static_cast<int>(Variant::CTRL))
    ->Arg(static_cast<int>(Variant::ADAPTER))
    ->Arg(static_cast<int>(Variant::PALS))
    ->Arg(static_cast<int>(Variant::FUSION));

void BM_TrainStep(benchmark::State& state) {
  SynthCorpusConfig cc;
  cc.topics = 3;
  cc.docs_per_topic = 20;
  cc.authors = 9;
  cc.seed = 5;
  const SynthCorpus sc = generate_corpus(cc);
  TrainConfig tc = desk_profile();
  tc.batch = 8;
  tc.epochs = 1;
  tc.task_cap = 8;
  auto tasks = build_tasks(sc, tc);
  for (auto _ : state) {
    auto model = EncoderModel::build_full(bench_config(Variant::CTRL));
    auto copy = tasks;
    benchmark::DoNotOptimize(train(model, sc.corpus, copy, tc));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_RankCorpus(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  std::vector<std::pair<std::string, std::vector<double>>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(64);
    for (auto& x : v) x = rng.gaussian();
    candidates.emplace_back("d" + std::to_string(100000 + i), std::move(v));
  }
  std::vector<double> q(64);
  for (auto& x : q) x = rng.gaussian();
  const std::map<std::string, int> grades{{"d100003", 1}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(euclidean_rank("q", q, candidates, grades));
  }
}
BENCHMARK(BM_RankCorpus)->Arg(256)->Arg(1024);

void BM_ProbeFit(benchmark::State& state) {
  Rng rng(17);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(64);
    for (auto& e : v) e = rng.gaussian();
    v[static_cast<std::size_t>(i % 4)] += 3.0;
    x.push_back(std::move(v));
    y.push_back(i % 4);
  }
  ProbeConfig pc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_linear_svc(x, y, 4, pc));
  }
}
BENCHMARK(BM_ProbeFit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
