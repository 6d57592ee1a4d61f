#include "CLI11.hpp"

#include "taskvec/gradcheck.hpp"
#include "taskvec/io.hpp"
#include "taskvec/synth.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace fs = std::filesystem;
using namespace taskvec;

namespace {

/// Removes files written by a failed command so no partial artifacts remain.
struct ArtifactGuard {
  std::vector<std::string> paths;
  bool armed = true;

  void add(const std::string& p) { paths.push_back(p); }
  void disarm() { armed = false; }
  ~ArtifactGuard() {
    if (!armed) return;
    for (const auto& p : paths) {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  }
};

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ConfigMap load_config(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigMap cfg = path.empty() ? ConfigMap{} : parse_config_file(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + o + "'");
    }
    cfg[o.substr(0, eq)] = o.substr(eq + 1);
  }
  return cfg;
}

SynthCorpusConfig corpus_config_from(const ConfigMap& cfg) {
  SynthCorpusConfig c;
  c.topics = static_cast<int>(cfg_int(cfg, "corpus.topics", c.topics));
  c.docs_per_topic = static_cast<int>(cfg_int(cfg, "corpus.docs_per_topic", c.docs_per_topic));
  c.topic_vocab = static_cast<int>(cfg_int(cfg, "corpus.topic_vocab", c.topic_vocab));
  c.shared_vocab = static_cast<int>(cfg_int(cfg, "corpus.shared_vocab", c.shared_vocab));
  c.intra_cite_p = cfg_double(cfg, "corpus.intra_cite_p", c.intra_cite_p);
  c.inter_cite_p = cfg_double(cfg, "corpus.inter_cite_p", c.inter_cite_p);
  c.authors = static_cast<int>(cfg_int(cfg, "corpus.authors", c.authors));
  c.queries_per_topic =
      static_cast<int>(cfg_int(cfg, "corpus.queries_per_topic", c.queries_per_topic));
  c.seed = cfg_u64(cfg, "corpus.seed", c.seed);
  c.validate();
  return c;
}

EncoderConfig encoder_config_from(const ConfigMap& cfg) {
  EncoderConfig c;
  const std::string variant = cfg_str(cfg, "encoder.variant", "CTRL");
  const auto v = parse_variant(variant);
  if (!v) throw ConfigError("config key 'encoder.variant': unknown variant '" + variant + "'");
  c.variant = *v;
  c.hidden = static_cast<int>(cfg_int(cfg, "encoder.hidden", c.hidden));
  c.layers = static_cast<int>(cfg_int(cfg, "encoder.layers", c.layers));
  c.heads = static_cast<int>(cfg_int(cfg, "encoder.heads", c.heads));
  c.ffn = static_cast<int>(cfg_int(cfg, "encoder.ffn", c.ffn));
  c.max_len = static_cast<int>(cfg_int(cfg, "encoder.max_len", c.max_len));
  c.bottleneck = static_cast<int>(cfg_int(cfg, "encoder.bottleneck", c.bottleneck));
  c.vocab.buckets = static_cast<int>(cfg_int(cfg, "encoder.vocab_buckets", c.vocab.buckets));
  c.vocab.seed = cfg_u64(cfg, "encoder.vocab_seed", c.vocab.seed);
  c.init_seed = cfg_u64(cfg, "encoder.init_seed", c.init_seed);
  c.validate();
  return c;
}

TrainConfig train_config_from(const ConfigMap& cfg) {
  const std::string profile = cfg_str(cfg, "train.profile", "desk");
  TrainConfig c;
  if (profile == "desk") {
    c = desk_profile();
  } else if (profile == "paper") {
    c = paper_profile();
  } else {
    throw ConfigError("config key 'train.profile': expected desk or paper, got '" + profile +
                      "'");
  }
  c.batch = static_cast<int>(cfg_int(cfg, "train.batch", c.batch));
  c.epochs = static_cast<int>(cfg_int(cfg, "train.epochs", c.epochs));
  c.peak_lr = cfg_double(cfg, "train.peak_lr", c.peak_lr);
  c.warmup = static_cast<int>(cfg_int(cfg, "train.warmup", c.warmup));
  c.weight_decay = cfg_double(cfg, "train.weight_decay", c.weight_decay);
  c.margin = cfg_double(cfg, "train.margin", c.margin);
  c.triplet_cap = static_cast<int>(cfg_int(cfg, "train.triplet_cap", c.triplet_cap));
  c.task_cap = static_cast<std::size_t>(cfg_int(cfg, "train.task_cap",
                                                static_cast<long long>(c.task_cap)));
  c.seed = cfg_u64(cfg, "train.seed", c.seed);
  c.validate();
  return c;
}

RunManifest start_manifest(const std::string& command, const ConfigMap& cfg, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config = cfg;
  m.seed = seed;
  m.created = iso_now();
  return m;
}

void finish_manifest(RunManifest& m, const std::string& out_dir, ArtifactGuard& guard) {
  const std::string path = (fs::path(out_dir) / (m.command + ".manifest.json")).string();
  guard.add(path);
  save_manifest(path, m);
}

/// Embeddings for every format the tasks need, query vectors included.
EmbeddingsByFormat embed_all(const EncoderModel& model, const Corpus& corpus,
                             const std::vector<TaskData>& tasks) {
  std::set<TaskFormat> needed;
  for (const auto& t : tasks) needed.insert(t.spec.format);
  EmbeddingsByFormat out;
  for (const auto f : needed) {
    EmbeddingMatrix m = embed_corpus(model, corpus.docs, f);
    if (f == TaskFormat::SRCH) {
      for (const auto& t : tasks) {
        if (t.spec.format != TaskFormat::SRCH) continue;
        for (const auto& [qid, text] : t.query_texts) {
          m.insert(qid, embed_query(model, text, TaskFormat::SRCH));
        }
      }
    }
    out.emplace(to_string(f), std::move(m));
  }
  return out;
}

struct CommonPaths {
  std::string corpus(const std::string& data_dir) const {
    return (fs::path(data_dir) / "corpus.jsonl").string();
  }
  std::string tasks(const std::string& data_dir) const {
    return (fs::path(data_dir) / "tasks" / "tasks.json").string();
  }
} paths;

int cmd_gen_data(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& out_dir) {
  const ConfigMap cfg = load_config(config_path, overrides);
  const SynthCorpusConfig cc = corpus_config_from(cfg);
  const TrainConfig tc = train_config_from(cfg);

  fs::create_directories(out_dir);
  ArtifactGuard guard;
  RunManifest manifest = start_manifest("gen-data", cfg, cc.seed);
  if (!config_path.empty()) manifest.input_hashes[config_path] = hash_hex(file_hash(config_path));

  const SynthCorpus sc = generate_corpus(cc);
  const std::vector<TaskData> tasks = build_tasks(sc, tc);

  const std::string corpus_path = paths.corpus(out_dir);
  guard.add(corpus_path);
  save_corpus(corpus_path, sc.corpus);
  const std::string tasks_dir = (fs::path(out_dir) / "tasks").string();
  guard.add(tasks_dir);
  save_tasks(tasks_dir, tasks);

  manifest.output_hashes[corpus_path] = hash_hex(file_hash(corpus_path));
  for (const auto& entry : fs::directory_iterator(tasks_dir)) {
    if (entry.is_regular_file()) {
      manifest.output_hashes[entry.path().string()] = hash_hex(file_hash(entry.path().string()));
    }
  }
  finish_manifest(manifest, out_dir, guard);
  guard.disarm();
  std::cout << "wrote " << sc.corpus.docs.size() << " documents and " << tasks.size()
            << " tasks to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& data_dir, const std::string& out_dir) {
  const ConfigMap cfg = load_config(config_path, overrides);
  const EncoderConfig ec = encoder_config_from(cfg);
  const TrainConfig tc = train_config_from(cfg);

  const Corpus corpus = load_corpus(paths.corpus(data_dir));
  if (corpus.docs.empty()) throw ConfigError("train: corpus is empty");
  std::vector<TaskData> all_tasks = load_tasks(paths.tasks(data_dir));
  std::vector<TaskData> train_tasks;
  for (auto& t : all_tasks) {
    if (t.in_train) train_tasks.push_back(std::move(t));
  }
  if (train_tasks.empty()) throw ConfigError("train: no in-train tasks");

  fs::create_directories(out_dir);
  ArtifactGuard guard;
  RunManifest manifest = start_manifest("train", cfg, tc.seed);
  if (!config_path.empty()) manifest.input_hashes[config_path] = hash_hex(file_hash(config_path));
  manifest.input_hashes[paths.corpus(data_dir)] = hash_hex(file_hash(paths.corpus(data_dir)));
  manifest.input_hashes[paths.tasks(data_dir)] = hash_hex(file_hash(paths.tasks(data_dir)));

  EncoderModel model = EncoderModel::build_full(ec);
  const TrainResult result = train(model, corpus, train_tasks, tc);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

  const std::string ckpt = (fs::path(out_dir) / "checkpoint.tvck").string();
  guard.add(ckpt);
  save_checkpoint(ckpt, model, corpus.docs.front());
  const std::string trace = (fs::path(out_dir) / "trace.csv").string();
  guard.add(trace);
  save_trace(trace, result.trace);

  manifest.output_hashes[ckpt] = hash_hex(file_hash(ckpt));
  manifest.output_hashes[trace] = hash_hex(file_hash(trace));
  finish_manifest(manifest, out_dir, guard);
  guard.disarm();
  std::cout << "trained " << to_string(ec.variant) << " for " << result.steps << " steps; "
            << "checkpoint " << ckpt << "\n";
  return 0;
}

int cmd_embed(const std::string& checkpoint, const std::string& data_dir,
              const std::string& out_dir) {
  const EncoderModel model = load_checkpoint(checkpoint);
  const Corpus corpus = load_corpus(paths.corpus(data_dir));
  const std::vector<TaskData> tasks = load_tasks(paths.tasks(data_dir));

  fs::create_directories(out_dir);
  ArtifactGuard guard;
  RunManifest manifest = start_manifest("embed", ConfigMap{}, model.cfg.init_seed);
  manifest.input_hashes[checkpoint] = hash_hex(file_hash(checkpoint));
  manifest.input_hashes[paths.corpus(data_dir)] = hash_hex(file_hash(paths.corpus(data_dir)));

  const EmbeddingsByFormat embs = embed_all(model, corpus, tasks);
  for (const auto& [tag, matrix] : embs) {
    const std::string path = (fs::path(out_dir) / ("emb." + tag + ".tvec")).string();
    guard.add(path);
    save_embeddings(path, matrix);
    manifest.output_hashes[path] = hash_hex(file_hash(path));
    std::cout << "wrote " << matrix.count() << " " << tag << " vectors to " << path << "\n";
  }
  finish_manifest(manifest, out_dir, guard);
  guard.disarm();
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& emb_dir, const std::string& out_dir,
             std::uint64_t probe_seed) {
  const std::vector<TaskData> tasks = load_tasks(paths.tasks(data_dir));

  EmbeddingsByFormat embs;
  std::set<std::string> needed;
  for (const auto& t : tasks) needed.insert(to_string(t.spec.format));
  ArtifactGuard guard;
  RunManifest manifest = start_manifest("eval", ConfigMap{}, probe_seed);
  for (const auto& tag : needed) {
    const std::string path = (fs::path(emb_dir) / ("emb." + tag + ".tvec")).string();
    if (!fs::exists(path)) continue;  // recorded as a per-task failure below
    embs.emplace(tag, load_embeddings(path));
    manifest.input_hashes[path] = hash_hex(file_hash(path));
  }

  const BenchmarkReport report = run_benchmark(embs, tasks, probe_seed);

  fs::create_directories(out_dir);
  const std::string txt = (fs::path(out_dir) / "report.txt").string();
  const std::string csv = (fs::path(out_dir) / "report.csv").string();
  guard.add(txt);
  guard.add(csv);
  write_text_file(txt, render_report(report));
  write_text_file(csv, report_csv(report));
  manifest.output_hashes[txt] = hash_hex(file_hash(txt));
  manifest.output_hashes[csv] = hash_hex(file_hash(csv));
  finish_manifest(manifest, out_dir, guard);
  guard.disarm();
  std::cout << render_report(report);
  return 0;
}

int cmd_cross_eval(const std::string& checkpoint, const std::string& data_dir,
                   const std::string& out_dir, std::uint64_t probe_seed) {
  const EncoderModel model = load_checkpoint(checkpoint);
  SynthCorpus sc;
  sc.corpus = load_corpus(paths.corpus(data_dir));
  const std::vector<TaskData> tasks = load_tasks(paths.tasks(data_dir));
  for (const auto& t : tasks) {
    for (const auto& [qid, text] : t.query_texts) {
      SynthQuery q;
      q.id = qid;
      q.text = text;
      sc.queries.push_back(std::move(q));
    }
  }

  const CrossFormatMatrix matrix = cross_format_matrix(model, sc, tasks, probe_seed);

  fs::create_directories(out_dir);
  ArtifactGuard guard;
  RunManifest manifest = start_manifest("cross-eval", ConfigMap{}, probe_seed);
  manifest.input_hashes[checkpoint] = hash_hex(file_hash(checkpoint));
  const std::string txt = (fs::path(out_dir) / "matrix.txt").string();
  const std::string csv = (fs::path(out_dir) / "matrix.csv").string();
  guard.add(txt);
  guard.add(csv);
  write_text_file(txt, render_matrix(matrix));
  write_text_file(csv, matrix_csv(matrix));
  manifest.output_hashes[txt] = hash_hex(file_hash(txt));
  manifest.output_hashes[csv] = hash_hex(file_hash(csv));
  finish_manifest(manifest, out_dir, guard);
  guard.disarm();
  std::cout << render_matrix(matrix);
  return 0;
}

int cmd_grad_check(int seeds, double tol) {
  const GradCheckResult r = run_grad_check(seeds, tol);
  std::cout << "grad-check: " << r.checks << " checks over " << seeds
            << " seeds, max relative error " << r.max_rel_err << "\n";
  if (!r.passed()) {
    for (const auto& m : r.messages) std::cerr << "  " << m << "\n";
    std::cerr << "grad-check: " << r.failures << " failures\n";
    throw NumericError("gradient check failed");
  }
  std::cout << "grad-check: ok\n";
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

int cmd_report(const std::string& report_csv_path, const std::string& matrix_csv_path) {
  if (!report_csv_path.empty()) {
    BenchmarkReport report;
    std::istringstream in(read_text_file(report_csv_path));
    std::string line;
    bool header = true;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      const auto f = split_csv_line(line);
      if (f.size() != 7) {
        throw FormatError(report_csv_path + " line " + std::to_string(lineno) +
                          ": expected 7 fields");
      }
      TaskScore row;
      row.task = f[0];
      const auto fmt = parse_format(f[1]);
      if (!fmt) {
        throw FormatError(report_csv_path + " line " + std::to_string(lineno) +
                          ": unknown format '" + f[1] + "'");
      }
      row.format = *fmt;
      row.metric = f[2];
      try {
        row.value = std::stod(f[3]);
        row.in_train = std::stoi(f[4]) != 0;
        row.failed = std::stoi(f[5]) != 0;
      } catch (const std::exception&) {
        throw FormatError(report_csv_path + " line " + std::to_string(lineno) + ": bad number");
      }
      row.note = f[6];
      report.rows.push_back(std::move(row));
    }
    std::cout << render_report(report);
  }
  if (!matrix_csv_path.empty()) {
    CrossFormatMatrix m;
    std::istringstream in(read_text_file(matrix_csv_path));
    std::string line;
    int row = -1;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (row >= 0 && row < 4) {
        const auto f = split_csv_line(line);
        if (f.size() != 6) throw FormatError(matrix_csv_path + ": expected 6 fields per row");
        m.row_tasks[static_cast<std::size_t>(row)] = f[1];
        for (int c = 0; c < 4; ++c) {
          try {
            m.values[static_cast<std::size_t>(row)][static_cast<std::size_t>(c)] =
                std::stod(f[static_cast<std::size_t>(c + 2)]);
          } catch (const std::exception&) {
            throw FormatError(matrix_csv_path + ": bad number in row " + std::to_string(row));
          }
        }
      }
      ++row;
    }
    if (row < 4) throw FormatError(matrix_csv_path + ": expected 4 data rows");
    std::cout << render_matrix(m);
  }
  if (report_csv_path.empty() && matrix_csv_path.empty()) {
    throw ConfigError("report: nothing to render; pass --report and/or --matrix");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taskvec: format-specialized document embeddings, desk scale"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string emb_dir;
  std::string checkpoint;
  std::uint64_t probe_seed = 1;
  int seeds = 100;
  double tol = 1e-4;
  std::string report_csv_path;
  std::string matrix_csv_path;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "INI config file");
    cmd->add_option("--set", overrides, "override a config key (key=value, repeatable)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and task files");
  add_config(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI::App* tr = app.add_subcommand("train", "multi-task train an encoder variant");
  add_config(tr);
  tr->add_option("--data", data_dir, "directory produced by gen-data")->required();
  tr->add_option("--out", out_dir, "output directory")->required();

  CLI::App* em = app.add_subcommand("embed", "embed the corpus under every task format");
  em->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  em->add_option("--data", data_dir, "directory produced by gen-data")->required();
  em->add_option("--out", out_dir, "output directory")->required();

  CLI::App* ev = app.add_subcommand("eval", "score every task against embedding files");
  ev->add_option("--data", data_dir, "directory produced by gen-data")->required();
  ev->add_option("--emb", emb_dir, "directory produced by embed")->required();
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--probe-seed", probe_seed, "probe RNG seed");

  CLI::App* cx = app.add_subcommand("cross-eval", "code x format score matrix");
  cx->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  cx->add_option("--data", data_dir, "directory produced by gen-data")->required();
  cx->add_option("--out", out_dir, "output directory")->required();
  cx->add_option("--probe-seed", probe_seed, "probe RNG seed");

  CLI::App* gc = app.add_subcommand("grad-check", "finite-difference check of all primitives");
  gc->add_option("--seeds", seeds, "number of random seeds");
  gc->add_option("--tol", tol, "relative error tolerance");

  CLI::App* rp = app.add_subcommand("report", "render report/matrix CSVs as tables");
  rp->add_option("--report", report_csv_path, "report.csv path");
  rp->add_option("--matrix", matrix_csv_path, "matrix.csv path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, overrides, out_dir);
    if (tr->parsed()) return cmd_train(config_path, overrides, data_dir, out_dir);
    if (em->parsed()) return cmd_embed(checkpoint, data_dir, out_dir);
    if (ev->parsed()) return cmd_eval(data_dir, emb_dir, out_dir, probe_seed);
    if (cx->parsed()) return cmd_cross_eval(checkpoint, data_dir, out_dir, probe_seed);
    if (gc->parsed()) return cmd_grad_check(seeds, tol);
    if (rp->parsed()) return cmd_report(report_csv_path, matrix_csv_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
