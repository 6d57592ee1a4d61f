#include <doctest.h>

#include "taskvec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace taskvec;

namespace {

SynthCorpusConfig small_cfg() {
  SynthCorpusConfig cfg;
  cfg.topics = 4;
  cfg.docs_per_topic = 20;
  cfg.authors = 12;
  cfg.seed = 77;
  return cfg;
}

std::set<std::string> words_of(const std::string& text) {
  std::istringstream in(text);
  std::set<std::string> out;
  std::string w;
  while (in >> w) out.insert(w);
  return out;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

const TaskData& task_named(const std::vector<TaskData>& tasks, const std::string& name) {
  for (const auto& t : tasks) {
    if (t.spec.name == name) return t;
  }
  REQUIRE(false);
  return tasks.front();
}

EmbeddingsByFormat random_embeddings(const SynthCorpus& sc, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingsByFormat out;
  for (const std::string tag : {"CLF", "RGN", "PRX", "SRCH"}) {
    EmbeddingMatrix m;
    m.format_tag = tag;
    m.dim = 8;
    for (const auto& d : sc.corpus.docs) {
      std::vector<double> v(8);
      for (auto& x : v) x = rng.uniform(-1, 1);
      m.insert(d.id, std::move(v));
    }
    if (tag == "SRCH") {
      for (const auto& q : sc.queries) {
        std::vector<double> v(8);
        for (auto& x : v) x = rng.uniform(-1, 1);
        m.insert(q.id, std::move(v));
      }
    }
    out.emplace(tag, std::move(m));
  }
  return out;
}

}  // namespace

TEST_CASE("corpus generation is a pure function of its config") {
  const SynthCorpus a = generate_corpus(small_cfg());
  const SynthCorpus b = generate_corpus(small_cfg());
  REQUIRE(a.corpus.docs.size() == 80);
  REQUIRE(a.corpus.docs.size() == b.corpus.docs.size());
  for (std::size_t i = 0; i < a.corpus.docs.size(); ++i) {
    CHECK(a.corpus.docs[i].id == b.corpus.docs[i].id);
    CHECK(a.corpus.docs[i].title == b.corpus.docs[i].title);
    CHECK(a.corpus.docs[i].abstract_text == b.corpus.docs[i].abstract_text);
    CHECK(a.corpus.docs[i].venue == b.corpus.docs[i].venue);
    CHECK(a.corpus.docs[i].year == b.corpus.docs[i].year);
    CHECK(a.truth[i].cited == b.truth[i].cited);
  }
  REQUIRE(a.queries.size() == b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    CHECK(a.queries[i].id == b.queries[i].id);
    CHECK(a.queries[i].text == b.queries[i].text);
  }

  SynthCorpusConfig other = small_cfg();
  other.seed = 78;
  const SynthCorpus c = generate_corpus(other);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.corpus.docs.size(); ++i) {
    any_diff = any_diff || a.corpus.docs[i].title != c.corpus.docs[i].title;
  }
  CHECK(any_diff);
}

TEST_CASE("corpus config bounds are enforced") {
  SynthCorpusConfig cfg = small_cfg();
  cfg.topics = 0;
  CHECK_THROWS_AS((void)generate_corpus(cfg), ConfigError);
  cfg = small_cfg();
  cfg.title_words_max = cfg.title_words_min - 1;
  CHECK_THROWS_AS((void)generate_corpus(cfg), ConfigError);
  cfg = small_cfg();
  cfg.intra_cite_p = 1.5;
  CHECK_THROWS_AS((void)generate_corpus(cfg), ConfigError);
}

TEST_CASE("documents carry their planted structure in the text") {
  const SynthCorpus sc = generate_corpus(small_cfg());
  for (std::size_t i = 0; i < sc.corpus.docs.size(); ++i) {
    const Document& d = sc.corpus.docs[i];
    const DocTruth& t = sc.truth[i];

    // The title leads with a word from the document's own topic pool.
    const std::string first = d.title.substr(0, d.title.find(' '));
    CHECK(starts_with(first, "t" + std::to_string(t.topic) + "w"));

    const auto words = words_of(d.abstract_text);
    const int era = std::min(4, static_cast<int>(t.recency * 5.0));
    const int brd = std::min(4, static_cast<int>(t.breadth * 5.0));
    CHECK(words.count("era" + std::to_string(era)) == 1);
    CHECK(words.count("brd" + std::to_string(brd)) == 1);
    CHECK(words.count("grp" + std::to_string(t.group)) == 1);
    CHECK(words.count("mth" + std::to_string(t.method)) == 1);
    for (int f = 0; f < 4; ++f) {
      const bool present = words.count("flag" + std::to_string(f) + "on") == 1;
      CHECK(present == (t.flags[static_cast<std::size_t>(f)] == 1));
    }
    for (const auto& a : t.authors) CHECK(words.count(a) == 1);

    // The year field is the recency scalar on a 1975-2025 scale.
    REQUIRE(d.year.has_value());
    CHECK(*d.year == 1975 + static_cast<int>(std::llround(t.recency * 50.0)));
    CHECK(t.recency >= 0.0);
    CHECK(t.recency <= 1.0);
  }
}

TEST_CASE("citation counts encode the shared-method signal") {
  const SynthCorpus sc = generate_corpus(small_cfg());
  int influential = 0, casual = 0;
  for (std::size_t i = 0; i < sc.truth.size(); ++i) {
    const DocTruth& t = sc.truth[i];
    CHECK(t.cited.size() == t.cite_counts.size());
    for (const auto& [cid, count] : t.cite_counts) {
      CHECK(cid != sc.corpus.docs[i].id);
      const Document* target = sc.corpus.find(cid);
      REQUIRE(target != nullptr);
      const DocTruth& tt = sc.truth[static_cast<std::size_t>(
          target - sc.corpus.docs.data())];
      if (t.method == tt.method) {
        CHECK(count >= 4);
        ++influential;
      } else {
        CHECK(count < 4);
        ++casual;
      }
    }
  }
  CHECK(influential > 20);
  CHECK(casual > 20);
}

TEST_CASE("queries come in matched in-train and held-out halves") {
  const SynthCorpus sc = generate_corpus(small_cfg());
  const auto& cfg = sc.cfg;
  REQUIRE(sc.queries.size() ==
          static_cast<std::size_t>(cfg.topics * cfg.queries_per_topic * 2));
  int held = 0;
  for (const auto& q : sc.queries) {
    CHECK(q.held_out == starts_with(q.id, "hq"));
    held += q.held_out ? 1 : 0;
    for (const auto& w : words_of(q.text)) {
      CHECK(starts_with(w, "t" + std::to_string(q.topic) + "w"));
    }
  }
  CHECK(held * 2 == static_cast<int>(sc.queries.size()));
}

TEST_CASE("the benchmark materializes fifteen tasks over disjoint splits") {
  const SynthCorpus sc = generate_corpus(small_cfg());
  const TrainConfig tc = desk_profile();
  const auto tasks = build_tasks(sc, tc);

  const std::vector<std::string> expected = {
      "topic",  "attributes", "recency",   "breadth", "cites",
      "influential", "coauthor", "kwsearch", "groups",  "flagx",
      "extremity", "nnpaper", "disambig", "reviewers", "newsearch"};
  REQUIRE(tasks.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(tasks[i].spec.name == expected[i]);
    CHECK(tasks[i].in_train == (i < 8));
  }

  // Labeled tasks never share documents across the split.
  for (const auto& name : {"topic", "attributes", "recency", "groups"}) {
    const TaskData& t = task_named(tasks, name);
    std::set<std::string> train_ids;
    for (const auto& s : t.train) train_ids.insert(s.doc_id);
    CHECK(!t.train.empty());
    CHECK(!t.test.empty());
    for (const auto& s : t.test) CHECK(train_ids.count(s.doc_id) == 0);
  }

  // Ranking tasks keep their evaluation pools on the test side too.
  const TaskData& cites = task_named(tasks, "cites");
  std::set<std::string> cite_train_ids;
  for (const auto& s : cites.train) {
    cite_train_ids.insert(s.query_id);
    cite_train_ids.insert(s.pos_id);
    cite_train_ids.insert(s.neg_id);
  }
  CHECK(!cites.test_qrels.empty());
  for (const auto& r : cites.test_qrels) {
    CHECK(cite_train_ids.count(r.query_id) == 0);
    CHECK(cite_train_ids.count(r.candidate_id) == 0);
  }

  // Triplet caps hold per query.
  for (const auto& name : {"cites", "influential", "coauthor"}) {
    std::map<std::string, int> per_query;
    for (const auto& s : task_named(tasks, name).train) {
      CHECK(s.kind == Sample::Kind::Triplet);
      ++per_query[s.query_id];
    }
    CHECK(!per_query.empty());
    for (const auto& [q, n] : per_query) CHECK(n <= tc.triplet_cap);
  }

  // Search training pairs raw query text with graded candidates.
  const TaskData& kws = task_named(tasks, "kwsearch");
  CHECK(!kws.query_texts.empty());
  std::map<std::string, int> per_text;
  for (const auto& s : kws.train) {
    CHECK(s.query_id.empty());
    CHECK(!s.query_text.empty());
    ++per_text[s.query_text];
  }
  for (const auto& [q, n] : per_text) CHECK(n <= tc.triplet_cap);
  for (const auto& r : kws.test_qrels) CHECK(starts_with(r.query_id, "q"));

  // Held-out protocol extras: few-shot ladders, blocks, profiles.
  CHECK(task_named(tasks, "groups").kshot == std::vector<int>{5, 10, 0});
  CHECK(task_named(tasks, "flagx").kshot == std::vector<int>{16, 64, 0});

  const TaskData& dis = task_named(tasks, "disambig");
  CHECK(!dis.blocks.empty());
  bool any_tune = false, any_eval = false;
  for (const auto& [id, block] : dis.blocks) {
    any_tune = any_tune || starts_with(block, "tune");
    any_eval = any_eval || starts_with(block, "eval");
    CHECK(dis.clusters.count(id) == 1);
  }
  CHECK(any_tune);
  CHECK(any_eval);

  const TaskData& rev = task_named(tasks, "reviewers");
  CHECK(!rev.profiles.empty());
  for (const auto& [a, papers] : rev.profiles) {
    CHECK(!papers.empty());
    CHECK(papers.size() <= 10);
  }
  for (const auto& r : rev.test_qrels) CHECK(rev.profiles.count(r.candidate_id) == 1);

  const TaskData& news = task_named(tasks, "newsearch");
  CHECK(!news.test_qrels.empty());
  for (const auto& r : news.test_qrels) CHECK(starts_with(r.query_id, "hq"));

  // Same corpus, same tasks.
  const auto again = build_tasks(sc, tc);
  REQUIRE(again.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(again[i].train.size() == tasks[i].train.size());
    CHECK(again[i].test_qrels.size() == tasks[i].test_qrels.size());
  }
}

TEST_CASE("the benchmark scores any embedding table without crashing") {
  const SynthCorpus sc = generate_corpus(small_cfg());
  const auto tasks = build_tasks(sc, desk_profile());
  const auto embs = random_embeddings(sc, 5);

  const BenchmarkReport report = run_benchmark(embs, tasks, 99);
  REQUIRE(report.rows.size() == tasks.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const TaskScore& row = report.rows[i];
    CHECK(row.task == tasks[i].spec.name);
    CHECK(row.in_train == tasks[i].in_train);
    if (row.failed) {
      CHECK(!row.note.empty());
    } else {
      CHECK(row.value >= -100.0);
      CHECK(row.value <= 100.0);
    }
  }

  // Identical inputs give identical reports.
  const BenchmarkReport again = run_benchmark(embs, tasks, 99);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(again.rows[i].value == report.rows[i].value);
    CHECK(again.rows[i].failed == report.rows[i].failed);
  }

  // A missing format fails its tasks but the run continues.
  EmbeddingsByFormat only_clf;
  only_clf.emplace("CLF", embs.at("CLF"));
  const BenchmarkReport partial = run_benchmark(only_clf, tasks, 99);
  for (std::size_t i = 0; i < partial.rows.size(); ++i) {
    if (tasks[i].spec.format == TaskFormat::CLF) continue;
    CHECK(partial.rows[i].failed);
    CHECK(partial.rows[i].note.find("missing") != std::string::npos);
  }
}

TEST_CASE("the cross-format matrix samples one in-train task per format") {
  SynthCorpusConfig cc = small_cfg();
  cc.docs_per_topic = 10;
  const SynthCorpus sc = generate_corpus(cc);
  const auto tasks = build_tasks(sc, desk_profile());

  EncoderConfig ec;
  ec.hidden = 32;
  ec.layers = 1;
  ec.heads = 4;
  ec.ffn = 64;
  ec.max_len = 32;
  ec.bottleneck = 8;
  ec.variant = Variant::CTRL;
  ec.vocab.buckets = 256;
  const auto model = EncoderModel::build_full(ec);

  const CrossFormatMatrix m = cross_format_matrix(model, sc, tasks, 3);
  CHECK(m.row_tasks[0] == "topic");
  CHECK(m.row_tasks[1] == "recency");
  CHECK(m.row_tasks[2] == "cites");
  CHECK(m.row_tasks[3] == "kwsearch");
  for (const auto& row : m.values) {
    for (const double v : row) {
      CHECK(std::isfinite(v));
      CHECK(v <= 100.0);
    }
  }

  // Without an in-train task for some format the matrix is undefined.
  std::vector<TaskData> no_clf;
  for (const auto& t : tasks) {
    if (t.spec.format != TaskFormat::CLF || !t.in_train) no_clf.push_back(t);
  }
  CHECK_THROWS_AS((void)cross_format_matrix(model, sc, no_clf, 3), ConfigError);
}
