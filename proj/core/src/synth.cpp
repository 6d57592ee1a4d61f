#include "taskvec/synth.hpp"

#include "taskvec/metrics.hpp"
#include "taskvec/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace taskvec {

void SynthCorpusConfig::validate() const {
  if (topics < 1) throw ConfigError("synth: topics must be >= 1");
  if (docs_per_topic < 1) throw ConfigError("synth: docs_per_topic must be >= 1");
  if (topic_vocab < 1 || shared_vocab < 1) throw ConfigError("synth: vocab pools must be >= 1");
  if (title_words_min < 1 || title_words_max < title_words_min) {
    throw ConfigError("synth: bad title word range");
  }
  if (abstract_words_min < 1 || abstract_words_max < abstract_words_min) {
    throw ConfigError("synth: bad abstract word range");
  }
  if (intra_cite_p < 0.0 || intra_cite_p > 1.0 || inter_cite_p < 0.0 || inter_cite_p > 1.0) {
    throw ConfigError("synth: citation probabilities must be in [0,1]");
  }
  if (authors < 1) throw ConfigError("synth: authors must be >= 1");
  if (queries_per_topic < 1) throw ConfigError("synth: queries_per_topic must be >= 1");
}

namespace {

std::string doc_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%05d", i);
  return buf;
}

std::string topic_word(int t, int i) {
  return "t" + std::to_string(t) + "w" + std::to_string(i);
}

std::string shared_word(int i) { return "c" + std::to_string(i); }

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

int circular_distance(int a, int b, int k) {
  const int d = std::abs(a - b);
  return std::min(d, k - d);
}

}  // namespace

SynthCorpus generate_corpus(const SynthCorpusConfig& cfg) {
  cfg.validate();
  SynthCorpus sc;
  sc.cfg = cfg;
  Rng master(cfg.seed);
  Rng doc_rng = master.fork(1);
  Rng cite_rng = master.fork(2);
  Rng query_rng = master.fork(3);

  const int total = cfg.topics * cfg.docs_per_topic;
  const int authors_per_topic = std::max(1, cfg.authors / cfg.topics);
  sc.corpus.docs.reserve(static_cast<std::size_t>(total));
  sc.truth.reserve(static_cast<std::size_t>(total));

  for (int t = 0; t < cfg.topics; ++t) {
    for (int j = 0; j < cfg.docs_per_topic; ++j) {
      Document doc;
      DocTruth truth;
      doc.id = doc_name(t * cfg.docs_per_topic + j);
      truth.topic = t;
      truth.group = static_cast<int>(doc_rng.uniform_index(4));
      truth.method = static_cast<int>(doc_rng.uniform_index(3));
      truth.flags.resize(4);
      for (auto& f : truth.flags) f = doc_rng.bernoulli(0.5) ? 1 : 0;
      truth.recency = doc_rng.uniform();
      truth.breadth = doc_rng.uniform();

      auto topic_pick = [&]() {
        return topic_word(t, static_cast<int>(doc_rng.uniform_index(
                                 static_cast<std::size_t>(cfg.topic_vocab))));
      };
      auto shared_pick = [&]() {
        return shared_word(static_cast<int>(doc_rng.uniform_index(
            static_cast<std::size_t>(cfg.shared_vocab))));
      };

      const int n_title = cfg.title_words_min +
                          static_cast<int>(doc_rng.uniform_index(static_cast<std::size_t>(
                              cfg.title_words_max - cfg.title_words_min + 1)));
      std::vector<std::string> title;
      title.push_back(topic_pick());
      for (int w = 1; w < n_title; ++w) {
        title.push_back(doc_rng.bernoulli(0.8) ? topic_pick() : shared_pick());
      }

      const int n_abs = cfg.abstract_words_min +
                        static_cast<int>(doc_rng.uniform_index(static_cast<std::size_t>(
                            cfg.abstract_words_max - cfg.abstract_words_min + 1)));
      std::vector<std::string> words;
      for (int w = 0; w < n_abs; ++w) {
        words.push_back(doc_rng.bernoulli(truth.breadth) ? shared_pick() : topic_pick());
      }
      const int era = std::min(4, static_cast<int>(truth.recency * 5.0));
      const int brd = std::min(4, static_cast<int>(truth.breadth * 5.0));
      for (int rep = 0; rep < 2; ++rep) {
        words.push_back("era" + std::to_string(era));
        words.push_back("brd" + std::to_string(brd));
        words.push_back("grp" + std::to_string(truth.group));
        words.push_back("mth" + std::to_string(truth.method));
        for (int f = 0; f < 4; ++f) {
          if (truth.flags[static_cast<std::size_t>(f)]) {
            words.push_back("flag" + std::to_string(f) + "on");
          }
        }
      }

      const int n_auth = doc_rng.bernoulli(0.4) ? 2 : 1;
      for (int a = 0; a < n_auth; ++a) {
        const int pool = std::max(cfg.authors, cfg.topics * authors_per_topic);
        const int an =
            doc_rng.bernoulli(0.8)
                ? t * authors_per_topic +
                      static_cast<int>(doc_rng.uniform_index(
                          static_cast<std::size_t>(authors_per_topic)))
                : static_cast<int>(doc_rng.uniform_index(static_cast<std::size_t>(pool)));
        truth.authors.push_back("a" + std::to_string(an));
      }
      std::sort(truth.authors.begin(), truth.authors.end());
      truth.authors.erase(std::unique(truth.authors.begin(), truth.authors.end()),
                          truth.authors.end());
      for (const auto& a : truth.authors) words.push_back(a);
      doc_rng.shuffle(words);

      doc.title = join_words(title);
      doc.abstract_text = join_words(words);
      doc.venue = "conf" + std::to_string((t * 2 + static_cast<int>(doc_rng.uniform_index(3))) % 7);
      doc.year = 1975 + static_cast<int>(std::llround(truth.recency * 50.0));
      sc.corpus.docs.push_back(std::move(doc));
      sc.truth.push_back(std::move(truth));
    }
  }
  sc.corpus.rebuild_index();

  for (int i = 0; i < total; ++i) {
    auto& ti = sc.truth[static_cast<std::size_t>(i)];
    for (int j = 0; j < total; ++j) {
      if (i == j) continue;
      const auto& tj = sc.truth[static_cast<std::size_t>(j)];
      const double p = ti.topic == tj.topic ? cfg.intra_cite_p : cfg.inter_cite_p;
      if (p <= 0.0 || !cite_rng.bernoulli(p)) continue;
      const int count = ti.method == tj.method
                            ? 4 + static_cast<int>(cite_rng.uniform_index(3))
                            : 1 + static_cast<int>(cite_rng.uniform_index(3));
      const std::string& cited_id = sc.corpus.docs[static_cast<std::size_t>(j)].id;
      ti.cited.push_back(cited_id);
      ti.cite_counts[cited_id] = count;
    }
  }

  for (int t = 0; t < cfg.topics; ++t) {
    for (int q = 0; q < cfg.queries_per_topic * 2; ++q) {
      SynthQuery sq;
      sq.topic = t;
      sq.held_out = q >= cfg.queries_per_topic;
      sq.id = std::string(sq.held_out ? "hq" : "q") + std::to_string(t) + "n" +
              std::to_string(q % cfg.queries_per_topic);
      std::vector<std::string> words;
      for (int w = 0; w < 3; ++w) {
        words.push_back(topic_word(t, static_cast<int>(query_rng.uniform_index(
                                          static_cast<std::size_t>(cfg.topic_vocab)))));
      }
      sq.text = join_words(words);
      sc.queries.push_back(std::move(sq));
    }
  }
  return sc;
}

namespace {

Sample label_sample(const std::string& id, int label) {
  Sample s;
  s.kind = Sample::Kind::Label;
  s.doc_id = id;
  s.label = label;
  return s;
}

Sample multilabel_sample(const std::string& id, const std::vector<int>& active) {
  Sample s;
  s.kind = Sample::Kind::Label;
  s.doc_id = id;
  s.labels = active;
  return s;
}

Sample target_sample(const std::string& id, double target) {
  Sample s;
  s.kind = Sample::Kind::Label;
  s.doc_id = id;
  s.target = target;
  return s;
}

TaskSpec make_spec(const std::string& name, TaskFormat f, Objective o, const std::string& metric) {
  TaskSpec spec;
  spec.name = name;
  spec.format = f;
  spec.objective = o;
  spec.metric = metric;
  return spec;
}

/// Up to k distinct ids drawn from `pool` (indices into docs), skipping any
/// id in `exclude`.
std::vector<std::string> draw_ids(const std::vector<std::size_t>& pool,
                                  const std::vector<Document>& docs, int k,
                                  const std::set<std::string>& exclude, Rng& rng) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  const int attempts = 20 * k + 20;
  for (int a = 0; a < attempts && static_cast<int>(out.size()) < k; ++a) {
    if (pool.empty()) break;
    const std::string& id = docs[pool[rng.uniform_index(pool.size())]].id;
    if (exclude.count(id) || seen.count(id)) continue;
    seen.insert(id);
    out.push_back(id);
  }
  return out;
}

struct SplitView {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::unordered_set<std::string> train_ids;
  std::unordered_set<std::string> test_ids;
  std::vector<std::vector<std::size_t>> topic_train;  // per topic
  std::vector<std::vector<std::size_t>> topic_test;
};

SplitView make_split(const SynthCorpus& sc, Rng& rng) {
  const std::size_t n = sc.corpus.docs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t n_test = std::min(n > 1 ? n - 1 : n, std::max<std::size_t>(1, n / 4));
  SplitView sv;
  sv.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  sv.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(sv.test.begin(), sv.test.end());
  std::sort(sv.train.begin(), sv.train.end());
  sv.topic_train.resize(static_cast<std::size_t>(sc.cfg.topics));
  sv.topic_test.resize(static_cast<std::size_t>(sc.cfg.topics));
  for (const auto i : sv.train) {
    sv.train_ids.insert(sc.corpus.docs[i].id);
    sv.topic_train[static_cast<std::size_t>(sc.truth[i].topic)].push_back(i);
  }
  for (const auto i : sv.test) {
    sv.test_ids.insert(sc.corpus.docs[i].id);
    sv.topic_test[static_cast<std::size_t>(sc.truth[i].topic)].push_back(i);
  }
  return sv;
}

/// Graded pool for one keyword query: same topic 2, adjacent topic 1,
/// other topics 0.
std::vector<std::pair<std::string, int>> query_pool(const SynthCorpus& sc, int topic,
                                                    const std::vector<std::vector<std::size_t>>& by_topic,
                                                    Rng& rng) {
  const int k = sc.cfg.topics;
  std::vector<std::pair<std::string, int>> scored;
  std::set<std::string> none;
  auto add_from_topics = [&](int dist_lo, int dist_hi, int count, int grade) {
    std::vector<std::size_t> pool;
    for (int t = 0; t < k; ++t) {
      const int d = circular_distance(topic, t, k);
      if (d >= dist_lo && d <= dist_hi) {
        pool.insert(pool.end(), by_topic[static_cast<std::size_t>(t)].begin(),
                    by_topic[static_cast<std::size_t>(t)].end());
      }
    }
    std::set<std::string> exclude;
    for (const auto& [id, g] : scored) exclude.insert(id);
    for (auto& id : draw_ids(pool, sc.corpus.docs, count, exclude, rng)) {
      scored.emplace_back(std::move(id), grade);
    }
  };
  add_from_topics(0, 0, 3, 2);
  add_from_topics(1, 1, 3, 1);
  add_from_topics(2, k, 4, 0);
  return scored;
}

}  // namespace

std::vector<TaskData> build_tasks(const SynthCorpus& sc, const TrainConfig& tc) {
  const auto& docs = sc.corpus.docs;
  const auto& truth = sc.truth;
  Rng master(sc.cfg.seed ^ 0xb17a5c0ffee1ULL);
  Rng split_rng = master.fork(100);
  const SplitView sv = make_split(sc, split_rng);

  std::vector<TaskData> tasks;

  {
    TaskData td;
    td.spec = make_spec("topic", TaskFormat::CLF, Objective::Multiclass, "macro_f1");
    td.label_count = sc.cfg.topics;
    for (const auto i : sv.train) td.train.push_back(label_sample(docs[i].id, truth[i].topic));
    for (const auto i : sv.test) td.test.push_back(label_sample(docs[i].id, truth[i].topic));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("attributes", TaskFormat::CLF, Objective::Multilabel, "macro_f1");
    td.label_count = 3;
    auto active = [&](std::size_t i) {
      std::vector<int> on;
      for (int f = 0; f < 3; ++f) {
        if (truth[i].flags[static_cast<std::size_t>(f)]) on.push_back(f);
      }
      return on;
    };
    for (const auto i : sv.train) td.train.push_back(multilabel_sample(docs[i].id, active(i)));
    for (const auto i : sv.test) td.test.push_back(multilabel_sample(docs[i].id, active(i)));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("recency", TaskFormat::RGN, Objective::Regression, "tau");
    for (const auto i : sv.train) td.train.push_back(target_sample(docs[i].id, truth[i].recency));
    for (const auto i : sv.test) td.test.push_back(target_sample(docs[i].id, truth[i].recency));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("breadth", TaskFormat::RGN, Objective::Regression, "tau");
    for (const auto i : sv.train) td.train.push_back(target_sample(docs[i].id, truth[i].breadth));
    for (const auto i : sv.test) td.test.push_back(target_sample(docs[i].id, truth[i].breadth));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("cites", TaskFormat::PRX, Objective::Triplet, "map");
    Rng rng = master.fork(5);
    for (const auto i : sv.train) {
      std::vector<std::pair<std::string, int>> scored;
      std::set<std::string> exclude{docs[i].id};
      for (const auto& c : truth[i].cited) {
        exclude.insert(c);
        if (sv.train_ids.count(c)) scored.emplace_back(c, 1);
      }
      if (scored.empty()) continue;
      if (scored.size() > 5) scored.resize(5);
      for (auto& id : draw_ids(sv.train, docs, 4, exclude, rng)) {
        scored.emplace_back(std::move(id), 0);
      }
      auto trips = sample_triplets(docs[i].id, "", scored, tc.triplet_cap, rng);
      td.train.insert(td.train.end(), trips.begin(), trips.end());
    }
    int made = 0;
    for (const auto i : sv.test) {
      if (made >= 50) break;
      std::vector<std::string> pos;
      std::set<std::string> exclude{docs[i].id};
      for (const auto& c : truth[i].cited) {
        exclude.insert(c);
        if (sv.test_ids.count(c) && pos.size() < 5) pos.push_back(c);
      }
      if (pos.empty()) continue;
      const auto negs =
          draw_ids(sv.test, docs, 2 * static_cast<int>(pos.size()) + 4, exclude, rng);
      if (negs.empty()) continue;
      for (const auto& p : pos) td.test_qrels.push_back({docs[i].id, p, 1});
      for (const auto& g : negs) td.test_qrels.push_back({docs[i].id, g, 0});
      ++made;
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("influential", TaskFormat::PRX, Objective::Triplet, "map");
    Rng rng = master.fork(6);
    for (const auto i : sv.train) {
      std::vector<std::pair<std::string, int>> scored;
      std::set<std::string> exclude{docs[i].id};
      for (const auto& c : truth[i].cited) {
        exclude.insert(c);
        if (!sv.train_ids.count(c)) continue;
        scored.emplace_back(c, truth[i].cite_counts.at(c) >= 4 ? 1 : 0);
      }
      const bool has_pos = std::any_of(scored.begin(), scored.end(),
                                       [](const auto& p) { return p.second == 1; });
      if (!has_pos) continue;
      if (scored.size() > 8) scored.resize(8);
      for (auto& id : draw_ids(sv.train, docs, 2, exclude, rng)) {
        scored.emplace_back(std::move(id), 0);
      }
      auto trips = sample_triplets(docs[i].id, "", scored, tc.triplet_cap, rng);
      td.train.insert(td.train.end(), trips.begin(), trips.end());
    }
    int made = 0;
    for (const auto i : sv.test) {
      if (made >= 50) break;
      std::vector<std::string> pos;
      std::vector<std::string> neg;
      std::set<std::string> exclude{docs[i].id};
      for (const auto& c : truth[i].cited) {
        exclude.insert(c);
        if (!sv.test_ids.count(c)) continue;
        if (truth[i].cite_counts.at(c) >= 4) {
          if (pos.size() < 5) pos.push_back(c);
        } else if (neg.size() < 8) {
          neg.push_back(c);
        }
      }
      if (pos.empty() || neg.empty()) continue;
      for (auto& id : draw_ids(sv.test, docs, 3, exclude, rng)) neg.push_back(std::move(id));
      for (const auto& p : pos) td.test_qrels.push_back({docs[i].id, p, 1});
      for (const auto& g : neg) td.test_qrels.push_back({docs[i].id, g, 0});
      ++made;
    }
    tasks.push_back(std::move(td));
  }

  std::map<std::string, std::vector<std::size_t>> by_author;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (const auto& a : truth[i].authors) by_author[a].push_back(i);
  }

  {
    TaskData td;
    td.spec = make_spec("coauthor", TaskFormat::PRX, Objective::Triplet, "map");
    Rng rng = master.fork(7);
    auto shared_author_docs = [&](std::size_t i, const std::unordered_set<std::string>& side) {
      std::vector<std::string> out;
      std::set<std::string> seen;
      for (const auto& a : truth[i].authors) {
        for (const auto j : by_author[a]) {
          if (j == i) continue;
          const std::string& id = docs[j].id;
          if (side.count(id) && !seen.count(id)) {
            seen.insert(id);
            out.push_back(id);
          }
        }
      }
      std::sort(out.begin(), out.end());
      return out;
    };
    for (const auto i : sv.train) {
      auto pos = shared_author_docs(i, sv.train_ids);
      if (pos.empty()) continue;
      if (pos.size() > 4) pos.resize(4);
      std::set<std::string> exclude{docs[i].id};
      std::vector<std::pair<std::string, int>> scored;
      for (const auto& p : shared_author_docs(i, sv.train_ids)) exclude.insert(p);
      for (const auto& p : pos) scored.emplace_back(p, 1);
      for (auto& id : draw_ids(sv.train, docs, 4, exclude, rng)) {
        scored.emplace_back(std::move(id), 0);
      }
      auto trips = sample_triplets(docs[i].id, "", scored, tc.triplet_cap, rng);
      td.train.insert(td.train.end(), trips.begin(), trips.end());
    }
    int made = 0;
    for (const auto i : sv.test) {
      if (made >= 50) break;
      auto pos = shared_author_docs(i, sv.test_ids);
      if (pos.empty()) continue;
      if (pos.size() > 4) pos.resize(4);
      std::set<std::string> exclude{docs[i].id};
      for (const auto& p : shared_author_docs(i, sv.test_ids)) exclude.insert(p);
      const auto negs = draw_ids(sv.test, docs, 2 * static_cast<int>(pos.size()) + 4, exclude, rng);
      if (negs.empty()) continue;
      for (const auto& p : pos) td.test_qrels.push_back({docs[i].id, p, 1});
      for (const auto& g : negs) td.test_qrels.push_back({docs[i].id, g, 0});
      ++made;
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("kwsearch", TaskFormat::SRCH, Objective::Triplet, "ndcg");
    Rng rng = master.fork(8);
    for (const auto& q : sc.queries) {
      if (q.held_out) continue;
      td.query_texts[q.id] = q.text;
      const auto train_scored = query_pool(sc, q.topic, sv.topic_train, rng);
      auto trips = sample_triplets("", q.text, train_scored, tc.triplet_cap, rng);
      td.train.insert(td.train.end(), trips.begin(), trips.end());
      for (const auto& [id, grade] : query_pool(sc, q.topic, sv.topic_test, rng)) {
        td.test_qrels.push_back({q.id, id, grade});
      }
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("groups", TaskFormat::CLF, Objective::Multiclass, "macro_f1");
    td.in_train = false;
    td.label_count = 4;
    td.kshot = {5, 10, 0};
    for (const auto i : sv.train) td.train.push_back(label_sample(docs[i].id, truth[i].group));
    for (const auto i : sv.test) td.test.push_back(label_sample(docs[i].id, truth[i].group));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("flagx", TaskFormat::CLF, Objective::Multiclass, "binary_f1");
    td.in_train = false;
    td.label_count = 2;
    td.kshot = {16, 64, 0};
    for (const auto i : sv.train) td.train.push_back(label_sample(docs[i].id, truth[i].flags[3]));
    for (const auto i : sv.test) td.test.push_back(label_sample(docs[i].id, truth[i].flags[3]));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("extremity", TaskFormat::RGN, Objective::Regression, "tau");
    td.in_train = false;
    auto target = [&](std::size_t i) { return std::fabs(2.0 * truth[i].recency - 1.0); };
    for (const auto i : sv.train) td.train.push_back(target_sample(docs[i].id, target(i)));
    for (const auto i : sv.test) td.test.push_back(target_sample(docs[i].id, target(i)));
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("nnpaper", TaskFormat::PRX, Objective::Triplet, "map");
    td.in_train = false;
    Rng rng = master.fork(12);
    int made = 0;
    for (const auto i : sv.test) {
      if (made >= 40) break;
      const auto t = static_cast<std::size_t>(truth[i].topic);
      if (sv.topic_test[t].size() < 4) continue;
      std::set<std::string> exclude{docs[i].id};
      const auto pos = draw_ids(sv.topic_test[t], docs, 3, exclude, rng);
      if (pos.empty()) continue;
      std::vector<std::size_t> others;
      for (const auto j : sv.test) {
        if (truth[j].topic != truth[i].topic) others.push_back(j);
      }
      for (const auto& p : pos) exclude.insert(p);
      const auto negs = draw_ids(others, docs, 6, exclude, rng);
      if (negs.empty()) continue;
      for (const auto& p : pos) td.test_qrels.push_back({docs[i].id, p, 1});
      for (const auto& g : negs) td.test_qrels.push_back({docs[i].id, g, 0});
      ++made;
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("disambig", TaskFormat::PRX, Objective::Triplet, "b3_f1");
    td.in_train = false;
    std::vector<std::string> eligible;
    for (const auto& [a, members] : by_author) {
      std::size_t owned = 0;
      for (const auto j : members) {
        if (truth[j].authors.front() == a) ++owned;
      }
      if (owned >= 2) eligible.push_back(a);
    }
    const int blocks = std::max(2, static_cast<int>(eligible.size()) / 4);
    const int tune_blocks = std::max(1, blocks / 3);
    for (std::size_t ai = 0; ai < eligible.size(); ++ai) {
      const int b = static_cast<int>(ai) % blocks;
      const std::string block_name =
          (b < tune_blocks ? "tune" : "eval") + std::to_string(b);
      for (const auto j : by_author[eligible[ai]]) {
        if (truth[j].authors.front() != eligible[ai]) continue;
        td.blocks[docs[j].id] = block_name;
        td.clusters[docs[j].id] = eligible[ai];
      }
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("reviewers", TaskFormat::PRX, Objective::Triplet, "reviewer");
    td.in_train = false;
    Rng rng = master.fork(14);
    std::map<std::string, int> reviewer_topic;
    for (const auto& [a, members] : by_author) {
      if (members.size() < 3) continue;
      std::vector<int> counts(static_cast<std::size_t>(sc.cfg.topics), 0);
      std::vector<std::string> papers;
      for (const auto j : members) {
        ++counts[static_cast<std::size_t>(truth[j].topic)];
        if (papers.size() < 10) papers.push_back(docs[j].id);
      }
      const int dominant = static_cast<int>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      td.profiles[a] = papers;
      reviewer_topic[a] = dominant;
    }
    if (!td.profiles.empty()) {
      int made = 0;
      for (const auto i : sv.test) {
        if (made >= 12) break;
        if (rng.uniform() > 0.5) continue;
        bool any = false;
        for (const auto& [a, dom] : reviewer_topic) {
          if (std::find(truth[i].authors.begin(), truth[i].authors.end(), a) !=
              truth[i].authors.end()) {
            continue;
          }
          const int d = circular_distance(truth[i].topic, dom, sc.cfg.topics);
          const int grade = d == 0 ? 3 : d == 1 ? 2 : d == 2 ? 1 : 0;
          td.test_qrels.push_back({docs[i].id, a, grade});
          any = true;
        }
        if (any) ++made;
      }
    }
    tasks.push_back(std::move(td));
  }

  {
    TaskData td;
    td.spec = make_spec("newsearch", TaskFormat::SRCH, Objective::Triplet, "ndcg");
    td.in_train = false;
    Rng rng = master.fork(15);
    for (const auto& q : sc.queries) {
      if (!q.held_out) continue;
      td.query_texts[q.id] = q.text;
      for (const auto& [id, grade] : query_pool(sc, q.topic, sv.topic_test, rng)) {
        td.test_qrels.push_back({q.id, id, grade});
      }
    }
    tasks.push_back(std::move(td));
  }

  return tasks;
}

EmbeddingsByFormat embed_for_tasks(const EncoderModel& model, const SynthCorpus& sc,
                                   const std::vector<TaskData>& tasks) {
  std::set<TaskFormat> needed;
  for (const auto& t : tasks) needed.insert(t.spec.format);
  EmbeddingsByFormat out;
  for (const auto f : needed) {
    EmbeddingMatrix m = embed_corpus(model, sc.corpus.docs, f);
    if (f == TaskFormat::SRCH) {
      for (const auto& q : sc.queries) {
        m.insert(q.id, embed_query(model, q.text, TaskFormat::SRCH));
      }
    }
    out.emplace(to_string(f), std::move(m));
  }
  return out;
}

namespace {

const std::vector<double>& vec_or_throw(const EmbeddingMatrix& emb, const std::string& id) {
  const auto* v = emb.find(id);
  if (!v) throw FormatError("missing embedding for '" + id + "'");
  return *v;
}

struct ProbeSets {
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y, test_y;
  std::vector<std::vector<int>> train_ml, test_ml;
  std::vector<double> train_t, test_t;
};

ProbeSets gather_probe_sets(const TaskData& task, const EmbeddingMatrix& emb) {
  ProbeSets ps;
  auto fill = [&](const std::vector<Sample>& side, std::vector<std::vector<double>>& x,
                  std::vector<int>& y, std::vector<std::vector<int>>& ml,
                  std::vector<double>& t) {
    for (const auto& s : side) {
      x.push_back(vec_or_throw(emb, s.doc_id));
      y.push_back(s.label);
      t.push_back(s.target);
      std::vector<int> row(static_cast<std::size_t>(std::max(task.label_count, 1)), 0);
      for (const int li : s.labels) row[static_cast<std::size_t>(li)] = 1;
      ml.push_back(std::move(row));
    }
  };
  fill(task.train, ps.train_x, ps.train_y, ps.train_ml, ps.train_t);
  fill(task.test, ps.test_x, ps.test_y, ps.test_ml, ps.test_t);
  return ps;
}

/// Qrels grouped by query, insertion order preserved within a query.
std::map<std::string, std::vector<QrelRow>> group_qrels(const std::vector<QrelRow>& qrels) {
  std::map<std::string, std::vector<QrelRow>> by_query;
  for (const auto& r : qrels) by_query[r.query_id].push_back(r);
  return by_query;
}

std::vector<RankedList> rank_queries(const TaskData& task, const EmbeddingMatrix& emb,
                                     int* missing_queries) {
  std::vector<RankedList> lists;
  for (const auto& [qid, rows] : group_qrels(task.test_qrels)) {
    const auto* qv = emb.find(qid);
    if (!qv) {
      if (missing_queries) ++(*missing_queries);
      continue;
    }
    std::vector<std::pair<std::string, std::vector<double>>> cands;
    std::map<std::string, int> grades;
    for (const auto& r : rows) {
      cands.emplace_back(r.candidate_id, vec_or_throw(emb, r.candidate_id));
      grades[r.candidate_id] = r.grade;
    }
    lists.push_back(euclidean_rank(qid, *qv, cands, grades));
  }
  return lists;
}

std::string mean_note(const MeanResult& mr) {
  std::ostringstream os;
  os << "queries scored " << mr.scored << ", skipped " << mr.skipped;
  return os.str();
}

double clustering_score(const TaskData& task, const EmbeddingMatrix& emb, bool tune_side,
                        double threshold) {
  std::map<std::string, std::vector<std::pair<std::string, std::vector<double>>>> block_items;
  for (const auto& [id, block] : task.blocks) {
    const bool is_tune = block.rfind("tune", 0) == 0;
    if (is_tune != tune_side) continue;
    block_items[block].emplace_back(id, vec_or_throw(emb, id));
  }
  if (block_items.empty()) throw FormatError("clustering: no blocks on the requested side");
  Clustering pred;
  Clustering gold;
  for (const auto& [block, items] : block_items) {
    const Clustering local = agglomerative_cluster(items, threshold);
    for (const auto& [id, cl] : local) {
      pred[id] = block + "/" + cl;
      gold[id] = task.clusters.at(id);
    }
  }
  return b3_f1(pred, gold);
}

TaskScore score_task(const EmbeddingsByFormat& embeddings, const TaskData& task,
                     std::uint64_t probe_seed) {
  TaskScore row;
  row.task = task.spec.name;
  row.format = task.spec.format;
  row.metric = task.spec.metric;
  row.in_train = task.in_train;

  const auto it = embeddings.find(to_string(task.spec.format));
  if (it == embeddings.end()) {
    row.failed = true;
    row.note = "missing " + to_string(task.spec.format) + " embedding";
    return row;
  }
  const EmbeddingMatrix& emb = it->second;

  ProbeConfig pc;
  pc.seed = probe_seed ^ fnv1a64(task.spec.name);

  try {
    if (task.spec.metric == "macro_f1" || task.spec.metric == "binary_f1") {
      const ProbeSets ps = gather_probe_sets(task, emb);
      if (task.spec.objective == Objective::Multilabel) {
        const LinearModel m =
            fit_linear_svc_multilabel(ps.train_x, ps.train_ml, task.label_count, pc);
        std::vector<std::vector<int>> pred;
        for (const auto& x : ps.test_x) pred.push_back(m.predict_labels(x));
        row.value = 100.0 * f1_macro_multilabel(pred, ps.test_ml, task.label_count);
      } else if (!task.kshot.empty()) {
        const KshotResult kr =
            kshot_eval(ps.train_x, ps.train_y, ps.test_x, ps.test_y, task.label_count,
                       task.kshot, task.spec.metric == "binary_f1", pc);
        row.sub_scores = kr.sub_scores;
        row.value = kr.task_score;
        std::ostringstream os;
        os << "k =";
        for (const int k : kr.ks) os << " " << (k > 0 ? std::to_string(k) : std::string("all"));
        row.note = os.str();
      } else {
        const LinearModel m = fit_linear_svc(ps.train_x, ps.train_y, task.label_count, pc);
        std::vector<int> pred;
        for (const auto& x : ps.test_x) pred.push_back(m.predict_class(x));
        row.value = 100.0 * (task.spec.metric == "binary_f1"
                                 ? f1_binary(pred, ps.test_y)
                                 : f1_macro(pred, ps.test_y, task.label_count));
      }
    } else if (task.spec.metric == "tau") {
      const ProbeSets ps = gather_probe_sets(task, emb);
      const LinearModel m = fit_linear_svr(ps.train_x, ps.train_t, pc);
      std::vector<double> pred;
      for (const auto& x : ps.test_x) pred.push_back(m.predict_value(x));
      const auto tau = kendall_tau(pred, ps.test_t);
      if (!tau) throw FormatError("tau undefined: one side is all ties");
      row.value = 100.0 * *tau;
    } else if (task.spec.metric == "map" || task.spec.metric == "ndcg") {
      int missing = 0;
      const auto lists = rank_queries(task, emb, &missing);
      if (lists.empty()) throw FormatError("no scoreable queries");
      const MeanResult mr =
          task.spec.metric == "map" ? mean_average_precision(lists, 1) : mean_ndcg(lists);
      if (mr.scored == 0) throw FormatError("all queries skipped");
      row.value = 100.0 * mr.value;
      row.note = mean_note(mr);
      if (missing > 0) row.note += ", missing query vectors " + std::to_string(missing);
    } else if (task.spec.metric == "b3_f1") {
      double best_thr = 0.0;
      double best = -1.0;
      for (int g = 1; g <= 19; ++g) {
        const double thr = 0.05 * g;
        const double score = clustering_score(task, emb, true, thr);
        if (score > best) {
          best = score;
          best_thr = thr;
        }
      }
      row.value = 100.0 * clustering_score(task, emb, false, best_thr);
      std::ostringstream os;
      os << "threshold " << best_thr;
      row.note = os.str();
    } else if (task.spec.metric == "reviewer") {
      std::vector<double> p5_soft, p10_soft, p5_hard, p10_hard;
      for (const auto& [qid, rows] : group_qrels(task.test_qrels)) {
        const auto& qv = vec_or_throw(emb, qid);
        std::vector<std::pair<double, std::string>> scored;
        std::map<std::string, int> grades;
        for (const auto& r : rows) {
          const auto pit = task.profiles.find(r.candidate_id);
          if (pit == task.profiles.end()) {
            throw FormatError("reviewer '" + r.candidate_id + "' has no profile");
          }
          std::vector<std::vector<double>> papers;
          for (const auto& pid : pit->second) papers.push_back(vec_or_throw(emb, pid));
          scored.emplace_back(-reviewer_score(qv, papers), r.candidate_id);
          grades[r.candidate_id] = r.grade;
        }
        std::sort(scored.begin(), scored.end());
        RankedList rl;
        rl.query_id = qid;
        for (const auto& [neg_score, rid] : scored) {
          rl.ids.push_back(rid);
          rl.grades.push_back(grades[rid]);
        }
        p5_soft.push_back(precision_at_k(rl, 5, 2));
        p10_soft.push_back(precision_at_k(rl, 10, 2));
        p5_hard.push_back(precision_at_k(rl, 5, 3));
        p10_hard.push_back(precision_at_k(rl, 10, 3));
      }
      if (p5_soft.empty()) throw FormatError("no scoreable queries");
      auto mean100 = [](const std::vector<double>& v) { return 100.0 * benchmark_average(v); };
      row.sub_scores = {mean100(p5_soft), mean100(p10_soft), mean100(p5_hard), mean100(p10_hard)};
      row.value = benchmark_average(row.sub_scores);
      row.note = "p@5/p@10, soft then hard";
    } else {
      throw ConfigError("unknown metric '" + task.spec.metric + "'");
    }
  } catch (const FormatError& e) {
    row.failed = true;
    row.note = e.what();
  } catch (const ConfigError& e) {
    row.failed = true;
    row.note = e.what();
  }
  return row;
}

}  // namespace

BenchmarkReport run_benchmark(const EmbeddingsByFormat& embeddings,
                              const std::vector<TaskData>& tasks, std::uint64_t probe_seed) {
  BenchmarkReport report;
  for (const auto& task : tasks) {
    report.rows.push_back(score_task(embeddings, task, probe_seed));
  }
  return report;
}

CrossFormatMatrix cross_format_matrix(const EncoderModel& model, const SynthCorpus& sc,
                                      const std::vector<TaskData>& tasks,
                                      std::uint64_t probe_seed) {
  const TaskFormat row_formats[4] = {TaskFormat::CLF, TaskFormat::RGN, TaskFormat::PRX,
                                     TaskFormat::SRCH};
  const ControlCode col_codes[4] = {ControlCode::CLF, ControlCode::RGN, ControlCode::PRX,
                                    ControlCode::QRY};
  const TaskFormat col_routes[4] = {TaskFormat::CLF, TaskFormat::RGN, TaskFormat::PRX,
                                    TaskFormat::SRCH};

  CrossFormatMatrix m;
  std::array<const TaskData*, 4> sampled{};
  for (int r = 0; r < 4; ++r) {
    for (const auto& t : tasks) {
      if (t.in_train && t.spec.format == row_formats[r]) {
        sampled[static_cast<std::size_t>(r)] = &t;
        break;
      }
    }
    if (!sampled[static_cast<std::size_t>(r)]) {
      throw ConfigError("cross-format matrix: no in-train task for format " +
                        to_string(row_formats[r]));
    }
    m.row_tasks[static_cast<std::size_t>(r)] = sampled[static_cast<std::size_t>(r)]->spec.name;
  }

  // Search candidates keep their canonical embedding; the column axis varies
  // the code on documents (doc-level rows) and on the query side (search row).
  const EmbeddingMatrix search_cands = embed_corpus(model, sc.corpus.docs, TaskFormat::SRCH);

  std::vector<Document> query_docs;
  for (const auto& q : sc.queries) {
    Document d;
    d.id = q.id;
    d.title = q.text;
    query_docs.push_back(std::move(d));
  }

  for (int c = 0; c < 4; ++c) {
    const TaskFormat route = col_routes[c];
    const ControlCode code = model.cfg.variant == Variant::CTRL ? col_codes[c] : ControlCode::CLS;
    const EmbeddingMatrix doc_emb =
        embed_corpus_coded(model, sc.corpus.docs, code, route, false);
    EmbeddingMatrix srch_emb = search_cands;
    const EmbeddingMatrix query_emb = embed_corpus_coded(model, query_docs, code, route, false);
    for (std::size_t i = 0; i < query_emb.ids.size(); ++i) {
      srch_emb.insert(query_emb.ids[i], query_emb.vecs[i]);
    }

    for (int r = 0; r < 4; ++r) {
      EmbeddingsByFormat embs;
      embs.emplace(to_string(row_formats[r]),
                   row_formats[r] == TaskFormat::SRCH ? srch_emb : doc_emb);
      const TaskScore score =
          score_task(embs, *sampled[static_cast<std::size_t>(r)], probe_seed);
      m.values[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
          score.failed ? 0.0 : score.value;
    }
  }
  return m;
}

}  // namespace taskvec
