#include "taskvec/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace taskvec {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ----------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not readable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const ConfigMap& cfg) {
  // Group back into sections; unsectioned keys go first.
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::ostringstream os;
  for (const auto& [key, value] : cfg) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) {
      os << key << " = " << value << "\n";
    } else {
      sections[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
  }
  for (const auto& [section, entries] : sections) {
    os << "[" << section << "]\n";
    for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  }
  return os.str();
}

std::string cfg_str(const ConfigMap& cfg, const std::string& key, const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

long long cfg_int(const ConfigMap& cfg, const std::string& key, long long fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
  }
}

double cfg_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
  }
}

std::uint64_t cfg_u64(const ConfigMap& cfg, const std::string& key, std::uint64_t fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + it->second +
                      "'");
  }
}

// ------------------------------------------------------------- text files

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FormatError("write failed: " + path);
}

std::uint64_t file_hash(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return hash_bytes(bytes.data(), bytes.size());
}

// ----------------------------------------------------------------- corpus

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ostringstream os;
  for (const auto& d : corpus.docs) {
    json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["abstract"] = d.abstract_text;
    if (!d.venue.empty()) j["venue"] = d.venue;
    if (d.year) j["year"] = *d.year;
    os << j.dump() << "\n";
  }
  write_text_file(path, os.str());
}

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      Document d;
      d.id = j.at("id").get<std::string>();
      d.title = j.at("title").get<std::string>();
      d.abstract_text = j.at("abstract").get<std::string>();
      if (j.contains("venue")) d.venue = j.at("venue").get<std::string>();
      if (j.contains("year")) d.year = j.at("year").get<int>();
      corpus.docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  corpus.rebuild_index();
  return corpus;
}

// ------------------------------------------------------------------ tasks

namespace {

json sample_to_json(const Sample& s, Objective o) {
  json j;
  if (s.kind == Sample::Kind::Triplet) {
    if (!s.query_id.empty()) {
      j["query_id"] = s.query_id;
    } else {
      j["query_text"] = s.query_text;
    }
    j["pos_id"] = s.pos_id;
    j["neg_id"] = s.neg_id;
    return j;
  }
  j["doc_id"] = s.doc_id;
  switch (o) {
    case Objective::Multiclass: j["label"] = s.label; break;
    case Objective::Multilabel: j["labels"] = s.labels; break;
    case Objective::Regression: j["target"] = s.target; break;
    case Objective::Triplet: break;
  }
  return j;
}

Sample sample_from_json(const json& j, Objective o) {
  Sample s;
  if (o == Objective::Triplet) {
    s.kind = Sample::Kind::Triplet;
    if (j.contains("query_id")) {
      s.query_id = j.at("query_id").get<std::string>();
    } else {
      s.query_text = j.at("query_text").get<std::string>();
    }
    s.pos_id = j.at("pos_id").get<std::string>();
    s.neg_id = j.at("neg_id").get<std::string>();
    return s;
  }
  s.kind = Sample::Kind::Label;
  s.doc_id = j.at("doc_id").get<std::string>();
  switch (o) {
    case Objective::Multiclass: s.label = j.at("label").get<int>(); break;
    case Objective::Multilabel: s.labels = j.at("labels").get<std::vector<int>>(); break;
    case Objective::Regression: s.target = j.at("target").get<double>(); break;
    case Objective::Triplet: break;
  }
  return s;
}

void save_samples(const std::string& path, const std::vector<Sample>& samples, Objective o) {
  std::ostringstream os;
  for (const auto& s : samples) os << sample_to_json(s, o).dump() << "\n";
  write_text_file(path, os.str());
}

std::vector<Sample> load_samples(const std::string& path, Objective o) {
  std::vector<Sample> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line), o));
    } catch (const json::exception& e) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

bool test_is_qrels(const TaskSpec& spec) {
  return spec.metric == "map" || spec.metric == "ndcg" || spec.metric == "reviewer";
}

bool test_is_clusters(const TaskSpec& spec) { return spec.metric == "b3_f1"; }

}  // namespace

void save_tasks(const std::string& dir, const std::vector<TaskData>& tasks) {
  fs::create_directories(dir);
  json index = json::array();
  for (const auto& t : tasks) {
    const std::string base = t.spec.name;
    json j;
    j["name"] = t.spec.name;
    j["format"] = to_string(t.spec.format);
    j["objective"] = to_string(t.spec.objective);
    j["cap"] = t.spec.cap;
    j["in_train"] = t.in_train;
    if (t.label_count > 0) j["labels"] = t.label_count;
    if (!t.spec.metric.empty()) j["metric"] = t.spec.metric;
    if (!t.kshot.empty()) j["kshot"] = t.kshot;

    const std::string train_rel = base + ".train.jsonl";
    save_samples((fs::path(dir) / train_rel).string(), t.train, t.spec.objective);
    j["train_path"] = train_rel;

    std::string test_rel;
    if (test_is_qrels(t.spec)) {
      test_rel = base + ".qrels.txt";
      save_qrels((fs::path(dir) / test_rel).string(), t.test_qrels);
    } else if (test_is_clusters(t.spec)) {
      test_rel = base + ".clusters.jsonl";
      std::ostringstream os;
      for (const auto& [id, block] : t.blocks) {
        json row;
        row["doc_id"] = id;
        row["block"] = block;
        row["cluster"] = t.clusters.at(id);
        os << row.dump() << "\n";
      }
      write_text_file((fs::path(dir) / test_rel).string(), os.str());
    } else {
      test_rel = base + ".test.jsonl";
      save_samples((fs::path(dir) / test_rel).string(), t.test, t.spec.objective);
    }
    j["test_path"] = test_rel;

    if (!t.query_texts.empty()) {
      const std::string rel = base + ".queries.json";
      json q(t.query_texts);
      write_text_file((fs::path(dir) / rel).string(), q.dump(2) + "\n");
      j["queries_path"] = rel;
    }
    if (!t.profiles.empty()) {
      const std::string rel = base + ".profiles.json";
      json p(t.profiles);
      write_text_file((fs::path(dir) / rel).string(), p.dump(2) + "\n");
      j["profiles_path"] = rel;
    }
    index.push_back(std::move(j));
  }
  write_text_file((fs::path(dir) / "tasks.json").string(), index.dump(2) + "\n");
}

std::vector<TaskData> load_tasks(const std::string& tasks_json_path) {
  const fs::path dir = fs::path(tasks_json_path).parent_path();
  json index;
  try {
    index = json::parse(read_text_file(tasks_json_path));
  } catch (const json::exception& e) {
    throw FormatError(tasks_json_path + ": " + e.what());
  }
  if (!index.is_array()) throw FormatError(tasks_json_path + ": expected a task array");

  std::vector<TaskData> tasks;
  for (const auto& j : index) {
    TaskData t;
    try {
      t.spec.name = j.at("name").get<std::string>();
      const auto fmt = parse_format(j.at("format").get<std::string>());
      if (!fmt) throw FormatError("task " + t.spec.name + ": unknown format");
      t.spec.format = *fmt;
      const auto obj = parse_objective(j.at("objective").get<std::string>());
      if (!obj) throw FormatError("task " + t.spec.name + ": unknown objective");
      t.spec.objective = *obj;
      t.spec.train_path = j.at("train_path").get<std::string>();
      t.spec.test_path = j.at("test_path").get<std::string>();
      if (j.contains("cap")) t.spec.cap = j.at("cap").get<std::size_t>();
      if (j.contains("in_train")) t.in_train = j.at("in_train").get<bool>();
      if (j.contains("labels")) t.label_count = j.at("labels").get<int>();
      if (j.contains("metric")) t.spec.metric = j.at("metric").get<std::string>();
      if (j.contains("kshot")) t.kshot = j.at("kshot").get<std::vector<int>>();
      if (j.contains("queries_path")) t.spec.queries_path = j.at("queries_path").get<std::string>();
      if (j.contains("profiles_path")) {
        t.spec.profiles_path = j.at("profiles_path").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw FormatError(tasks_json_path + ": " + e.what());
    }
    if (!format_objective_compatible(t.spec.format, t.spec.objective)) {
      throw FormatError("task " + t.spec.name + ": objective " + to_string(t.spec.objective) +
                        " is not valid for format " + to_string(t.spec.format));
    }

    t.train = load_samples((dir / t.spec.train_path).string(), t.spec.objective);
    const std::string test_abs = (dir / t.spec.test_path).string();
    if (test_is_qrels(t.spec)) {
      t.test_qrels = load_qrels(test_abs);
    } else if (test_is_clusters(t.spec)) {
      std::istringstream in(read_text_file(test_abs));
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
          const json row = json::parse(line);
          const auto id = row.at("doc_id").get<std::string>();
          t.blocks[id] = row.at("block").get<std::string>();
          t.clusters[id] = row.at("cluster").get<std::string>();
        } catch (const json::exception& e) {
          throw FormatError(test_abs + " line " + std::to_string(lineno) + ": " + e.what());
        }
      }
    } else {
      t.test = load_samples(test_abs, t.spec.objective);
    }

    if (!t.spec.queries_path.empty()) {
      try {
        const json q = json::parse(read_text_file((dir / t.spec.queries_path).string()));
        t.query_texts = q.get<std::map<std::string, std::string>>();
      } catch (const json::exception& e) {
        throw FormatError(t.spec.queries_path + std::string(": ") + e.what());
      }
    }
    if (!t.spec.profiles_path.empty()) {
      try {
        const json p = json::parse(read_text_file((dir / t.spec.profiles_path).string()));
        t.profiles = p.get<std::map<std::string, std::vector<std::string>>>();
      } catch (const json::exception& e) {
        throw FormatError(t.spec.profiles_path + std::string(": ") + e.what());
      }
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void save_qrels(const std::string& path, const std::vector<QrelRow>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    os << r.query_id << " " << r.candidate_id << " " << r.grade << "\n";
  }
  write_text_file(path, os.str());
}

std::vector<QrelRow> load_qrels(const std::string& path) {
  std::vector<QrelRow> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    QrelRow r;
    std::string grade;
    if (!(ls >> r.query_id >> r.candidate_id >> grade)) {
      throw FormatError(path + " line " + std::to_string(lineno) +
                        ": expected 'query candidate grade'");
    }
    std::string extra;
    if (ls >> extra) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": trailing fields");
    }
    try {
      std::size_t used = 0;
      r.grade = std::stoi(grade, &used);
      if (used != grade.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": bad grade '" + grade + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ------------------------------------------------------------- embeddings

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double d) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError(path + ": truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    }
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d = 0.0;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void done() const {
    if (pos != buf.size()) throw FormatError(path + ": trailing bytes after payload");
  }
};

constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_embeddings(const std::string& path, const EmbeddingMatrix& m) {
  std::string buf;
  buf += "TVEC";
  put_u32(buf, kEmbeddingVersion);
  put_u32(buf, m.dim);
  put_u32(buf, static_cast<std::uint32_t>(m.format_tag.size()));
  buf += m.format_tag;
  put_u64(buf, m.ids.size());
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    if (m.vecs[i].size() != m.dim) {
      throw FormatError("embedding row '" + m.ids[i] + "' has dimension " +
                        std::to_string(m.vecs[i].size()) + ", header says " +
                        std::to_string(m.dim));
    }
    put_u32(buf, static_cast<std::uint32_t>(m.ids[i].size()));
    buf += m.ids[i];
    for (const double d : m.vecs[i]) put_f64(buf, d);
  }
  write_text_file(path, buf);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  const std::string buf = read_text_file(path);
  Cursor c{buf, 0, path};
  if (c.bytes(4) != "TVEC") throw FormatError(path + ": not an embedding file");
  const std::uint32_t version = c.u32();
  if (version != kEmbeddingVersion) {
    throw FormatError(path + ": unsupported embedding file version " + std::to_string(version));
  }
  EmbeddingMatrix m;
  m.dim = c.u32();
  m.format_tag = c.bytes(c.u32());
  const std::uint64_t count = c.u64();
  std::string prev;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = c.bytes(c.u32());
    if (i > 0 && !(prev < id)) throw FormatError(path + ": row ids out of order");
    std::vector<double> vec(m.dim);
    for (auto& d : vec) d = c.f64();
    prev = id;
    m.ids.push_back(std::move(id));
    m.vecs.push_back(std::move(vec));
  }
  c.done();
  return m;
}

// ------------------------------------------------------------- checkpoint

void save_checkpoint(const std::string& path, const EncoderModel& model,
                     const Document& reference) {
  const auto params = model.parameters();
  json header;
  header["config"] = {
      {"hidden", model.cfg.hidden},
      {"layers", model.cfg.layers},
      {"heads", model.cfg.heads},
      {"ffn", model.cfg.ffn},
      {"max_len", model.cfg.max_len},
      {"bottleneck", model.cfg.bottleneck},
      {"variant", to_string(model.cfg.variant)},
      {"vocab_buckets", model.cfg.vocab.buckets},
      {"vocab_seed", std::to_string(model.cfg.vocab.seed)},
      {"init_seed", std::to_string(model.cfg.init_seed)},
  };
  json plist = json::array();
  for (const auto& p : params) {
    json pj;
    pj["name"] = p.name;
    pj["shape"] = p.value.shape();
    plist.push_back(std::move(pj));
  }
  header["params"] = std::move(plist);
  json ref;
  ref["id"] = reference.id;
  ref["title"] = reference.title;
  ref["abstract"] = reference.abstract_text;
  if (!reference.venue.empty()) ref["venue"] = reference.venue;
  if (reference.year) ref["year"] = *reference.year;
  header["reference"] = std::move(ref);
  const std::string header_bytes = header.dump();

  std::string buf;
  buf += "TVCK";
  put_u32(buf, kCheckpointVersion);
  put_u64(buf, header_bytes.size());
  buf += header_bytes;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) put_f64(buf, p.value.data()[i]);
  }
  const std::vector<double> ref_emb = embed_doc(model, reference, TaskFormat::PRX);
  put_u32(buf, static_cast<std::uint32_t>(ref_emb.size()));
  for (const double d : ref_emb) put_f64(buf, d);
  write_text_file(path, buf);
}

EncoderModel load_checkpoint(const std::string& path) {
  const std::string buf = read_text_file(path);
  Cursor c{buf, 0, path};
  if (c.bytes(4) != "TVCK") throw FormatError(path + ": not a checkpoint file");
  const std::uint32_t version = c.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t header_len = c.u64();
  json header;
  try {
    header = json::parse(c.bytes(header_len));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }

  EncoderConfig cfg;
  Document reference;
  try {
    const json& jc = header.at("config");
    cfg.hidden = jc.at("hidden").get<int>();
    cfg.layers = jc.at("layers").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.ffn = jc.at("ffn").get<int>();
    cfg.max_len = jc.at("max_len").get<int>();
    cfg.bottleneck = jc.at("bottleneck").get<int>();
    const auto variant = parse_variant(jc.at("variant").get<std::string>());
    if (!variant) throw FormatError(path + ": unknown variant in checkpoint header");
    cfg.variant = *variant;
    cfg.vocab.buckets = jc.at("vocab_buckets").get<int>();
    cfg.vocab.seed = std::stoull(jc.at("vocab_seed").get<std::string>());
    cfg.init_seed = std::stoull(jc.at("init_seed").get<std::string>());

    const json& jr = header.at("reference");
    reference.id = jr.at("id").get<std::string>();
    reference.title = jr.at("title").get<std::string>();
    reference.abstract_text = jr.at("abstract").get<std::string>();
    if (jr.contains("venue")) reference.venue = jr.at("venue").get<std::string>();
    if (jr.contains("year")) reference.year = jr.at("year").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError(path + ": bad seed in checkpoint header");
  } catch (const std::out_of_range&) {
    throw FormatError(path + ": bad seed in checkpoint header");
  }

  EncoderModel model = EncoderModel::build_full(cfg);
  auto params = model.parameters();
  try {
    const json& plist = header.at("params");
    if (!plist.is_array() || plist.size() != params.size()) {
      throw FormatError(path + ": checkpoint declares " + std::to_string(plist.size()) +
                        " parameters, model has " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string name = plist[i].at("name").get<std::string>();
      const auto shape = plist[i].at("shape").get<std::vector<std::size_t>>();
      if (name != params[i].name || shape != params[i].value.shape()) {
        throw FormatError(path + ": parameter mismatch at index " + std::to_string(i) + " ('" +
                          name + "' vs '" + params[i].name + "')");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what());
  }
  for (auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value.mutable_data()[i] = c.f64();
  }

  const std::uint32_t ref_dim = c.u32();
  std::vector<double> stored(ref_dim);
  for (auto& d : stored) d = c.f64();
  c.done();

  const std::vector<double> recomputed = embed_doc(model, reference, TaskFormat::PRX);
  if (recomputed.size() != stored.size() ||
      std::memcmp(recomputed.data(), stored.data(), stored.size() * sizeof(double)) != 0) {
    throw FormatError(path + ": reference embedding mismatch; checkpoint does not reproduce");
  }
  return model;
}

// ---------------------------------------------------------------- reports

void save_trace(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,task,loss,lr\n";
  for (const auto& r : trace) {
    os << r.step << "," << r.task << "," << r.loss << "," << r.lr << "\n";
  }
  write_text_file(path, os.str());
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seed"] = std::to_string(manifest.seed);
  j["input_hashes"] = manifest.input_hashes;
  j["output_hashes"] = manifest.output_hashes;
  j["created"] = manifest.created;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace taskvec
