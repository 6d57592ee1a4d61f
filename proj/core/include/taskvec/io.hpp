#pragma once

#include "taskvec/data.hpp"
#include "taskvec/encoder.hpp"
#include "taskvec/rng.hpp"
#include "taskvec/trainer.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace taskvec {

// ----------------------------------------------------------------- config

/// Flat INI: [section] headers, key = value lines, # comments. Keys are
/// exposed as "section.key".
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);
std::string config_to_text(const ConfigMap& cfg);

std::string cfg_str(const ConfigMap& cfg, const std::string& key, const std::string& fallback);
long long cfg_int(const ConfigMap& cfg, const std::string& key, long long fallback);
double cfg_double(const ConfigMap& cfg, const std::string& key, double fallback);
std::uint64_t cfg_u64(const ConfigMap& cfg, const std::string& key, std::uint64_t fallback);

// ------------------------------------------------------------- text files

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a over the file's bytes.
std::uint64_t file_hash(const std::string& path);

// ----------------------------------------------------------------- corpus

/// JSONL, one document per line: {id, title, abstract, venue?, year?}.
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// ------------------------------------------------------------------ tasks

/// Writes tasks.json plus one JSONL sample file per split into `dir`, and
/// any qrels/queries/profiles side files the tasks need.
void save_tasks(const std::string& dir, const std::vector<TaskData>& tasks);

/// Loads tasks.json and every referenced file. Paths inside the file are
/// relative to its directory.
std::vector<TaskData> load_tasks(const std::string& tasks_json_path);

/// One record per line: query id, candidate id, grade.
void save_qrels(const std::string& path, const std::vector<QrelRow>& rows);
std::vector<QrelRow> load_qrels(const std::string& path);

// ------------------------------------------------------------- embeddings

/// Binary, versioned, little-endian: magic, version, dim, format tag,
/// count, then per row id length + id bytes + dim doubles. Trailing or
/// missing bytes are format errors.
void save_embeddings(const std::string& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::string& path);

// ------------------------------------------------------------- checkpoint

/// Binary container: magic, version, JSON header (config, vocab seed,
/// parameter names/shapes, reference document) followed by the parameter
/// arrays in declared order and the reference embedding. load re-encodes
/// the reference document and requires a bit-exact match.
void save_checkpoint(const std::string& path, const EncoderModel& model,
                     const Document& reference);
EncoderModel load_checkpoint(const std::string& path);

// ---------------------------------------------------------------- reports

/// CSV: step,task,loss,lr.
void save_trace(const std::string& path, const std::vector<TraceRow>& trace);

struct RunManifest {
  std::string command;
  ConfigMap config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;   // path -> hex hash
  std::map<std::string, std::string> output_hashes;  // path -> hex hash
  std::string created;  // ISO-8601 UTC
};

void save_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace taskvec
