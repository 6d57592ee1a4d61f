#include "taskvec/data.hpp"

#include "taskvec/io.hpp"

#include <algorithm>

namespace taskvec {

std::string to_string(TaskFormat f) {
  switch (f) {
    case TaskFormat::CLF: return "CLF";
    case TaskFormat::RGN: return "RGN";
    case TaskFormat::PRX: return "PRX";
    case TaskFormat::SRCH: return "SRCH";
  }
  return "?";
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::Multiclass: return "multiclass";
    case Objective::Multilabel: return "multilabel";
    case Objective::Regression: return "regression";
    case Objective::Triplet: return "triplet";
  }
  return "?";
}

std::optional<TaskFormat> parse_format(const std::string& s) {
  if (s == "CLF") return TaskFormat::CLF;
  if (s == "RGN") return TaskFormat::RGN;
  if (s == "PRX") return TaskFormat::PRX;
  if (s == "SRCH") return TaskFormat::SRCH;
  return std::nullopt;
}

std::optional<Objective> parse_objective(const std::string& s) {
  if (s == "multiclass") return Objective::Multiclass;
  if (s == "multilabel") return Objective::Multilabel;
  if (s == "regression") return Objective::Regression;
  if (s == "triplet") return Objective::Triplet;
  return std::nullopt;
}

bool format_objective_compatible(TaskFormat f, Objective o) {
  switch (f) {
    case TaskFormat::CLF: return o == Objective::Multiclass || o == Objective::Multilabel;
    case TaskFormat::RGN: return o == Objective::Regression;
    case TaskFormat::PRX:
    case TaskFormat::SRCH: return o == Objective::Triplet;
  }
  return false;
}

const Document& Corpus::at(const std::string& id) const {
  const Document* d = find(id);
  if (!d) throw FormatError("corpus: unknown document id '" + id + "'");
  return *d;
}

const Document* Corpus::find(const std::string& id) const {
  const auto it = index.find(id);
  return it == index.end() ? nullptr : &docs[it->second];
}

void Corpus::rebuild_index() {
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  index.clear();
  index.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!index.emplace(docs[i].id, i).second) {
      throw FormatError("corpus: duplicate document id '" + docs[i].id + "'");
    }
  }
}

const std::vector<double>* EmbeddingMatrix::find(const std::string& id) const {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return nullptr;
  return &vecs[static_cast<std::size_t>(it - ids.begin())];
}

void EmbeddingMatrix::insert(const std::string& id, std::vector<double> vec) {
  const auto it = std::lower_bound(ids.begin(), ids.end(), id);
  const auto pos = static_cast<std::size_t>(it - ids.begin());
  if (it != ids.end() && *it == id) {
    vecs[pos] = std::move(vec);
    return;
  }
  ids.insert(it, id);
  vecs.insert(vecs.begin() + static_cast<std::ptrdiff_t>(pos), std::move(vec));
}

EmbeddingMatrix ensemble_embeddings(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.dim != b.dim) {
    throw FormatError("ensemble: dimension mismatch " + std::to_string(a.dim) + " vs " +
                      std::to_string(b.dim));
  }
  if (a.ids != b.ids) {
    throw FormatError("ensemble: the two matrices cover different document sets");
  }
  EmbeddingMatrix out;
  out.dim = a.dim;
  out.format_tag = a.format_tag;
  out.ids = a.ids;
  out.vecs.resize(a.vecs.size());
  for (std::size_t i = 0; i < a.vecs.size(); ++i) {
    out.vecs[i].resize(a.dim);
    for (std::size_t j = 0; j < a.dim; ++j) {
      out.vecs[i][j] = 0.5 * (a.vecs[i][j] + b.vecs[i][j]);
    }
  }
  return out;
}

}  // namespace taskvec
