#include "taskvec/encoder.hpp"

#include <cctype>
#include <cmath>

namespace taskvec {

namespace {

constexpr double kInitStd = 0.02;

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

Tensor init_normal(Shape shape, Rng& rng, double std_dev = kInitStd) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.gaussian(0.0, std_dev);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor init_const(Shape shape, double value) {
  return Tensor::full(std::move(shape), value, true);
}

}  // namespace

std::string to_string(ControlCode c) {
  switch (c) {
    case ControlCode::CLS: return "CLS";
    case ControlCode::CLF: return "CLF";
    case ControlCode::RGN: return "RGN";
    case ControlCode::PRX: return "PRX";
    case ControlCode::QRY: return "QRY";
  }
  return "?";
}

std::optional<ControlCode> parse_code(const std::string& s) {
  if (s == "CLS") return ControlCode::CLS;
  if (s == "CLF") return ControlCode::CLF;
  if (s == "RGN") return ControlCode::RGN;
  if (s == "PRX") return ControlCode::PRX;
  if (s == "QRY") return ControlCode::QRY;
  return std::nullopt;
}

int code_token_id(ControlCode c) {
  switch (c) {
    case ControlCode::CLS: return Vocab::kCls;
    case ControlCode::CLF: return Vocab::kClf;
    case ControlCode::RGN: return Vocab::kRgn;
    case ControlCode::PRX: return Vocab::kPrx;
    case ControlCode::QRY: return Vocab::kQry;
  }
  return Vocab::kCls;
}

ControlCode code_for(TaskFormat f, bool is_query) {
  switch (f) {
    case TaskFormat::CLF: return ControlCode::CLF;
    case TaskFormat::RGN: return ControlCode::RGN;
    case TaskFormat::PRX: return ControlCode::PRX;
    case TaskFormat::SRCH: return is_query ? ControlCode::QRY : ControlCode::PRX;
  }
  return ControlCode::CLS;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::CLS_ONLY: return "CLS_ONLY";
    case Variant::CTRL: return "CTRL";
    case Variant::ADAPTER: return "ADAPTER";
    case Variant::PALS: return "PALS";
    case Variant::FUSION: return "FUSION";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "CLS_ONLY") return Variant::CLS_ONLY;
  if (s == "CTRL") return Variant::CTRL;
  if (s == "ADAPTER") return Variant::ADAPTER;
  if (s == "PALS") return Variant::PALS;
  if (s == "FUSION") return Variant::FUSION;
  return std::nullopt;
}

int Vocab::lookup(std::string_view word) const {
  return kReserved + static_cast<int>(fnv1a64(word, seed) % static_cast<std::uint64_t>(buckets));
}

void EncoderConfig::validate() const {
  if (hidden < 1 || layers < 1 || heads < 1 || ffn < 1 || bottleneck < 1) {
    throw ContractError("encoder config: all dimensions must be positive");
  }
  if (hidden % heads != 0) {
    throw ContractError("encoder config: hidden " + std::to_string(hidden) +
                        " not divisible by heads " + std::to_string(heads));
  }
  if (hidden % 4 != 0) {
    throw ContractError("encoder config: hidden must be divisible by 4 for the low-rank branch");
  }
  if (max_len < 4) {
    throw ContractError("encoder config: max_len " + std::to_string(max_len) + " < 4");
  }
  if (vocab.buckets < 1) throw ContractError("encoder config: vocab buckets must be positive");
}

std::vector<int> tokenize(const Document& doc, ControlCode code, const EncoderConfig& cfg,
                          bool with_metadata) {
  const auto title_words = split_words(doc.title);
  if (title_words.empty()) {
    throw FormatError("document '" + doc.id + "': empty title");
  }
  std::vector<int> seq;
  seq.reserve(static_cast<std::size_t>(cfg.max_len));
  seq.push_back(code_token_id(code));
  for (const auto& w : title_words) seq.push_back(cfg.vocab.lookup(w));
  seq.push_back(Vocab::kSep);
  for (const auto& w : split_words(doc.abstract_text)) seq.push_back(cfg.vocab.lookup(w));
  if (with_metadata && (!doc.venue.empty() || doc.year.has_value())) {
    seq.push_back(Vocab::kSep);
    for (const auto& w : split_words(doc.venue)) seq.push_back(cfg.vocab.lookup(w));
    if (doc.year.has_value()) seq.push_back(cfg.vocab.lookup(std::to_string(*doc.year)));
  }
  seq.resize(static_cast<std::size_t>(cfg.max_len), Vocab::kPad);
  return seq;
}

EncoderModel EncoderModel::build(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderModel m;
  m.cfg = cfg;
  Rng rng(cfg.init_seed);
  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  const std::size_t f = static_cast<std::size_t>(cfg.ffn);
  m.tok_emb = init_normal({static_cast<std::size_t>(cfg.vocab.table_rows()), h}, rng);
  m.pos_emb = init_normal({static_cast<std::size_t>(cfg.max_len), h}, rng);
  m.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& layer : m.layers) {
    layer.wq = init_normal({h, h}, rng);
    layer.bq = init_const({h}, 0.0);
    layer.wk = init_normal({h, h}, rng);
    layer.bk = init_const({h}, 0.0);
    layer.wv = init_normal({h, h}, rng);
    layer.bv = init_const({h}, 0.0);
    layer.wo = init_normal({h, h}, rng);
    layer.bo = init_const({h}, 0.0);
    layer.ln1_g = init_const({h}, 1.0);
    layer.ln1_b = init_const({h}, 0.0);
    layer.w1 = init_normal({h, f}, rng);
    layer.b1 = init_const({f}, 0.0);
    layer.w2 = init_normal({f, h}, rng);
    layer.b2 = init_const({h}, 0.0);
    layer.ln2_g = init_const({h}, 1.0);
    layer.ln2_b = init_const({h}, 0.0);
  }
  return m;
}

EncoderModel EncoderModel::build_full(const EncoderConfig& cfg) {
  EncoderModel m = build(cfg);
  Rng rng(cfg.init_seed ^ 0xada97e50ULL);
  attach_adapters(m, rng);
  return m;
}

bool EncoderModel::has_variant_modules() const {
  return !adapters.empty() || !pals.empty() || !fusion.empty();
}

void attach_adapters(EncoderModel& m, Rng& rng) {
  const Variant v = m.cfg.variant;
  if (v == Variant::CLS_ONLY || v == Variant::CTRL) return;  // code rows live in tok_emb
  if (m.has_variant_modules()) {
    throw ContractError("attach_adapters: variant modules already attached");
  }
  const std::size_t h = static_cast<std::size_t>(m.cfg.hidden);
  const std::size_t b = static_cast<std::size_t>(m.cfg.bottleneck);
  const std::size_t r = static_cast<std::size_t>(m.cfg.pals_rank());
  const std::size_t nl = m.layers.size();
  const TaskFormat formats[] = {TaskFormat::CLF, TaskFormat::RGN, TaskFormat::PRX,
                                TaskFormat::SRCH};

  // Up projections start at zero so every branch begins as the identity.
  if (v == Variant::ADAPTER || v == Variant::FUSION) {
    for (const TaskFormat fmt : formats) {
      auto& stack = m.adapters[fmt];
      stack.resize(nl);
      for (auto& a : stack) {
        a.ln_g = init_const({h}, 1.0);
        a.ln_b = init_const({h}, 0.0);
        a.w_down = init_normal({h, b}, rng);
        a.b_down = init_const({b}, 0.0);
        a.w_up = init_const({b, h}, 0.0);
        a.b_up = init_const({h}, 0.0);
      }
    }
  }
  if (v == Variant::PALS) {
    for (const TaskFormat fmt : formats) {
      auto& stack = m.pals[fmt];
      stack.resize(nl);
      for (auto& p : stack) {
        p.down = init_normal({h, r}, rng);
        p.up = init_const({r, h}, 0.0);
        p.wq = init_normal({r, r}, rng);
        p.wk = init_normal({r, r}, rng);
        p.wv = init_normal({r, r}, rng);
      }
    }
  }
  if (v == Variant::FUSION) {
    for (const TaskFormat fmt : formats) {
      auto& stack = m.fusion[fmt];
      stack.resize(nl);
      for (auto& fb : stack) {
        fb.wq = init_normal({h, h}, rng);
        fb.wk = init_normal({h, h}, rng);
        fb.wv = init_const({h, h}, 0.0);
      }
    }
  }
}

std::vector<ParamEntry> EncoderModel::parameters() const {
  std::vector<ParamEntry> out;
  out.push_back({"tok_emb", tok_emb});
  out.push_back({"pos_emb", pos_emb});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "attn.wq", l.wq});
    out.push_back({p + "attn.bq", l.bq});
    out.push_back({p + "attn.wk", l.wk});
    out.push_back({p + "attn.bk", l.bk});
    out.push_back({p + "attn.wv", l.wv});
    out.push_back({p + "attn.bv", l.bv});
    out.push_back({p + "attn.wo", l.wo});
    out.push_back({p + "attn.bo", l.bo});
    out.push_back({p + "ln1.g", l.ln1_g});
    out.push_back({p + "ln1.b", l.ln1_b});
    out.push_back({p + "ffn.w1", l.w1});
    out.push_back({p + "ffn.b1", l.b1});
    out.push_back({p + "ffn.w2", l.w2});
    out.push_back({p + "ffn.b2", l.b2});
    out.push_back({p + "ln2.g", l.ln2_g});
    out.push_back({p + "ln2.b", l.ln2_b});
  }
  for (const auto& [fmt, stack] : adapters) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const std::string p = "adapter." + to_string(fmt) + "." + std::to_string(i) + ".";
      out.push_back({p + "ln.g", stack[i].ln_g});
      out.push_back({p + "ln.b", stack[i].ln_b});
      out.push_back({p + "down.w", stack[i].w_down});
      out.push_back({p + "down.b", stack[i].b_down});
      out.push_back({p + "up.w", stack[i].w_up});
      out.push_back({p + "up.b", stack[i].b_up});
    }
  }
  for (const auto& [fmt, stack] : pals) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const std::string p = "pal." + to_string(fmt) + "." + std::to_string(i) + ".";
      out.push_back({p + "down", stack[i].down});
      out.push_back({p + "up", stack[i].up});
      out.push_back({p + "wq", stack[i].wq});
      out.push_back({p + "wk", stack[i].wk});
      out.push_back({p + "wv", stack[i].wv});
    }
  }
  for (const auto& [fmt, stack] : fusion) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const std::string p = "fusion." + to_string(fmt) + "." + std::to_string(i) + ".";
      out.push_back({p + "wq", stack[i].wq});
      out.push_back({p + "wk", stack[i].wk});
      out.push_back({p + "wv", stack[i].wv});
    }
  }
  return out;
}

std::size_t adapter_param_count(const EncoderConfig& cfg) {
  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  const std::size_t b = static_cast<std::size_t>(cfg.bottleneck);
  const std::size_t l = static_cast<std::size_t>(cfg.layers);
  return l * (2 * h * b + b + h + 2 * h);  // bottleneck + biases + adapter layer norm
}

std::size_t pals_param_count(const EncoderConfig& cfg) {
  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  const std::size_t r = static_cast<std::size_t>(cfg.pals_rank());
  const std::size_t l = static_cast<std::size_t>(cfg.layers);
  return l * (2 * h * r + 3 * r * r);
}

std::size_t fusion_param_count(const EncoderConfig& cfg) {
  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  const std::size_t l = static_cast<std::size_t>(cfg.layers);
  return l * 3 * h * h + adapter_param_count(cfg);
}

std::size_t param_count(const EncoderModel& m, TaskFormat format) {
  switch (m.cfg.variant) {
    case Variant::CLS_ONLY: return 0;
    case Variant::CTRL: return static_cast<std::size_t>(m.cfg.hidden);
    case Variant::ADAPTER: {
      std::size_t n = 0;
      const auto it = m.adapters.find(format);
      if (it == m.adapters.end()) throw ContractError("param_count: no adapter stack attached");
      for (const auto& a : it->second) {
        n += a.ln_g.size() + a.ln_b.size() + a.w_down.size() + a.b_down.size() + a.w_up.size() +
             a.b_up.size();
      }
      return n;
    }
    case Variant::PALS: {
      std::size_t n = 0;
      const auto it = m.pals.find(format);
      if (it == m.pals.end()) throw ContractError("param_count: no parallel branch attached");
      for (const auto& p : it->second) {
        n += p.down.size() + p.up.size() + p.wq.size() + p.wk.size() + p.wv.size();
      }
      return n;
    }
    case Variant::FUSION: {
      std::size_t n = 0;
      const auto fit = m.fusion.find(format);
      const auto ait = m.adapters.find(format);
      if (fit == m.fusion.end() || ait == m.adapters.end()) {
        throw ContractError("param_count: fusion modules not attached");
      }
      for (const auto& fb : fit->second) n += fb.wq.size() + fb.wk.size() + fb.wv.size();
      for (const auto& a : ait->second) {
        n += a.ln_g.size() + a.ln_b.size() + a.w_down.size() + a.b_down.size() + a.w_up.size() +
             a.b_up.size();
      }
      return n;
    }
  }
  return 0;
}

namespace {

Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
  return t.add(t.matmul(x, w), b);
}

Tensor multi_head_attention(Tape& t, const EncoderModel::Layer& l, const Tensor& x, int heads,
                            int head_dim) {
  const Tensor q = linear(t, x, l.wq, l.bq);
  const Tensor k = linear(t, x, l.wk, l.bk);
  const Tensor v = linear(t, x, l.wv, l.bv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  for (int hh = 0; hh < heads; ++hh) {
    const std::size_t off = static_cast<std::size_t>(hh * head_dim);
    const Tensor qh = t.slice_cols(q, off, static_cast<std::size_t>(head_dim));
    const Tensor kh = t.slice_cols(k, off, static_cast<std::size_t>(head_dim));
    const Tensor vh = t.slice_cols(v, off, static_cast<std::size_t>(head_dim));
    const Tensor scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
    const Tensor att = t.softmax(scores, -1);
    ctx.push_back(t.matmul(att, vh));
  }
  return linear(t, t.concat_cols(ctx), l.wo, l.bo);
}

Tensor pal_branch(Tape& t, const EncoderModel::Pal& p, const Tensor& x, int rank) {
  const Tensor z = t.matmul(x, p.down);
  const Tensor q = t.matmul(z, p.wq);
  const Tensor k = t.matmul(z, p.wk);
  const Tensor v = t.matmul(z, p.wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(rank));
  const Tensor att = t.softmax(t.scale(t.matmul(q, t.transpose(k)), inv_sqrt), -1);
  return t.matmul(t.matmul(att, v), p.up);
}

Tensor adapter_branch(Tape& t, const EncoderModel::Adapter& a, const Tensor& x) {
  const Tensor normed = t.layer_norm(x, a.ln_g, a.ln_b);
  const Tensor mid = t.gelu(linear(t, normed, a.w_down, a.b_down));
  return t.add(x, linear(t, mid, a.w_up, a.b_up));
}

Tensor fusion_block(Tape& t, const EncoderModel::FusionBlock& fb, const Tensor& x,
                    const std::vector<Tensor>& candidates, int hidden) {
  const std::size_t rows = x.rows();
  const Tensor q = t.matmul(x, fb.wq);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::vector<Tensor> values;
  std::vector<Tensor> score_cols;
  values.reserve(candidates.size());
  score_cols.reserve(candidates.size());
  for (const Tensor& cand : candidates) {
    const Tensor k = t.matmul(cand, fb.wk);
    values.push_back(t.matmul(cand, fb.wv));
    const Tensor dot = t.scale(t.sum_last(t.mul(q, k)), inv_sqrt);  // [rows]
    score_cols.push_back(t.reshape(dot, {rows, 1}));
  }
  const Tensor alpha = t.softmax(t.concat_cols(score_cols), -1);  // [rows, candidates]
  Tensor mix;
  for (std::size_t g = 0; g < values.size(); ++g) {
    const Tensor weighted = t.scale_rows(values[g], t.slice_cols(alpha, g, 1));
    mix = g == 0 ? weighted : t.add(mix, weighted);
  }
  return t.add(x, mix);
}

constexpr TaskFormat kAllFormats[] = {TaskFormat::CLF, TaskFormat::RGN, TaskFormat::PRX,
                                      TaskFormat::SRCH};

}  // namespace

Tensor encode(Tape& t, const EncoderModel& m, const std::vector<int>& ids, TaskFormat route) {
  if (ids.empty()) throw ContractError("encode: empty token sequence");
  std::size_t len = ids.size();
  while (len > 1 && ids[len - 1] == Vocab::kPad) --len;  // trailing pads carry no content
  if (len > static_cast<std::size_t>(m.cfg.max_len)) {
    throw ContractError("encode: sequence longer than max_len");
  }
  const std::vector<int> active(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(len));

  const Variant v = m.cfg.variant;
  const bool needs_adapter = v == Variant::ADAPTER || v == Variant::FUSION;
  if ((needs_adapter && m.adapters.find(route) == m.adapters.end()) ||
      (v == Variant::PALS && m.pals.find(route) == m.pals.end()) ||
      (v == Variant::FUSION && m.fusion.find(route) == m.fusion.end())) {
    throw ContractError("encode: no " + to_string(v) + " modules for format " + to_string(route));
  }

  Tensor x = t.add(t.embedding(m.tok_emb, active), t.slice_rows(m.pos_emb, 0, len));
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const auto& l = m.layers[li];
    Tensor attn = multi_head_attention(t, l, x, m.cfg.heads, m.cfg.head_dim());
    Tensor pre_ln1 = t.add(x, attn);
    if (v == Variant::PALS) {
      pre_ln1 = t.add(pre_ln1, pal_branch(t, m.pals.at(route)[li], x, m.cfg.pals_rank()));
    }
    x = t.layer_norm(pre_ln1, l.ln1_g, l.ln1_b);
    const Tensor mid = t.gelu(linear(t, x, l.w1, l.b1));
    const Tensor ffn = linear(t, mid, l.w2, l.b2);
    x = t.layer_norm(t.add(x, ffn), l.ln2_g, l.ln2_b);
    if (v == Variant::ADAPTER) {
      x = adapter_branch(t, m.adapters.at(route)[li], x);
    } else if (v == Variant::FUSION) {
      std::vector<Tensor> candidates;
      candidates.reserve(4);
      for (const TaskFormat g : kAllFormats) {
        candidates.push_back(adapter_branch(t, m.adapters.at(g)[li], x));
      }
      x = fusion_block(t, m.fusion.at(route)[li], x, candidates, m.cfg.hidden);
    }
  }
  return t.slice_rows(x, 0, 1);
}

Tensor encode_batch(Tape& t, const EncoderModel& m, const std::vector<std::vector<int>>& seqs,
                    TaskFormat route) {
  if (seqs.empty()) throw ContractError("encode_batch: no sequences");
  std::vector<Tensor> rows;
  rows.reserve(seqs.size());
  for (const auto& ids : seqs) rows.push_back(encode(t, m, ids, route));
  return seqs.size() == 1 ? rows[0] : t.concat_rows(rows);
}

namespace {

std::vector<double> run_inference(const EncoderModel& m, const Document& doc, ControlCode code,
                                  TaskFormat route, bool with_metadata) {
  Tape tape(false);
  const auto ids = tokenize(doc, code, m.cfg, with_metadata);
  const Tensor e = encode(tape, m, ids, route);
  return e.data();
}

ControlCode lead_code(const EncoderModel& m, TaskFormat format, bool is_query) {
  return m.cfg.variant == Variant::CTRL ? code_for(format, is_query) : ControlCode::CLS;
}

}  // namespace

std::vector<double> embed_doc(const EncoderModel& m, const Document& doc, TaskFormat format) {
  return run_inference(m, doc, lead_code(m, format, false), format,
                       format == TaskFormat::SRCH);
}

std::vector<double> embed_query(const EncoderModel& m, const std::string& text,
                                TaskFormat format) {
  Document q;
  q.id = "(query)";
  q.title = text;
  return run_inference(m, q, lead_code(m, format, true), format, false);
}

EmbeddingMatrix embed_corpus(const EncoderModel& m, const std::vector<Document>& docs,
                             TaskFormat format) {
  EmbeddingMatrix out = embed_corpus_coded(m, docs, lead_code(m, format, false), format,
                                           format == TaskFormat::SRCH);
  out.format_tag = to_string(format);
  return out;
}

EmbeddingMatrix embed_corpus_coded(const EncoderModel& m, const std::vector<Document>& docs,
                                   ControlCode code, TaskFormat route, bool with_metadata) {
  EmbeddingMatrix out;
  out.dim = static_cast<std::uint32_t>(m.cfg.hidden);
  out.format_tag = to_string(code);
  for (const auto& doc : docs) {
    out.insert(doc.id, run_inference(m, doc, code, route, with_metadata));
  }
  return out;
}

std::uint64_t params_hash(const EncoderModel& m) { return params_hash(m.parameters()); }

std::uint64_t params_hash(const std::vector<ParamEntry>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = hash_bytes(p.name.data(), p.name.size(), h);
    h = hash_bytes(p.value.data().data(), p.value.size() * sizeof(double), h);
  }
  return h;
}

std::uint64_t param_group_hash(const EncoderModel& m, std::string_view group) {
  auto in_group = [&](const std::string& name) {
    const bool adapter = name.rfind("adapter.", 0) == 0;
    const bool pal = name.rfind("pal.", 0) == 0;
    const bool fusion = name.rfind("fusion.", 0) == 0;
    if (group == "adapter") return adapter;
    if (group == "pal") return pal;
    if (group == "fusion") return fusion;
    if (group == "trunk") return !adapter && !pal && !fusion;
    throw ContractError("param_group_hash: unknown group '" + std::string(group) + "'");
  };
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : m.parameters()) {
    if (!in_group(p.name)) continue;
    h = hash_bytes(p.name.data(), p.name.size(), h);
    h = hash_bytes(p.value.data().data(), p.value.size() * sizeof(double), h);
  }
  return h;
}

}  // namespace taskvec
