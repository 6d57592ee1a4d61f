#pragma once

#include "taskvec/data.hpp"
#include "taskvec/rng.hpp"
#include "taskvec/tensor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskvec {

/// Lead token of an encoded sequence. CLS marks the unconditioned embedding;
/// the other four are the per-format control codes.
enum class ControlCode { CLS, CLF, RGN, PRX, QRY };

std::string to_string(ControlCode c);
std::optional<ControlCode> parse_code(const std::string& s);

/// Vocab id of the code's reserved token.
int code_token_id(ControlCode c);

/// Canonical code under the CTRL variant: documents take their format's
/// code; search queries take QRY and search candidates take PRX.
ControlCode code_for(TaskFormat f, bool is_query);

enum class Variant { CLS_ONLY, CTRL, ADAPTER, PALS, FUSION };

std::string to_string(Variant v);
std::optional<Variant> parse_variant(const std::string& s);

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kClf = 4;
  static constexpr int kRgn = 5;
  static constexpr int kPrx = 6;
  static constexpr int kQry = 7;
  static constexpr int kReserved = 8;

  int buckets = 4096;
  std::uint64_t seed = 0xcbf29ce484222325ULL;

  /// Reserved ids occupy [0,8); hashed words land in [8, 8+buckets).
  int lookup(std::string_view word) const;
  int table_rows() const { return buckets + kReserved; }
};

struct EncoderConfig {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 256;
  int max_len = 128;
  int bottleneck = 16;  // adapter bottleneck width
  Variant variant = Variant::CTRL;
  Vocab vocab;
  std::uint64_t init_seed = 42;

  int pals_rank() const { return hidden / 4; }
  int head_dim() const { return hidden / heads; }
  void validate() const;  // throws ContractError on violated bounds
};

/// Whitespace-split, hash-bucketed token sequence:
///   [code] title [SEP] abstract [SEP] venue year   (metadata part optional)
/// truncated to max_len and padded with [PAD]. The title must be non-empty;
/// the abstract may be empty. Search queries pass their text as the title.
std::vector<int> tokenize(const Document& doc, ControlCode code, const EncoderConfig& cfg,
                          bool with_metadata = false);

struct ParamEntry {
  std::string name;
  Tensor value;
};

class EncoderModel {
public:
  EncoderConfig cfg;

  Tensor tok_emb;  // [buckets+8, H]
  Tensor pos_emb;  // [max_len, H]

  struct Layer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_g, ln1_b;
    Tensor w1, b1, w2, b2;
    Tensor ln2_g, ln2_b;
  };
  std::vector<Layer> layers;

  /// Bottleneck adapter with its own pre-norm, applied residually after the
  /// FFN sub-block: x + up(gelu(down(LN(x)))).
  struct Adapter {
    Tensor ln_g, ln_b, w_down, b_down, w_up, b_up;
  };
  std::map<TaskFormat, std::vector<Adapter>> adapters;  // [format][layer]

  /// Low-rank parallel attention branch added into the attention sub-block:
  /// LN(x + Attn(x) + up(SA_lowrank(down(x)))). No biases.
  struct Pal {
    Tensor down, up, wq, wk, wv;
  };
  std::map<TaskFormat, std::vector<Pal>> pals;

  /// Per-format attention over the four format adapters' outputs, applied
  /// after each layer: x + sum_g softmax_g(<x Wq, a_g Wk>/sqrt(H)) a_g Wv.
  struct FusionBlock {
    Tensor wq, wk, wv;
  };
  std::map<TaskFormat, std::vector<FusionBlock>> fusion;  // [format][layer]

  /// Trunk only; variant modules are attached separately.
  static EncoderModel build(const EncoderConfig& cfg);

  /// build() followed by attach_adapters with the init-seed stream.
  static EncoderModel build_full(const EncoderConfig& cfg);

  /// All parameters in declared order with stable names. Checkpoints and
  /// hashes follow this order.
  std::vector<ParamEntry> parameters() const;

  bool has_variant_modules() const;
};

/// Adds the config's variant modules (ADAPTER/PALS: per-format stacks;
/// FUSION: adapter stacks plus per-format fusion blocks). CLS_ONLY and CTRL
/// attach nothing. Attaching twice is a state error.
void attach_adapters(EncoderModel& model, Rng& rng);

/// Format-specific trainable parameters: CTRL counts the code embedding row
/// (H); ADAPTER/PALS count the format's stack; FUSION counts the format's
/// fusion blocks plus its adapter stack; CLS_ONLY is 0.
std::size_t param_count(const EncoderModel& model, TaskFormat format);

/// Closed-form counts used to cross-check the runtime counter.
std::size_t adapter_param_count(const EncoderConfig& cfg);
std::size_t pals_param_count(const EncoderConfig& cfg);
std::size_t fusion_param_count(const EncoderConfig& cfg);

/// Encode token sequences to [n,H]; row i is the final hidden state of
/// position 0 for seqs[i], routed through `route`'s adapter path when the
/// variant has one. Trailing [PAD] tokens never influence the result.
Tensor encode_batch(Tape& tape, const EncoderModel& model,
                    const std::vector<std::vector<int>>& seqs, TaskFormat route);

Tensor encode(Tape& tape, const EncoderModel& model, const std::vector<int>& ids,
              TaskFormat route);

/// Inference helpers (no gradients). Lead token: the format's control code
/// under CTRL, [CLS] otherwise. SRCH-format documents append venue/year
/// metadata.
std::vector<double> embed_doc(const EncoderModel& model, const Document& doc, TaskFormat format);
std::vector<double> embed_query(const EncoderModel& model, const std::string& text,
                                TaskFormat format);

/// Embeds every document under `format`'s canonical routing; ids ascending.
EmbeddingMatrix embed_corpus(const EncoderModel& model, const std::vector<Document>& docs,
                             TaskFormat format);

/// Explicit-code variant used by the cross-format analysis: lead with `code`
/// while routing adapters by `route`.
EmbeddingMatrix embed_corpus_coded(const EncoderModel& model, const std::vector<Document>& docs,
                                   ControlCode code, TaskFormat route, bool with_metadata);

/// FNV-1a over all parameter bytes in declared order.
std::uint64_t params_hash(const EncoderModel& model);
std::uint64_t params_hash(const std::vector<ParamEntry>& params);

/// params_hash restricted to one name group: "adapter", "pal", "fusion", or
/// "trunk" (everything else). Freeze contracts compare these across stages.
std::uint64_t param_group_hash(const EncoderModel& model, std::string_view group);

}  // namespace taskvec
