#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pnmt/tape.hpp"
#include "pnmt/tensor.hpp"

namespace pnmt {

struct TransformerConfig {
  int num_layers = 2;
  int64_t d_model = 64;
  int num_heads = 4;
  int64_t d_ff = 128;
  int64_t src_vocab_size = 0;
  int64_t tgt_vocab_size = 0;
  int64_t max_len = 64;
  double dropout_rate = 0.1;
  double label_smoothing = 0.1;

  void validate() const;
  int64_t d_head() const { return d_model / num_heads; }
};

struct LnParams {
  Tensor gain, bias;
};
struct AttnParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};
struct FfnParams {
  Tensor w1, b1, w2, b2;
};
struct EncLayer {
  LnParams ln1;
  AttnParams attn;
  LnParams ln2;
  FfnParams ffn;
};
struct DecLayer {
  LnParams ln1;
  AttnParams self_attn;
  LnParams ln2;
  AttnParams cross_attn;
  LnParams ln3;
  FfnParams ffn;
};

// Pre-norm encoder-decoder transformer. The source embedding matrix doubles
// as the table the soft bridge mixes, so soft and hard encoding share one path.
struct TransformerModel {
  TransformerConfig config;
  Tensor src_embed, tgt_embed;  // [vocab x d_model]
  std::vector<EncLayer> enc;
  LnParams enc_ln;
  std::vector<DecLayer> dec;
  LnParams dec_ln;
  Tensor w_out, b_out;  // [d_model x tgt_vocab], [tgt_vocab]

  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
  int64_t num_params();
  bool all_params_finite();
};

TransformerModel init_model(const TransformerConfig& config, uint64_t seed);

// text header (format version + config as key=value) followed by named
// tensors as "name rank dims..." lines each with raw little-endian float64
void save_checkpoint(const std::string& path, TransformerModel& model);
TransformerModel load_checkpoint(const std::string& path);

Tensor sinusoidal_positions(int64_t len, int64_t d_model);

// Records one model invocation on a tape. Parameters are registered once per
// instance; gradients land in the tape and are folded back by the optimizer.
class TapedTransformer {
 public:
  TapedTransformer(Tape& tape, TransformerModel& model);

  // weights: [L x src_vocab] rows of non-negative mixing coefficients
  Val encode_soft(Val weights);
  Val encode_hard(std::span<const int> tokens);
  // teacher-forced decoder: logits row t sees tgt_in[0..t] and the encoder
  Val decoder_logits(Val enc_states, std::span<const int> tgt_in);

  Val src_embed() const { return src_embed_; }
  // parameter handles in the order visit_params walks the model
  const std::vector<Val>& param_vals() const { return param_vals_; }

 private:
  struct LnVals {
    Val gain, bias;
  };
  struct AttnVals {
    Val wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct FfnVals {
    Val w1, b1, w2, b2;
  };
  struct EncLayerVals {
    LnVals ln1;
    AttnVals attn;
    LnVals ln2;
    FfnVals ffn;
  };
  struct DecLayerVals {
    LnVals ln1;
    AttnVals self_attn;
    LnVals ln2;
    AttnVals cross_attn;
    LnVals ln3;
    FfnVals ffn;
  };
  Val attention(Val q_in, Val kv_in, const AttnVals& p, bool causal);
  Val feed_forward(Val x, const FfnVals& p);
  Val embed_and_place(Val weights, Val table);
  Val encoder_stack(Val x);
  Val ln(Val x, const LnVals& p) { return tape_.layer_norm(x, p.gain, p.bias); }
  Val drop(Val x) { return tape_.dropout(x, cfg_.dropout_rate); }

  Tape& tape_;
  TransformerModel& model_;
  const TransformerConfig& cfg_;
  std::vector<Val> param_vals_;
  Val src_embed_, tgt_embed_, w_out_, b_out_;
  std::vector<EncLayerVals> enc_;
  LnVals enc_ln_;
  std::vector<DecLayerVals> dec_;
  LnVals dec_ln_;
};

// Inference helpers; each call runs on a private no-grad tape.
struct EncoderOutput {
  Tensor states;  // [len x d_model]
  int64_t length() const { return states.shape.empty() ? 0 : states.shape[0]; }
};

EncoderOutput encode(TransformerModel& model, std::span<const int> tokens);
EncoderOutput encode_soft_input(TransformerModel& model, const Tensor& weights);
// softmax over the final logits row given the BOS-prefixed target so far
Tensor decode_step(TransformerModel& model, const EncoderOutput& enc,
                   std::span<const int> prefix);
Tensor teacher_forced_logits(TransformerModel& model, const EncoderOutput& enc,
                             std::span<const int> tgt_in);

}  // namespace pnmt
