#include "pnmt/transformer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "pnmt/data.hpp"
#include "pnmt/rng.hpp"

namespace pnmt {

void TransformerConfig::validate() const {
  if (num_layers < 1) throw std::invalid_argument("config: num_layers must be at least 1");
  if (d_model < 2 || d_model % 2 != 0)
    throw std::invalid_argument("config: d_model must be a positive even number");
  if (num_heads < 1 || d_model % num_heads != 0)
    throw std::invalid_argument("config: d_model " + std::to_string(d_model) +
                                " is not divisible by num_heads " + std::to_string(num_heads));
  if (d_ff < 1) throw std::invalid_argument("config: d_ff must be positive");
  if (src_vocab_size <= kNumReserved || tgt_vocab_size <= kNumReserved)
    throw std::invalid_argument("config: vocabulary sizes must exceed the reserved ids");
  if (max_len < 4) throw std::invalid_argument("config: max_len must be at least 4");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::invalid_argument("config: dropout_rate outside [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("config: label_smoothing outside [0, 1)");
}

namespace {

Tensor make_param(Shape shape) {
  Tensor t(std::move(shape));
  t.requires_grad = true;
  return t;
}

void alloc_ln(LnParams& p, int64_t d) {
  p.gain = make_param({d});
  p.bias = make_param({d});
}

void alloc_attn(AttnParams& p, int64_t d) {
  p.wq = make_param({d, d});
  p.bq = make_param({d});
  p.wk = make_param({d, d});
  p.bk = make_param({d});
  p.wv = make_param({d, d});
  p.bv = make_param({d});
  p.wo = make_param({d, d});
  p.bo = make_param({d});
}

TransformerModel make_model(const TransformerConfig& cfg) {
  cfg.validate();
  TransformerModel m;
  m.config = cfg;
  m.src_embed = make_param({cfg.src_vocab_size, cfg.d_model});
  m.tgt_embed = make_param({cfg.tgt_vocab_size, cfg.d_model});
  m.enc.resize(static_cast<size_t>(cfg.num_layers));
  for (auto& l : m.enc) {
    alloc_ln(l.ln1, cfg.d_model);
    alloc_attn(l.attn, cfg.d_model);
    alloc_ln(l.ln2, cfg.d_model);
    l.ffn.w1 = make_param({cfg.d_model, cfg.d_ff});
    l.ffn.b1 = make_param({cfg.d_ff});
    l.ffn.w2 = make_param({cfg.d_ff, cfg.d_model});
    l.ffn.b2 = make_param({cfg.d_model});
  }
  alloc_ln(m.enc_ln, cfg.d_model);
  m.dec.resize(static_cast<size_t>(cfg.num_layers));
  for (auto& l : m.dec) {
    alloc_ln(l.ln1, cfg.d_model);
    alloc_attn(l.self_attn, cfg.d_model);
    alloc_ln(l.ln2, cfg.d_model);
    alloc_attn(l.cross_attn, cfg.d_model);
    alloc_ln(l.ln3, cfg.d_model);
    l.ffn.w1 = make_param({cfg.d_model, cfg.d_ff});
    l.ffn.b1 = make_param({cfg.d_ff});
    l.ffn.w2 = make_param({cfg.d_ff, cfg.d_model});
    l.ffn.b2 = make_param({cfg.d_model});
  }
  alloc_ln(m.dec_ln, cfg.d_model);
  m.w_out = make_param({cfg.d_model, cfg.tgt_vocab_size});
  m.b_out = make_param({cfg.tgt_vocab_size});
  return m;
}

void visit_ln(const std::string& prefix, LnParams& p,
              const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".gain", p.gain);
  fn(prefix + ".bias", p.bias);
}

void visit_attn(const std::string& prefix, AttnParams& p,
                const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".wq", p.wq);
  fn(prefix + ".bq", p.bq);
  fn(prefix + ".wk", p.wk);
  fn(prefix + ".bk", p.bk);
  fn(prefix + ".wv", p.wv);
  fn(prefix + ".bv", p.bv);
  fn(prefix + ".wo", p.wo);
  fn(prefix + ".bo", p.bo);
}

void visit_ffn(const std::string& prefix, FfnParams& p,
               const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".w1", p.w1);
  fn(prefix + ".b1", p.b1);
  fn(prefix + ".w2", p.w2);
  fn(prefix + ".b2", p.b2);
}

}  // namespace

void TransformerModel::visit_params(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("src_embed", src_embed);
  fn("tgt_embed", tgt_embed);
  for (size_t i = 0; i < enc.size(); ++i) {
    const std::string p = "enc." + std::to_string(i);
    visit_ln(p + ".ln1", enc[i].ln1, fn);
    visit_attn(p + ".attn", enc[i].attn, fn);
    visit_ln(p + ".ln2", enc[i].ln2, fn);
    visit_ffn(p + ".ffn", enc[i].ffn, fn);
  }
  visit_ln("enc_ln", enc_ln, fn);
  for (size_t i = 0; i < dec.size(); ++i) {
    const std::string p = "dec." + std::to_string(i);
    visit_ln(p + ".ln1", dec[i].ln1, fn);
    visit_attn(p + ".self", dec[i].self_attn, fn);
    visit_ln(p + ".ln2", dec[i].ln2, fn);
    visit_attn(p + ".cross", dec[i].cross_attn, fn);
    visit_ln(p + ".ln3", dec[i].ln3, fn);
    visit_ffn(p + ".ffn", dec[i].ffn, fn);
  }
  visit_ln("dec_ln", dec_ln, fn);
  fn("w_out", w_out);
  fn("b_out", b_out);
}

int64_t TransformerModel::num_params() {
  int64_t n = 0;
  visit_params([&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

bool TransformerModel::all_params_finite() {
  bool ok = true;
  visit_params([&](const std::string&, Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

TransformerModel init_model(const TransformerConfig& config, uint64_t seed) {
  TransformerModel m = make_model(config);
  m.visit_params([&](const std::string& name, Tensor& t) {
    Rng rng(derive_seed(seed, name));
    if (name.ends_with(".gain")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (name.ends_with(".bias") || name[0] == 'b' || name.find(".b") != std::string::npos) {
      std::fill(t.data.begin(), t.data.end(), 0.0);
    } else if (name.ends_with("_embed")) {
      // N(0, 1/sqrt(d)) so the sqrt(d) input scaling yields unit variance
      const double std = 1.0 / std::sqrt(static_cast<double>(config.d_model));
      for (auto& x : t.data) x = rng.normal(0.0, std);
    } else {
      // Xavier-uniform over [-sqrt(6/(fan_in+fan_out)), +...]
      const double lim = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (auto& x : t.data) x = rng.uniform(-lim, lim);
    }
  });
  return m;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

void save_checkpoint(const std::string& path, TransformerModel& model) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint format is little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const auto& c = model.config;
  out << "pnmt-checkpoint 1\n";
  out << "num_layers=" << c.num_layers << "\n";
  out << "d_model=" << c.d_model << "\n";
  out << "num_heads=" << c.num_heads << "\n";
  out << "d_ff=" << c.d_ff << "\n";
  out << "src_vocab_size=" << c.src_vocab_size << "\n";
  out << "tgt_vocab_size=" << c.tgt_vocab_size << "\n";
  out << "max_len=" << c.max_len << "\n";
  out << "dropout_rate=" << fmt_double(c.dropout_rate) << "\n";
  out << "label_smoothing=" << fmt_double(c.label_smoothing) << "\n";
  int64_t count = 0;
  model.visit_params([&](const std::string&, Tensor&) { ++count; });
  out << "tensors " << count << "\n";
  model.visit_params([&](const std::string& name, Tensor& t) {
    out << name << " " << t.rank();
    for (int64_t d : t.shape) out << " " << d;
    out << "\n";
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("write failed for checkpoint " + path);
}

TransformerModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "pnmt-checkpoint 1")
    throw std::runtime_error(path + ": not a version-1 checkpoint");

  TransformerConfig c;
  int64_t count = -1;
  while (std::getline(in, line)) {
    if (line.rfind("tensors ", 0) == 0) {
      count = std::stoll(line.substr(8));
      break;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ": malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "num_layers") c.num_layers = std::stoi(val);
    else if (key == "d_model") c.d_model = std::stoll(val);
    else if (key == "num_heads") c.num_heads = std::stoi(val);
    else if (key == "d_ff") c.d_ff = std::stoll(val);
    else if (key == "src_vocab_size") c.src_vocab_size = std::stoll(val);
    else if (key == "tgt_vocab_size") c.tgt_vocab_size = std::stoll(val);
    else if (key == "max_len") c.max_len = std::stoll(val);
    else if (key == "dropout_rate") c.dropout_rate = std::stod(val);
    else if (key == "label_smoothing") c.label_smoothing = std::stod(val);
    else throw std::runtime_error(path + ": unknown header key '" + key + "'");
  }
  if (count < 0) throw std::runtime_error(path + ": missing tensors section");

  TransformerModel m = make_model(c);
  int64_t seen = 0;
  m.visit_params([&](const std::string& name, Tensor& t) {
    std::string header;
    if (!std::getline(in, header))
      throw std::runtime_error(path + ": truncated before tensor " + name);
    std::istringstream hs(header);
    std::string got_name;
    int rank = 0;
    hs >> got_name >> rank;
    if (got_name != name)
      throw std::runtime_error(path + ": expected tensor " + name + ", found " + got_name);
    Shape shape(static_cast<size_t>(rank));
    for (auto& d : shape) hs >> d;
    if (shape != t.shape)
      throw std::runtime_error(path + ": tensor " + name + " has shape " + shape_str(shape) +
                               ", expected " + shape_str(t.shape));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated payload in tensor " + name);
    ++seen;
  });
  if (seen != count)
    throw std::runtime_error(path + ": tensor count mismatch, header says " +
                             std::to_string(count) + ", walked " + std::to_string(seen));
  return m;
}

Tensor sinusoidal_positions(int64_t len, int64_t d_model) {
  Tensor pe({len, d_model});
  for (int64_t pos = 0; pos < len; ++pos)
    for (int64_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

TapedTransformer::TapedTransformer(Tape& tape, TransformerModel& model)
    : tape_(tape), model_(model), cfg_(model.config) {
  auto reg = [&](Tensor& t) {
    Val v = tape_.param(t);
    param_vals_.push_back(v);
    return v;
  };
  src_embed_ = reg(model_.src_embed);
  tgt_embed_ = reg(model_.tgt_embed);
  auto ln_vals = [&](LnParams& p) { return LnVals{reg(p.gain), reg(p.bias)}; };
  auto attn_vals = [&](AttnParams& p) {
    return AttnVals{reg(p.wq), reg(p.bq), reg(p.wk), reg(p.bk),
                    reg(p.wv), reg(p.bv), reg(p.wo), reg(p.bo)};
  };
  auto ffn_vals = [&](FfnParams& p) {
    return FfnVals{reg(p.w1), reg(p.b1), reg(p.w2), reg(p.b2)};
  };
  for (auto& l : model_.enc)
    enc_.push_back({ln_vals(l.ln1), attn_vals(l.attn), ln_vals(l.ln2), ffn_vals(l.ffn)});
  enc_ln_ = ln_vals(model_.enc_ln);
  for (auto& l : model_.dec)
    dec_.push_back({ln_vals(l.ln1), attn_vals(l.self_attn), ln_vals(l.ln2),
                    attn_vals(l.cross_attn), ln_vals(l.ln3), ffn_vals(l.ffn)});
  dec_ln_ = ln_vals(model_.dec_ln);
  w_out_ = tape_.param(model_.w_out);
  b_out_ = tape_.param(model_.b_out);
}

Val TapedTransformer::attention(Val q_in, Val kv_in, const AttnVals& p, bool causal) {
  const int64_t dh = cfg_.d_head();
  Val q = tape_.add_rowvec(tape_.matmul(q_in, p.wq), p.bq);
  Val k = tape_.add_rowvec(tape_.matmul(kv_in, p.wk), p.bk);
  Val v = tape_.add_rowvec(tape_.matmul(kv_in, p.wv), p.bv);
  const int64_t tq = tape_.shape(q)[0], tk = tape_.shape(k)[0];

  Tensor mask;
  if (causal) {
    // additive mask keeps every tensor finite; -1e30 drowns any real logit
    mask = Tensor({tq, tk});
    for (int64_t t = 0; t < tq; ++t)
      for (int64_t s = t + 1; s < tk; ++s) mask.at(t, s) = -1e30;
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Val> heads;
  heads.reserve(static_cast<size_t>(cfg_.num_heads));
  for (int h = 0; h < cfg_.num_heads; ++h) {
    Val qh = tape_.slice_cols(q, h * dh, dh);
    Val kh = tape_.slice_cols(k, h * dh, dh);
    Val vh = tape_.slice_cols(v, h * dh, dh);
    Val scores = tape_.mul_scalar(tape_.matmul_nt(qh, kh), scale);
    if (causal) scores = tape_.add_const(scores, mask);
    heads.push_back(tape_.matmul(tape_.softmax_rows(scores), vh));
  }
  Val ctx = tape_.concat_cols(heads);
  return tape_.add_rowvec(tape_.matmul(ctx, p.wo), p.bo);
}

Val TapedTransformer::feed_forward(Val x, const FfnVals& p) {
  Val h = tape_.relu(tape_.add_rowvec(tape_.matmul(x, p.w1), p.b1));
  return tape_.add_rowvec(tape_.matmul(h, p.w2), p.b2);
}

Val TapedTransformer::embed_and_place(Val weights, Val table) {
  const int64_t len = tape_.shape(weights)[0];
  if (len > cfg_.max_len)
    throw std::length_error("sequence of " + std::to_string(len) + " exceeds max_len " +
                            std::to_string(cfg_.max_len));
  Val x = tape_.mul_scalar(tape_.matmul(weights, table),
                           std::sqrt(static_cast<double>(cfg_.d_model)));
  x = tape_.add_const(x, sinusoidal_positions(len, cfg_.d_model));
  return drop(x);
}

Val TapedTransformer::encoder_stack(Val x) {
  for (const auto& l : enc_) {
    Val n1 = ln(x, l.ln1);
    x = tape_.add(x, drop(attention(n1, n1, l.attn, false)));
    Val n2 = ln(x, l.ln2);
    x = tape_.add(x, drop(feed_forward(n2, l.ffn)));
  }
  return ln(x, enc_ln_);
}

Val TapedTransformer::encode_soft(Val weights) {
  if (tape_.shape(weights).size() != 2 || tape_.shape(weights)[1] != cfg_.src_vocab_size)
    throw std::invalid_argument("encode_soft: weights " + shape_str(tape_.shape(weights)) +
                                " do not match source vocabulary " +
                                std::to_string(cfg_.src_vocab_size));
  for (double w : tape_.data(weights))
    if (w < 0.0) throw std::invalid_argument("encode_soft: negative mixing weight");
  return encoder_stack(embed_and_place(weights, src_embed_));
}

Val TapedTransformer::encode_hard(std::span<const int> tokens) {
  Val onehot = tape_.leaf(one_hot_rows(tokens, cfg_.src_vocab_size));
  return encoder_stack(embed_and_place(onehot, src_embed_));
}

Val TapedTransformer::decoder_logits(Val enc_states, std::span<const int> tgt_in) {
  Val onehot = tape_.leaf(one_hot_rows(tgt_in, cfg_.tgt_vocab_size));
  Val x = embed_and_place(onehot, tgt_embed_);
  for (const auto& l : dec_) {
    Val n1 = ln(x, l.ln1);
    x = tape_.add(x, drop(attention(n1, n1, l.self_attn, true)));
    Val n2 = ln(x, l.ln2);
    x = tape_.add(x, drop(attention(n2, enc_states, l.cross_attn, false)));
    Val n3 = ln(x, l.ln3);
    x = tape_.add(x, drop(feed_forward(n3, l.ffn)));
  }
  x = ln(x, dec_ln_);
  return tape_.add_rowvec(tape_.matmul(x, w_out_), b_out_);
}

EncoderOutput encode(TransformerModel& model, std::span<const int> tokens) {
  Tape tape(0, false, false);
  TapedTransformer tt(tape, model);
  return {tape.tensor(tt.encode_hard(tokens))};
}

EncoderOutput encode_soft_input(TransformerModel& model, const Tensor& weights) {
  Tape tape(0, false, false);
  TapedTransformer tt(tape, model);
  return {tape.tensor(tt.encode_soft(tape.leaf(weights)))};
}

Tensor decode_step(TransformerModel& model, const EncoderOutput& enc,
                   std::span<const int> prefix) {
  if (prefix.empty() || prefix[0] != kBosId)
    throw std::invalid_argument("decode_step: prefix must start with BOS");
  if (static_cast<int64_t>(prefix.size()) > model.config.max_len)
    throw std::length_error("decode_step: prefix of " + std::to_string(prefix.size()) +
                            " exceeds max_len " + std::to_string(model.config.max_len));
  Tape tape(0, false, false);
  TapedTransformer tt(tape, model);
  Val logits = tt.decoder_logits(tape.leaf(enc.states), prefix);
  Val probs = tape.softmax_rows(logits);
  const int64_t rows = tape.shape(probs)[0], vocab = tape.shape(probs)[1];
  Tensor out({vocab});
  auto d = tape.data(probs);
  std::copy_n(d.data() + (rows - 1) * vocab, vocab, out.data.begin());
  return out;
}

Tensor teacher_forced_logits(TransformerModel& model, const EncoderOutput& enc,
                             std::span<const int> tgt_in) {
  Tape tape(0, false, false);
  TapedTransformer tt(tape, model);
  return tape.tensor(tt.decoder_logits(tape.leaf(enc.states), tgt_in));
}

}  // namespace pnmt
