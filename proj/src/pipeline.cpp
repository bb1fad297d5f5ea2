#include "pnmt/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>

#include "json.hpp"
#include "pnmt/rng.hpp"

namespace pnmt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const char* object,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known) {
      std::string valid;
      for (const char* a : allowed) {
        if (!valid.empty()) valid += ", ";
        valid += a;
      }
      throw std::runtime_error("config: unknown key '" + item.key() + "' in " + object +
                               " (valid: " + valid + ")");
    }
  }
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["data"] = {{"latent_vocab", c.task.latent_vocab},
               {"len_min", c.task.len_min},
               {"len_max", c.task.len_max},
               {"shift_sp", c.task.shift_sp},
               {"shift_pt", c.task.shift_pt},
               {"reverse_target", c.task.reverse_target},
               {"n_src_piv", c.task.n_src_piv},
               {"n_piv_tgt", c.task.n_piv_tgt},
               {"n_src_tgt", c.task.n_src_tgt},
               {"n_valid", c.n_valid},
               {"n_test", c.n_test}};
  j["model"] = {{"num_layers", c.model.num_layers},
                {"d_model", c.model.d_model},
                {"num_heads", c.model.num_heads},
                {"d_ff", c.model.d_ff},
                {"max_len", c.model.max_len},
                {"dropout", c.model.dropout_rate},
                {"label_smoothing", c.model.label_smoothing}};
  j["pretrain"] = {{"epochs", c.pretrain_epochs},
                   {"peak_lr", c.pretrain_adam.peak_lr},
                   {"warmup_steps", c.pretrain_adam.warmup_steps}};
  j["finetune"] = {{"epochs", c.finetune_epochs},
                   {"peak_lr", c.finetune_adam.peak_lr},
                   {"warmup_steps", c.finetune_adam.warmup_steps}};
  j["direct"] = {{"epochs", c.direct_epochs},
                 {"peak_lr", c.direct_adam.peak_lr},
                 {"warmup_steps", c.direct_adam.warmup_steps}};
  j["max_tokens"] = c.max_tokens;
  j["weights"] = {{"beta", c.weights.beta}, {"gamma", c.weights.gamma}};
  j["bridge"] = {{"alpha_train", c.bridge.alpha_train},
                 {"alpha_decode", c.bridge.alpha_decode},
                 {"correction", to_string(c.bridge.correction)},
                 {"normalize_after_correction", c.bridge.normalize_after_correction}};
  j["decode"] = {{"pivot_beam", c.pivot_beam.beam_size},
                 {"target_beam", c.target_beam.beam_size},
                 {"n_pivot", c.n_pivot},
                 {"m_target", c.m_target},
                 {"length_penalty", c.pivot_beam.length_penalty},
                 {"max_len", c.pivot_beam.max_len},
                 {"target_only_score", c.target_only_score},
                 {"sparsify_k", c.sparsify_k}};
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  check_keys(j, "config",
             {"seed", "out_dir", "data", "model", "pretrain", "finetune", "direct",
              "max_tokens", "weights", "bridge", "decode"});
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"latent_vocab", "len_min", "len_max", "shift_sp", "shift_pt", "reverse_target",
                "n_src_piv", "n_piv_tgt", "n_src_tgt", "n_valid", "n_test"});
    c.task.latent_vocab = d.value("latent_vocab", c.task.latent_vocab);
    c.task.len_min = d.value("len_min", c.task.len_min);
    c.task.len_max = d.value("len_max", c.task.len_max);
    c.task.shift_sp = d.value("shift_sp", c.task.shift_sp);
    c.task.shift_pt = d.value("shift_pt", c.task.shift_pt);
    c.task.reverse_target = d.value("reverse_target", c.task.reverse_target);
    c.task.n_src_piv = d.value("n_src_piv", c.task.n_src_piv);
    c.task.n_piv_tgt = d.value("n_piv_tgt", c.task.n_piv_tgt);
    c.task.n_src_tgt = d.value("n_src_tgt", c.task.n_src_tgt);
    c.n_valid = d.value("n_valid", c.n_valid);
    c.n_test = d.value("n_test", c.n_test);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"num_layers", "d_model", "num_heads", "d_ff", "max_len", "dropout",
                "label_smoothing"});
    c.model.num_layers = m.value("num_layers", c.model.num_layers);
    c.model.d_model = m.value("d_model", c.model.d_model);
    c.model.num_heads = m.value("num_heads", c.model.num_heads);
    c.model.d_ff = m.value("d_ff", c.model.d_ff);
    c.model.max_len = m.value("max_len", c.model.max_len);
    c.model.dropout_rate = m.value("dropout", c.model.dropout_rate);
    c.model.label_smoothing = m.value("label_smoothing", c.model.label_smoothing);
  }
  auto schedule = [&](const char* key, int64_t& epochs, AdamConfig& adam) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    check_keys(s, key, {"epochs", "peak_lr", "warmup_steps"});
    epochs = s.value("epochs", epochs);
    adam.peak_lr = s.value("peak_lr", adam.peak_lr);
    adam.warmup_steps = s.value("warmup_steps", adam.warmup_steps);
  };
  schedule("pretrain", c.pretrain_epochs, c.pretrain_adam);
  schedule("finetune", c.finetune_epochs, c.finetune_adam);
  schedule("direct", c.direct_epochs, c.direct_adam);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    check_keys(w, "weights", {"beta", "gamma"});
    c.weights.beta = w.value("beta", c.weights.beta);
    c.weights.gamma = w.value("gamma", c.weights.gamma);
  }
  if (j.contains("bridge")) {
    const json& b = j.at("bridge");
    check_keys(b, "bridge",
               {"alpha_train", "alpha_decode", "correction", "normalize_after_correction"});
    c.bridge.alpha_train = b.value("alpha_train", c.bridge.alpha_train);
    c.bridge.alpha_decode = b.value("alpha_decode", c.bridge.alpha_decode);
    if (b.contains("correction"))
      c.bridge.correction = correction_from_string(b.at("correction").get<std::string>());
    c.bridge.normalize_after_correction =
        b.value("normalize_after_correction", c.bridge.normalize_after_correction);
  }
  if (j.contains("decode")) {
    const json& d = j.at("decode");
    check_keys(d, "decode",
               {"pivot_beam", "target_beam", "n_pivot", "m_target", "length_penalty", "max_len",
                "target_only_score", "sparsify_k"});
    c.pivot_beam.beam_size = d.value("pivot_beam", c.pivot_beam.beam_size);
    c.target_beam.beam_size = d.value("target_beam", c.target_beam.beam_size);
    c.n_pivot = d.value("n_pivot", c.n_pivot);
    c.m_target = d.value("m_target", c.m_target);
    c.pivot_beam.length_penalty = d.value("length_penalty", c.pivot_beam.length_penalty);
    c.target_beam.length_penalty = c.pivot_beam.length_penalty;
    c.pivot_beam.max_len = d.value("max_len", c.pivot_beam.max_len);
    c.target_beam.max_len = c.pivot_beam.max_len;
    c.target_only_score = d.value("target_only_score", c.target_only_score);
    c.sparsify_k = d.value("sparsify_k", c.sparsify_k);
  }
  return c;
}

SyntheticTaskSpec effective_task(const PipelineConfig& cfg) {
  SyntheticTaskSpec task = cfg.task;
  task.seed = cfg.seed;
  return task;
}

LogFn prefixed(const LogFn& log, std::string prefix) {
  if (!log) return {};
  return [log, prefix = std::move(prefix)](const std::string& line) { log(prefix + line); };
}

void write_curve_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,train_loss,valid_loss,lr\n";
  char buf[160];
  for (const auto& st : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(st.epoch), st.train_loss, st.valid_loss, st.lr);
    out << buf;
  }
}

void write_finetune_csv(const std::string& path, const std::vector<FinetuneEpoch>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,pivot_loss,target_loss,total_loss,valid_bleu,valid_loss,lr\n";
  char buf[240];
  for (const auto& st : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(st.epoch), st.pivot_loss, st.target_loss, st.total_loss,
                  st.valid_bleu, st.valid_loss, st.lr);
    out << buf;
  }
}

std::vector<TrilingualExample> tokenize_triples(const TrilingualCorpus& corpus, const Vocab& vsrc,
                                                const Vocab& vpiv, const Vocab& vtgt) {
  std::vector<TrilingualExample> out;
  out.reserve(static_cast<size_t>(corpus.size()));
  for (int64_t i = 0; i < corpus.size(); ++i) {
    TrilingualExample ex;
    ex.src = vsrc.encode(corpus.src[static_cast<size_t>(i)]);
    ex.piv = vpiv.encode(corpus.piv[static_cast<size_t>(i)]);
    ex.tgt = vtgt.encode(corpus.tgt[static_cast<size_t>(i)]);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  task.validate();
  if (n_valid < 1 || n_test < 1)
    throw std::invalid_argument("held-out corpus sizes must be positive");
  TransformerConfig probe = model;
  probe.src_vocab_size = probe.tgt_vocab_size = kNumReserved + 1;
  probe.validate();
  if (pretrain_epochs < 1 || finetune_epochs < 1 || direct_epochs < 1)
    throw std::invalid_argument("epoch counts must be at least 1");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
  pretrain_adam.validate();
  finetune_adam.validate();
  direct_adam.validate();
  weights.validate();
  bridge.validate();
  pivot_beam.validate();
  target_beam.validate();
  if (n_pivot < 1 || n_pivot > pivot_beam.beam_size)
    throw std::invalid_argument("n_pivot must lie in [1, pivot beam size]");
  if (m_target < 1 || m_target > target_beam.beam_size)
    throw std::invalid_argument("m_target must lie in [1, target beam size]");
  if (sparsify_k < 0) throw std::invalid_argument("sparsify_k must be non-negative");
  if (out_dir.empty()) throw std::invalid_argument("out_dir must be set");
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  PipelineConfig cfg = config_from_json(j);
  cfg.validate();
  return cfg;
}

void save_pipeline_config(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << config_to_json(cfg).dump(2) << '\n';
}

std::string config_hash(const PipelineConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("seed");     // logged separately
  j.erase("out_dir");  // location, not configuration
  const std::string dump = j.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string corpus_base(const PipelineConfig& cfg, const std::string& name) {
  return cfg.out_dir + "/corpora/" + name;
}

std::string checkpoint_path(const PipelineConfig& cfg, const std::string& name) {
  return cfg.out_dir + "/checkpoints/" + name + ".ckpt";
}

std::string report_path(const PipelineConfig& cfg, const std::string& name) {
  return cfg.out_dir + "/reports/" + name;
}

void require_artifact(const std::string& path, const std::string& step,
                      const std::string& producing_step) {
  if (!fs::exists(path))
    throw std::runtime_error("step '" + step + "' requires " + path + "; run step '" +
                             producing_step + "' first");
}

const char* pair_name(Pair pair) {
  switch (pair) {
    case Pair::sp: return "sp";
    case Pair::pt: return "pt";
    default: return "direct";
  }
}

void ensure_data(const PipelineConfig& cfg, const LogFn& log) {
  fs::create_directories(cfg.out_dir + "/corpora");
  fs::create_directories(cfg.out_dir + "/checkpoints");
  fs::create_directories(cfg.out_dir + "/reports");

  const std::vector<std::string> files = {
      corpus_base(cfg, "train-sp") + ".src", corpus_base(cfg, "train-sp") + ".tgt",
      corpus_base(cfg, "train-pt") + ".src", corpus_base(cfg, "train-pt") + ".tgt",
      corpus_base(cfg, "train-st") + ".src", corpus_base(cfg, "train-st") + ".tgt",
      corpus_base(cfg, "valid") + ".src",    corpus_base(cfg, "valid") + ".piv",
      corpus_base(cfg, "valid") + ".tgt",    corpus_base(cfg, "test") + ".src",
      corpus_base(cfg, "test") + ".piv",     corpus_base(cfg, "test") + ".tgt",
      corpus_base(cfg, "vocab-src"),         corpus_base(cfg, "vocab-piv"),
      corpus_base(cfg, "vocab-tgt")};
  bool all = true;
  for (const auto& f : files) all = all && fs::exists(f);
  if (all) {
    if (log) log("gen-data: found existing corpora under " + cfg.out_dir + ", skipping");
    return;
  }

  const SyntheticTaskSpec task = effective_task(cfg);
  SyntheticData data = generate_synthetic(task);
  SyntheticTask sampler(task);
  TrilingualCorpus valid = sampler.sample_triples(cfg.n_valid, derive_seed(cfg.seed, "valid"));
  TrilingualCorpus test = sampler.sample_triples(cfg.n_test, derive_seed(cfg.seed, "test"));

  write_parallel(corpus_base(cfg, "train-sp"), data.src_piv);
  write_parallel(corpus_base(cfg, "train-pt"), data.piv_tgt);
  write_parallel(corpus_base(cfg, "train-st"), data.src_tgt);
  write_trilingual(corpus_base(cfg, "valid"), valid);
  write_trilingual(corpus_base(cfg, "test"), test);

  const std::vector<std::string>* src_sides[] = {&data.src_piv.src, &data.src_tgt.src};
  const std::vector<std::string>* piv_sides[] = {&data.src_piv.tgt, &data.piv_tgt.src};
  const std::vector<std::string>* tgt_sides[] = {&data.piv_tgt.tgt, &data.src_tgt.tgt};
  Vocab vsrc = build_vocab(src_sides);
  Vocab vpiv = build_vocab(piv_sides);
  Vocab vtgt = build_vocab(tgt_sides);
  vsrc.save(corpus_base(cfg, "vocab-src"));
  vpiv.save(corpus_base(cfg, "vocab-piv"));
  vtgt.save(corpus_base(cfg, "vocab-tgt"));

  if (log)
    log("gen-data: wrote " + std::to_string(data.src_piv.size()) + "/" +
        std::to_string(data.piv_tgt.size()) + "/" + std::to_string(data.src_tgt.size()) +
        " training pairs, " + std::to_string(valid.size()) + " valid and " +
        std::to_string(test.size()) + " test triples");
}

PipelineContext load_pipeline_context(const PipelineConfig& cfg) {
  require_artifact(corpus_base(cfg, "vocab-tgt"), "load-data", "gen-data");
  PipelineContext ctx;
  ctx.train.src_piv = read_parallel(corpus_base(cfg, "train-sp"));
  ctx.train.piv_tgt = read_parallel(corpus_base(cfg, "train-pt"));
  ctx.train.src_tgt = read_parallel(corpus_base(cfg, "train-st"));
  ctx.valid = read_trilingual(corpus_base(cfg, "valid"));
  ctx.test = read_trilingual(corpus_base(cfg, "test"));
  ctx.vsrc = Vocab::load(corpus_base(cfg, "vocab-src"));
  ctx.vpiv = Vocab::load(corpus_base(cfg, "vocab-piv"));
  ctx.vtgt = Vocab::load(corpus_base(cfg, "vocab-tgt"));
  return ctx;
}

void step_pretrain(const PipelineConfig& cfg, Pair pair, const LogFn& log) {
  const std::string name =
      pair == Pair::sp ? "sp-pretrained" : pair == Pair::pt ? "pt-pretrained" : "direct";
  const std::string step = std::string("pretrain-") + pair_name(pair);
  const std::string ckpt = checkpoint_path(cfg, name);
  if (fs::exists(ckpt)) {
    if (log) log(step + ": found " + ckpt + ", skipping");
    return;
  }
  PipelineContext ctx = load_pipeline_context(cfg);

  const ParallelCorpus* corpus = nullptr;
  const Vocab *sv = nullptr, *tv = nullptr;
  ParallelCorpus valid_pairs;
  switch (pair) {
    case Pair::sp:
      corpus = &ctx.train.src_piv;
      sv = &ctx.vsrc;
      tv = &ctx.vpiv;
      valid_pairs = {ctx.valid.src, ctx.valid.piv};
      break;
    case Pair::pt:
      corpus = &ctx.train.piv_tgt;
      sv = &ctx.vpiv;
      tv = &ctx.vtgt;
      valid_pairs = {ctx.valid.piv, ctx.valid.tgt};
      break;
    default:
      corpus = &ctx.train.src_tgt;
      sv = &ctx.vsrc;
      tv = &ctx.vtgt;
      valid_pairs = {ctx.valid.src, ctx.valid.tgt};
      break;
  }

  TransformerConfig mc = cfg.model;
  mc.src_vocab_size = sv->size();
  mc.tgt_vocab_size = tv->size();
  TransformerModel model = init_model(mc, derive_seed(cfg.seed, "init-" + name));

  TrainConfig tc;
  tc.epochs = pair == Pair::direct ? cfg.direct_epochs : cfg.pretrain_epochs;
  tc.max_tokens = cfg.max_tokens;
  tc.adam = pair == Pair::direct ? cfg.direct_adam : cfg.pretrain_adam;
  tc.seed = derive_seed(cfg.seed, "train-" + name);
  tc.log = prefixed(log, step + ": ");

  TrainResult result = train_model(model, tokenize_pairs(*corpus, *sv, *tv),
                                   tokenize_pairs(valid_pairs, *sv, *tv), tc);
  save_checkpoint(ckpt, model);
  write_curve_csv(report_path(cfg, step + ".csv"), result.curve);
  if (log)
    log(step + ": saved " + ckpt + " (best epoch " + std::to_string(result.best_epoch) +
        ", valid " + std::to_string(result.best_valid_loss) + ")");
}

TransformerModel load_required_checkpoint(const PipelineConfig& cfg, const std::string& name,
                                          const std::string& step,
                                          const std::string& producing_step) {
  const std::string path = checkpoint_path(cfg, name);
  require_artifact(path, step, producing_step);
  return load_checkpoint(path);
}

void step_pseudo_pivot(const PipelineConfig& cfg, const LogFn& log) {
  const std::string base = corpus_base(cfg, "pseudo");
  if (fs::exists(base + ".src") && fs::exists(base + ".piv") && fs::exists(base + ".tgt")) {
    if (log) log("pseudo-pivot: found " + base + ".*, skipping");
    return;
  }
  TransformerModel sp =
      load_required_checkpoint(cfg, "sp-pretrained", "pseudo-pivot", "pretrain-sp");
  PipelineContext ctx = load_pipeline_context(cfg);
  TrilingualCorpus tri = generate_pseudo_pivot(sp, ctx.train.src_tgt, ctx.vsrc, ctx.vpiv,
                                               cfg.pivot_beam, prefixed(log, "pseudo-pivot: "));
  write_trilingual(base, tri);
  if (log)
    log("pseudo-pivot: wrote " + std::to_string(tri.size()) + " triples to " + base + ".*");
}

void step_assemble(const PipelineConfig& cfg, const LogFn& log) {
  CascadeModel cm;
  cm.sp = load_required_checkpoint(cfg, "sp-pretrained", "assemble", "pretrain-sp");
  cm.pt = load_required_checkpoint(cfg, "pt-pretrained", "assemble", "pretrain-pt");
  cm.bridge = cfg.bridge;
  cm.validate();
  if (log)
    log("assemble: cascade compatible (" + std::to_string(cm.sp.num_params()) + " + " +
        std::to_string(cm.pt.num_params()) + " parameters, shared pivot vocabulary of " +
        std::to_string(cm.sp.config.tgt_vocab_size) + ")");
}

void step_finetune(const PipelineConfig& cfg, const LogFn& log) {
  ensure_finetuned_variant(cfg, "", cfg.weights, cfg.bridge.alpha_train, log);
}

void ensure_finetuned_variant(const PipelineConfig& cfg, const std::string& suffix,
                              const LossWeights& weights, double alpha_train,
                              const LogFn& log) {
  const std::string step = "finetune" + suffix;
  const std::string sp_ckpt = checkpoint_path(cfg, "sp-finetuned" + suffix);
  const std::string pt_ckpt = checkpoint_path(cfg, "pt-finetuned" + suffix);
  if (fs::exists(sp_ckpt) && fs::exists(pt_ckpt)) {
    if (log) log(step + ": found " + sp_ckpt + " and " + pt_ckpt + ", skipping");
    return;
  }
  require_artifact(corpus_base(cfg, "pseudo") + ".piv", step, "pseudo-pivot");

  CascadeModel cm;
  cm.sp = load_required_checkpoint(cfg, "sp-pretrained", step, "pretrain-sp");
  cm.pt = load_required_checkpoint(cfg, "pt-pretrained", step, "pretrain-pt");
  cm.bridge = cfg.bridge;
  cm.bridge.alpha_train = alpha_train;

  PipelineContext ctx = load_pipeline_context(cfg);
  TrilingualCorpus pseudo = read_trilingual(corpus_base(cfg, "pseudo"));
  std::vector<TrilingualExample> triples =
      tokenize_triples(pseudo, ctx.vsrc, ctx.vpiv, ctx.vtgt);
  TokenizedPairs valid_tok =
      tokenize_pairs({ctx.valid.src, ctx.valid.tgt}, ctx.vsrc, ctx.vtgt);

  FinetuneConfig fc;
  fc.epochs = cfg.finetune_epochs;
  fc.max_tokens = cfg.max_tokens;
  fc.adam = cfg.finetune_adam;
  fc.weights = weights;
  fc.seed = derive_seed(cfg.seed, "finetune");
  fc.log = prefixed(log, step + ": ");

  FinetuneResult result = finetune(cm, triples, valid_tok, ctx.vtgt, fc);
  save_checkpoint(sp_ckpt, cm.sp);
  save_checkpoint(pt_ckpt, cm.pt);
  write_finetune_csv(report_path(cfg, step + ".csv"), result.curve);
  if (log)
    log(step + ": saved " + sp_ckpt + " and " + pt_ckpt + " (best epoch " +
        std::to_string(result.best_epoch) + ", valid BLEU " +
        std::to_string(result.best_bleu) + ")");
}

void run_pipeline(const PipelineConfig& cfg, const LogFn& log) {
  cfg.validate();
  if (log) log("pipeline: config " + config_hash(cfg) + " seed " + std::to_string(cfg.seed));
  ensure_data(cfg, log);
  step_pretrain(cfg, Pair::sp, log);
  step_pretrain(cfg, Pair::pt, log);
  step_pretrain(cfg, Pair::direct, log);
  step_pseudo_pivot(cfg, log);
  step_assemble(cfg, log);
  step_finetune(cfg, log);
}

}  // namespace pnmt
