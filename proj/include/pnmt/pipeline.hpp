#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "pnmt/cascade.hpp"
#include "pnmt/data.hpp"
#include "pnmt/decode.hpp"
#include "pnmt/train.hpp"
#include "pnmt/transformer.hpp"

namespace pnmt {

using LogFn = std::function<void(const std::string&)>;

// Everything one training-and-evaluation run needs, loadable from a JSON
// config file with flag overrides on top. The run seed drives data
// generation, initialization, batching, and dropout streams.
struct PipelineConfig {
  SyntheticTaskSpec task;  // task.seed follows the run seed
  int64_t n_valid = 200;
  int64_t n_test = 400;

  TransformerConfig model;  // vocabulary sizes are filled in per language pair

  int64_t pretrain_epochs = 2;
  int64_t finetune_epochs = 6;
  int64_t direct_epochs = 6;
  int64_t max_tokens = 2000;
  AdamConfig pretrain_adam{3e-4, 200};
  AdamConfig finetune_adam{3e-5, 100};
  AdamConfig direct_adam{3e-4, 50};

  LossWeights weights;
  BridgeConfig bridge;

  BeamConfig pivot_beam;   // beam 5 defaults
  BeamConfig target_beam;
  int n_pivot = 1;
  int m_target = 1;
  bool target_only_score = false;
  int sparsify_k = 0;  // 0 keeps bridge rows dense

  uint64_t seed = 13;
  std::string out_dir = "run";

  void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const std::string& path, const PipelineConfig& cfg);
// FNV-1a over the canonical serialized form; logged for reproducibility
std::string config_hash(const PipelineConfig& cfg);

// artifact layout under out_dir
std::string corpus_base(const PipelineConfig& cfg, const std::string& name);
std::string checkpoint_path(const PipelineConfig& cfg, const std::string& name);
std::string report_path(const PipelineConfig& cfg, const std::string& name);

// throws a step-naming error when a prerequisite artifact is absent
void require_artifact(const std::string& path, const std::string& step,
                      const std::string& producing_step);

struct PipelineContext {
  SyntheticData train;           // text corpora: src-piv, piv-tgt, src-tgt
  TrilingualCorpus valid, test;  // held-out triples with oracle pivots
  Vocab vsrc, vpiv, vtgt;
};

// which half a pretraining step trains
enum class Pair { sp, pt, direct };
const char* pair_name(Pair pair);

// step 0: corpora, held-out triples, and vocabularies (skipped when present)
void ensure_data(const PipelineConfig& cfg, const LogFn& log = {});
PipelineContext load_pipeline_context(const PipelineConfig& cfg);

// steps 1-2: pretrain one model; writes <name>.ckpt and a loss-curve CSV
void step_pretrain(const PipelineConfig& cfg, Pair pair, const LogFn& log = {});
// step 3: beam-translate the low-resource source side into pivot text
void step_pseudo_pivot(const PipelineConfig& cfg, const LogFn& log = {});
// step 4: connect the halves and check they are compatible
void step_assemble(const PipelineConfig& cfg, const LogFn& log = {});
// step 5: end-to-end fine-tuning of the connected cascade
void step_finetune(const PipelineConfig& cfg, const LogFn& log = {});

// step 5 with different loss weights and/or training-time sharpening, saved
// as sp-finetuned<suffix> / pt-finetuned<suffix>; step_finetune is the
// suffix-free call with the config's own weights
void ensure_finetuned_variant(const PipelineConfig& cfg, const std::string& suffix,
                              const LossWeights& weights, double alpha_train,
                              const LogFn& log = {});

// all steps in order; each one resumes from existing artifacts
void run_pipeline(const PipelineConfig& cfg, const LogFn& log = {});

// loads a checkpoint after verifying it exists, naming the producing step
TransformerModel load_required_checkpoint(const PipelineConfig& cfg, const std::string& name,
                                          const std::string& step,
                                          const std::string& producing_step);

}  // namespace pnmt
