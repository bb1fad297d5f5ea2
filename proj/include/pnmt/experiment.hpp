#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pnmt/bleu.hpp"
#include "pnmt/pipeline.hpp"

namespace pnmt {

// Classic two-step baseline: the top pivot hypotheses re-enter the second
// model as discrete tokens, discarding the distributions. Candidates are
// combined and ranked exactly like cascade_decode's.
CascadeDecodeResult hard_cascade_decode(CascadeModel& cm, std::span<const int> src,
                                        const BeamConfig& pivot_beam, int n_pivot,
                                        const BeamConfig& target_beam, int m_target,
                                        bool target_only_score = false);

// share of decode positions whose chosen token is not its own row's argmax
struct InconsistencyStats {
  int64_t flagged = 0;
  int64_t rows = 0;
  double rate() const { return rows == 0 ? 0.0 : static_cast<double>(flagged) / rows; }
};

enum class SystemKind { direct, hard_pivot, soft_cascade };

// One way of producing target text from test sources. `name` keys the cached
// artifacts: reports/decode-<name>.jsonl and reports/bleu-<name>.json.
struct SystemSpec {
  std::string name;
  SystemKind kind = SystemKind::soft_cascade;
  std::string sp_ckpt = "sp-finetuned";
  std::string pt_ckpt = "pt-finetuned";
  std::string direct_ckpt = "direct";
  BridgeConfig bridge;  // soft cascade only
  BeamConfig pivot_beam, target_beam;
  int n_pivot = 1, m_target = 1;
  bool target_only_score = false;
  int sparsify_k = 0;
};

SystemSpec direct_spec(const PipelineConfig& cfg);
SystemSpec hard_pivot_spec(const PipelineConfig& cfg);  // pretrained halves
// finetuned soft cascade; ckpt_suffix picks a fine-tuning variant
SystemSpec soft_spec(const PipelineConfig& cfg, const std::string& name,
                     const std::string& ckpt_suffix = "-finetuned");

struct SystemEval {
  std::string name;
  BleuReport report;
  int64_t sentences = 0;
  InconsistencyStats inconsistency;  // pivot rows feeding the bridge (soft only)
  bool from_cache = false;
};

// Decodes the run's test set with one system and scores BLEU against the
// target side. Per-sentence records and the summary are written under
// reports/; an existing summary is returned as-is, so re-evaluation is free.
SystemEval evaluate_system(const PipelineConfig& cfg, const SystemSpec& spec,
                           const LogFn& log = {});

// per-seed sibling run directories, <base_out>-s<seed>
std::string seed_out_dir(const std::string& base_out, uint64_t seed);
PipelineConfig config_for_seed(const PipelineConfig& base, uint64_t seed);

// One grid point: every field left unset inherits the base config. Points
// overriding training-time knobs (alpha_train, beta, gamma) fine-tune a
// variant cascade first; all others reuse the run's checkpoints.
struct PointOverrides {
  std::optional<std::string> correction;
  std::optional<double> alpha_decode, alpha_train, beta, gamma, length_penalty;
  std::optional<bool> normalize_after_correction, target_only_score;
  std::optional<int> n_pivot, m_target, pivot_beam, target_beam, sparsify_k;

  bool refits() const { return alpha_train || beta || gamma; }
};

struct ExperimentSpec {
  std::string name;
  std::vector<uint64_t> seeds;
  std::vector<std::pair<std::string, PointOverrides>> points;

  void validate() const;  // nonempty name, seeds, and uniquely named points
};

ExperimentSpec load_experiment_spec(const std::string& path);

struct AblateRow {
  std::string point;
  std::vector<double> bleu_by_seed;
  double mean = 0.0, stdev = 0.0;
};

struct AblateResult {
  std::vector<AblateRow> rows;  // grid order
  std::string tsv_path, table_path;
};

// Evaluates every grid point across the per-seed runs and writes a TSV plus
// an aligned text table under <base_out>-ablate/. Per-seed evaluations are
// cached, so repeated calls return identical results without re-decoding.
// run_missing=false demands existing per-seed runs; true builds them first.
AblateResult ablate(const PipelineConfig& base, const ExperimentSpec& spec,
                    bool run_missing = false, const LogFn& log = {});

// Collates one run's loss curves, score summaries, and inconsistency rates
// into reports/summary.txt; returns the written path.
std::string write_report(const PipelineConfig& cfg, const LogFn& log = {});

}  // namespace pnmt
