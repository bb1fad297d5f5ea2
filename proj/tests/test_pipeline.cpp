#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pnmt/experiment.hpp"
#include "pnmt/pipeline.hpp"

using namespace pnmt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pnmt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

// a configuration small enough to run every pipeline step in well under a second
PipelineConfig mini_config(const std::string& out_dir, uint64_t seed = 5) {
  PipelineConfig cfg;
  cfg.task.latent_vocab = 6;
  cfg.task.len_min = 2;
  cfg.task.len_max = 4;
  cfg.task.n_src_piv = 60;
  cfg.task.n_piv_tgt = 60;
  cfg.task.n_src_tgt = 20;
  cfg.n_valid = 6;
  cfg.n_test = 8;
  cfg.model.num_layers = 1;
  cfg.model.d_model = 16;
  cfg.model.num_heads = 2;
  cfg.model.d_ff = 32;
  cfg.model.max_len = 8;
  cfg.model.dropout_rate = 0.0;
  cfg.pretrain_epochs = 1;
  cfg.finetune_epochs = 1;
  cfg.direct_epochs = 1;
  cfg.max_tokens = 400;
  cfg.pretrain_adam = AdamConfig{3e-4, 10};
  cfg.finetune_adam = AdamConfig{1e-4, 10};
  cfg.direct_adam = AdamConfig{3e-4, 10};
  cfg.pivot_beam.beam_size = 2;
  cfg.target_beam.beam_size = 2;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config files round-trip through save and load") {
  TempDir tmp;
  PipelineConfig cfg = mini_config(tmp.str("run"), 42);
  cfg.weights.beta = 0.5;
  cfg.bridge.alpha_train = 1.5;
  cfg.bridge.correction = CorrectionMode::add1;
  cfg.n_pivot = 2;
  const std::string path = tmp.str("cfg.json");
  save_pipeline_config(path, cfg);
  PipelineConfig back = load_pipeline_config(path);
  CHECK(back.seed == cfg.seed);
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(back.task.latent_vocab == cfg.task.latent_vocab);
  CHECK(back.task.n_src_tgt == cfg.task.n_src_tgt);
  CHECK(back.model.d_model == cfg.model.d_model);
  CHECK(back.pretrain_epochs == cfg.pretrain_epochs);
  CHECK(back.weights.beta == cfg.weights.beta);
  CHECK(back.bridge.alpha_train == cfg.bridge.alpha_train);
  CHECK(back.bridge.correction == CorrectionMode::add1);
  CHECK(back.n_pivot == 2);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config hash tracks settings but not seed or location") {
  TempDir tmp;
  PipelineConfig a = mini_config(tmp.str("run-a"), 1);
  PipelineConfig b = mini_config(tmp.str("run-b"), 2);
  // different seed and different out_dir: same experiment
  CHECK(config_hash(a) == config_hash(b));
  PipelineConfig c = a;
  c.weights.beta = 0.25;
  CHECK(config_hash(c) != config_hash(a));
  PipelineConfig d = a;
  d.bridge.alpha_decode = 2.0;
  CHECK(config_hash(d) != config_hash(a));
}

TEST_CASE("loading a config with unknown keys fails and names valid ones") {
  TempDir tmp;
  const std::string path = tmp.str("bad.json");
  std::ofstream(path) << R"({"seed": 3, "modle": {"d_model": 16}})";
  CHECK_THROWS_WITH_AS(load_pipeline_config(path), doctest::Contains("modle"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_pipeline_config(path), doctest::Contains("valid:"),
                       std::runtime_error);
  std::ofstream(tmp.str("bad2.json")) << R"({"model": {"d_modle": 16}})";
  CHECK_THROWS_WITH_AS(load_pipeline_config(tmp.str("bad2.json")),
                       doctest::Contains("d_modle"), std::runtime_error);
}

TEST_CASE("data generation is deterministic and resumable") {
  TempDir tmp;
  PipelineConfig a = mini_config(tmp.str("one"));
  PipelineConfig b = mini_config(tmp.str("two"));
  std::vector<std::string> log_a, log_b;
  ensure_data(a, [&](const std::string& m) { log_a.push_back(m); });
  ensure_data(b, [&](const std::string& m) { log_b.push_back(m); });
  CHECK(slurp(corpus_base(a, "train-sp") + ".src") == slurp(corpus_base(b, "train-sp") + ".src"));
  CHECK(slurp(corpus_base(a, "test") + ".tgt") == slurp(corpus_base(b, "test") + ".tgt"));
  CHECK(slurp(corpus_base(a, "valid") + ".piv") == slurp(corpus_base(b, "valid") + ".piv"));

  // second invocation finds everything in place
  std::vector<std::string> again;
  ensure_data(a, [&](const std::string& m) { again.push_back(m); });
  REQUIRE(again.size() == 1);
  CHECK(again[0].find("skipping") != std::string::npos);

  PipelineContext ctx = load_pipeline_context(a);
  CHECK(ctx.train.src_piv.size() == 60);
  CHECK(ctx.train.src_tgt.size() == 20);
  CHECK(ctx.valid.size() == 6);
  CHECK(ctx.test.size() == 8);
  CHECK(ctx.vsrc.size() > kNumReserved);
}

TEST_CASE("missing prerequisites fail with the producing step named") {
  TempDir tmp;
  PipelineConfig cfg = mini_config(tmp.str("run"));
  CHECK_THROWS_WITH_AS(step_pseudo_pivot(cfg), doctest::Contains("pretrain-sp"),
                       std::runtime_error);
  ensure_data(cfg);
  CHECK_THROWS_WITH_AS(step_pseudo_pivot(cfg), doctest::Contains("pretrain-sp"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(evaluate_system(cfg, hard_pivot_spec(cfg)),
                       doctest::Contains("pretrain"), std::runtime_error);
}

TEST_CASE("the full pipeline runs, resumes, and evaluates from caches") {
  TempDir tmp;
  PipelineConfig cfg = mini_config(tmp.str("run"));
  run_pipeline(cfg);
  CHECK(fs::exists(checkpoint_path(cfg, "sp-pretrained")));
  CHECK(fs::exists(checkpoint_path(cfg, "pt-pretrained")));
  CHECK(fs::exists(checkpoint_path(cfg, "direct")));
  CHECK(fs::exists(checkpoint_path(cfg, "sp-finetuned")));
  CHECK(fs::exists(checkpoint_path(cfg, "pt-finetuned")));
  CHECK(fs::exists(corpus_base(cfg, "pseudo") + ".piv"));

  // a second pass skips every step
  std::vector<std::string> log;
  run_pipeline(cfg, [&](const std::string& m) { log.push_back(m); });
  int skips = 0;
  for (const auto& m : log)
    if (m.find("skipping") != std::string::npos) ++skips;
  CHECK(skips >= 5);

  // evaluations hit the decode path once and the cache afterwards
  SystemEval direct1 = evaluate_system(cfg, direct_spec(cfg));
  CHECK_FALSE(direct1.from_cache);
  SystemEval direct2 = evaluate_system(cfg, direct_spec(cfg));
  CHECK(direct2.from_cache);
  CHECK(direct2.report.bleu == doctest::Approx(direct1.report.bleu).epsilon(1e-12));
  CHECK(direct2.sentences == direct1.sentences);

  SystemEval pivot = evaluate_system(cfg, hard_pivot_spec(cfg));
  SystemEval ours = evaluate_system(cfg, soft_spec(cfg, "ours"));
  CHECK(pivot.sentences == cfg.n_test);
  CHECK(ours.sentences == cfg.n_test);
  CHECK(ours.inconsistency.rows > 0);
  CHECK(fs::exists(report_path(cfg, "decode-ours") + ".jsonl"));
  CHECK(fs::exists(report_path(cfg, "bleu-ours") + ".json"));

  // the collated report mentions the evaluated systems
  write_report(cfg);
  std::string summary = slurp(report_path(cfg, "summary") + ".txt");
  CHECK(summary.find("test scores") != std::string::npos);
  CHECK(summary.find("ours") != std::string::npos);
  CHECK(summary.find("direct") != std::string::npos);
}

TEST_CASE("per-seed directories derive from the base output directory") {
  CHECK(seed_out_dir("/x/run", 7) == "/x/run-s7");
  TempDir tmp;
  PipelineConfig base = mini_config(tmp.str("run"), 5);
  PipelineConfig forked = config_for_seed(base, 9);
  CHECK(forked.seed == 9);
  CHECK(forked.task.seed == 9);
  CHECK(forked.out_dir == tmp.str("run") + "-s9");
  CHECK(config_hash(forked) == config_hash(base));
}

TEST_CASE("hard two-step decoding matches the soft enumeration contract") {
  TempDir tmp;
  PipelineConfig cfg = mini_config(tmp.str("run"));
  run_pipeline(cfg);
  CascadeModel cm;
  cm.sp = load_required_checkpoint(cfg, "sp-pretrained", "t", "p");
  cm.pt = load_required_checkpoint(cfg, "pt-pretrained", "t", "p");
  cm.bridge = cfg.bridge;

  PipelineContext ctx = load_pipeline_context(cfg);
  std::vector<int> src = ctx.vsrc.encode(ctx.test.src[0]);

  BeamConfig beam;
  beam.beam_size = 3;
  beam.max_len = 8;
  CascadeDecodeResult hard = hard_cascade_decode(cm, src, beam, 2, beam, 2);
  REQUIRE(hard.candidates.size() == 4);
  for (size_t i = 1; i < hard.candidates.size(); ++i)
    CHECK(hard.candidates[i - 1].combined >= hard.candidates[i].combined);
  for (const auto& c : hard.candidates) {
    CHECK(c.combined == doctest::Approx(c.pivot_score + c.target_score).epsilon(1e-12));
    CHECK(!c.target.tokens.empty());
    // the pivot stage leaves room for its tokens to re-enter the second encoder
    CHECK(static_cast<int64_t>(c.pivot.tokens.size()) <= cm.pt.config.max_len - 1);
  }
  CHECK_THROWS_AS(hard_cascade_decode(cm, src, beam, 0, beam, 1), std::invalid_argument);
  CHECK_THROWS_AS(hard_cascade_decode(cm, src, beam, 4, beam, 1), std::invalid_argument);
}

TEST_CASE("experiment specs validate their grid") {
  TempDir tmp;
  std::ofstream(tmp.str("spec.json")) << R"({
    "name": "grid",
    "seeds": [3, 4],
    "points": [
      {"name": "base"},
      {"name": "sharp", "alpha_decode": 2.0},
      {"name": "b0", "beta": 0.0}
    ]
  })";
  ExperimentSpec spec = load_experiment_spec(tmp.str("spec.json"));
  CHECK(spec.name == "grid");
  REQUIRE(spec.seeds.size() == 2);
  REQUIRE(spec.points.size() == 3);
  CHECK(spec.points[1].second.alpha_decode.value() == 2.0);
  CHECK_FALSE(spec.points[1].second.refits());
  CHECK(spec.points[2].second.refits());

  std::ofstream(tmp.str("dup.json")) << R"({
    "name": "grid", "seeds": [3],
    "points": [{"name": "a"}, {"name": "a"}]
  })";
  CHECK_THROWS_AS(load_experiment_spec(tmp.str("dup.json")), std::invalid_argument);
  std::ofstream(tmp.str("unk.json")) << R"({
    "name": "grid", "seeds": [3],
    "points": [{"name": "a", "alpa_decode": 2.0}]
  })";
  CHECK_THROWS_WITH_AS(load_experiment_spec(tmp.str("unk.json")),
                       doctest::Contains("alpa_decode"), std::runtime_error);
}

TEST_CASE("ablation runs the grid once and is byte-stable on reruns") {
  TempDir tmp;
  PipelineConfig base = mini_config(tmp.str("run"));
  ExperimentSpec spec;
  spec.name = "mini";
  spec.seeds = {5};
  PointOverrides none;
  PointOverrides sharp;
  sharp.alpha_decode = 2.0;
  spec.points = {{"base", none}, {"sharp", sharp}};

  CHECK_THROWS_AS(ablate(base, spec, /*run_missing=*/false), std::runtime_error);

  AblateResult first = ablate(base, spec, /*run_missing=*/true);
  REQUIRE(first.rows.size() == 2);
  for (const auto& row : first.rows) {
    REQUIRE(row.bleu_by_seed.size() == 1);
    CHECK(row.stdev == 0.0);
    CHECK(row.mean == doctest::Approx(row.bleu_by_seed[0]).epsilon(1e-12));
  }
  std::string tsv = slurp(first.tsv_path);
  std::string table = slurp(first.table_path);
  CHECK(tsv.find("base") != std::string::npos);
  CHECK(table.find("sharp") != std::string::npos);

  AblateResult second = ablate(base, spec, /*run_missing=*/false);
  CHECK(slurp(second.tsv_path) == tsv);
  CHECK(slurp(second.table_path) == table);
  for (size_t i = 0; i < first.rows.size(); ++i)
    CHECK(second.rows[i].mean == doctest::Approx(first.rows[i].mean).epsilon(1e-12));
}
