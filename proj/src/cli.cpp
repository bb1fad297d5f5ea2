#include "pnmt/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pnmt/experiment.hpp"

namespace pnmt {

namespace {

struct Overrides {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> correction;
  std::optional<int> n_pivot, m_target, beam;
  std::optional<double> alpha_train, alpha_decode, beta, gamma;
};

void add_common(CLI::App* sub, Overrides& ov) {
  sub->add_option("--config", ov.config_path, "JSON config file (defaults used when absent)");
  sub->add_option("--seed", ov.seed, "run seed, overrides the config");
  sub->add_option("--out", ov.out, "run directory, overrides the config");
  sub->add_option("--correction", ov.correction, "bridge correction heuristic")
      ->check(CLI::IsMember({"none", "eq1", "add1", "add05", "exc"}));
  sub->add_option("--n-pivot", ov.n_pivot, "pivot hypotheses crossing the bridge");
  sub->add_option("--m-target", ov.m_target, "target candidates per pivot hypothesis");
  sub->add_option("--beam", ov.beam, "beam size for both decoding stages");
  sub->add_option("--alpha-train", ov.alpha_train, "training-time sharpening exponent");
  sub->add_option("--alpha-decode", ov.alpha_decode, "decode-time sharpening exponent");
  sub->add_option("--beta", ov.beta, "pivot-loss weight");
  sub->add_option("--gamma", ov.gamma, "target-loss weight");
}

PipelineConfig build_config(const Overrides& ov) {
  PipelineConfig cfg;
  if (!ov.config_path.empty()) cfg = load_pipeline_config(ov.config_path);
  if (ov.seed) {
    cfg.seed = *ov.seed;
    cfg.task.seed = *ov.seed;
  }
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.correction) cfg.bridge.correction = correction_from_string(*ov.correction);
  if (ov.n_pivot) cfg.n_pivot = *ov.n_pivot;
  if (ov.m_target) cfg.m_target = *ov.m_target;
  if (ov.beam) {
    cfg.pivot_beam.beam_size = *ov.beam;
    cfg.target_beam.beam_size = *ov.beam;
  }
  if (ov.alpha_train) cfg.bridge.alpha_train = *ov.alpha_train;
  if (ov.alpha_decode) cfg.bridge.alpha_decode = *ov.alpha_decode;
  if (ov.beta) cfg.weights.beta = *ov.beta;
  if (ov.gamma) cfg.weights.gamma = *ov.gamma;
  cfg.validate();
  return cfg;
}

int run_decode(const PipelineConfig& cfg, const std::string& system, const std::string& input,
               const LogFn& log) {
  require_artifact(corpus_base(cfg, "vocab-src"), "decode", "gen-data");
  const Vocab vsrc = Vocab::load(corpus_base(cfg, "vocab-src"));
  const Vocab vpiv = Vocab::load(corpus_base(cfg, "vocab-piv"));
  const Vocab vtgt = Vocab::load(corpus_base(cfg, "vocab-tgt"));

  std::ifstream file;
  std::istream* in = &std::cin;
  if (input != "-") {
    file.open(input);
    if (!file) throw std::runtime_error("cannot open input " + input);
    in = &file;
  }

  BeamConfig pcfg = cfg.pivot_beam;
  pcfg.n_best = cfg.n_pivot;
  BeamConfig tcfg = cfg.target_beam;
  tcfg.n_best = cfg.m_target;

  TransformerModel direct_model;
  CascadeModel cm;
  if (system == "direct") {
    direct_model = load_required_checkpoint(cfg, "direct", "decode", "pretrain-direct");
  } else if (system == "pivot") {
    cm.sp = load_required_checkpoint(cfg, "sp-pretrained", "decode", "pretrain-sp");
    cm.pt = load_required_checkpoint(cfg, "pt-pretrained", "decode", "pretrain-pt");
    cm.bridge = cfg.bridge;
  } else {
    cm.sp = load_required_checkpoint(cfg, "sp-finetuned", "decode", "finetune");
    cm.pt = load_required_checkpoint(cfg, "pt-finetuned", "decode", "finetune");
    cm.bridge = cfg.bridge;
  }

  std::string line;
  int64_t i = 0;
  while (std::getline(*in, line)) {
    const std::vector<int> ids = vsrc.encode(line);
    nlohmann::json rec{{"i", i}, {"src", line}, {"system", system}};
    if (system == "direct") {
      BeamConfig bc = cfg.target_beam;
      bc.n_best = 1;
      Hypothesis best = std::move(beam_search(direct_model, ids, bc).front());
      rec["hyp"] = vtgt.decode(best.tokens);
      rec["score"] = normalized_score(best, bc.length_penalty);
    } else {
      CascadeDecodeResult res =
          system == "pivot"
              ? hard_cascade_decode(cm, ids, pcfg, cfg.n_pivot, tcfg, cfg.m_target,
                                    cfg.target_only_score)
              : cascade_decode(cm, ids, pcfg, cfg.n_pivot, tcfg, cfg.m_target,
                               cfg.target_only_score, cfg.sparsify_k);
      const CascadeCandidate& best = res.best();
      rec["hyp"] = vtgt.decode(best.target.tokens);
      rec["pivot"] = vpiv.decode(best.pivot.tokens);
      rec["pivot_score"] = best.pivot_score;
      rec["target_score"] = best.target_score;
      rec["combined"] = best.combined;
      rec["candidates"] = static_cast<int64_t>(res.candidates.size());
    }
    std::cout << rec.dump() << '\n';
    ++i;
  }
  if (log) log("decode: translated " + std::to_string(i) + " lines");
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"pivot-cascade translation toolkit"};
  app.require_subcommand(1);

  Overrides ov;
  CLI::App* gen = app.add_subcommand("gen-data", "write corpora, held-out triples, vocabularies");
  CLI::App* pre = app.add_subcommand("pretrain", "train the halves and the direct baseline");
  CLI::App* pseudo = app.add_subcommand("pseudo-pivot", "translate low-resource sources to pivot");
  CLI::App* fine = app.add_subcommand("finetune", "end-to-end fine-tune the connected cascade");
  CLI::App* dec = app.add_subcommand("decode", "translate sentences, one JSON record per line");
  CLI::App* eval = app.add_subcommand("evaluate", "score one system on the held-out test set");
  CLI::App* abl = app.add_subcommand("ablate", "evaluate a grid of settings across seeds");
  CLI::App* rep = app.add_subcommand("report", "collate one run's curves and scores");
  for (CLI::App* sub : {gen, pre, pseudo, fine, dec, eval, abl, rep}) add_common(sub, ov);

  std::string pair = "all";
  pre->add_option("--pair", pair, "which model to pretrain")
      ->check(CLI::IsMember({"sp", "pt", "direct", "all"}));

  std::string input = "-";
  std::string system = "ours";
  dec->add_option("--input", input, "source sentences, one per line ('-' reads stdin)");
  dec->add_option("--system", system, "decoding system")
      ->check(CLI::IsMember({"ours", "pivot", "direct"}));
  eval->add_option("--system", system, "system to score")
      ->check(CLI::IsMember({"ours", "pivot", "direct"}));
  std::optional<std::string> eval_name;
  eval->add_option("--name", eval_name, "artifact key under reports/ (default per system)");

  std::string spec_path;
  bool run_missing = false;
  abl->add_option("--spec", spec_path, "experiment grid JSON")->required();
  abl->add_flag("--run-missing", run_missing, "build missing per-seed runs instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return 2;
  }

  PipelineConfig cfg;
  try {
    cfg = build_config(ov);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  const bool quiet_stdout = app.got_subcommand(dec);
  const LogFn log = quiet_stdout
                        ? LogFn([](const std::string& s) { std::cerr << s << '\n'; })
                        : LogFn([](const std::string& s) { std::cout << s << '\n'; });
  log("pnmt: config " + config_hash(cfg) + " seed " + std::to_string(cfg.seed));

  try {
    if (app.got_subcommand(gen)) {
      ensure_data(cfg, log);
    } else if (app.got_subcommand(pre)) {
      if (pair == "sp" || pair == "all") step_pretrain(cfg, Pair::sp, log);
      if (pair == "pt" || pair == "all") step_pretrain(cfg, Pair::pt, log);
      if (pair == "direct" || pair == "all") step_pretrain(cfg, Pair::direct, log);
    } else if (app.got_subcommand(pseudo)) {
      step_pseudo_pivot(cfg, log);
    } else if (app.got_subcommand(fine)) {
      step_assemble(cfg, log);
      step_finetune(cfg, log);
    } else if (app.got_subcommand(dec)) {
      return run_decode(cfg, system, input, log);
    } else if (app.got_subcommand(eval)) {
      SystemSpec ss;
      if (system == "direct") {
        ss = direct_spec(cfg);
      } else if (system == "pivot") {
        ss = hard_pivot_spec(cfg);
      } else {
        std::string name = "ours";
        if (cfg.bridge.correction != CorrectionMode::none)
          name += "-" + to_string(cfg.bridge.correction);
        ss = soft_spec(cfg, name);
      }
      if (eval_name) ss.name = *eval_name;
      evaluate_system(cfg, ss, log);
    } else if (app.got_subcommand(abl)) {
      ablate(cfg, load_experiment_spec(spec_path), run_missing, log);
    } else if (app.got_subcommand(rep)) {
      const std::string path = write_report(cfg, log);
      std::ifstream in(path);
      std::cout << in.rdbuf();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pnmt
