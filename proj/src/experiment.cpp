#include "pnmt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pnmt {

namespace fs = std::filesystem;
using nlohmann::json;

CascadeDecodeResult hard_cascade_decode(CascadeModel& cm, std::span<const int> src,
                                        const BeamConfig& pivot_beam, int n_pivot,
                                        const BeamConfig& target_beam, int m_target,
                                        bool target_only_score) {
  cm.validate();
  if (n_pivot < 1 || n_pivot > pivot_beam.beam_size)
    throw std::invalid_argument("n_pivot must lie in [1, pivot beam size]");
  if (m_target < 1 || m_target > target_beam.beam_size)
    throw std::invalid_argument("m_target must lie in [1, target beam size]");

  BeamConfig pcfg = pivot_beam;
  pcfg.n_best = n_pivot;
  // pivot content re-enters the second encoder as tokens + EOS, so leave room
  pcfg.max_len = std::min(pcfg.max_len, cm.pt.config.max_len - 1);
  pcfg.validate();
  BeamConfig tcfg = target_beam;
  tcfg.n_best = m_target;
  tcfg.validate();

  CascadeDecodeResult result;
  for (const Hypothesis& ph : beam_search(cm.sp, src, pcfg)) {
    std::vector<int> content = ph.tokens;
    if (!content.empty() && content.back() == kEosId) content.pop_back();
    for (Hypothesis& th : beam_search(cm.pt, content, tcfg)) {
      CascadeCandidate cand;
      cand.pivot = ph;
      cand.pivot_score = normalized_score(ph, pivot_beam.length_penalty);
      cand.target_score = normalized_score(th, target_beam.length_penalty);
      cand.combined =
          target_only_score ? cand.target_score : cand.pivot_score + cand.target_score;
      cand.target = std::move(th);
      result.candidates.push_back(std::move(cand));
    }
  }
  // ties keep (pivot rank, target rank) order
  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const CascadeCandidate& a, const CascadeCandidate& b) {
                     return a.combined > b.combined;
                   });
  return result;
}

namespace {

const char* kind_name(SystemKind kind) {
  switch (kind) {
    case SystemKind::direct: return "direct";
    case SystemKind::hard_pivot: return "hard-pivot";
    default: return "soft-cascade";
  }
}

std::string producing_step(const std::string& ckpt) {
  if (ckpt == "sp-pretrained") return "pretrain-sp";
  if (ckpt == "pt-pretrained") return "pretrain-pt";
  if (ckpt == "direct") return "pretrain-direct";
  const std::string tag = "-finetuned";
  auto pos = ckpt.find(tag);
  if (pos != std::string::npos) return "finetune" + ckpt.substr(pos + tag.size());
  return "pretrain";
}

void check_keys(const json& j, const std::string& object,
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
      throw std::runtime_error("experiment spec: unknown key '" + item.key() + "' in " +
                               object + " (valid: " + valid + ")");
    }
  }
}

void check_slug(const std::string& name, const char* what) {
  if (name.empty()) throw std::invalid_argument(std::string(what) + " must be nonempty");
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok)
      throw std::invalid_argument(std::string(what) + " '" + name +
                                  "' may only use letters, digits, '-', '_', '.'");
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

SystemSpec direct_spec(const PipelineConfig& cfg) {
  SystemSpec s;
  s.name = "direct";
  s.kind = SystemKind::direct;
  s.pivot_beam = cfg.pivot_beam;
  s.target_beam = cfg.target_beam;
  return s;
}

SystemSpec hard_pivot_spec(const PipelineConfig& cfg) {
  SystemSpec s;
  s.name = "pivot";
  s.kind = SystemKind::hard_pivot;
  s.sp_ckpt = "sp-pretrained";
  s.pt_ckpt = "pt-pretrained";
  s.pivot_beam = cfg.pivot_beam;
  s.target_beam = cfg.target_beam;
  s.n_pivot = cfg.n_pivot;
  s.m_target = cfg.m_target;
  s.target_only_score = cfg.target_only_score;
  return s;
}

SystemSpec soft_spec(const PipelineConfig& cfg, const std::string& name,
                     const std::string& ckpt_suffix) {
  SystemSpec s;
  s.name = name;
  s.kind = SystemKind::soft_cascade;
  s.sp_ckpt = "sp" + ckpt_suffix;
  s.pt_ckpt = "pt" + ckpt_suffix;
  s.bridge = cfg.bridge;
  s.pivot_beam = cfg.pivot_beam;
  s.target_beam = cfg.target_beam;
  s.n_pivot = cfg.n_pivot;
  s.m_target = cfg.m_target;
  s.target_only_score = cfg.target_only_score;
  s.sparsify_k = cfg.sparsify_k;
  return s;
}

SystemEval evaluate_system(const PipelineConfig& cfg, const SystemSpec& spec, const LogFn& log) {
  check_slug(spec.name, "system name");
  const std::string cache = report_path(cfg, "bleu-" + spec.name + ".json");
  SystemEval eval;
  eval.name = spec.name;
  if (fs::exists(cache)) {
    std::ifstream in(cache);
    json j;
    in >> j;
    eval.report.bleu = j.at("bleu").get<double>();
    for (int k = 0; k < 4; ++k)
      eval.report.precisions[k] = j.at("precisions").at(static_cast<size_t>(k)).get<double>();
    eval.report.brevity_penalty = j.at("brevity_penalty").get<double>();
    eval.report.hyp_length = j.at("hyp_length").get<int64_t>();
    eval.report.ref_length = j.at("ref_length").get<int64_t>();
    eval.sentences = j.at("sentences").get<int64_t>();
    eval.inconsistency.flagged = j.at("inconsistent_rows").get<int64_t>();
    eval.inconsistency.rows = j.at("total_rows").get<int64_t>();
    eval.from_cache = true;
    if (log)
      log("evaluate " + spec.name + ": cached BLEU " + fmt("%.2f", eval.report.bleu) + " (" +
          cache + ")");
    return eval;
  }

  PipelineContext ctx = load_pipeline_context(cfg);
  const int64_t n = ctx.test.size();
  eval.sentences = n;

  BeamConfig pcfg = spec.pivot_beam;
  pcfg.n_best = spec.n_pivot;
  BeamConfig tcfg = spec.target_beam;
  tcfg.n_best = spec.m_target;

  std::vector<std::string> hyps;
  hyps.reserve(static_cast<size_t>(n));
  std::vector<json> records;
  records.reserve(static_cast<size_t>(n));

  if (spec.kind == SystemKind::direct) {
    TransformerModel model =
        load_required_checkpoint(cfg, spec.direct_ckpt, "evaluate", producing_step(spec.direct_ckpt));
    BeamConfig bc = spec.target_beam;
    bc.n_best = 1;
    for (int64_t i = 0; i < n; ++i) {
      const std::vector<int> ids = ctx.vsrc.encode(ctx.test.src[static_cast<size_t>(i)]);
      Hypothesis best = std::move(beam_search(model, ids, bc).front());
      const std::string hyp = ctx.vtgt.decode(best.tokens);
      records.push_back(json{{"i", i},
                             {"src", ctx.test.src[static_cast<size_t>(i)]},
                             {"ref", ctx.test.tgt[static_cast<size_t>(i)]},
                             {"hyp", hyp},
                             {"score", normalized_score(best, bc.length_penalty)}});
      hyps.push_back(hyp);
    }
  } else {
    CascadeModel cm;
    cm.sp = load_required_checkpoint(cfg, spec.sp_ckpt, "evaluate", producing_step(spec.sp_ckpt));
    cm.pt = load_required_checkpoint(cfg, spec.pt_ckpt, "evaluate", producing_step(spec.pt_ckpt));
    cm.bridge = spec.bridge;
    for (int64_t i = 0; i < n; ++i) {
      const std::vector<int> ids = ctx.vsrc.encode(ctx.test.src[static_cast<size_t>(i)]);
      CascadeDecodeResult res =
          spec.kind == SystemKind::hard_pivot
              ? hard_cascade_decode(cm, ids, pcfg, spec.n_pivot, tcfg, spec.m_target,
                                    spec.target_only_score)
              : cascade_decode(cm, ids, pcfg, spec.n_pivot, tcfg, spec.m_target,
                               spec.target_only_score, spec.sparsify_k);
      if (spec.kind == SystemKind::soft_cascade) {
        std::set<std::vector<int>> seen;
        for (const CascadeCandidate& cand : res.candidates)
          if (seen.insert(cand.pivot.tokens).second) {
            eval.inconsistency.flagged +=
                static_cast<int64_t>(detect_inconsistencies(cand.pivot.dist_seq).size());
            eval.inconsistency.rows += cand.pivot.dist_seq.length();
          }
      }
      const CascadeCandidate& best = res.best();
      const std::string hyp = ctx.vtgt.decode(best.target.tokens);
      records.push_back(json{{"i", i},
                             {"src", ctx.test.src[static_cast<size_t>(i)]},
                             {"ref", ctx.test.tgt[static_cast<size_t>(i)]},
                             {"hyp", hyp},
                             {"pivot", ctx.vpiv.decode(best.pivot.tokens)},
                             {"pivot_score", best.pivot_score},
                             {"target_score", best.target_score},
                             {"combined", best.combined}});
      hyps.push_back(hyp);
    }
  }

  eval.report = bleu(hyps, ctx.test.tgt);

  fs::create_directories(cfg.out_dir + "/reports");
  {
    std::ofstream out(report_path(cfg, "decode-" + spec.name + ".jsonl"));
    if (!out) throw std::runtime_error("cannot write decode records for " + spec.name);
    for (const json& r : records) out << r.dump() << '\n';
  }
  {
    json j{{"name", spec.name},
           {"kind", kind_name(spec.kind)},
           {"bleu", eval.report.bleu},
           {"precisions",
            {eval.report.precisions[0], eval.report.precisions[1], eval.report.precisions[2],
             eval.report.precisions[3]}},
           {"brevity_penalty", eval.report.brevity_penalty},
           {"hyp_length", eval.report.hyp_length},
           {"ref_length", eval.report.ref_length},
           {"sentences", eval.sentences},
           {"inconsistent_rows", eval.inconsistency.flagged},
           {"total_rows", eval.inconsistency.rows},
           {"config", config_hash(cfg)},
           {"seed", cfg.seed}};
    std::ofstream out(cache);
    if (!out) throw std::runtime_error("cannot write " + cache);
    out << j.dump(2) << '\n';
  }
  if (log) {
    std::string line = "evaluate " + spec.name + ": BLEU " + fmt("%.2f", eval.report.bleu) +
                       " on " + std::to_string(n) + " sentences";
    if (eval.inconsistency.rows > 0)
      line += ", inconsistency rate " + fmt("%.4f%%", 100.0 * eval.inconsistency.rate());
    log(line);
  }
  return eval;
}

std::string seed_out_dir(const std::string& base_out, uint64_t seed) {
  return base_out + "-s" + std::to_string(seed);
}

PipelineConfig config_for_seed(const PipelineConfig& base, uint64_t seed) {
  PipelineConfig cfg = base;
  cfg.seed = seed;
  cfg.task.seed = seed;
  cfg.out_dir = seed_out_dir(base.out_dir, seed);
  return cfg;
}

void ExperimentSpec::validate() const {
  check_slug(name, "experiment name");
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (points.empty()) throw std::invalid_argument("experiment needs at least one point");
  std::set<uint64_t> uniq_seeds(seeds.begin(), seeds.end());
  if (uniq_seeds.size() != seeds.size())
    throw std::invalid_argument("experiment seeds must be unique");
  std::set<std::string> names;
  for (const auto& [pname, ov] : points) {
    check_slug(pname, "point name");
    if (!names.insert(pname).second)
      throw std::invalid_argument("duplicate point name '" + pname + "'");
    if (ov.correction) correction_from_string(*ov.correction);
  }
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment spec " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("experiment spec " + path + ": " + e.what());
  }
  check_keys(j, "spec", {"name", "seeds", "points"});
  ExperimentSpec spec;
  spec.name = j.value("name", std::string());
  if (j.contains("seeds"))
    for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<uint64_t>());
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      check_keys(p, "point",
                 {"name", "correction", "alpha_decode", "alpha_train", "beta", "gamma",
                  "length_penalty", "normalize_after_correction", "target_only_score",
                  "n_pivot", "m_target", "pivot_beam", "target_beam", "sparsify_k"});
      PointOverrides ov;
      if (p.contains("correction")) ov.correction = p.at("correction").get<std::string>();
      if (p.contains("alpha_decode")) ov.alpha_decode = p.at("alpha_decode").get<double>();
      if (p.contains("alpha_train")) ov.alpha_train = p.at("alpha_train").get<double>();
      if (p.contains("beta")) ov.beta = p.at("beta").get<double>();
      if (p.contains("gamma")) ov.gamma = p.at("gamma").get<double>();
      if (p.contains("length_penalty")) ov.length_penalty = p.at("length_penalty").get<double>();
      if (p.contains("normalize_after_correction"))
        ov.normalize_after_correction = p.at("normalize_after_correction").get<bool>();
      if (p.contains("target_only_score"))
        ov.target_only_score = p.at("target_only_score").get<bool>();
      if (p.contains("n_pivot")) ov.n_pivot = p.at("n_pivot").get<int>();
      if (p.contains("m_target")) ov.m_target = p.at("m_target").get<int>();
      if (p.contains("pivot_beam")) ov.pivot_beam = p.at("pivot_beam").get<int>();
      if (p.contains("target_beam")) ov.target_beam = p.at("target_beam").get<int>();
      if (p.contains("sparsify_k")) ov.sparsify_k = p.at("sparsify_k").get<int>();
      spec.points.emplace_back(p.value("name", std::string()), ov);
    }
  }
  spec.validate();
  return spec;
}

namespace {

SystemSpec spec_for_point(const PipelineConfig& cfg, const std::string& exname,
                          const std::string& pname, const PointOverrides& ov, const LogFn& log) {
  std::string suffix = "-finetuned";
  if (ov.refits()) {
    LossWeights w = cfg.weights;
    if (ov.beta) w.beta = *ov.beta;
    if (ov.gamma) w.gamma = *ov.gamma;
    const double alpha_train = ov.alpha_train.value_or(cfg.bridge.alpha_train);
    ensure_finetuned_variant(cfg, "-ft-" + pname, w, alpha_train, log);
    suffix = "-finetuned-ft-" + pname;
  }
  SystemSpec ss = soft_spec(cfg, "ablate-" + exname + "-" + pname, suffix);
  if (ov.correction) ss.bridge.correction = correction_from_string(*ov.correction);
  if (ov.alpha_decode) ss.bridge.alpha_decode = *ov.alpha_decode;
  if (ov.normalize_after_correction)
    ss.bridge.normalize_after_correction = *ov.normalize_after_correction;
  if (ov.length_penalty) {
    ss.pivot_beam.length_penalty = *ov.length_penalty;
    ss.target_beam.length_penalty = *ov.length_penalty;
  }
  if (ov.target_only_score) ss.target_only_score = *ov.target_only_score;
  if (ov.n_pivot) ss.n_pivot = *ov.n_pivot;
  if (ov.m_target) ss.m_target = *ov.m_target;
  if (ov.pivot_beam) ss.pivot_beam.beam_size = *ov.pivot_beam;
  if (ov.target_beam) ss.target_beam.beam_size = *ov.target_beam;
  if (ov.sparsify_k) ss.sparsify_k = *ov.sparsify_k;
  return ss;
}

}  // namespace

AblateResult ablate(const PipelineConfig& base, const ExperimentSpec& spec, bool run_missing,
                    const LogFn& log) {
  spec.validate();
  AblateResult out;
  for (const auto& [pname, ov] : spec.points) {
    AblateRow row;
    row.point = pname;
    out.rows.push_back(std::move(row));
  }

  for (uint64_t seed : spec.seeds) {
    PipelineConfig cfg = config_for_seed(base, seed);
    if (run_missing) run_pipeline(cfg, log);
    for (size_t i = 0; i < spec.points.size(); ++i) {
      const auto& [pname, ov] = spec.points[i];
      SystemSpec ss = spec_for_point(cfg, spec.name, pname, ov, log);
      SystemEval ev = evaluate_system(cfg, ss, log);
      out.rows[i].bleu_by_seed.push_back(ev.report.bleu);
    }
  }

  for (AblateRow& row : out.rows) {
    double sum = 0.0;
    for (double b : row.bleu_by_seed) sum += b;
    row.mean = sum / static_cast<double>(row.bleu_by_seed.size());
    if (row.bleu_by_seed.size() > 1) {
      double ss = 0.0;
      for (double b : row.bleu_by_seed) ss += (b - row.mean) * (b - row.mean);
      row.stdev = std::sqrt(ss / static_cast<double>(row.bleu_by_seed.size() - 1));
    }
  }

  const std::string dir = base.out_dir + "-ablate";
  fs::create_directories(dir);
  out.tsv_path = dir + "/" + spec.name + ".tsv";
  out.table_path = dir + "/" + spec.name + ".txt";

  {
    std::ofstream tsv(out.tsv_path);
    if (!tsv) throw std::runtime_error("cannot write " + out.tsv_path);
    tsv << "point";
    for (uint64_t s : spec.seeds) tsv << "\tseed-" << s;
    tsv << "\tmean\tstdev\n";
    for (const AblateRow& row : out.rows) {
      tsv << row.point;
      for (double b : row.bleu_by_seed) tsv << '\t' << fmt("%.4f", b);
      tsv << '\t' << fmt("%.4f", row.mean) << '\t' << fmt("%.4f", row.stdev) << '\n';
    }
  }
  {
    size_t w = 5;
    for (const AblateRow& row : out.rows) w = std::max(w, row.point.size());
    std::ofstream txt(out.table_path);
    if (!txt) throw std::runtime_error("cannot write " + out.table_path);
    txt << "experiment: " << spec.name << " (test BLEU)\n\n";
    txt << std::string(w, ' ') << "  ";
    for (uint64_t s : spec.seeds) {
      std::string h = "seed-" + std::to_string(s);
      txt << std::string(h.size() < 9 ? 9 - h.size() : 0, ' ') << h << "  ";
    }
    txt << "     mean      stdev\n";
    for (const AblateRow& row : out.rows) {
      txt << row.point << std::string(w - row.point.size(), ' ') << "  ";
      for (double b : row.bleu_by_seed) {
        std::string v = fmt("%.4f", b);
        txt << std::string(v.size() < 9 ? 9 - v.size() : 0, ' ') << v << "  ";
      }
      std::string m = fmt("%.4f", row.mean), sd = fmt("%.4f", row.stdev);
      txt << std::string(m.size() < 9 ? 9 - m.size() : 0, ' ') << m << "  ";
      txt << std::string(sd.size() < 9 ? 9 - sd.size() : 0, ' ') << sd << '\n';
    }
  }
  if (log) {
    log("ablate " + spec.name + ": wrote " + out.tsv_path + " and " + out.table_path);
    for (const AblateRow& row : out.rows)
      log("ablate " + spec.name + ": " + row.point + " mean " + fmt("%.4f", row.mean) +
          " stdev " + fmt("%.4f", row.stdev));
  }
  return out;
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  size_t idx = t.header.size();
  for (size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) idx = i;
  std::vector<double> out;
  if (idx == t.header.size()) return out;
  for (const auto& row : t.rows)
    if (idx < row.size()) out.push_back(row[idx]);
  return out;
}

std::string ascii_chart(const std::vector<double>& ys, int height, int max_width) {
  if (ys.empty()) return "  (no data)\n";
  std::vector<double> v = ys;
  if (static_cast<int>(v.size()) > max_width) {
    std::vector<double> sampled;
    for (int i = 0; i < max_width; ++i)
      sampled.push_back(v[static_cast<size_t>(i) * v.size() / static_cast<size_t>(max_width)]);
    v = std::move(sampled);
  }
  double lo = v[0], hi = v[0];
  for (double y : v) {
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  std::ostringstream s;
  if (hi == lo) {
    s << "  " << fmt("%10.4f", hi) << " | " << std::string(v.size(), '*') << '\n';
    return s.str();
  }
  std::vector<std::string> grid(static_cast<size_t>(height), std::string(v.size(), ' '));
  for (size_t i = 0; i < v.size(); ++i) {
    int level = static_cast<int>(std::lround((v[i] - lo) / (hi - lo) * (height - 1)));
    grid[static_cast<size_t>(height - 1 - level)][i] = '*';
  }
  for (int r = 0; r < height; ++r) {
    if (r == 0)
      s << "  " << fmt("%10.4f", hi) << " | ";
    else if (r == height - 1)
      s << "  " << fmt("%10.4f", lo) << " | ";
    else
      s << "  " << std::string(10, ' ') << " | ";
    s << grid[static_cast<size_t>(r)] << '\n';
  }
  s << "  " << std::string(10, ' ') << " +-" << std::string(v.size(), '-') << " ("
    << ys.size() << " epochs)\n";
  return s.str();
}

}  // namespace

std::string write_report(const PipelineConfig& cfg, const LogFn& log) {
  const std::string dir = cfg.out_dir + "/reports";
  if (!fs::exists(dir))
    throw std::runtime_error("no reports under " + cfg.out_dir + "; run the pipeline first");

  std::ostringstream s;
  s << "run summary\n-----------\n";
  s << "directory: " << cfg.out_dir << '\n';
  s << "config:    " << config_hash(cfg) << '\n';
  s << "seed:      " << cfg.seed << "\n\n";

  std::vector<std::string> csvs, bleus;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string f = entry.path().filename().string();
    if (f.size() > 4 && f.substr(f.size() - 4) == ".csv") csvs.push_back(f);
    if (f.rfind("bleu-", 0) == 0 && f.size() > 5 && f.substr(f.size() - 5) == ".json")
      bleus.push_back(f);
  }
  std::sort(csvs.begin(), csvs.end());
  std::sort(bleus.begin(), bleus.end());

  for (const std::string& f : csvs) {
    CsvTable t = read_csv(dir + "/" + f);
    const bool ft = f.rfind("finetune", 0) == 0;
    const std::string metric = ft ? "valid_bleu" : "valid_loss";
    std::vector<double> ys = column(t, metric);
    if (ys.empty()) continue;
    s << f.substr(0, f.size() - 4) << " (" << metric << " by epoch)\n";
    s << ascii_chart(ys, 8, 64);
    s << "  final: " << fmt("%.4f", ys.back());
    if (ft) {
      std::vector<double> tot = column(t, "total_loss");
      if (!tot.empty()) s << ", final total loss " << fmt("%.4f", tot.back());
    } else {
      std::vector<double> tr = column(t, "train_loss");
      if (!tr.empty()) s << ", final train loss " << fmt("%.4f", tr.back());
    }
    s << "\n\n";
  }

  if (!bleus.empty()) {
    s << "test scores\n";
    size_t w = 6;
    for (const std::string& f : bleus) w = std::max(w, f.size() - 10);
    s << "  " << "system" << std::string(w - 6, ' ')
      << "    BLEU      BP   hyp/ref   inconsistency\n";
    for (const std::string& f : bleus) {
      std::ifstream in(dir + "/" + f);
      json j;
      in >> j;
      const std::string name = j.value("name", f.substr(5, f.size() - 10));
      const double ratio = j.value("ref_length", int64_t{0}) > 0
                               ? static_cast<double>(j.value("hyp_length", int64_t{0})) /
                                     static_cast<double>(j.value("ref_length", int64_t{1}))
                               : 0.0;
      const int64_t rows = j.value("total_rows", int64_t{0});
      const int64_t flagged = j.value("inconsistent_rows", int64_t{0});
      s << "  " << name << std::string(w > name.size() ? w - name.size() : 0, ' ');
      s << fmt("%8.2f", j.value("bleu", 0.0));
      s << fmt("%8.3f", j.value("brevity_penalty", 0.0));
      s << fmt("%10.3f", ratio);
      if (rows > 0)
        s << "   " << fmt("%.4f%%", 100.0 * static_cast<double>(flagged) / rows);
      else
        s << "   -";
      s << '\n';
    }
    s << '\n';
  }

  const std::string path = report_path(cfg, "summary.txt");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << s.str();
  if (log) log("report: wrote " + path);
  return path;
}

}  // namespace pnmt
