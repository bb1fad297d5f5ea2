#include "pnmt/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pnmt/kernels.hpp"

namespace pnmt {

std::string to_string(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::none: return "none";
    case CorrectionMode::eq1: return "eq1";
    case CorrectionMode::add1: return "add1";
    case CorrectionMode::add05: return "add05";
    case CorrectionMode::exc: return "exc";
  }
  throw std::logic_error("unreachable correction mode");
}

CorrectionMode correction_from_string(const std::string& name) {
  if (name == "none") return CorrectionMode::none;
  if (name == "eq1") return CorrectionMode::eq1;
  if (name == "add1") return CorrectionMode::add1;
  if (name == "add05") return CorrectionMode::add05;
  if (name == "exc") return CorrectionMode::exc;
  throw std::invalid_argument("unknown correction mode '" + name +
                              "', expected none|eq1|add1|add05|exc");
}

void BridgeConfig::validate() const {
  if (alpha_train <= 0.0 || alpha_decode <= 0.0)
    throw std::invalid_argument("bridge: alpha values must be strictly positive");
}

void ProbDistSeq::validate() const {
  if (dists.shape.size() != 2)
    throw std::invalid_argument("dist seq: expected a matrix of rows, got " +
                                shape_str(dists.shape));
  if (static_cast<int64_t>(tokens.size()) != dists.rows())
    throw std::invalid_argument("dist seq: " + std::to_string(tokens.size()) + " tokens for " +
                                std::to_string(dists.rows()) + " rows");
  for (int64_t t = 0; t < dists.rows(); ++t) {
    double sum = 0.0;
    for (int64_t v = 0; v < dists.cols(); ++v) {
      const double p = dists.at(t, v);
      if (p < 0.0)
        throw std::invalid_argument("dist seq: negative probability at row " +
                                    std::to_string(t));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("dist seq: row " + std::to_string(t) + " sums to " +
                                  std::to_string(sum));
    if (tokens[static_cast<size_t>(t)] < 0 ||
        tokens[static_cast<size_t>(t)] >= dists.cols())
      throw std::invalid_argument("dist seq: token at row " + std::to_string(t) +
                                  " outside the vocabulary");
  }
}

int64_t argmax_row(std::span<const double> row) {
  int64_t best = 0;
  for (size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = static_cast<int64_t>(j);
  return best;
}

std::vector<double> renormalize(std::span<const double> row, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("renormalize: alpha must be positive");
  double sum = 0.0;
  for (double p : row) {
    if (p < 0.0) throw std::invalid_argument("renormalize: negative probability");
    sum += p;
  }
  if (sum <= 0.0) throw std::invalid_argument("renormalize: all-zero row");
  std::vector<double> out(row.size());
  kern::serial::renorm_rows(1, static_cast<int64_t>(row.size()), row.data(), alpha, out.data());
  return out;
}

Tensor renormalize_rows(const Tensor& dists, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("renormalize: alpha must be positive");
  for (int64_t t = 0; t < dists.rows(); ++t) {
    double sum = 0.0;
    for (int64_t v = 0; v < dists.cols(); ++v) {
      if (dists.at(t, v) < 0.0)
        throw std::invalid_argument("renormalize: negative probability at row " +
                                    std::to_string(t));
      sum += dists.at(t, v);
    }
    if (sum <= 0.0)
      throw std::invalid_argument("renormalize: all-zero row " + std::to_string(t));
  }
  Tensor out(dists.shape);
  kern::renorm_rows(dists.rows(), dists.cols(), dists.data.data(), alpha, out.data.data());
  return out;
}

std::vector<int64_t> detect_inconsistencies(const ProbDistSeq& seq) {
  std::vector<int64_t> out;
  for (int64_t t = 0; t < seq.length(); ++t)
    if (argmax_row(seq.dists.row(t)) != seq.tokens[static_cast<size_t>(t)]) out.push_back(t);
  return out;
}

ProbDistSeq correct(const ProbDistSeq& seq, CorrectionMode mode) {
  ProbDistSeq out = seq;
  if (mode == CorrectionMode::none) return out;
  for (int64_t t = 0; t < out.length(); ++t) {
    const int gen = out.tokens[static_cast<size_t>(t)];
    const int64_t top = argmax_row(out.dists.row(t));
    if (top == gen) continue;
    // an exact tie already gives the generated token maximal weight
    if (out.dists.at(t, top) == out.dists.at(t, gen)) continue;
    switch (mode) {
      case CorrectionMode::eq1: out.dists.at(t, gen) = 1.0; break;
      case CorrectionMode::add1: out.dists.at(t, gen) += 1.0; break;
      case CorrectionMode::add05: out.dists.at(t, gen) += 0.5; break;
      case CorrectionMode::exc:
        std::swap(out.dists.at(t, gen), out.dists.at(t, top));
        break;
      case CorrectionMode::none: break;
    }
  }
  return out;
}

Tensor bridge_weights(const ProbDistSeq& seq, const BridgeConfig& cfg, BridgePhase phase) {
  cfg.validate();
  if (phase == BridgePhase::train) return renormalize_rows(seq.dists, cfg.alpha_train);

  ProbDistSeq sharp;
  sharp.tokens = seq.tokens;
  sharp.dists = renormalize_rows(seq.dists, cfg.alpha_decode);
  Tensor out = correct(sharp, cfg.correction).dists;
  if (cfg.normalize_after_correction) {
    for (int64_t t = 0; t < out.rows(); ++t) {
      double sum = 0.0;
      for (int64_t v = 0; v < out.cols(); ++v) sum += out.at(t, v);
      for (int64_t v = 0; v < out.cols(); ++v) out.at(t, v) /= sum;
    }
  }
  return out;
}

Val bridge_weights_train(Tape& tape, Val dists, const BridgeConfig& cfg) {
  cfg.validate();
  return tape.renorm_rows(dists, cfg.alpha_train);
}

Tensor sparsify_top_k(const Tensor& rows, int64_t k) {
  if (k < 1) throw std::invalid_argument("sparsify: k must be at least 1");
  if (k >= rows.cols()) return rows;
  Tensor out(rows.shape);
  std::vector<int64_t> order(static_cast<size_t>(rows.cols()));
  for (int64_t t = 0; t < rows.rows(); ++t) {
    std::iota(order.begin(), order.end(), 0);
    auto row = rows.row(t);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int64_t a, int64_t b) {
                        return row[static_cast<size_t>(a)] != row[static_cast<size_t>(b)]
                                   ? row[static_cast<size_t>(a)] > row[static_cast<size_t>(b)]
                                   : a < b;
                      });
    double total = 0.0, kept = 0.0;
    for (double p : row) total += p;
    for (int64_t j = 0; j < k; ++j) kept += row[static_cast<size_t>(order[static_cast<size_t>(j)])];
    // scale survivors so the row keeps its original mass
    const double scale = kept > 0.0 ? total / kept : 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const int64_t v = order[static_cast<size_t>(j)];
      out.at(t, v) = row[static_cast<size_t>(v)] * scale;
    }
  }
  return out;
}

void write_dist_seq(std::ostream& out, const ProbDistSeq& seq) {
  out << std::setprecision(17);
  for (int64_t t = 0; t < seq.length(); ++t) {
    out << seq.tokens[static_cast<size_t>(t)] << '\t';
    bool first = true;
    for (int64_t v = 0; v < seq.dists.cols(); ++v) {
      const double p = seq.dists.at(t, v);
      if (p <= 1e-6) continue;
      if (!first) out << ' ';
      out << v << ':' << p;
      first = false;
    }
    out << '\n';
  }
}

ProbDistSeq read_dist_seq(std::istream& in, int64_t vocab) {
  ProbDistSeq seq;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("dist seq: missing TAB in line '" + line + "'");
    seq.tokens.push_back(std::stoi(line.substr(0, tab)));
    std::vector<double> row(static_cast<size_t>(vocab), 0.0);
    std::istringstream ss(line.substr(tab + 1));
    std::string pair;
    while (ss >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("dist seq: malformed entry '" + pair + "'");
      const int64_t v = std::stoll(pair.substr(0, colon));
      if (v < 0 || v >= vocab)
        throw std::runtime_error("dist seq: id " + std::to_string(v) + " outside vocabulary " +
                                 std::to_string(vocab));
      row[static_cast<size_t>(v)] = std::stod(pair.substr(colon + 1));
    }
    rows.push_back(std::move(row));
  }
  seq.dists = Tensor({static_cast<int64_t>(rows.size()), vocab});
  for (size_t t = 0; t < rows.size(); ++t)
    std::copy(rows[t].begin(), rows[t].end(),
              seq.dists.data.begin() + static_cast<int64_t>(t) * vocab);
  return seq;
}

}  // namespace pnmt
