//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/neural.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gcgvae {

const std::vector<std::string> &element_vocabulary() {
  static const std::vector<std::string> vocab = {
    "C", "N", "O", "S", "F", "Cl", "Br", "P",
  };
  return vocab;
}

int vocabulary_index(std::string_view symbol) {
  const auto &v = element_vocabulary();
  for (int i = 0; i < static_cast<int>(v.size()); ++i)
    if (v[i] == symbol)
      return i;
  return -1;
}

namespace {
class LayoutBuilder {
public:
  explicit LayoutBuilder(std::vector<std::pair<std::string, Block>> &names)
    : names_(names) { }

  Block add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    Block b { next_, rows, cols };
    next_ += rows * cols;
    names_.emplace_back(std::move(name), b);
    return b;
  }

  GgnnBlocks ggnn(const std::string &prefix, Eigen::Index d) {
    GgnnBlocks g;
    for (int l = 0; l < 3; ++l) {
      g.edge_w[l] = add(prefix + ".edge_w" + std::to_string(l + 1), d, d);
      g.edge_b[l] = add(prefix + ".edge_b" + std::to_string(l + 1), d, 1);
    }
    g.w_r = add(prefix + ".w_r", d, d);
    g.u_r = add(prefix + ".u_r", d, d);
    g.b_r = add(prefix + ".b_r", d, 1);
    g.w_z = add(prefix + ".w_z", d, d);
    g.u_z = add(prefix + ".u_z", d, d);
    g.b_z = add(prefix + ".b_z", d, 1);
    g.w_n = add(prefix + ".w_n", d, d);
    g.u_n = add(prefix + ".u_n", d, d);
    g.b_n = add(prefix + ".b_n", d, 1);
    return g;
  }

  PairScorerBlocks pair_scorer(const std::string &prefix, Eigen::Index d,
                               Eigen::Index outputs) {
    PairScorerBlocks p;
    p.w_focus = add(prefix + ".w_focus", d, d);
    p.w_target = add(prefix + ".w_target", d, d);
    p.w_dist = add(prefix + ".w_dist", d, 1);
    p.w_init = add(prefix + ".w_init", d, d);
    p.w_global = add(prefix + ".w_global", d, d);
    p.b1 = add(prefix + ".b1", d, 1);
    p.w2 = add(prefix + ".w2", outputs, d);
    p.b2 = add(prefix + ".b2", outputs, 1);
    return p;
  }

  MlpBlocks mlp(const std::string &prefix, Eigen::Index in, Eigen::Index hidden) {
    MlpBlocks m;
    m.w1 = add(prefix + ".w1", hidden, in);
    m.b1 = add(prefix + ".b1", hidden, 1);
    m.w2 = add(prefix + ".w2", 1, hidden);
    m.b2 = add(prefix + ".b2", 1, 1);
    return m;
  }

  Eigen::Index total() const { return next_; }

private:
  std::vector<std::pair<std::string, Block>> &names_;
  Eigen::Index next_ = 0;
};

constexpr std::string_view kCheckpointMagic = "GCGVAE-PARAMS v1";
}  // namespace

ModelParams::ModelParams(ModelDims dims): dims_(dims) {
  if (dims.hidden < 1 || dims.steps < 0 || dims.vocab < 1)
    throw std::invalid_argument("invalid model dimensions");
  const Eigen::Index d = dims.hidden, v = dims.vocab;
  LayoutBuilder b(names_);
  encoder = b.ggnn("encoder", d);
  decoder = b.ggnn("decoder", d);
  embed_w = b.add("embed.w", d, v);
  embed_b = b.add("embed.b", d, 1);
  mu_w = b.add("mu.w", d, d);
  mu_b = b.add("mu.b", d, 1);
  log_sigma_w = b.add("log_sigma.w", d, d);
  log_sigma_b = b.add("log_sigma.b", d, 1);
  init_w = b.add("init.w", d, d + v);
  init_b = b.add("init.b", d, 1);
  label_w = b.add("label.w", v, d);
  label_b = b.add("label.b", v, 1);
  edge = b.pair_scorer("edge", d, 1);
  bond = b.pair_scorer("bond", d, 3);
  stop_w = b.add("stop.w", 1, 2 * d);
  stop_b = b.add("stop.b", 1, 1);
  gate = b.mlp("gate", d, d);
  value = b.mlp("value", d, d);
  theta_ = Eigen::VectorXd::Zero(b.total());
}

ModelParams ModelParams::random(ModelDims dims, std::uint64_t seed) {
  ModelParams p(dims);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    p.theta_[i] = rng.uniform(-0.1, 0.1);
  return p;
}

std::vector<std::pair<std::string, Block>> ModelParams::named_blocks() const {
  return names_;
}

std::vector<Eigen::Index>
ModelParams::indices_with_prefix(std::string_view prefix) const {
  std::vector<Eigen::Index> out;
  for (const auto &[name, b]: names_)
    if (std::string_view(name).starts_with(prefix))
      for (Eigen::Index i = 0; i < b.size(); ++i)
        out.push_back(b.offset + i);
  return out;
}

void write_checkpoint(std::ostream &os, const ModelParams &params) {
  const ModelDims &d = params.dims();
  os << kCheckpointMagic << " d=" << d.hidden << " S=" << d.steps
     << " vocab=" << d.vocab << '\n';
  const Eigen::VectorXd &theta = params.flat();
  std::string bytes(static_cast<std::size_t>(theta.size()) * 8, '\0');
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(theta[i]);
    for (int k = 0; k < 8; ++k)
      bytes[i * 8 + k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os)
    throw std::runtime_error("failed to write checkpoint");
}

ModelParams read_checkpoint(std::istream &is) {
  std::string header;
  if (!std::getline(is, header) || !header.starts_with(kCheckpointMagic))
    throw std::runtime_error("not a parameter checkpoint");
  ModelDims dims;
  std::istringstream hs(header.substr(kCheckpointMagic.size()));
  std::string field;
  int seen = 0;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad checkpoint header field: " + field);
    const std::string key = field.substr(0, eq);
    const int value = std::stoi(field.substr(eq + 1));
    if (key == "d")
      dims.hidden = value;
    else if (key == "S")
      dims.steps = value;
    else if (key == "vocab")
      dims.vocab = value;
    else
      throw std::runtime_error("unknown checkpoint header field: " + key);
    ++seen;
  }
  if (seen != 3)
    throw std::runtime_error("incomplete checkpoint header");

  ModelParams params(dims);
  Eigen::VectorXd &theta = params.flat();
  std::string bytes(static_cast<std::size_t>(theta.size()) * 8, '\0');
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw std::runtime_error("truncated checkpoint");
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(
                static_cast<unsigned char>(bytes[i * 8 + k]))
              << (8 * k);
    theta[i] = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const std::string &path, const ModelParams &params) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, params);
}

ModelParams load_checkpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

BondPairs pairs_by_order(const MolecularGraph &g) {
  BondPairs pairs;
  for (const Bond &b: g.bonds())
    pairs[b.order - 1].emplace_back(b.a, b.b);
  return pairs;
}

ad::Var ggnn_propagate(ad::Tape &tape, const ModelParams &params,
                       const GgnnBlocks &net, ad::Var states,
                       const BondPairs &pairs, int steps) {
  const Eigen::Index d = params.dims().hidden;
  if (states.rows() != d)
    throw std::invalid_argument("node states have " + std::to_string(states.rows())
                                + " rows, expected " + std::to_string(d));
  if (steps <= 0)
    return states;
  const Eigen::Index n = states.cols();

  // Per-order neighbor counts, for the E_l bias terms.
  std::array<ad::Var, 3> degree_rows;
  std::array<bool, 3> present {};
  for (int l = 0; l < 3; ++l) {
    present[l] = !pairs[l].empty();
    if (!present[l])
      continue;
    Eigen::MatrixXd deg = Eigen::MatrixXd::Zero(1, n);
    for (const auto &[a, b]: pairs[l]) {
      deg(0, a) += 1;
      deg(0, b) += 1;
    }
    degree_rows[l] = tape.constant(std::move(deg));
  }

  const ad::Var w_r = params.on(tape, net.w_r), u_r = params.on(tape, net.u_r),
                b_r = params.on(tape, net.b_r);
  const ad::Var w_z = params.on(tape, net.w_z), u_z = params.on(tape, net.u_z),
                b_z = params.on(tape, net.b_z);
  const ad::Var w_n = params.on(tape, net.w_n), u_n = params.on(tape, net.u_n),
                b_n = params.on(tape, net.b_n);
  std::array<ad::Var, 3> e_w, e_b;
  for (int l = 0; l < 3; ++l) {
    if (!present[l])
      continue;
    e_w[l] = params.on(tape, net.edge_w[l]);
    e_b[l] = params.on(tape, net.edge_b[l]);
  }

  ad::Var m = states;
  for (int s = 0; s < steps; ++s) {
    ad::Var x = tape.constant(Eigen::MatrixXd::Zero(d, n));
    for (int l = 0; l < 3; ++l) {
      if (!present[l])
        continue;
      ad::Var agg = ad::neighbor_sum(m, pairs[l]);
      x = x + ad::matmul(e_w[l], agg) + ad::matmul(e_b[l], degree_rows[l]);
    }
    ad::Var r = ad::sigmoid(
      ad::add_colwise(ad::matmul(w_r, x) + ad::matmul(u_r, m), b_r));
    ad::Var z = ad::sigmoid(
      ad::add_colwise(ad::matmul(w_z, x) + ad::matmul(u_z, m), b_z));
    ad::Var cand = ad::tanh(ad::add_colwise(
      ad::matmul(w_n, x) + ad::matmul(u_n, ad::cwise_product(r, m)), b_n));
    m = m + ad::cwise_product(z, cand - m);
  }
  return m;
}

NodeStates ggnn_propagate(const NodeStates &states, const MolecularGraph &g,
                          const ModelParams &params, const GgnnBlocks &net,
                          int steps) {
  if (states.cols() != g.num_atoms())
    throw std::invalid_argument("node states do not match the graph");
  ad::Tape tape(false);
  ad::Var out = ggnn_propagate(tape, params, net, tape.constant(states),
                               pairs_by_order(g), steps);
  return out.value();
}

NodeStates ggnn_propagate(const NodeStates &states, const MolecularGraph &g,
                          const ModelParams &params, int steps) {
  return ggnn_propagate(states, g, params, params.decoder, steps);
}

Eigen::VectorXd global_aggregate(const NodeStates &states) {
  if (states.cols() == 0)
    throw std::invalid_argument("global aggregate of an empty state set");
  return states.rowwise().mean();
}

ad::Var mlp(ad::Tape &tape, const ModelParams &params, const MlpBlocks &net,
            ad::Var x) {
  ad::Var hidden = ad::tanh(ad::add_colwise(
    ad::matmul(params.on(tape, net.w1), x), params.on(tape, net.b1)));
  return ad::add_colwise(ad::matmul(params.on(tape, net.w2), hidden),
                         params.on(tape, net.b2));
}

GradCheckResult grad_check(const LossWithGrad &loss,
                           const Eigen::VectorXd &theta, int probes, double h,
                           Rng &rng, std::span<const Eigen::Index> candidates,
                           double denom_floor) {
  Eigen::VectorXd analytic;
  const double base = loss(theta, &analytic);
  if (!std::isfinite(base))
    throw std::domain_error("grad_check: loss is not finite at theta");
  if (analytic.size() != theta.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");

  GradCheckResult result;
  Eigen::VectorXd probe = theta;
  for (int k = 0; k < probes; ++k) {
    const Eigen::Index i =
      candidates.empty()
        ? static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())))
        : candidates[rng.below(static_cast<std::uint64_t>(candidates.size()))];
    probe[i] = theta[i] + h;
    const double up = loss(probe, nullptr);
    probe[i] = theta[i] - h;
    const double down = loss(probe, nullptr);
    probe[i] = theta[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::domain_error("grad_check: loss is not finite near theta");

    const double numeric = (up - down) / (2 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric)
                       / std::max({ std::abs(a), std::abs(numeric), denom_floor });
    if (err > result.max_error || result.worst_index < 0) {
      result.max_error = err;
      result.worst_index = i;
      result.analytic = a;
      result.numeric = numeric;
    }
    ++result.probes;
  }
  return result;
}

}  // namespace gcgvae
