//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_NEURAL_H_
#define GCGVAE_NEURAL_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gcgvae/autodiff.h"
#include "gcgvae/molgraph.h"
#include "gcgvae/rng.h"

namespace gcgvae {

/// Node label vocabulary of the generative model, in tie-break order.
const std::vector<std::string> &element_vocabulary();

// Index into element_vocabulary(), or -1.
int vocabulary_index(std::string_view symbol);

struct ModelDims {
  int hidden = 16;
  int steps = 4;
  int vocab = 8;
};

struct Block {
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

// Edge-typed linear messages E_l (l = 1, 2, 3) and a GRU update.
struct GgnnBlocks {
  std::array<Block, 3> edge_w, edge_b;
  Block w_r, u_r, b_r;
  Block w_z, u_z, b_z;
  Block w_n, u_n, b_n;
};

// Scores a (focus, target) pair from [h_v | h_u | d_vu | H_init | H_t]
// through one tanh hidden layer. The first layer is split by feature so
// target-dependent parts can be batched over all candidates.
struct PairScorerBlocks {
  Block w_focus, w_target, w_dist, w_init, w_global, b1;
  Block w2, b2;
};

// x -> w2 tanh(w1 x + b1) + b2
struct MlpBlocks {
  Block w1, b1, w2, b2;
};

/// Every learned weight of the model, stored in one flat vector. The
/// blocks below index into it.
class ModelParams {
public:
  explicit ModelParams(ModelDims dims = {});

  // Uniform(-0.1, 0.1) from a seeded generator.
  static ModelParams random(ModelDims dims, std::uint64_t seed);

  const ModelDims &dims() const noexcept { return dims_; }
  Eigen::Index size() const noexcept { return theta_.size(); }

  Eigen::VectorXd &flat() noexcept { return theta_; }
  const Eigen::VectorXd &flat() const noexcept { return theta_; }

  Eigen::Map<Eigen::MatrixXd> view(const Block &b) {
    return { theta_.data() + b.offset, b.rows, b.cols };
  }
  Eigen::Map<const Eigen::MatrixXd> view(const Block &b) const {
    return { theta_.data() + b.offset, b.rows, b.cols };
  }

  ad::Var on(ad::Tape &tape, const Block &b) const {
    return tape.parameter(theta_, b.offset, b.rows, b.cols);
  }

  std::vector<std::pair<std::string, Block>> named_blocks() const;

  // Flat indices covered by blocks whose name starts with `prefix`.
  std::vector<Eigen::Index> indices_with_prefix(std::string_view prefix) const;

  GgnnBlocks encoder, decoder;
  Block embed_w, embed_b;     // one-hot label -> encoder input state
  Block mu_w, mu_b;           // encoder state -> mean
  Block log_sigma_w, log_sigma_b;
  Block init_w, init_b;       // [z | one-hot] -> decoder initial state
  Block label_w, label_b;     // f: z -> label scores
  PairScorerBlocks edge;      // C
  PairScorerBlocks bond;      // L_l, one output row per bond order
  Block stop_w, stop_b;       // [h_v | H_t] -> stop logit
  MlpBlocks gate, value;      // g1, g2

private:
  ModelDims dims_;
  Eigen::VectorXd theta_;
  std::vector<std::pair<std::string, Block>> names_;
};

/// Checkpoint: a header line "GCGVAE-PARAMS v1 d=<d> S=<S> vocab=<n>"
/// then the flat vector as little-endian float64.
void write_checkpoint(std::ostream &os, const ModelParams &params);
ModelParams read_checkpoint(std::istream &is);
void save_checkpoint(const std::string &path, const ModelParams &params);
ModelParams load_checkpoint(const std::string &path);

// d x n, one column per atom.
using NodeStates = Eigen::MatrixXd;

using BondPairs = std::array<std::vector<std::pair<int, int>>, 3>;

// Atom pairs grouped by bond order (index l - 1).
BondPairs pairs_by_order(const MolecularGraph &g);

/// Gated graph propagation: m^(0) = h, m^(s+1) = GRU(m^(s), sum over
/// neighbors u joined by order l of E_l(m_u)), for `steps` rounds.
ad::Var ggnn_propagate(ad::Tape &tape, const ModelParams &params,
                       const GgnnBlocks &net, ad::Var states,
                       const BondPairs &pairs, int steps);

// Inference convenience over the decoder network.
NodeStates ggnn_propagate(const NodeStates &states, const MolecularGraph &g,
                          const ModelParams &params, int steps);
NodeStates ggnn_propagate(const NodeStates &states, const MolecularGraph &g,
                          const ModelParams &params, const GgnnBlocks &net,
                          int steps);

// Mean over nodes. Throws std::invalid_argument on an empty state set.
Eigen::VectorXd global_aggregate(const NodeStates &states);

ad::Var mlp(ad::Tape &tape, const ModelParams &params, const MlpBlocks &net,
            ad::Var x);

/// Loss with optional gradient output (grad is resized by the callee).
using LossWithGrad =
  std::function<double(const Eigen::VectorXd &theta, Eigen::VectorXd *grad)>;

struct GradCheckResult {
  double max_error = 0;
  Eigen::Index worst_index = -1;
  double analytic = 0;
  double numeric = 0;
  int probes = 0;
};

/// Compares the analytic gradient with central differences at `probes`
/// random coordinates (drawn from `candidates` when non-empty). The error
/// per coordinate is |a - n| / max(|a|, |n|, denom_floor); with the default
/// floor, entries below 1e-2 in magnitude are effectively held to an
/// absolute 1e-6 at a 1e-4 tolerance. Throws on a non-finite loss.
GradCheckResult grad_check(const LossWithGrad &loss,
                           const Eigen::VectorXd &theta, int probes, double h,
                           Rng &rng,
                           std::span<const Eigen::Index> candidates = {},
                           double denom_floor = 1e-2);

}  // namespace gcgvae

#endif  // GCGVAE_NEURAL_H_
