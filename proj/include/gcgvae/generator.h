//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_GENERATOR_H_
#define GCGVAE_GENERATOR_H_

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gcgvae/autodiff.h"
#include "gcgvae/molgraph.h"
#include "gcgvae/neural.h"
#include "gcgvae/rng.h"

namespace gcgvae {

inline constexpr int kDefaultMaxNodes = 40;
inline constexpr int kDistanceCap = 10;

/// Per-node latent vectors (one column each) and their vocabulary labels.
struct LatentSpec {
  Eigen::MatrixXd z;
  std::vector<int> labels;

  int size() const noexcept { return static_cast<int>(z.cols()); }
};

/// Valency masks for one focus node. `node[u]` is M, `order[3*u + l-1]`
/// is m for bond order l.
struct Masks {
  std::vector<char> node;
  std::vector<char> order;

  bool any() const;
};

Masks compute_masks(const MolecularGraph &g, std::span<const char> closed,
                    int v);

struct GenerationState {
  MolecularGraph graph;  // all N seed nodes, bonds added so far
  LatentSpec latent;
  NodeStates initial;    // h^(0)
  NodeStates isolated;   // h^(0) propagated with zero messages
  NodeStates states;     // current h
  Eigen::VectorXd h_init;
  std::deque<int> queue;
  std::vector<char> closed;
  std::vector<char> discovered;
  int first_focus = -1;
  int t = 0;

  int size() const noexcept { return graph.num_atoms(); }
  bool done() const noexcept { return queue.empty(); }
};

// Throws std::invalid_argument unless v is queued.
Masks compute_masks(const GenerationState &state, int v);

struct EdgeCandidate {
  int target;
  int order;
  double probability;
};

/// Joint distribution over (target, order) pairs and the stop action.
/// Candidates cover every u != v and l in 1..3; masked ones carry 0.
struct EdgeDistribution {
  int focus = -1;
  std::vector<EdgeCandidate> candidates;
  double stop_probability = 0;
  Masks masks;
};

/// Argmax of f(z) per column; ties go to the lowest vocabulary index.
std::vector<int> argmax_labels(const ModelParams &params,
                               const Eigen::MatrixXd &z);

GenerationState init_nodes(const ModelParams &params, int n, Rng &rng,
                           std::optional<LatentSpec> latents = std::nullopt);

EdgeDistribution edge_distribution(const GenerationState &state, int v,
                                   const ModelParams &params);

struct DecodeAction {
  int focus;
  int target;  // -1 on stop
  int order;

  bool is_stop() const noexcept { return target < 0; }
};

DecodeAction decode_step(GenerationState &state, const ModelParams &params,
                         Rng &rng);

/// Decodes until the focus queue is empty and returns the component that
/// holds the first focus node, atoms in ascending seed order.
MolecularGraph generate(const ModelParams &params, int n, Rng &rng);
MolecularGraph generate(const ModelParams &params, const LatentSpec &latent,
                        Rng &rng);

// Hop counts from v, capped at kDistanceCap, -1 where unreachable.
std::vector<double> capped_distances(const MolecularGraph &g, int v);

/// Decoder pieces on a tape, shared by sampling and training.
namespace decoder {

struct Context {
  ad::Var initial;   // d x n
  ad::Var isolated;  // d x n
  ad::Var h_init;    // d x 1
};

// h^(0)_v = tanh(W [z_v | onehot(label_v)] + b).
Context make_context(ad::Tape &tape, const ModelParams &params, ad::Var z,
                     std::span<const int> labels);

// Current node states for a partial graph over the same n nodes. Nodes
// without bonds keep their isolated states.
ad::Var propagate(ad::Tape &tape, const ModelParams &params,
                  const Context &ctx, const MolecularGraph &partial);

struct StepLogProbs {
  ad::Var node;  // 1 x (n + 1); entry n is the stop action
  ad::Var bond;  // 3 x n; column u holds log p(l | v <-> u)
};

StepLogProbs step_log_probs(ad::Tape &tape, const ModelParams &params,
                            ad::Var states, ad::Var h_init, int v,
                            std::span<const double> distances,
                            const Masks &masks);

}  // namespace decoder

}  // namespace gcgvae

#endif  // GCGVAE_GENERATOR_H_
