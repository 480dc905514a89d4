//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_TRAINER_H_
#define GCGVAE_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcgvae/autodiff.h"
#include "gcgvae/generator.h"
#include "gcgvae/molgraph.h"
#include "gcgvae/neural.h"
#include "gcgvae/rng.h"

namespace gcgvae {

/// Per-node diagonal Gaussians, one column per atom. sigma = exp(log_sigma).
struct Encoding {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd log_sigma;

  Eigen::MatrixXd sigma() const { return log_sigma.array().exp().matrix(); }
};

// Vocabulary index per atom. Throws std::invalid_argument when an element
// is outside element_vocabulary().
std::vector<int> atom_labels(const MolecularGraph &g);

Encoding encode(const MolecularGraph &g, const ModelParams &params);

// Sum over nodes of KL(N(mu, diag sigma^2) || N(0, I)).
double kl_loss(const Eigen::MatrixXd &mu, const Eigen::MatrixXd &sigma);
double kl_loss(const Encoding &e);
ad::Var kl_loss(ad::Var mu, ad::Var log_sigma);

// -sum_v log softmax(f(z_v))[label_v].
double node_label_loss(const MolecularGraph &g, const Eigen::MatrixXd &z,
                       const ModelParams &params);
ad::Var node_label_loss(ad::Tape &tape, const ModelParams &params, ad::Var z,
                        std::span<const int> labels);

struct TraceStep {
  int focus;
  int target;  // -1 for stop
  int order;

  bool is_stop() const noexcept { return target < 0; }
  bool operator==(const TraceStep &) const = default;
};

/// A breadth-first construction sequence of a source graph. For every
/// edge step, `options` lists the edges (target, order) still open at the
/// focus node in that state, the chosen one included.
struct GenerationTrace {
  int num_atoms = 0;
  std::vector<TraceStep> steps;
  std::vector<std::vector<std::pair<int, int>>> options;
  // log(n * prod over foci of r!), r the open edge count when the focus
  // was dequeued; equals -log of the probability extract_traces samples
  // this trace with.
  double log_multiplicity = 0;
  int source_id = -1;
};

/// k traces from a uniformly random first focus, breadth first, edge
/// order per focus uniformly shuffled. Throws GraphError(kDisconnected).
std::vector<GenerationTrace> extract_traces(const MolecularGraph &g, int k,
                                            Rng &rng);

/// Every breadth-first trace of g. Throws std::length_error past `limit`.
std::vector<GenerationTrace> enumerate_traces(const MolecularGraph &g,
                                              std::size_t limit = 100000);

// Rebuilds the graph by applying the steps to g's unbonded atoms.
MolecularGraph replay_trace(const GenerationTrace &trace,
                            const MolecularGraph &g);

/// Terms of the reconstruction bound for one graph.
enum class TraceMode {
  kSampled,     // |Pi| estimated by the mean multiplicity of the sample
  kExhaustive,  // traces are all of Pi; |Pi| is their count
};

// log p(pi | G^(0)) on a tape. Throws std::logic_error when a step is
// impossible under the valency masks.
ad::Var trace_log_prob(ad::Tape &tape, const ModelParams &params,
                       const decoder::Context &ctx, const MolecularGraph &g,
                       const GenerationTrace &trace,
                       bool average_state_edges = false);

double trace_log_prob(const GenerationTrace &trace, const MolecularGraph &g,
                      const Eigen::MatrixXd &z, const ModelParams &params);

// Negative bound: -[log |Pi| + mean over traces of log p(pi)].
ad::Var recon_loss(ad::Tape &tape, const ModelParams &params,
                   const decoder::Context &ctx, const MolecularGraph &g,
                   std::span<const GenerationTrace> traces, TraceMode mode,
                   bool average_state_edges = false);

double recon_loss(const MolecularGraph &g,
                  std::span<const GenerationTrace> traces,
                  const Eigen::MatrixXd &z, const ModelParams &params,
                  TraceMode mode);

// R(z) = sum_v sigmoid(g1(z_v)) * g2(z_v).
ad::Var property_score(ad::Tape &tape, const ModelParams &params, ad::Var z);
double property_score(const Eigen::MatrixXd &z, const ModelParams &params);

/// Objective over a d x n latent matrix; fills grad when non-null.
using LatentObjective =
  std::function<double(const Eigen::MatrixXd &z, Eigen::MatrixXd *grad)>;

/// Projected gradient ascent: z <- P(z + step * grad), P scaling each
/// column into the ball of radius 3 sqrt(d). Returns the best iterate
/// seen, the projected start included.
Eigen::MatrixXd latent_ascend(const Eigen::MatrixXd &z0,
                              const LatentObjective &objective, int steps,
                              double step_size);
Eigen::MatrixXd latent_ascend(const Eigen::MatrixXd &z0,
                              const ModelParams &params, int steps,
                              double step_size);

// Columns scaled down to norm <= 3 sqrt(rows).
Eigen::MatrixXd project_latent(const Eigen::MatrixXd &z);

struct TrainConfig {
  double lambda_latent = 0.3;
  double lambda_property = 10.0;
  int traces_per_graph = 4;
  double learning_rate = 1e-3;
  int epochs = 10;
  std::uint64_t seed = 0;
  // Replace each sampled edge term by the mean over the open edges of
  // its state.
  bool average_state_edges = true;

  void validate() const;
};

struct LossTerms {
  ad::Var total;
  ad::Var recon;     // trace bound plus node labels
  ad::Var latent;    // KL
  ad::Var property;  // (R - Q)^2, zero without a target
};

/// Full objective for one graph with fixed reparameterisation noise
/// (d x n) and fixed traces.
LossTerms graph_loss(ad::Tape &tape, const ModelParams &params,
                     const MolecularGraph &g,
                     std::span<const GenerationTrace> traces,
                     const Eigen::MatrixXd &noise,
                     std::optional<double> target, const TrainConfig &cfg,
                     TraceMode mode = TraceMode::kSampled);

struct EpochLog {
  int epoch;
  double total;
  double recon;
  double latent;
  double property;
};

class TrainingError: public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// Per-graph stochastic gradient descent with a constant step. Logged
/// terms are dataset means over the epoch. Throws TrainingError on a
/// non-finite loss, std::invalid_argument on an empty dataset.
ModelParams train(std::span<const MolecularGraph> dataset,
                  std::span<const double> targets, const TrainConfig &cfg,
                  ModelParams init, std::vector<EpochLog> *log = nullptr,
                  const EpochCallback &on_epoch = {});

}  // namespace gcgvae

#endif  // GCGVAE_TRAINER_H_
