//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/generator.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gcgvae {

bool Masks::any() const {
  return std::find(node.begin(), node.end(), 1) != node.end();
}

Masks compute_masks(const MolecularGraph &g, std::span<const char> closed,
                    int v) {
  const int n = g.num_atoms();
  if (v < 0 || v >= n)
    throw std::out_of_range("focus index out of range");
  if (static_cast<int>(closed.size()) != n)
    throw std::invalid_argument("closed flags do not match the graph");

  Masks m;
  m.node.assign(n, 0);
  m.order.assign(3 * static_cast<std::size_t>(n), 0);
  const int free_v = g.free_valence(v);
  if (free_v <= 0)
    return m;
  for (int u = 0; u < n; ++u) {
    const int free_u = g.free_valence(u);
    if (u == v || free_u <= 0 || closed[u] || g.find_bond(v, u) >= 0)
      continue;
    m.node[u] = 1;
    for (int l = 1; l <= 3; ++l)
      m.order[3 * u + l - 1] = l <= free_u && l <= free_v;
  }
  return m;
}

Masks compute_masks(const GenerationState &state, int v) {
  if (std::find(state.queue.begin(), state.queue.end(), v) == state.queue.end())
    throw std::invalid_argument("node " + std::to_string(v) + " is not in the focus queue");
  return compute_masks(state.graph, state.closed, v);
}

std::vector<double> capped_distances(const MolecularGraph &g, int v) {
  std::vector<int> hops = distances_from(g, v);
  std::vector<double> out(hops.size());
  for (std::size_t i = 0; i < hops.size(); ++i)
    out[i] = hops[i] == kUnreachable ? -1.0 : std::min(hops[i], kDistanceCap);
  return out;
}

namespace decoder {

Context make_context(ad::Tape &tape, const ModelParams &params, ad::Var z,
                     std::span<const int> labels) {
  const ModelDims &dims = params.dims();
  const Eigen::Index n = z.cols();
  if (z.rows() != dims.hidden || static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("latent matrix and labels disagree with the model");
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(dims.vocab, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= dims.vocab)
      throw std::invalid_argument("node label outside the vocabulary");
    onehot(labels[i], i) = 1.0;
  }
  ad::Var input = ad::vcat({ z, tape.constant(std::move(onehot)) });
  ad::Var h0 = ad::tanh(ad::add_colwise(
    ad::matmul(params.on(tape, params.init_w), input), params.on(tape, params.init_b)));
  Context ctx;
  ctx.initial = h0;
  ctx.isolated = ggnn_propagate(tape, params, params.decoder, h0, {}, dims.steps);
  ctx.h_init = ad::mean_cols(h0);
  return ctx;
}

ad::Var propagate(ad::Tape &tape, const ModelParams &params,
                  const Context &ctx, const MolecularGraph &partial) {
  const int n = partial.num_atoms();
  std::vector<int> active, local(n, -1);
  for (int v = 0; v < n; ++v)
    if (partial.degree(v) > 0) {
      local[v] = static_cast<int>(active.size());
      active.push_back(v);
    }
  if (active.empty())
    return ctx.isolated;
  BondPairs pairs;
  for (const Bond &b: partial.bonds())
    pairs[b.order - 1].emplace_back(local[b.a], local[b.b]);
  ad::Var sub = ad::gather_cols(ctx.initial, active);
  ad::Var out = ggnn_propagate(tape, params, params.decoder, sub, pairs,
                               params.dims().steps);
  return ad::replace_cols(ctx.isolated, out, active);
}

namespace {
ad::Var pair_logits(ad::Tape &tape, const ModelParams &params,
                    const PairScorerBlocks &net, ad::Var states, ad::Var focus,
                    ad::Var h_init, ad::Var global, ad::Var dist_row) {
  ad::Var shared = ad::matmul(params.on(tape, net.w_focus), focus)
                   + ad::matmul(params.on(tape, net.w_init), h_init)
                   + ad::matmul(params.on(tape, net.w_global), global)
                   + params.on(tape, net.b1);
  ad::Var per_target = ad::matmul(params.on(tape, net.w_target), states)
                       + ad::matmul(params.on(tape, net.w_dist), dist_row);
  ad::Var hidden = ad::tanh(ad::add_colwise(per_target, shared));
  return ad::add_colwise(ad::matmul(params.on(tape, net.w2), hidden),
                         params.on(tape, net.b2));
}
}  // namespace

StepLogProbs step_log_probs(ad::Tape &tape, const ModelParams &params,
                            ad::Var states, ad::Var h_init, int v,
                            std::span<const double> distances,
                            const Masks &masks) {
  const Eigen::Index n = states.cols();
  if (static_cast<Eigen::Index>(distances.size()) != n
      || static_cast<Eigen::Index>(masks.node.size()) != n)
    throw std::invalid_argument("step inputs disagree on node count");

  ad::Var global = ad::mean_cols(states);
  ad::Var focus = ad::col(states, v);
  ad::Var dist_row = tape.constant(
    Eigen::Map<const Eigen::MatrixXd>(distances.data(), 1, n));

  ad::Var edge = pair_logits(tape, params, params.edge, states, focus, h_init,
                             global, dist_row);
  ad::Var bond = pair_logits(tape, params, params.bond, states, focus, h_init,
                             global, dist_row);
  ad::Var stop = ad::add_colwise(
    ad::matmul(params.on(tape, params.stop_w), ad::vcat({ focus, global })),
    params.on(tape, params.stop_b));

  std::vector<char> node_mask(masks.node);
  node_mask.push_back(1);
  StepLogProbs out;
  out.node = ad::masked_log_softmax(ad::hcat({ edge, stop }), node_mask);
  out.bond = ad::masked_log_softmax_cols(bond, masks.order);
  return out;
}

}  // namespace decoder

std::vector<int> argmax_labels(const ModelParams &params,
                               const Eigen::MatrixXd &z) {
  const Eigen::MatrixXd scores =
    (params.view(params.label_w) * z).colwise()
    + params.view(params.label_b).col(0);
  std::vector<int> labels(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    int best = 0;
    for (int k = 1; k < scores.rows(); ++k)
      if (scores(k, j) > scores(best, j))
        best = k;
    labels[j] = best;
  }
  return labels;
}

GenerationState init_nodes(const ModelParams &params, int n, Rng &rng,
                           std::optional<LatentSpec> latents) {
  if (n < 1)
    throw std::invalid_argument("generation needs at least one node");
  const ModelDims &dims = params.dims();
  GenerationState s;
  if (latents) {
    if (latents->size() != n || latents->z.rows() != dims.hidden)
      throw std::invalid_argument("LatentSpec has the wrong shape");
    s.latent = std::move(*latents);
  } else {
    s.latent.z.resize(dims.hidden, n);
    for (Eigen::Index i = 0; i < s.latent.z.size(); ++i)
      s.latent.z.data()[i] = rng.normal();
  }
  if (s.latent.labels.empty())
    s.latent.labels = argmax_labels(params, s.latent.z);
  if (static_cast<int>(s.latent.labels.size()) != n)
    throw std::invalid_argument("LatentSpec has the wrong label count");

  const auto &vocab = element_vocabulary();
  for (int label: s.latent.labels) {
    if (label < 0 || label >= static_cast<int>(vocab.size()))
      throw std::invalid_argument("node label outside the vocabulary");
    s.graph.add_atom(vocab[label]);
  }

  ad::Tape tape(false);
  decoder::Context ctx = decoder::make_context(
    tape, params, tape.constant(s.latent.z), s.latent.labels);
  s.initial = ctx.initial.value();
  s.isolated = ctx.isolated.value();
  s.states = s.isolated;
  s.h_init = ctx.h_init.value().col(0);

  s.closed.assign(n, 0);
  s.discovered.assign(n, 0);
  s.first_focus = rng.below(n);
  s.discovered[s.first_focus] = 1;
  s.queue.push_back(s.first_focus);
  return s;
}

namespace {
struct StepValues {
  Eigen::MatrixXd node;
  Eigen::MatrixXd bond;
};

StepValues step_values(const GenerationState &state, int v,
                       const ModelParams &params, const Masks &masks) {
  ad::Tape tape(false);
  const std::vector<double> dist = capped_distances(state.graph, v);
  auto lp = decoder::step_log_probs(tape, params, tape.constant(state.states),
                                    tape.constant(state.h_init), v, dist, masks);
  return { lp.node.value(), lp.bond.value() };
}

void refresh_states(GenerationState &state, const ModelParams &params) {
  ad::Tape tape(false);
  decoder::Context ctx { tape.constant(state.initial),
                         tape.constant(state.isolated),
                         tape.constant(state.h_init) };
  state.states = decoder::propagate(tape, params, ctx, state.graph).value();
}

// Index drawn with probability exp(logp[i]); entries at -inf are skipped.
int sample_log_probs(const double *logp, int count, Rng &rng) {
  double u = rng.uniform();
  int last = -1;
  for (int i = 0; i < count; ++i) {
    if (!std::isfinite(logp[i]))
      continue;
    last = i;
    u -= std::exp(logp[i]);
    if (u < 0)
      return i;
  }
  if (last < 0)
    throw std::logic_error("sampling from an empty distribution");
  return last;
}
}  // namespace

EdgeDistribution edge_distribution(const GenerationState &state, int v,
                                   const ModelParams &params) {
  EdgeDistribution d;
  d.focus = v;
  d.masks = compute_masks(state, v);
  const int n = state.size();
  if (!d.masks.any()) {
    for (int u = 0; u < n; ++u)
      if (u != v)
        for (int l = 1; l <= 3; ++l)
          d.candidates.push_back({ u, l, 0.0 });
    d.stop_probability = 1.0;
    return d;
  }
  StepValues lp = step_values(state, v, params, d.masks);
  for (int u = 0; u < n; ++u) {
    if (u == v)
      continue;
    for (int l = 1; l <= 3; ++l) {
      double p = 0;
      if (d.masks.order[3 * u + l - 1])
        p = std::exp(lp.node(0, u) + lp.bond(l - 1, u));
      d.candidates.push_back({ u, l, p });
    }
  }
  d.stop_probability = std::exp(lp.node(0, n));
  return d;
}

DecodeAction decode_step(GenerationState &state, const ModelParams &params,
                         Rng &rng) {
  if (state.queue.empty())
    throw std::logic_error("decode_step on a finished state");
  const int v = state.queue.front();
  const Masks masks = compute_masks(state.graph, state.closed, v);
  ++state.t;

  int target = -1, order = 0;
  if (masks.any()) {
    StepValues lp = step_values(state, v, params, masks);
    const int n = state.size();
    const int pick = sample_log_probs(lp.node.data(), n + 1, rng);
    if (pick < n) {
      target = pick;
      order = 1 + sample_log_probs(lp.bond.col(pick).data(), 3, rng);
    }
  }

  if (target < 0) {
    state.queue.pop_front();
    state.closed[v] = 1;
    return { v, -1, 0 };
  }
  state.graph.add_bond(v, target, order);
  if (!state.discovered[target]) {
    state.discovered[target] = 1;
    state.queue.push_back(target);
  }
  refresh_states(state, params);
  return { v, target, order };
}

namespace {
MolecularGraph run_decoder(GenerationState &state, const ModelParams &params,
                           Rng &rng) {
  int capacity = 0;
  for (const Atom &a: state.graph.atoms())
    capacity += a.max_valence;
  const int limit = state.size() + capacity / 2 + 1;
  while (!state.done()) {
    if (state.t > limit)
      throw std::logic_error("decoder exceeded its step bound");
    decode_step(state, params, rng);
  }
  const std::vector<int> keep = connected_component(state.graph, state.first_focus);
  return induced_subgraph(state.graph, keep);
}
}  // namespace

MolecularGraph generate(const ModelParams &params, int n, Rng &rng) {
  GenerationState state = init_nodes(params, n, rng);
  return run_decoder(state, params, rng);
}

MolecularGraph generate(const ModelParams &params, const LatentSpec &latent,
                        Rng &rng) {
  GenerationState state = init_nodes(params, latent.size(), rng, latent);
  return run_decoder(state, params, rng);
}

}  // namespace gcgvae
