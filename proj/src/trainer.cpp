//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/trainer.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace gcgvae {

std::vector<int> atom_labels(const MolecularGraph &g) {
  std::vector<int> labels(g.num_atoms());
  for (int v = 0; v < g.num_atoms(); ++v) {
    labels[v] = vocabulary_index(g.atom(v).symbol);
    if (labels[v] < 0)
      throw std::invalid_argument("element " + g.atom(v).symbol
                                  + " is outside the model vocabulary");
  }
  return labels;
}

namespace {
struct EncodedVars {
  ad::Var mu;
  ad::Var log_sigma;
};

EncodedVars encode_on(ad::Tape &tape, const ModelParams &params,
                      const MolecularGraph &g) {
  if (g.empty())
    throw std::invalid_argument("cannot encode an empty graph");
  const std::vector<int> labels = atom_labels(g);
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(params.dims().vocab, g.num_atoms());
  for (int v = 0; v < g.num_atoms(); ++v)
    onehot(labels[v], v) = 1.0;
  ad::Var x0 = ad::tanh(ad::add_colwise(
    ad::matmul(params.on(tape, params.embed_w), tape.constant(std::move(onehot))),
    params.on(tape, params.embed_b)));
  ad::Var h = ggnn_propagate(tape, params, params.encoder, x0, pairs_by_order(g),
                             params.dims().steps);
  return {
    ad::add_colwise(ad::matmul(params.on(tape, params.mu_w), h),
                    params.on(tape, params.mu_b)),
    ad::add_colwise(ad::matmul(params.on(tape, params.log_sigma_w), h),
                    params.on(tape, params.log_sigma_b)),
  };
}

}  // namespace

ad::Var kl_loss(ad::Var mu, ad::Var log_sigma) {
  const double count = static_cast<double>(mu.rows() * mu.cols());
  ad::Var var_term = ad::sum(ad::exp(2.0 * log_sigma));
  ad::Var kl = 0.5 * ad::sum(ad::square(mu)) + 0.5 * var_term
               - ad::sum(log_sigma);
  return ad::add_scalar(kl, -0.5 * count);
}

ad::Var node_label_loss(ad::Tape &tape, const ModelParams &params, ad::Var z,
                        std::span<const int> labels) {
  ad::Var logits = ad::add_colwise(ad::matmul(params.on(tape, params.label_w), z),
                                   params.on(tape, params.label_b));
  const std::vector<char> all(static_cast<std::size_t>(logits.rows() * logits.cols()), 1);
  ad::Var lp = ad::masked_log_softmax_cols(logits, all);
  Eigen::MatrixXd pick = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (std::size_t v = 0; v < labels.size(); ++v)
    pick(labels[v], static_cast<Eigen::Index>(v)) = 1.0;
  return -1.0 * ad::sum(ad::cwise_product(lp, tape.constant(std::move(pick))));
}

namespace {
ad::Var sum_scalars(ad::Tape &tape, std::span<const ad::Var> terms) {
  if (terms.empty())
    return tape.constant(Eigen::MatrixXd::Zero(1, 1));
  return ad::sum(ad::vcat(terms));
}

double log_mean_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0;
  for (double v: x)
    s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

MolecularGraph unbonded_copy(const MolecularGraph &g) {
  MolecularGraph out;
  for (const Atom &a: g.atoms())
    out.add_atom(a.symbol, a.charge, a.hydrogens);
  return out;
}
}  // namespace

Encoding encode(const MolecularGraph &g, const ModelParams &params) {
  ad::Tape tape(false);
  EncodedVars e = encode_on(tape, params, g);
  return { e.mu.value(), e.log_sigma.value() };
}

double kl_loss(const Eigen::MatrixXd &mu, const Eigen::MatrixXd &sigma) {
  if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols())
    throw std::invalid_argument("mu and sigma shapes differ");
  if ((sigma.array() <= 0).any())
    throw std::domain_error("sigma must be positive");
  return 0.5 * (mu.array().square() + sigma.array().square() - 1.0
                - 2.0 * sigma.array().log()).sum();
}

double kl_loss(const Encoding &e) {
  return kl_loss(e.mu, e.sigma());
}

double node_label_loss(const MolecularGraph &g, const Eigen::MatrixXd &z,
                       const ModelParams &params) {
  if (z.cols() != g.num_atoms() || z.rows() != params.dims().hidden)
    throw std::invalid_argument("one latent column per atom is required");
  ad::Tape tape(false);
  return node_label_loss(tape, params, tape.constant(z), atom_labels(g)).scalar();
}

// --- traces ---------------------------------------------------------------

namespace {
std::vector<int> open_bonds(const MolecularGraph &g, int v,
                            const std::vector<char> &added) {
  std::vector<int> out;
  for (const Neighbor &nb: g.neighbors(v))
    if (!added[nb.bond])
      out.push_back(nb.bond);
  return out;
}
}  // namespace

std::vector<GenerationTrace> extract_traces(const MolecularGraph &g, int k,
                                            Rng &rng) {
  if (g.empty() || !is_connected(g))
    throw GraphError(GraphErrc::kDisconnected, "traces need a connected graph");
  if (k < 1)
    throw std::invalid_argument("at least one trace is required");
  const int n = g.num_atoms();
  std::vector<GenerationTrace> traces;
  for (int i = 0; i < k; ++i) {
    GenerationTrace tr;
    tr.num_atoms = n;
    tr.log_multiplicity = std::log(static_cast<double>(n));
    std::vector<char> added(g.num_bonds(), 0), discovered(n, 0);
    std::deque<int> queue;
    const int first = rng.below(n);
    discovered[first] = 1;
    queue.push_back(first);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      std::vector<int> open = open_bonds(g, v, added);
      tr.log_multiplicity += std::lgamma(static_cast<double>(open.size()) + 1.0);
      rng.shuffle(open);
      for (std::size_t j = 0; j < open.size(); ++j) {
        const Bond &b = g.bond(open[j]);
        const int u = b.other(v);
        std::vector<std::pair<int, int>> options;
        for (std::size_t r = j; r < open.size(); ++r) {
          const Bond &o = g.bond(open[r]);
          options.emplace_back(o.other(v), o.order);
        }
        tr.steps.push_back({ v, u, b.order });
        tr.options.push_back(std::move(options));
        added[open[j]] = 1;
        if (!discovered[u]) {
          discovered[u] = 1;
          queue.push_back(u);
        }
      }
      tr.steps.push_back({ v, -1, 0 });
      tr.options.emplace_back();
    }
    traces.push_back(std::move(tr));
  }
  return traces;
}

std::vector<GenerationTrace> enumerate_traces(const MolecularGraph &g,
                                              std::size_t limit) {
  if (g.empty() || !is_connected(g))
    throw GraphError(GraphErrc::kDisconnected, "traces need a connected graph");
  const int n = g.num_atoms();
  std::vector<GenerationTrace> out;
  GenerationTrace cur;
  cur.num_atoms = n;
  std::vector<char> added(g.num_bonds(), 0), discovered(n, 0);
  std::deque<int> queue;

  // `fresh` marks the first visit of the queue front, where r! is taken.
  std::function<void(bool)> recurse = [&](bool fresh) {
    if (queue.empty()) {
      if (out.size() >= limit)
        throw std::length_error("trace enumeration limit exceeded");
      out.push_back(cur);
      return;
    }
    const int v = queue.front();
    const std::vector<int> open = open_bonds(g, v, added);
    const double saved_mult = cur.log_multiplicity;
    if (fresh)
      cur.log_multiplicity += std::lgamma(static_cast<double>(open.size()) + 1.0);
    if (open.empty()) {
      queue.pop_front();
      cur.steps.push_back({ v, -1, 0 });
      cur.options.emplace_back();
      recurse(true);
      cur.steps.pop_back();
      cur.options.pop_back();
      queue.push_front(v);
    } else {
      std::vector<std::pair<int, int>> options;
      for (int b: open)
        options.emplace_back(g.bond(b).other(v), g.bond(b).order);
      for (int b: open) {
        const int u = g.bond(b).other(v);
        const bool is_new = !discovered[u];
        cur.steps.push_back({ v, u, g.bond(b).order });
        cur.options.push_back(options);
        added[b] = 1;
        if (is_new) {
          discovered[u] = 1;
          queue.push_back(u);
        }
        recurse(false);
        if (is_new) {
          queue.pop_back();
          discovered[u] = 0;
        }
        added[b] = 0;
        cur.steps.pop_back();
        cur.options.pop_back();
      }
    }
    cur.log_multiplicity = saved_mult;
  };

  for (int first = 0; first < n; ++first) {
    cur.log_multiplicity = std::log(static_cast<double>(n));
    discovered[first] = 1;
    queue.push_back(first);
    recurse(true);
    queue.pop_back();
    discovered[first] = 0;
  }
  return out;
}

MolecularGraph replay_trace(const GenerationTrace &trace,
                            const MolecularGraph &g) {
  if (trace.num_atoms != g.num_atoms())
    throw std::invalid_argument("trace and graph disagree on atom count");
  MolecularGraph out = unbonded_copy(g);
  for (const TraceStep &s: trace.steps)
    if (!s.is_stop())
      out.add_bond(s.focus, s.target, s.order);
  return out;
}

// --- likelihood -------------------------------------------------------------

ad::Var trace_log_prob(ad::Tape &tape, const ModelParams &params,
                       const decoder::Context &ctx, const MolecularGraph &g,
                       const GenerationTrace &trace,
                       bool average_state_edges) {
  const int n = g.num_atoms();
  if (trace.num_atoms != n || ctx.initial.cols() != n)
    throw std::invalid_argument("trace, graph and context disagree on atom count");
  if (trace.options.size() != trace.steps.size())
    throw std::invalid_argument("trace options do not match its steps");

  MolecularGraph partial = unbonded_copy(g);
  std::vector<char> closed(n, 0);
  std::vector<ad::Var> terms;
  if (n > 1)
    terms.push_back(tape.constant(
      Eigen::MatrixXd::Constant(1, 1, -std::log(static_cast<double>(n)))));

  std::optional<ad::Var> states;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep &s = trace.steps[i];
    const Masks masks = compute_masks(partial, closed, s.focus);
    if (s.is_stop()) {
      closed[s.focus] = 1;
      if (!masks.any())
        continue;
    } else if (!masks.order[3 * s.target + s.order - 1]) {
      std::ostringstream msg;
      msg << "trace step " << i << " (" << s.focus << "->" << s.target
          << ", order " << s.order << ") is masked";
      throw std::logic_error(msg.str());
    }

    if (!states)
      states = decoder::propagate(tape, params, ctx, partial);
    const std::vector<double> dist = capped_distances(partial, s.focus);
    auto lp = decoder::step_log_probs(tape, params, *states, ctx.h_init,
                                      s.focus, dist, masks);
    if (s.is_stop()) {
      terms.push_back(ad::entry(lp.node, 0, n));
      continue;
    }

    const auto &options = trace.options[i];
    if (average_state_edges && options.size() > 1) {
      std::vector<ad::Var> parts;
      for (const auto &[u, l]: options)
        parts.push_back(ad::entry(lp.node, 0, u) + ad::entry(lp.bond, l - 1, u));
      terms.push_back((1.0 / static_cast<double>(options.size()))
                      * sum_scalars(tape, parts));
    } else {
      terms.push_back(ad::entry(lp.node, 0, s.target)
                      + ad::entry(lp.bond, s.order - 1, s.target));
    }
    partial.add_bond(s.focus, s.target, s.order);
    states.reset();
  }
  return sum_scalars(tape, terms);
}

double trace_log_prob(const GenerationTrace &trace, const MolecularGraph &g,
                      const Eigen::MatrixXd &z, const ModelParams &params) {
  ad::Tape tape(false);
  auto ctx = decoder::make_context(tape, params, tape.constant(z), atom_labels(g));
  return trace_log_prob(tape, params, ctx, g, trace).scalar();
}

ad::Var recon_loss(ad::Tape &tape, const ModelParams &params,
                   const decoder::Context &ctx, const MolecularGraph &g,
                   std::span<const GenerationTrace> traces, TraceMode mode,
                   bool average_state_edges) {
  if (traces.empty())
    throw std::invalid_argument("reconstruction loss needs at least one trace");
  std::vector<ad::Var> lps;
  std::vector<double> mult;
  for (const auto &tr: traces) {
    lps.push_back(trace_log_prob(tape, params, ctx, g, tr, average_state_edges));
    mult.push_back(tr.log_multiplicity);
  }
  const double k = static_cast<double>(traces.size());
  const double log_pi = mode == TraceMode::kExhaustive ? std::log(k) : log_mean_exp(mult);
  ad::Var mean_lp = (1.0 / k) * sum_scalars(tape, lps);
  return ad::add_scalar(-1.0 * mean_lp, -log_pi);
}

double recon_loss(const MolecularGraph &g,
                  std::span<const GenerationTrace> traces,
                  const Eigen::MatrixXd &z, const ModelParams &params,
                  TraceMode mode) {
  ad::Tape tape(false);
  auto ctx = decoder::make_context(tape, params, tape.constant(z), atom_labels(g));
  return recon_loss(tape, params, ctx, g, traces, mode).scalar();
}

// --- property head ------------------------------------------------------------

ad::Var property_score(ad::Tape &tape, const ModelParams &params, ad::Var z) {
  ad::Var gate = mlp(tape, params, params.gate, z);
  ad::Var value = mlp(tape, params, params.value, z);
  return ad::sum(ad::cwise_product(ad::sigmoid(gate), value));
}

double property_score(const Eigen::MatrixXd &z, const ModelParams &params) {
  ad::Tape tape(false);
  return property_score(tape, params, tape.constant(z)).scalar();
}

Eigen::MatrixXd project_latent(const Eigen::MatrixXd &z) {
  const double radius = 3.0 * std::sqrt(static_cast<double>(z.rows()));
  Eigen::MatrixXd out = z;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > radius)
      out.col(j) *= radius / norm;
  }
  return out;
}

Eigen::MatrixXd latent_ascend(const Eigen::MatrixXd &z0,
                              const LatentObjective &objective, int steps,
                              double step_size) {
  if (!z0.allFinite())
    throw std::invalid_argument("latent start is not finite");
  Eigen::MatrixXd z = project_latent(z0);
  Eigen::MatrixXd grad;
  double value = objective(z, &grad);
  Eigen::MatrixXd best = z;
  double best_value = value;
  for (int s = 0; s < steps; ++s) {
    z = project_latent(z + step_size * grad);
    value = objective(z, &grad);
    if (value > best_value) {
      best_value = value;
      best = z;
    }
  }
  return best;
}

Eigen::MatrixXd latent_ascend(const Eigen::MatrixXd &z0,
                              const ModelParams &params, int steps,
                              double step_size) {
  LatentObjective r = [&params](const Eigen::MatrixXd &z, Eigen::MatrixXd *grad) {
    ad::Tape tape(grad != nullptr);
    ad::Var in = tape.input(z);
    ad::Var out = property_score(tape, params, in);
    if (grad != nullptr) {
      tape.backward(out, nullptr);
      *grad = tape.grad(in);
    }
    return out.scalar();
  };
  return latent_ascend(z0, r, steps, step_size);
}

// --- training -------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lambda_latent >= 0) || !(lambda_property >= 0))
    throw std::invalid_argument("loss weights must be non-negative");
  if (traces_per_graph < 1)
    throw std::invalid_argument("traces_per_graph must be at least 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("learning rate must be positive");
  if (epochs < 0)
    throw std::invalid_argument("epochs must be non-negative");
}

LossTerms graph_loss(ad::Tape &tape, const ModelParams &params,
                     const MolecularGraph &g,
                     std::span<const GenerationTrace> traces,
                     const Eigen::MatrixXd &noise,
                     std::optional<double> target, const TrainConfig &cfg,
                     TraceMode mode) {
  const std::vector<int> labels = atom_labels(g);
  if (noise.rows() != params.dims().hidden || noise.cols() != g.num_atoms())
    throw std::invalid_argument("noise must be d x n");
  EncodedVars enc = encode_on(tape, params, g);
  ad::Var z = enc.mu + ad::cwise_product(ad::exp(enc.log_sigma), tape.constant(noise));

  LossTerms t;
  t.latent = kl_loss(enc.mu, enc.log_sigma);
  ad::Var labels_term = node_label_loss(tape, params, z, labels);
  auto ctx = decoder::make_context(tape, params, z, labels);
  const bool average = cfg.average_state_edges && mode == TraceMode::kSampled;
  t.recon = recon_loss(tape, params, ctx, g, traces, mode, average) + labels_term;
  if (target)
    t.property = ad::square(ad::add_scalar(property_score(tape, params, z), -*target));
  else
    t.property = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  t.total = t.recon + cfg.lambda_latent * t.latent + cfg.lambda_property * t.property;
  return t;
}

ModelParams train(std::span<const MolecularGraph> dataset,
                  std::span<const double> targets, const TrainConfig &cfg,
                  ModelParams init, std::vector<EpochLog> *log,
                  const EpochCallback &on_epoch) {
  cfg.validate();
  if (dataset.empty())
    throw std::invalid_argument("training needs a non-empty dataset");
  if (!targets.empty() && targets.size() != dataset.size())
    throw std::invalid_argument("property targets must match the dataset");
  for (const auto &g: dataset)
    atom_labels(g);

  ModelParams params = std::move(init);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const int d = params.dims().hidden;
  Eigen::VectorXd grad(params.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLog sums { epoch, 0, 0, 0, 0 };
    for (std::size_t idx: order) {
      const MolecularGraph &g = dataset[idx];
      auto traces = extract_traces(g, cfg.traces_per_graph, rng);
      Eigen::MatrixXd noise(d, g.num_atoms());
      for (Eigen::Index i = 0; i < noise.size(); ++i)
        noise.data()[i] = rng.normal();
      std::optional<double> target;
      if (!targets.empty())
        target = targets[idx];

      ad::Tape tape;
      LossTerms t = graph_loss(tape, params, g, traces, noise, target, cfg);
      const double total = t.total.scalar();
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", graph " << idx
            << " (" << formula(g) << "): recon=" << t.recon.scalar()
            << " latent=" << t.latent.scalar() << " property=" << t.property.scalar();
        throw TrainingError(msg.str());
      }
      grad.setZero();
      tape.backward(t.total, &grad);
      if (!grad.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite gradient at epoch " << epoch << ", graph " << idx
            << " (" << formula(g) << ")";
        throw TrainingError(msg.str());
      }
      params.flat() -= cfg.learning_rate * grad;

      sums.total += total;
      sums.recon += t.recon.scalar();
      sums.latent += t.latent.scalar();
      sums.property += t.property.scalar();
    }
    const double m = static_cast<double>(dataset.size());
    EpochLog entry { epoch, sums.total / m, sums.recon / m, sums.latent / m,
                     sums.property / m };
    if (log != nullptr)
      log->push_back(entry);
    if (on_epoch)
      on_epoch(entry);
  }
  return params;
}

}  // namespace gcgvae
