//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if
// any fails. Optional arguments select criteria by id.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gcgvae/fitness.h"
#include "gcgvae/ga.h"
#include "gcgvae/generator.h"
#include "gcgvae/pipeline.h"
#include "gcgvae/smiles.h"
#include "gcgvae/trainer.h"
#include "oracles.h"
#include "test_data.h"

namespace {
using namespace gcgvae;
using namespace test_oracles;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string id;
  double budget_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::vector<MolecularGraph> corpus() {
  std::vector<MolecularGraph> out;
  for (const auto &smi: test_data::demo_corpus())
    out.push_back(parse_smiles(smi));
  return out;
}

// --- validity ----------------------------------------------------------------

Outcome validity() {
  const auto data = corpus();
  const std::vector<MolecularGraph> subset(data.begin(), data.begin() + 20);
  int total = 0, bad = 0;
  std::string first_bad;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig tc;
    tc.epochs = 2;
    tc.traces_per_graph = 2;
    tc.seed = seed;
    const ModelParams untrained = ModelParams::random({}, seed);
    const ModelParams trained = train(subset, {}, tc, untrained);
    for (const ModelParams *p: { &untrained, &trained }) {
      Rng rng(seed);
      for (int i = 0; i < 500; ++i, ++total) {
        const MolecularGraph g = generate(*p, kDefaultMaxNodes, rng);
        const auto report = validate(g);
        if (!report.ok) {
          if (bad++ == 0)
            first_bad = report.violations.empty() ? "?" : report.violations.front();
        }
      }
    }
  }
  return { bad == 0 && total == 10000,
           fmt::format("{}/{} valid{}", total - bad, total,
                       bad ? " (first violation: " + first_bad + ")" : "") };
}

// --- ranking -----------------------------------------------------------------

Outcome ranking() {
  const std::vector<std::pair<std::string, double>> published {
    { "Remdesivir", -7.3 }, { "Ribavirin", -6.0 }, { "Umifenovir", -6.1 },
    { "Favipiravir", -5.4 }, { "Lopinavir", -8.0 }, { "Dexamethasone", -6.8 },
  };
  std::vector<ReportEntry> entries;
  for (const auto &[name, affinity]: published) {
    FitnessRecord r;
    r.valid = true;
    r.affinity = affinity;
    entries.push_back({ name, parse_smiles("C"), r });
  }
  std::vector<std::string> order;
  for (const auto &row: rank_report(entries))
    order.push_back(row.name);
  const std::vector<std::string> expected { "Lopinavir", "Remdesivir", "Dexamethasone",
                                            "Umifenovir", "Ribavirin", "Favipiravir" };
  return { order == expected, fmt::format("{}", fmt::join(order, " > ")) };
}

// --- pool composition ---------------------------------------------------------

Outcome pool_composition() {
  auto data = corpus();
  Rng rng(0);
  rng.shuffle(data);
  data.resize(100);
  const auto pop = init_population(list_source(data), 100, 0);
  GaConfig cfg;
  const auto pool = build_pool(pop, cfg, rng, 1);
  const auto h = provenance_histogram(pool);
  const bool pass = pool.size() == 400 && h[0] == 0 && h[1] == 100 && h[2] == 100
                    && h[3] == 200;
  return { pass, fmt::format("|pool|={} COPY={} CROSS_UPPERMOST={} CROSS_UNIVERSAL={}",
                             pool.size(), h[1], h[2], h[3]) };
}

// --- monotone elite ------------------------------------------------------------

Outcome monotone_elite() {
  const auto data = corpus();
  SurrogateBackend backend;
  int improved = 0;
  bool monotone = true;
  std::vector<std::string> per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto shuffled = data;
    Rng init_rng(derive_seed(seed, "init"));
    init_rng.shuffle(shuffled);
    auto pop = init_population(list_source(shuffled), 100, 100);
    GaConfig cfg;
    cfg.seed = seed;
    Rng rng(derive_seed(seed, "evolve"));
    std::vector<double> best;
    evolve(std::move(pop), cfg, backend, rng,
           [&](const GenerationStats &s, std::span<const Individual>) {
             best.push_back(s.best);
           });
    for (std::size_t i = 1; i < best.size(); ++i)
      monotone = monotone && best[i] >= best[i - 1];
    improved += best.back() > best.front();
    per_seed.push_back(fmt::format("{:.3f}->{:.3f}", best.front(), best.back()));
  }
  return { monotone && improved >= 4,
           fmt::format("non-decreasing={} improved {}/5 [{}]", monotone, improved,
                       fmt::join(per_seed, ", ")) };
}

// --- KL ---------------------------------------------------------------------------

Outcome kl() {
  const double zero = kl_loss(Eigen::MatrixXd::Zero(16, 8), Eigen::MatrixXd::Ones(16, 8));
  const double half = kl_loss(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  Rng rng(0);
  double min_kl = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + rng.below(16);
    const int n = 1 + rng.below(8);
    Eigen::MatrixXd mu = 3.0 * random_latent(d, n, rng);
    Eigen::MatrixXd sigma = random_latent(d, n, rng).array().exp();
    min_kl = std::min(min_kl, kl_loss(mu, sigma));
  }
  const bool pass = std::abs(zero) <= 1e-12 && std::abs(half - 0.5) <= 1e-12 && min_kl >= 0;
  return { pass, fmt::format("KL(0,1)={:.3g} KL(1,1)-0.5={:.3g} min over 1000={:.4g}", zero,
                             half - 0.5, min_kl) };
}

// --- gradient fidelity ---------------------------------------------------------

Outcome gradients() {
  const ModelParams p = ModelParams::random({ 6, 2, 8 }, 19);
  const MolecularGraph g = parse_smiles("OC1CC(N)C1C=O");
  Rng rng(19);
  const auto traces = extract_traces(g, 3, rng);
  const Eigen::MatrixXd noise = random_latent(6, g.num_atoms(), rng);
  const Eigen::MatrixXd z = random_latent(6, g.num_atoms(), rng);
  const TrainConfig cfg;
  const auto labels = atom_labels(g);

  using Build = std::function<ad::Var(ad::Tape &, const ModelParams &)>;
  const std::vector<std::tuple<std::string, std::string, Build>> terms {
    { "KL", "encoder.",
      [&](ad::Tape &t, const ModelParams &q) {
        return graph_loss(t, q, g, traces, noise, std::nullopt, cfg).latent;
      } },
    { "label", "label.",
      [&](ad::Tape &t, const ModelParams &q) {
        return node_label_loss(t, q, t.constant(z), labels);
      } },
    { "trace", "",
      [&](ad::Tape &t, const ModelParams &q) {
        auto ctx = decoder::make_context(t, q, t.constant(z), labels);
        return trace_log_prob(t, q, ctx, g, traces[0], true);
      } },
    { "recon", "",
      [&](ad::Tape &t, const ModelParams &q) {
        return graph_loss(t, q, g, traces, noise, std::nullopt, cfg).recon;
      } },
    { "L_Q", "",
      [&](ad::Tape &t, const ModelParams &q) {
        return graph_loss(t, q, g, traces, noise, -6.5, cfg).property;
      } },
    { "R", "value.",
      [&](ad::Tape &t, const ModelParams &q) {
        return property_score(t, q, t.constant(z));
      } },
    { "R", "gate.",
      [&](ad::Tape &t, const ModelParams &q) {
        return property_score(t, q, t.constant(z));
      } },
  };
  bool pass = true;
  std::vector<std::string> parts;
  for (const auto &[name, prefix, build]: terms) {
    std::vector<Eigen::Index> idx;
    if (!prefix.empty())
      idx = p.indices_with_prefix(prefix);
    const auto r = grad_check(term_loss(p, build), p.flat(), 200, 1e-5, rng, idx);
    pass = pass && r.probes >= 200 && r.max_error <= 1e-4;
    parts.push_back(fmt::format("{}{}={:.1e}", name,
                                prefix.empty() ? "" : "[" + prefix + "]", r.max_error));
  }
  return { pass, "200 probes each, max rel err " + fmt::format("{}", fmt::join(parts, " ")) };
}

// --- trace oracle --------------------------------------------------------------

Outcome trace_oracle() {
  const ModelParams p = ModelParams::random({ 8, 2, 8 }, 12);
  Rng rng(12);
  const auto graphs = small_graphs(4);
  double worst = 0;
  bool counts_match = true;
  for (const MolecularGraph &g: graphs) {
    const Eigen::MatrixXd z = random_latent(8, g.num_atoms(), rng);
    const auto all = enumerate_traces(g);
    std::size_t count = 0;
    const double expected = brute_force_bound(g, z, p, &count);
    counts_match = counts_match && all.size() == count;
    worst = std::max(worst,
                     std::abs(recon_loss(g, all, z, p, TraceMode::kExhaustive) - expected));
  }
  return { counts_match && worst <= 1e-9 && !graphs.empty(),
           fmt::format("{} graphs, |Pi| counts match={}, max |diff|={:.2e}", graphs.size(),
                       counts_match, worst) };
}

// --- SMILES roundtrip ----------------------------------------------------------

Outcome roundtrip() {
  std::vector<std::string> inputs = test_data::demo_corpus();
  const std::size_t corpus_size = inputs.size();
  for (const auto &row: test_data::reference_molecules())
    inputs.push_back(row.smiles);
  int kept = 0, aromatic = 0, failures = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string &smi = inputs[i];
    const bool lowercase_atoms = smi.find_first_of("cnosp") != std::string::npos
                                 && i >= corpus_size;
    try {
      const MolecularGraph g = parse_smiles(smi);
      if (canonical_key(parse_smiles(write_smiles(g))) == canonical_key(g))
        ++kept;
      else if (failures++ == 0)
        first_failure = smi;
    } catch (const SmilesError &e) {
      if (i >= corpus_size && e.code() == SmilesErrc::kAromaticInput && lowercase_atoms)
        ++aromatic;
      else if (failures++ == 0)
        first_failure = smi + " (" + e.what() + ")";
    } catch (const std::exception &e) {
      if (failures++ == 0)
        first_failure = smi + " (" + e.what() + ")";
    }
  }
  return { failures == 0 && kept >= static_cast<int>(corpus_size),
           fmt::format("{} corpus + {} reference: {} roundtrip, {} aromatic rejected, {} "
                       "failures{}",
                       corpus_size, inputs.size() - corpus_size, kept, aromatic, failures,
                       failures ? "; first: " + first_failure : "") };
}

// --- determinism -----------------------------------------------------------------

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
}

Outcome determinism() {
  std::string tmpl = (fs::temp_directory_path() / "gcgvae-accept-XXXXXX").string();
  const fs::path root = ::mkdtemp(tmpl.data());
  std::vector<std::string> reports;
  for (const char *name: { "a", "b" }) {
    const std::string cmd = fmt::format("'{}' run --config demo --out '{}' 2>/dev/null",
                                        GCGVAE_CLI_PATH, (root / name).string());
    if (std::system(cmd.c_str()) != 0) {
      fs::remove_all(root);
      return { false, "gcgvae run exited non-zero" };
    }
    reports.push_back(slurp(root / name / "report.tsv"));
  }
  fs::remove_all(root);
  std::size_t rows = 0;
  for (char c: reports[0])
    rows += c == '\n';
  return { !reports[0].empty() && reports[0] == reports[1],
           fmt::format("report.tsv {} bytes, {} lines, identical={}", reports[0].size(), rows,
                       reports[0] == reports[1]) };
}

// --- training sanity ---------------------------------------------------------------

Outcome training_sanity() {
  const auto data = corpus();
  const std::vector<MolecularGraph> subset(data.begin(), data.begin() + 20);
  std::vector<double> targets;
  for (const auto &g: subset)
    targets.push_back(-surrogate_score(g));
  TrainConfig tc;
  tc.epochs = 50;
  std::vector<EpochLog> log;
  train(subset, targets, tc, ModelParams::random({}, 0), &log);
  const double first = log.front().total, last = log.back().total;
  const double drop = (first - last) / first;
  return { drop >= 0.2,
           fmt::format("L epoch 1 = {:.3f}, epoch 50 = {:.3f}, decrease {:.1f}%", first, last,
                       100 * drop) };
}

}  // namespace

int main(int argc, char **argv) {
  const std::vector<Criterion> criteria {
    { "validity", 120, validity },
    { "ranking", 0, ranking },
    { "pool-composition", 0, pool_composition },
    { "monotone-elite", 180, monotone_elite },
    { "kl", 0, kl },
    { "gradient-fidelity", 0, gradients },
    { "trace-oracle", 0, trace_oracle },
    { "smiles-roundtrip", 0, roundtrip },
    { "determinism", 300, determinism },
    { "training-sanity", 0, training_sanity },
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto &c: criteria) {
    if (!only.empty() && !only.contains(c.id))
      continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = { false, std::string("exception: ") + e.what() };
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s budget", c.budget_seconds);
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " (" << fmt::format("{:.1f}", secs)
              << " s): " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
