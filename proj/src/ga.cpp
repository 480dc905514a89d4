//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/ga.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gcgvae {

std::string_view provenance_name(Provenance p) {
  switch (p) {
  case Provenance::kSeed: return "SEED";
  case Provenance::kCopy: return "COPY";
  case Provenance::kCrossUppermost: return "CROSS_UPPERMOST";
  case Provenance::kCrossUniversal: return "CROSS_UNIVERSAL";
  }
  return "?";
}

Individual make_individual(MolecularGraph g, Provenance p, int generation) {
  const ValidityReport report = validate(g);
  if (!report.ok)
    throw GraphError(GraphErrc::kInvalidGraph,
                     "invalid individual: "
                       + (report.violations.empty() ? std::string("?")
                                                    : report.violations.front()));
  Individual ind;
  ind.key = canonical_key(g);
  ind.graph = std::move(g);
  ind.provenance = p;
  ind.generation = generation;
  return ind;
}

void GaConfig::validate() const {
  if (population < 2 || population % 2 != 0)
    throw std::invalid_argument("population size must be even and at least 2");
  if (generations < 0)
    throw std::invalid_argument("generations must be non-negative");
  if (uppermost_max_atoms < 1)
    throw std::invalid_argument("uppermost_max_atoms must be positive");
  if (!(elite_fraction >= 0 && elite_fraction <= 1)
      || !(random_fraction >= 0 && random_fraction <= 1)
      || elite_fraction + random_fraction > 1)
    throw std::invalid_argument("selection fractions must lie in [0, 1] and sum to at most 1");
  if (threads < 1)
    throw std::invalid_argument("threads must be positive");
  weights.validate();
}

MoleculeSource list_source(std::vector<MolecularGraph> graphs) {
  return [graphs = std::move(graphs), next = std::size_t { 0 }]() mutable
           -> std::optional<MolecularGraph> {
    if (next >= graphs.size())
      return std::nullopt;
    return graphs[next++];
  };
}

std::vector<Individual> init_population(const MoleculeSource &source, int n,
                                        int max_duplicates) {
  if (n < 2)
    throw std::invalid_argument("population size must be at least 2");
  std::vector<Individual> pop;
  std::set<std::string> seen;
  int duplicates = 0;
  while (static_cast<int>(pop.size()) < n) {
    std::optional<MolecularGraph> g = source();
    if (!g)
      break;
    if (!validate(*g).ok)
      continue;
    std::string key = canonical_key(*g);
    if (seen.contains(key) && ++duplicates <= max_duplicates)
      continue;
    seen.insert(key);
    pop.push_back(make_individual(std::move(*g), Provenance::kSeed, 0));
  }
  if (2 * static_cast<int>(seen.size()) < n)
    throw std::runtime_error("molecule source yielded " + std::to_string(seen.size())
                             + " distinct molecules, fewer than half of "
                             + std::to_string(n));
  // Short sources are topped up by cycling what was drawn.
  for (std::size_t i = 0; static_cast<int>(pop.size()) < n; ++i)
    pop.push_back(pop[i]);
  return pop;
}

std::vector<Individual> crossover_round(std::span<const Individual> pop,
                                        BranchMode mode, Rng &rng,
                                        int generation, int uppermost_max_atoms) {
  if (pop.size() % 2 != 0)
    throw std::invalid_argument("crossover needs an even population");
  const Provenance tag = mode == BranchMode::kUppermost ? Provenance::kCrossUppermost
                                                        : Provenance::kCrossUniversal;
  std::vector<Individual> out(pop.begin(), pop.end());
  out.reserve(2 * pop.size());
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  auto copy_of = [&](const Individual &parent) {
    Individual c = parent;
    c.provenance = tag;
    c.generation = generation;
    return c;
  };

  for (std::size_t i = 0; i + 1 < order.size(); i += 2) {
    const Individual &a = pop[order[i]];
    const Individual &b = pop[order[i + 1]];
    const auto cuts_a = enumerate_branches(a.graph, mode, uppermost_max_atoms);
    const auto cuts_b = enumerate_branches(b.graph, mode, uppermost_max_atoms);
    if (cuts_a.empty() || cuts_b.empty()) {
      out.push_back(copy_of(a));
      out.push_back(copy_of(b));
      continue;
    }
    const BranchCut &ca = cuts_a[rng.below(static_cast<int>(cuts_a.size()))];
    const BranchCut &cb = cuts_b[rng.below(static_cast<int>(cuts_b.size()))];
    auto [x, y] = swap_branches(a.graph, ca, b.graph, cb);
    if (!validate(x).ok || !validate(y).ok) {
      out.push_back(copy_of(a));
      out.push_back(copy_of(b));
      continue;
    }
    out.push_back(make_individual(std::move(x), tag, generation));
    out.push_back(make_individual(std::move(y), tag, generation));
  }
  return out;
}

void score_population(std::span<Individual> pop, const GaConfig &cfg,
                      DockingBackend &backend) {
  std::vector<std::size_t> todo;
  std::vector<MolecularGraph> graphs;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].fitness) {
      todo.push_back(i);
      graphs.push_back(pop[i].graph);
    }
  }
  auto records = composite_all(graphs, cfg.weights, backend, cfg.threads);
  for (std::size_t j = 0; j < todo.size(); ++j)
    pop[todo[j]].fitness = std::move(records[j]);
}

std::vector<Individual> select(std::span<const Individual> pool, int n,
                               const GaConfig &cfg, Rng &rng) {
  for (const Individual &ind: pool)
    if (!ind.fitness)
      throw std::invalid_argument("selection needs a scored pool");
  const std::size_t m = pool.size();
  std::size_t elite, fill;
  if (cfg.literal_selection) {
    elite = std::min<std::size_t>(std::llround(cfg.elite_fraction * m), m);
    fill = std::min<std::size_t>(std::llround(cfg.random_fraction * m), m - elite);
  } else {
    if (n < 0 || static_cast<std::size_t>(n) > m)
      throw std::invalid_argument("pool is smaller than the population");
    elite = std::min<std::size_t>(std::llround(cfg.elite_fraction * n), n);
    fill = static_cast<std::size_t>(n) - elite;
  }

  std::vector<std::size_t> rank(m);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const double fa = pool[a].composite(), fb = pool[b].composite();
    if (fa != fb)
      return fa > fb;
    return pool[a].key < pool[b].key;
  });

  std::vector<Individual> out;
  out.reserve(elite + fill);
  for (std::size_t i = 0; i < elite; ++i)
    out.push_back(pool[rank[i]]);
  std::vector<std::size_t> rest(rank.begin() + static_cast<std::ptrdiff_t>(elite), rank.end());
  for (std::size_t i = 0; i < fill; ++i) {
    const std::size_t j = i + rng.below(static_cast<std::uint64_t>(rest.size() - i));
    std::swap(rest[i], rest[j]);
    out.push_back(pool[rest[i]]);
  }
  return out;
}

std::vector<Individual> build_pool(std::span<const Individual> pop,
                                   const GaConfig &cfg, Rng &rng, int generation) {
  std::vector<Individual> originals(pop.begin(), pop.end());
  for (Individual &ind: originals)
    ind.provenance = Provenance::kCopy;
  std::vector<Individual> first = crossover_round(
    originals, BranchMode::kUppermost, rng, generation, cfg.uppermost_max_atoms);
  return crossover_round(first, BranchMode::kUniversal, rng, generation,
                         cfg.uppermost_max_atoms);
}

std::vector<Individual> evolve_generation(std::span<const Individual> pop,
                                          const GaConfig &cfg,
                                          DockingBackend &backend, Rng &rng,
                                          int generation) {
  std::vector<Individual> pool = build_pool(pop, cfg, rng, generation);
  score_population(pool, cfg, backend);
  return select(pool, static_cast<int>(pop.size()), cfg, rng);
}

std::array<int, 4> provenance_histogram(std::span<const Individual> pop) {
  std::array<int, 4> h {};
  for (const Individual &ind: pop)
    ++h[static_cast<std::size_t>(ind.provenance)];
  return h;
}

GenerationStats population_stats(std::span<const Individual> pop, int generation) {
  GenerationStats s { generation, kReject, kReject, kReject, 0 };
  std::vector<double> scores;
  std::set<std::string> keys;
  for (const Individual &ind: pop) {
    keys.insert(ind.key);
    if (ind.fitness && ind.fitness->valid)
      scores.push_back(ind.composite());
  }
  s.distinct = static_cast<int>(keys.size());
  if (scores.empty())
    return s;
  std::sort(scores.begin(), scores.end());
  s.best = scores.back();
  s.mean = std::accumulate(scores.begin(), scores.end(), 0.0)
           / static_cast<double>(scores.size());
  const std::size_t h = scores.size() / 2;
  s.median = scores.size() % 2 ? scores[h] : 0.5 * (scores[h - 1] + scores[h]);
  return s;
}

void write_stats_line(std::ostream &os, const GenerationStats &s) {
  os << s.generation << '\t' << std::fixed << std::setprecision(6) << s.best
     << '\t' << s.mean << '\t' << s.median << std::defaultfloat << '\t'
     << s.distinct << '\n';
}

std::vector<Individual> evolve(std::vector<Individual> pop, const GaConfig &cfg,
                               DockingBackend &backend, Rng &rng,
                               const GenerationCallback &on_generation) {
  cfg.validate();
  score_population(pop, cfg, backend);
  if (on_generation)
    on_generation(population_stats(pop, 0), pop);
  for (int g = 1; g <= cfg.generations; ++g) {
    pop = evolve_generation(pop, cfg, backend, rng, g);
    if (on_generation)
      on_generation(population_stats(pop, g), pop);
  }
  return pop;
}

}  // namespace gcgvae
