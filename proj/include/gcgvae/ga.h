//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_GA_H_
#define GCGVAE_GA_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcgvae/fitness.h"
#include "gcgvae/molgraph.h"
#include "gcgvae/rng.h"

namespace gcgvae {

enum class Provenance { kSeed, kCopy, kCrossUppermost, kCrossUniversal };

std::string_view provenance_name(Provenance p);

struct Individual {
  MolecularGraph graph;
  std::string key;  // canonical_key(graph)
  Provenance provenance = Provenance::kSeed;
  int generation = 0;
  std::optional<FitnessRecord> fitness;

  double composite() const { return fitness ? fitness->composite : kReject; }
};

// Throws GraphError(kInvalidGraph) unless g passes validate().
Individual make_individual(MolecularGraph g, Provenance p, int generation);

struct GaConfig {
  int population = 100;
  int generations = 20;
  int uppermost_max_atoms = kDefaultUppermostMaxAtoms;
  double elite_fraction = 0.25;
  double random_fraction = 0.25;
  // Keep elite and random fractions of the whole pool, so selection
  // returns |pool| * (elite + random) instead of `population`.
  bool literal_selection = false;
  std::uint64_t seed = 0;
  FitnessWeights weights;
  int threads = 1;

  void validate() const;
};

/// Next molecule from a candidate stream, or nullopt once exhausted.
using MoleculeSource = std::function<std::optional<MolecularGraph>()>;

MoleculeSource list_source(std::vector<MolecularGraph> graphs);

/// n SEED individuals. Invalid draws are skipped; duplicates by key are
/// skipped until `max_duplicates` have been seen, after which they are
/// kept. Throws std::runtime_error when the source yields fewer than n/2
/// distinct molecules.
std::vector<Individual> init_population(const MoleculeSource &source, int n,
                                        int max_duplicates);

/// Copies of pop followed by |pop| offspring from a random pairing. Each
/// pair swaps one uniformly chosen branch from each parent; a pair where
/// either parent has no cut yields unmodified copies. Offspring carry the
/// round's provenance and `generation`; copies keep theirs.
std::vector<Individual> crossover_round(std::span<const Individual> pop,
                                        BranchMode mode, Rng &rng,
                                        int generation,
                                        int uppermost_max_atoms = kDefaultUppermostMaxAtoms);

/// Fills in missing fitness records.
void score_population(std::span<Individual> pop, const GaConfig &cfg,
                      DockingBackend &backend);

/// Top round(elite * n) by composite (ties: key, then pool order), then
/// a uniform draw without replacement from the rest up to n. The draw is
/// a partial Fisher-Yates shuffle over the remainder in rank order.
std::vector<Individual> select(std::span<const Individual> pool, int n,
                               const GaConfig &cfg, Rng &rng);

/// The unscored 4N pool: pop re-tagged COPY, then an uppermost round and
/// a universal round.
std::vector<Individual> build_pool(std::span<const Individual> pop,
                                   const GaConfig &cfg, Rng &rng, int generation);

/// build_pool, scoring, then selection.
std::vector<Individual> evolve_generation(std::span<const Individual> pop,
                                          const GaConfig &cfg,
                                          DockingBackend &backend, Rng &rng,
                                          int generation);

// Provenance counts indexed by Provenance.
std::array<int, 4> provenance_histogram(std::span<const Individual> pop);

struct GenerationStats {
  int generation;
  double best;
  double mean;
  double median;
  int distinct;
};

// Over valid members only; best is kReject when none are valid.
GenerationStats population_stats(std::span<const Individual> pop, int generation);

// "gen\tbest\tmean\tmedian\tdistinct_keys"
void write_stats_line(std::ostream &os, const GenerationStats &s);

using GenerationCallback =
  std::function<void(const GenerationStats &, std::span<const Individual>)>;

/// Scores pop, then runs cfg.generations generations. The callback sees
/// generation 0 (the scored input) and each later generation.
std::vector<Individual> evolve(std::vector<Individual> pop, const GaConfig &cfg,
                               DockingBackend &backend, Rng &rng,
                               const GenerationCallback &on_generation = {});

}  // namespace gcgvae

#endif  // GCGVAE_GA_H_
