//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_FITNESS_H_
#define GCGVAE_FITNESS_H_

#include <atomic>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gcgvae/molgraph.h"

namespace gcgvae {

// Composite value of an invalid molecule; orders below every valid one.
inline constexpr double kReject = -std::numeric_limits<double>::infinity();

struct FitnessWeights {
  double affinity = 1.0;
  double validity = 1.0;
  double size = 0.05;
  int size_threshold = 60;  // heavy atoms

  void validate() const;
};

struct FitnessRecord {
  double affinity = std::numeric_limits<double>::quiet_NaN();  // kcal/mol
  bool valid = false;
  double size_penalty = 0;
  double composite = kReject;
  std::string backend;
};

enum class DockingErrc {
  kUnavailable,    // binary or receptor missing
  kProcessFailed,  // non-zero exit
  kUnparseable,    // no result row in the output
  kInvalidInput,
};

class DockingError: public std::runtime_error {
public:
  DockingError(DockingErrc code, const std::string &what,
               std::string raw_output = {})
    : std::runtime_error(what), code_(code), raw_(std::move(raw_output)) { }

  DockingErrc code() const noexcept { return code_; }
  // Captured program output, kept for kProcessFailed and kUnparseable.
  const std::string &raw_output() const noexcept { return raw_; }

private:
  DockingErrc code_;
  std::string raw_;
};

/// Affinity source. Implementations must be safe to call concurrently.
class DockingBackend {
public:
  virtual ~DockingBackend() = default;

  virtual std::string id() const = 0;
  virtual bool deterministic() const = 0;
  virtual bool requires_binary() const = 0;

  // Affinity in kcal/mol, more negative binds better.
  virtual double score(const MolecularGraph &g) = 0;
};

/// -(0.15 n + 0.5 rings + 0.3 (N + O) - 0.02 n^2 / 50), clamped to
/// [-15, 0]. Throws GraphError(kInvalidGraph) on an invalid graph.
double surrogate_score(const MolecularGraph &g);

class SurrogateBackend final: public DockingBackend {
public:
  std::string id() const override { return "surrogate"; }
  bool deterministic() const override { return true; }
  bool requires_binary() const override { return false; }
  double score(const MolecularGraph &g) override { return surrogate_score(g); }
};

struct ExternalDockingConfig {
  std::string binary;
  std::string receptor;
  // Arguments after the binary; {ligand}, {receptor} and {out} are
  // replaced by shell-quoted paths.
  std::string args_template = "--ligand {ligand} --receptor {receptor} --out {out}";
  int max_parallel = 1;
  std::string work_dir;  // empty: the system temp directory
};

// First line matching ^\s*1\s+(-?\d+\.\d+), as in a docking result table.
std::optional<double> parse_affinity(std::string_view output);

/// Runs an external docking program per ligand, caching by canonical_key.
/// Launches are limited to max_parallel at a time.
class ExternalDockingBackend final: public DockingBackend {
public:
  explicit ExternalDockingBackend(ExternalDockingConfig cfg);
  ~ExternalDockingBackend() override;

  std::string id() const override { return "external"; }
  bool deterministic() const override { return true; }
  bool requires_binary() const override { return true; }

  // Throws DockingError.
  double score(const MolecularGraph &g) override;

  // kUnavailable when the binary cannot be executed or the receptor read.
  void check_available() const;

  std::size_t launches() const noexcept { return launches_.load(); }
  std::size_t cache_size() const;

private:
  double run_once(const MolecularGraph &g, const std::string &key);

  struct Gate;
  ExternalDockingConfig cfg_;
  std::unique_ptr<Gate> gate_;
  mutable std::mutex cache_mutex_;
  std::unordered_map<std::string, double> cache_;
  std::atomic<std::size_t> launches_ { 0 };
  std::atomic<std::size_t> serial_ { 0 };
};

/// Scores one molecule. Invalid molecules get kReject without consulting
/// the backend. Backend failures are rethrown as DockingError with the
/// molecule key in the message.
FitnessRecord composite(const MolecularGraph &g, const FitnessWeights &w,
                        DockingBackend &backend);

/// Scores a batch on up to `threads` workers; result i belongs to
/// graphs[i] whatever the thread count.
std::vector<FitnessRecord> composite_all(std::span<const MolecularGraph> graphs,
                                         const FitnessWeights &w,
                                         DockingBackend &backend,
                                         int threads = 1);

struct ReportEntry {
  std::string name;
  MolecularGraph graph;
  FitnessRecord record;
};

struct ReportRow {
  std::string name;
  std::string smiles;
  double affinity;
  double composite;
};

/// Rows by affinity ascending, ties by name; entries without an affinity
/// go last.
std::vector<ReportRow> rank_report(std::span<const ReportEntry> entries);

// Tab separated: Name, SMILES, Binding Affinity (kcal/mol).
void write_report(std::ostream &os, std::span<const ReportRow> rows);

}  // namespace gcgvae

#endif  // GCGVAE_FITNESS_H_
