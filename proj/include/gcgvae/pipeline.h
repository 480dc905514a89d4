//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_PIPELINE_H_
#define GCGVAE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcgvae/fitness.h"
#include "gcgvae/ga.h"
#include "gcgvae/molgraph.h"
#include "gcgvae/neural.h"
#include "gcgvae/trainer.h"

namespace gcgvae {

class ConfigError: public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A stage failure; what() is prefixed with the stage name.
class StageError: public std::runtime_error {
public:
  StageError(std::string stage, const std::string &what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) { }

  const std::string &stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

struct IngestConfig {
  // Records whose activity exceeds this are dropped; records without an
  // activity column are kept.
  double activity_threshold = 10000.0;
  int max_atoms = kDefaultMaxNodes;
};

struct GeneratorConfig {
  int max_nodes = kDefaultMaxNodes;
  int candidates_per_member = 10;
  int ascent_steps = 0;
  double ascent_step_size = 0.05;
};

enum class BackendKind { kSurrogate, kExternal };

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path dataset;
  std::filesystem::path output_dir = "gcgvae-out";
  int threads = 1;
  ModelDims neural;
  TrainConfig trainer;
  GeneratorConfig generator;
  GaConfig ga;
  BackendKind backend = BackendKind::kSurrogate;
  bool fallback_to_surrogate = false;
  ExternalDockingConfig docking;
  IngestConfig ingest;

  // Cross-field checks plus every module's own validate().
  void validate() const;
};

/// INI text with sections global, neural, trainer, generator, ga, fitness,
/// docking and ingest. Unknown sections or keys throw ConfigError. A
/// relative dataset path is taken against `base_dir`; the output
/// directory is left as written.
PipelineConfig parse_config(std::istream &in,
                             const std::filesystem::path &base_dir = {});
PipelineConfig load_config(const std::filesystem::path &path);

// The bundled demo configuration file.
std::filesystem::path demo_config_path();

struct DatasetRecord {
  std::string smiles;
  std::optional<double> activity;
  int line = 0;
};

struct QuarantineEntry {
  DatasetRecord record;
  std::string reason;
};

struct IngestResult {
  std::vector<MolecularGraph> kept;
  std::vector<QuarantineEntry> quarantined;
  int records = 0;  // non-comment, non-blank lines
};

/// Keeps records that parse, validate, stay within the model vocabulary
/// and atom limit, and pass the activity filter; later duplicates by
/// canonical_key are quarantined. Throws std::runtime_error when the file
/// is unreadable or nothing is kept.
IngestResult ingest(const std::filesystem::path &path, const IngestConfig &cfg);
IngestResult ingest(std::istream &in, const IngestConfig &cfg);

/// Stage artifacts under one output directory.
struct StagePaths {
  std::filesystem::path dir;

  std::filesystem::path dataset() const { return dir / "dataset.smi"; }
  std::filesystem::path quarantine() const { return dir / "quarantine.tsv"; }
  std::filesystem::path model() const { return dir / "model.params"; }
  std::filesystem::path train_log() const { return dir / "train.log"; }
  std::filesystem::path candidates() const { return dir / "candidates.smi"; }
  std::filesystem::path population() const { return dir / "population.smi"; }
  std::filesystem::path evolution_log() const { return dir / "evolution.log"; }
  std::filesystem::path report() const { return dir / "report.tsv"; }
  std::filesystem::path lock() const { return dir / ".gcgvae.lock"; }
};

// Backend per config; throws ConfigError or DockingError(kUnavailable).
std::unique_ptr<DockingBackend> make_backend(const PipelineConfig &cfg,
                                             std::ostream &log);

// Each stage reads only files written by earlier stages and throws
// StageError.
void stage_ingest(const PipelineConfig &cfg, std::ostream &log);
void stage_train(const PipelineConfig &cfg, std::ostream &log);
void stage_generate(const PipelineConfig &cfg, std::ostream &log);
void stage_evolve(const PipelineConfig &cfg, std::ostream &log);
void stage_report(const PipelineConfig &cfg, std::ostream &log);

void run_pipeline(const PipelineConfig &cfg, std::ostream &log);

/// `count` molecules from the trained model, or from seeded untrained
/// parameters when no checkpoint exists yet.
std::vector<MolecularGraph> generate_molecules(const PipelineConfig &cfg,
                                               int count, std::ostream &log);

/// Command-line entry point; returns the process exit code (0 success,
/// 1 usage error, 2 stage failure).
int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err);

}  // namespace gcgvae

#endif  // GCGVAE_PIPELINE_H_
