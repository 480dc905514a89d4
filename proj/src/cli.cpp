//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "gcgvae/pipeline.h"
#include "gcgvae/smiles.h"

namespace gcgvae {

namespace fs = std::filesystem;

namespace {
// Exclusive advisory lock on the output directory for the process lifetime.
class DirLock {
public:
  explicit DirLock(const fs::path &path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0)
      throw std::runtime_error("cannot open lockfile " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw std::runtime_error("another gcgvae instance holds " + path.string());
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock &) = delete;
  DirLock &operator=(const DirLock &) = delete;

private:
  int fd_ = -1;
};

struct ScoreInput {
  std::string name;
  MolecularGraph graph;
};

std::vector<ScoreInput> read_score_input(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::vector<ScoreInput> out;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    const auto tab = line.find('\t');
    ScoreInput s;
    s.name = tab == std::string::npos ? "MOL-" + std::to_string(out.size() + 1)
                                      : line.substr(tab + 1);
    try {
      s.graph = parse_smiles(line.substr(0, tab));
    } catch (const std::exception &e) {
      throw std::runtime_error(path.filename().string() + ":" + std::to_string(no)
                               + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}
}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err) {
  CLI::App app { "Graph-VAE molecule generation with graph-based genetic optimization",
                 "gcgvae" };
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_arg;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_arg,
                 "Config file, or 'demo' for the bundled configuration");
  app.add_option("--seed", seed, "Override global.seed");
  app.add_option("--out", out_dir, "Override global.output_dir");

  auto *ingest_cmd = app.add_subcommand("ingest", "Filter the dataset into dataset.smi");
  auto *train_cmd = app.add_subcommand("train", "Train the model into model.params");
  auto *generate_cmd = app.add_subcommand("generate", "Sample candidate molecules");
  int count = 0;
  generate_cmd->add_option("--count", count, "Print this many SMILES to stdout")
    ->check(CLI::PositiveNumber);
  auto *evolve_cmd = app.add_subcommand("evolve", "Run the genetic algorithm");
  auto *score_cmd = app.add_subcommand("score", "Score a SMILES file");
  std::string score_in, score_backend;
  score_cmd->add_option("--in", score_in, "SMILES[\\tname] per line")->required();
  score_cmd->add_option("--backend", score_backend, "surrogate or external")
    ->check(CLI::IsMember({ "surrogate", "external" }));
  auto *report_cmd = app.add_subcommand("report", "Rank the final population");
  auto *run_cmd = app.add_subcommand("run", "All stages in order");

  std::vector<std::string> args(argv + 1, argv + argc);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  PipelineConfig cfg;
  try {
    if (config_arg == "demo")
      cfg = load_config(demo_config_path());
    else if (!config_arg.empty())
      cfg = load_config(config_arg);
    else if (!score_cmd->parsed())
      throw ConfigError("--config is required for this subcommand");
    if (seed)
      cfg.seed = *seed;
    if (!out_dir.empty())
      cfg.output_dir = out_dir;
    if (!score_backend.empty()) {
      cfg.backend = score_backend == "external" ? BackendKind::kExternal
                                                : BackendKind::kSurrogate;
      cfg.validate();
    }
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (score_cmd->parsed()) {
      auto inputs = read_score_input(score_in);
      std::vector<MolecularGraph> graphs;
      for (const auto &s: inputs)
        graphs.push_back(s.graph);
      auto backend = make_backend(cfg, err);
      auto records = composite_all(graphs, cfg.ga.weights, *backend, cfg.threads);
      out << "Name\tSMILES\tBinding Affinity (kcal/mol)\tComposite\n";
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        out << inputs[i].name << '\t' << write_smiles(graphs[i]) << '\t';
        if (records[i].valid)
          out << std::fixed << std::setprecision(2) << records[i].affinity << '\t'
              << std::setprecision(4) << records[i].composite << std::defaultfloat;
        else
          out << "NA\tREJECT";
        out << '\n';
      }
      return 0;
    }
    if (generate_cmd->parsed() && count > 0) {
      for (const auto &g: generate_molecules(cfg, count, err))
        out << write_smiles(g) << '\n';
      return 0;
    }

    DirLock lock(StagePaths { cfg.output_dir }.lock());
    if (ingest_cmd->parsed())
      stage_ingest(cfg, err);
    else if (train_cmd->parsed())
      stage_train(cfg, err);
    else if (generate_cmd->parsed())
      stage_generate(cfg, err);
    else if (evolve_cmd->parsed())
      stage_evolve(cfg, err);
    else if (report_cmd->parsed())
      stage_report(cfg, err);
    else if (run_cmd->parsed())
      run_pipeline(cfg, err);
    return 0;
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace gcgvae
