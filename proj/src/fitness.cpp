//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/fitness.h"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <semaphore>
#include <sstream>
#include <thread>

#include <sys/wait.h>

#include "gcgvae/smiles.h"

namespace gcgvae {

namespace fs = std::filesystem;

void FitnessWeights::validate() const {
  if (!(affinity >= 0) || !(validity >= 0) || !(size >= 0))
    throw std::invalid_argument("fitness weights must be non-negative");
  if (size_threshold < 0)
    throw std::invalid_argument("size threshold must be non-negative");
}

double surrogate_score(const MolecularGraph &g) {
  const ValidityReport report = validate(g);
  if (!report.ok)
    throw GraphError(GraphErrc::kInvalidGraph, "surrogate needs a valid graph");
  const double n = g.num_atoms();
  int hetero = 0;
  for (const Atom &a: g.atoms())
    hetero += a.symbol == "N" || a.symbol == "O";
  const double raw = 0.15 * n + 0.5 * ring_count(g) + 0.3 * hetero
                     - 0.02 * n * n / 50.0;
  return std::clamp(-raw, -15.0, 0.0);
}

std::optional<double> parse_affinity(std::string_view output) {
  static const std::regex row(R"(^\s*1\s+(-?\d+\.\d+))");
  std::istringstream in { std::string(output) };
  std::string line;
  std::smatch m;
  while (std::getline(in, line))
    if (std::regex_search(line, m, row))
      return std::stod(m[1].str());
  return std::nullopt;
}

// --- external backend ---------------------------------------------------------------

namespace {
std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c: s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

bool executable(const fs::path &p) {
  return ::access(p.c_str(), X_OK) == 0 && !fs::is_directory(p);
}

bool binary_available(const std::string &binary) {
  if (binary.empty())
    return false;
  if (binary.find('/') != std::string::npos)
    return executable(binary);
  const char *path = std::getenv("PATH");
  if (path == nullptr)
    return false;
  std::istringstream dirs(path);
  std::string dir;
  while (std::getline(dirs, dir, ':'))
    if (!dir.empty() && executable(fs::path(dir) / binary))
      return true;
  return false;
}

std::string substitute(std::string tmpl, std::string_view name,
                       const std::string &value) {
  const std::string token = "{" + std::string(name) + "}";
  for (std::size_t pos = tmpl.find(token); pos != std::string::npos;
       pos = tmpl.find(token, pos + value.size()))
    tmpl.replace(pos, token.size(), value);
  return tmpl;
}
}  // namespace

struct ExternalDockingBackend::Gate {
  explicit Gate(int n): slots(n) { }
  std::counting_semaphore<256> slots;
};

ExternalDockingBackend::ExternalDockingBackend(ExternalDockingConfig cfg)
  : cfg_(std::move(cfg)) {
  if (cfg_.max_parallel < 1 || cfg_.max_parallel > 256)
    throw std::invalid_argument("docking parallelism must be in [1, 256]");
  gate_ = std::make_unique<Gate>(cfg_.max_parallel);
}

ExternalDockingBackend::~ExternalDockingBackend() = default;

void ExternalDockingBackend::check_available() const {
  if (!binary_available(cfg_.binary))
    throw DockingError(DockingErrc::kUnavailable,
                       "docking binary '" + cfg_.binary + "' is not executable");
  if (!cfg_.receptor.empty() && !std::ifstream(cfg_.receptor))
    throw DockingError(DockingErrc::kUnavailable,
                       "receptor file '" + cfg_.receptor + "' is not readable");
}

std::size_t ExternalDockingBackend::cache_size() const {
  std::lock_guard lock(cache_mutex_);
  return cache_.size();
}

double ExternalDockingBackend::score(const MolecularGraph &g) {
  const std::string key = canonical_key(g);
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end())
      return it->second;
  }
  check_available();
  const double affinity = run_once(g, key);
  std::lock_guard lock(cache_mutex_);
  cache_[key] = affinity;
  return affinity;
}

double ExternalDockingBackend::run_once(const MolecularGraph &g,
                                        const std::string &key) {
  const fs::path dir = cfg_.work_dir.empty() ? fs::temp_directory_path()
                                             : fs::path(cfg_.work_dir);
  const std::string stem = "gcgvae-" + std::to_string(::getpid()) + "-"
                           + std::to_string(serial_.fetch_add(1));
  const fs::path ligand = dir / (stem + ".smi");
  const fs::path out = dir / (stem + ".out");
  {
    std::ofstream f(ligand);
    if (!f)
      throw DockingError(DockingErrc::kUnavailable,
                         "cannot write ligand file " + ligand.string());
    f << write_smiles(g) << '\t' << key << '\n';
  }

  std::string args = cfg_.args_template;
  args = substitute(args, "ligand", shell_quote(ligand.string()));
  args = substitute(args, "receptor", shell_quote(cfg_.receptor));
  args = substitute(args, "out", shell_quote(out.string()));
  const std::string command = shell_quote(cfg_.binary) + " " + args + " 2>&1";

  std::string output;
  int status = -1;
  gate_->slots.acquire();
  launches_.fetch_add(1);
  if (FILE *pipe = ::popen(command.c_str(), "r")) {
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
      output.append(buf.data(), got);
    status = ::pclose(pipe);
  }
  gate_->slots.release();

  std::optional<double> affinity = parse_affinity(output);
  if (!affinity) {
    std::ifstream result(out);
    std::stringstream text;
    text << result.rdbuf();
    affinity = parse_affinity(text.str());
  }
  std::error_code ignored;
  fs::remove(ligand, ignored);
  fs::remove(out, ignored);

  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw DockingError(DockingErrc::kProcessFailed,
                       "docking command failed: " + command, output);
  if (!affinity)
    throw DockingError(DockingErrc::kUnparseable,
                       "no result row in docking output", output);
  return *affinity;
}

// --- composite ------------------------------------------------------------------------

FitnessRecord composite(const MolecularGraph &g, const FitnessWeights &w,
                        DockingBackend &backend) {
  FitnessRecord r;
  r.backend = backend.id();
  r.valid = validate(g).ok;
  if (!r.valid)
    return r;
  try {
    r.affinity = backend.score(g);
  } catch (const DockingError &e) {
    throw DockingError(e.code(), canonical_key(g) + ": " + e.what(), e.raw_output());
  }
  r.size_penalty = std::max(0, g.num_atoms() - w.size_threshold);
  r.composite = w.affinity * -r.affinity + w.validity - w.size * r.size_penalty;
  return r;
}

std::vector<FitnessRecord> composite_all(std::span<const MolecularGraph> graphs,
                                         const FitnessWeights &w,
                                         DockingBackend &backend, int threads) {
  std::vector<FitnessRecord> out(graphs.size());
  const std::size_t workers = std::clamp<std::size_t>(
    static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(graphs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < graphs.size(); ++i)
      out[i] = composite(graphs[i], w, backend);
    return out;
  }
  std::atomic<std::size_t> next { 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < graphs.size(); i = next.fetch_add(1)) {
        try {
          out[i] = composite(graphs[i], w, backend);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure)
            failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure)
    std::rethrow_exception(failure);
  return out;
}

// --- report ------------------------------------------------------------------------------

std::vector<ReportRow> rank_report(std::span<const ReportEntry> entries) {
  std::vector<ReportRow> rows;
  rows.reserve(entries.size());
  for (const ReportEntry &e: entries)
    rows.push_back({ e.name, write_smiles(e.graph), e.record.affinity,
                     e.record.composite });
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow &a, const ReportRow &b) {
    const bool na = std::isnan(a.affinity), nb = std::isnan(b.affinity);
    if (na != nb)
      return nb;
    if (!na && a.affinity != b.affinity)
      return a.affinity < b.affinity;
    return a.name < b.name;
  });
  return rows;
}

void write_report(std::ostream &os, std::span<const ReportRow> rows) {
  os << "Name\tSMILES\tBinding Affinity (kcal/mol)\n";
  for (const ReportRow &r: rows) {
    os << r.name << '\t' << r.smiles << '\t';
    if (std::isnan(r.affinity))
      os << "NA";
    else
      os << std::fixed << std::setprecision(2) << r.affinity << std::defaultfloat;
    os << '\n';
  }
}

}  // namespace gcgvae
