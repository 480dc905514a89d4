//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/pipeline.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gcgvae/generator.h"
#include "gcgvae/rng.h"
#include "gcgvae/smiles.h"

namespace gcgvae {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

// --- configuration ----------------------------------------------------------------

namespace {
const std::map<std::string, std::set<std::string>> &allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys {
    { "global", { "seed", "dataset", "output_dir", "threads" } },
    { "neural", { "hidden", "steps" } },
    { "trainer", { "lambda_latent", "lambda_property", "traces_per_graph",
                   "learning_rate", "epochs", "average_state_edges" } },
    { "generator", { "max_nodes", "candidates_per_member", "ascent_steps",
                     "ascent_step_size" } },
    { "ga", { "population", "generations", "uppermost_max_atoms", "elite_fraction",
              "random_fraction", "literal_selection" } },
    { "fitness", { "backend", "fallback", "w_affinity", "w_validity", "w_size",
                   "size_threshold" } },
    { "docking", { "binary", "receptor", "args_template", "max_parallel" } },
    { "ingest", { "activity_threshold", "max_atoms" } },
  };
  return keys;
}

template <class T>
void read_key(const pt::ptree &tree, const std::string &section,
              const std::string &key, T &target) {
  const auto sec = tree.get_child_optional(section);
  if (!sec)
    return;
  const auto node = sec->get_child_optional(key);
  if (!node)
    return;
  const std::string raw = node->data();
  if constexpr (std::is_same_v<T, std::string>) {
    target = raw;
  } else {
    const auto value = node->get_value_optional<T>();
    if (!value)
      throw ConfigError("bad value '" + raw + "' for " + section + "." + key);
    target = *value;
  }
}
}  // namespace

void PipelineConfig::validate() const {
  if (threads < 1)
    throw ConfigError("global.threads must be positive");
  if (neural.hidden < 1 || neural.steps < 0)
    throw ConfigError("neural.hidden must be positive and neural.steps non-negative");
  if (generator.max_nodes < 1 || generator.candidates_per_member < 1
      || generator.ascent_steps < 0 || !(generator.ascent_step_size >= 0))
    throw ConfigError("generator settings out of range");
  if (ingest.max_atoms < 1)
    throw ConfigError("ingest.max_atoms must be positive");
  if (backend == BackendKind::kExternal && docking.binary.empty())
    throw ConfigError("fitness.backend=external requires the missing key docking.binary");
  try {
    trainer.validate();
    ga.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig parse_config(std::istream &in, const fs::path &base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  const auto &allowed = allowed_keys();
  for (const auto &[section, body]: tree) {
    const auto it = allowed.find(section);
    if (body.empty() || it == allowed.end())
      throw ConfigError("unknown config section '" + section + "'");
    for (const auto &[key, value]: body)
      if (!it->second.contains(key))
        throw ConfigError("unknown config key '" + section + "." + key + "'");
  }

  PipelineConfig c;
  std::string dataset, output_dir = c.output_dir.string();
  read_key(tree, "global", "seed", c.seed);
  read_key(tree, "global", "dataset", dataset);
  read_key(tree, "global", "output_dir", output_dir);
  read_key(tree, "global", "threads", c.threads);
  read_key(tree, "neural", "hidden", c.neural.hidden);
  read_key(tree, "neural", "steps", c.neural.steps);
  read_key(tree, "trainer", "lambda_latent", c.trainer.lambda_latent);
  read_key(tree, "trainer", "lambda_property", c.trainer.lambda_property);
  read_key(tree, "trainer", "traces_per_graph", c.trainer.traces_per_graph);
  read_key(tree, "trainer", "learning_rate", c.trainer.learning_rate);
  read_key(tree, "trainer", "epochs", c.trainer.epochs);
  read_key(tree, "trainer", "average_state_edges", c.trainer.average_state_edges);
  read_key(tree, "generator", "max_nodes", c.generator.max_nodes);
  read_key(tree, "generator", "candidates_per_member", c.generator.candidates_per_member);
  read_key(tree, "generator", "ascent_steps", c.generator.ascent_steps);
  read_key(tree, "generator", "ascent_step_size", c.generator.ascent_step_size);
  read_key(tree, "ga", "population", c.ga.population);
  read_key(tree, "ga", "generations", c.ga.generations);
  read_key(tree, "ga", "uppermost_max_atoms", c.ga.uppermost_max_atoms);
  read_key(tree, "ga", "elite_fraction", c.ga.elite_fraction);
  read_key(tree, "ga", "random_fraction", c.ga.random_fraction);
  read_key(tree, "ga", "literal_selection", c.ga.literal_selection);
  read_key(tree, "fitness", "w_affinity", c.ga.weights.affinity);
  read_key(tree, "fitness", "w_validity", c.ga.weights.validity);
  read_key(tree, "fitness", "w_size", c.ga.weights.size);
  read_key(tree, "fitness", "size_threshold", c.ga.weights.size_threshold);
  read_key(tree, "docking", "binary", c.docking.binary);
  read_key(tree, "docking", "receptor", c.docking.receptor);
  read_key(tree, "docking", "args_template", c.docking.args_template);
  read_key(tree, "docking", "max_parallel", c.docking.max_parallel);
  read_key(tree, "ingest", "activity_threshold", c.ingest.activity_threshold);
  read_key(tree, "ingest", "max_atoms", c.ingest.max_atoms);

  std::string backend = "surrogate", fallback = "none";
  read_key(tree, "fitness", "backend", backend);
  read_key(tree, "fitness", "fallback", fallback);
  if (backend == "surrogate")
    c.backend = BackendKind::kSurrogate;
  else if (backend == "external")
    c.backend = BackendKind::kExternal;
  else
    throw ConfigError("fitness.backend must be surrogate or external, not '" + backend + "'");
  if (fallback != "none" && fallback != "surrogate")
    throw ConfigError("fitness.fallback must be none or surrogate, not '" + fallback + "'");
  c.fallback_to_surrogate = fallback == "surrogate";

  if (!dataset.empty()) {
    c.dataset = dataset;
    if (c.dataset.is_relative() && !base_dir.empty())
      c.dataset = base_dir / c.dataset;
  }
  c.output_dir = output_dir;
  c.ga.threads = c.threads;
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file " + path.string());
  return parse_config(in, path.parent_path());
}

fs::path demo_config_path() {
  return fs::path(GCGVAE_DATA_DIR) / "demo.conf";
}

// --- ingestion ----------------------------------------------------------------------

namespace {
std::string first_field(const std::string &line) {
  return line.substr(0, line.find('\t'));
}

std::string strip(const std::string &s) {
  const auto b = s.find_first_not_of(" \r\n");
  if (b == std::string::npos)
    return {};
  return s.substr(b, s.find_last_not_of(" \r\n") - b + 1);
}

std::optional<std::string> reject_reason(const MolecularGraph &g,
                                         const IngestConfig &cfg) {
  const ValidityReport report = validate(g);
  if (!report.ok)
    return "invalid: " + (report.violations.empty() ? std::string("?")
                                                    : report.violations.front());
  for (const Atom &a: g.atoms())
    if (vocabulary_index(a.symbol) < 0)
      return "element " + a.symbol + " is outside the model vocabulary";
  if (g.num_atoms() > cfg.max_atoms)
    return "too many heavy atoms (" + std::to_string(g.num_atoms()) + " > "
           + std::to_string(cfg.max_atoms) + ")";
  return std::nullopt;
}
}  // namespace

IngestResult ingest(std::istream &in, const IngestConfig &cfg) {
  IngestResult r;
  std::map<std::string, int> seen;  // key -> line
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#')
      continue;
    ++r.records;
    DatasetRecord rec;
    rec.line = no;
    const auto tab = text.find('\t');
    rec.smiles = strip(text.substr(0, tab));
    if (tab != std::string::npos) {
      const std::string act = strip(text.substr(tab + 1));
      std::size_t used = 0;
      try {
        rec.activity = std::stod(act, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used == 0 || used != act.size()) {
        r.quarantined.push_back({ rec, "unparseable activity '" + act + "'" });
        continue;
      }
    }
    MolecularGraph g;
    try {
      g = parse_smiles(rec.smiles);
    } catch (const SmilesError &e) {
      r.quarantined.push_back({ rec, std::string("parse error: ") + e.what() });
      continue;
    } catch (const GraphError &e) {
      r.quarantined.push_back({ rec, std::string("invalid: ") + e.what() });
      continue;
    }
    if (auto why = reject_reason(g, cfg)) {
      r.quarantined.push_back({ rec, *why });
      continue;
    }
    if (rec.activity && *rec.activity > cfg.activity_threshold) {
      std::ostringstream why;
      why << "activity " << *rec.activity << " above threshold " << cfg.activity_threshold;
      r.quarantined.push_back({ rec, why.str() });
      continue;
    }
    const std::string key = canonical_key(g);
    if (auto it = seen.find(key); it != seen.end()) {
      r.quarantined.push_back({ rec, "duplicate of line " + std::to_string(it->second) });
      continue;
    }
    seen.emplace(key, no);
    r.kept.push_back(std::move(g));
  }
  if (r.kept.empty())
    throw std::runtime_error("no usable records in dataset");
  return r;
}

IngestResult ingest(const fs::path &path, const IngestConfig &cfg) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read dataset " + path.string());
  return ingest(in, cfg);
}

// --- stages -----------------------------------------------------------------------------

namespace {
std::vector<MolecularGraph> read_smiles_file(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("missing input " + path.string()
                             + " (run the earlier stage first)");
  std::vector<MolecularGraph> out;
  std::string line;
  for (int no = 1; std::getline(in, line); ++no) {
    const std::string text = strip(line);
    if (text.empty() || text[0] == '#')
      continue;
    try {
      out.push_back(parse_smiles(first_field(text)));
    } catch (const std::exception &e) {
      throw std::runtime_error(path.filename().string() + ":" + std::to_string(no)
                               + ": " + e.what());
    }
  }
  return out;
}

std::ofstream open_output(const fs::path &path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

template <class F>
void as_stage(const std::string &name, std::ostream &log, F &&body) {
  log << "[" << name << "] start\n";
  try {
    body();
  } catch (const StageError &) {
    throw;
  } catch (const std::exception &e) {
    throw StageError(name, e.what());
  }
  log << "[" << name << "] done\n";
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

MolecularGraph generate_one(const ModelParams &params, const GeneratorConfig &g,
                            Rng &rng) {
  if (g.ascent_steps == 0)
    return generate(params, g.max_nodes, rng);
  Eigen::MatrixXd z0(params.dims().hidden, g.max_nodes);
  for (Eigen::Index i = 0; i < z0.size(); ++i)
    z0.data()[i] = rng.normal();
  Eigen::MatrixXd z = latent_ascend(z0, params, g.ascent_steps, g.ascent_step_size);
  LatentSpec latent { z, argmax_labels(params, z) };
  return generate(params, latent, rng);
}
}  // namespace

std::unique_ptr<DockingBackend> make_backend(const PipelineConfig &cfg,
                                             std::ostream &log) {
  if (cfg.backend == BackendKind::kSurrogate)
    return std::make_unique<SurrogateBackend>();
  auto ext = std::make_unique<ExternalDockingBackend>(cfg.docking);
  try {
    ext->check_available();
  } catch (const DockingError &e) {
    if (!cfg.fallback_to_surrogate)
      throw;
    log << "warning: " << e.what() << "; falling back to the surrogate backend\n";
    return std::make_unique<SurrogateBackend>();
  }
  return ext;
}

void stage_ingest(const PipelineConfig &cfg, std::ostream &log) {
  as_stage("ingest", log, [&] {
    if (cfg.dataset.empty())
      throw ConfigError("missing key global.dataset");
    const StagePaths p { cfg.output_dir };
    IngestResult r = ingest(cfg.dataset, cfg.ingest);
    auto data = open_output(p.dataset());
    data << "# records=" << r.records << " kept=" << r.kept.size()
         << " quarantined=" << r.quarantined.size() << "\n";
    for (const auto &g: r.kept)
      data << write_smiles(g) << "\n";
    auto q = open_output(p.quarantine());
    q << "line\tsmiles\treason\n";
    for (const auto &e: r.quarantined)
      q << e.record.line << '\t' << e.record.smiles << '\t' << e.reason << '\n';
    log << "[ingest] kept " << r.kept.size() << " of " << r.records << " records\n";
  });
}

void stage_train(const PipelineConfig &cfg, std::ostream &log) {
  as_stage("train", log, [&] {
    const StagePaths p { cfg.output_dir };
    const std::vector<MolecularGraph> data = read_smiles_file(p.dataset());
    auto backend = make_backend(cfg, log);
    std::vector<double> targets;
    for (const auto &rec: composite_all(data, cfg.ga.weights, *backend, cfg.threads))
      targets.push_back(-rec.affinity);

    TrainConfig tc = cfg.trainer;
    tc.seed = derive_seed(cfg.seed, "train");
    auto train_log = open_output(p.train_log());
    train_log << "epoch\ttotal\trecon\tlatent\tproperty\n";
    ModelParams init = ModelParams::random(cfg.neural, derive_seed(cfg.seed, "init"));
    ModelParams trained = train(data, targets, tc, std::move(init), nullptr,
                                [&](const EpochLog &e) {
                                  train_log << e.epoch << '\t' << fixed(e.total) << '\t'
                                            << fixed(e.recon) << '\t' << fixed(e.latent)
                                            << '\t' << fixed(e.property) << '\n';
                                  log << "[train] epoch " << e.epoch << "/" << tc.epochs
                                      << " loss " << fixed(e.total, 4) << "\n";
                                });
    fs::create_directories(p.dir);
    save_checkpoint(p.model().string(), trained);
  });
}

std::vector<MolecularGraph> generate_molecules(const PipelineConfig &cfg, int count,
                                               std::ostream &log) {
  const StagePaths p { cfg.output_dir };
  ModelParams params;
  if (fs::exists(p.model())) {
    params = load_checkpoint(p.model().string());
  } else {
    log << "warning: no checkpoint at " << p.model().string()
        << "; sampling from untrained parameters\n";
    params = ModelParams::random(cfg.neural, derive_seed(cfg.seed, "init"));
  }
  Rng rng(derive_seed(cfg.seed, "generate"));
  std::vector<MolecularGraph> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(generate_one(params, cfg.generator, rng));
  return out;
}

void stage_generate(const PipelineConfig &cfg, std::ostream &log) {
  as_stage("generate", log, [&] {
    const StagePaths p { cfg.output_dir };
    if (!fs::exists(p.model()))
      throw std::runtime_error("missing input " + p.model().string()
                               + " (run the train stage first)");
    const int count = cfg.ga.population * cfg.generator.candidates_per_member;
    const auto mols = generate_molecules(cfg, count, log);
    auto out = open_output(p.candidates());
    out << "# candidates=" << count << " max_nodes=" << cfg.generator.max_nodes << "\n";
    std::set<std::string> distinct;
    for (const auto &g: mols) {
      if (!validate(g).ok)
        throw std::logic_error("generator produced an invalid molecule: " + write_smiles(g));
      distinct.insert(canonical_key(g));
      out << write_smiles(g) << "\n";
    }
    log << "[generate] " << count << " candidates, " << distinct.size() << " distinct\n";
  });
}

void stage_evolve(const PipelineConfig &cfg, std::ostream &log) {
  as_stage("evolve", log, [&] {
    const StagePaths p { cfg.output_dir };
    std::vector<MolecularGraph> candidates = read_smiles_file(p.candidates());
    auto backend = make_backend(cfg, log);
    GaConfig ga = cfg.ga;
    ga.seed = derive_seed(cfg.seed, "evolve");
    ga.threads = cfg.threads;
    auto pop = init_population(list_source(std::move(candidates)), ga.population,
                               ga.population);
    Rng rng(ga.seed);
    auto evo_log = open_output(p.evolution_log());
    evo_log << "gen\tbest\tmean\tmedian\tdistinct_keys\n";
    pop = evolve(std::move(pop), ga, *backend, rng,
                 [&](const GenerationStats &s, std::span<const Individual>) {
                   write_stats_line(evo_log, s);
                   log << "[evolve] generation " << s.generation << " best "
                       << fixed(s.best, 4) << "\n";
                 });
    auto out = open_output(p.population());
    out << "# generation=" << ga.generations << " size=" << pop.size()
        << " seed=" << cfg.seed << "\n";
    for (const auto &ind: pop)
      out << write_smiles(ind.graph) << '\t' << provenance_name(ind.provenance) << '\n';
  });
}

void stage_report(const PipelineConfig &cfg, std::ostream &log) {
  as_stage("report", log, [&] {
    const StagePaths p { cfg.output_dir };
    std::map<std::string, MolecularGraph> unique;
    for (auto &g: read_smiles_file(p.population()))
      unique.try_emplace(canonical_key(g), std::move(g));
    std::vector<MolecularGraph> graphs;
    for (auto &[key, g]: unique)
      graphs.push_back(g);
    auto backend = make_backend(cfg, log);
    auto records = composite_all(graphs, cfg.ga.weights, *backend, cfg.threads);
    std::vector<ReportEntry> entries;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      std::ostringstream name;
      name << "CAND-" << std::setw(3) << std::setfill('0') << i + 1;
      entries.push_back({ name.str(), graphs[i], records[i] });
    }
    auto rows = rank_report(entries);
    auto out = open_output(p.report());
    write_report(out, rows);
    log << "[report] " << rows.size() << " distinct molecules ranked\n";
  });
}

void run_pipeline(const PipelineConfig &cfg, std::ostream &log) {
  stage_ingest(cfg, log);
  stage_train(cfg, log);
  stage_generate(cfg, log);
  stage_evolve(cfg, log);
  stage_report(cfg, log);
}

}  // namespace gcgvae
