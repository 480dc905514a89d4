//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/molgraph.h"

#include <algorithm>
#include <deque>
#include <numeric>

namespace gcgvae {
namespace {
std::string describe_pair(int a, int b) {
  return std::to_string(a) + "-" + std::to_string(b);
}
}  // namespace

const ValencyTable &ValencyTable::standard() {
  static const ValencyTable table = [] {
    ValencyTable t = base();
    t.set("S", 6);
    t.set("P", 5);
    return t;
  }();
  return table;
}

ValencyTable ValencyTable::base() {
  ValencyTable t;
  t.set("C", 4);
  t.set("N", 3);
  t.set("O", 2);
  t.set("S", 2);
  t.set("F", 1);
  t.set("Cl", 1);
  t.set("Br", 1);
  t.set("P", 3);
  t.set("B", 3);
  t.set("I", 1);
  return t;
}

void ValencyTable::set(std::string_view symbol, int max_valence) {
  if (max_valence < 1)
    throw std::invalid_argument("max valence must be at least 1");
  for (Element &e: entries_) {
    if (e.symbol == symbol) {
      e.max_valence = max_valence;
      return;
    }
  }
  entries_.push_back({ std::string(symbol), max_valence });
}

const Element *ValencyTable::find(std::string_view symbol) const noexcept {
  for (const Element &e: entries_)
    if (e.symbol == symbol)
      return &e;
  return nullptr;
}

int ValencyTable::max_valence(std::string_view symbol) const {
  const Element *e = find(symbol);
  if (e == nullptr)
    throw GraphError(GraphErrc::kUnknownElement,
                     "unknown element '" + std::string(symbol) + "'");
  return e->max_valence;
}

MolecularGraph MolecularGraph::from_parts_unchecked(std::vector<Atom> atoms,
                                                    std::vector<Bond> bonds) {
  MolecularGraph g;
  g.atoms_ = std::move(atoms);
  g.bonds_ = std::move(bonds);
  g.adj_.resize(g.atoms_.size());
  g.bond_sum_.resize(g.atoms_.size());
  for (int i = 0; i < g.num_atoms(); ++i)
    g.bond_sum_[i] = g.atoms_[i].hydrogens;
  for (int i = 0; i < g.num_bonds(); ++i) {
    const Bond &b = g.bonds_[i];
    if (b.a < 0 || b.b < 0 || b.a >= g.num_atoms() || b.b >= g.num_atoms())
      continue;
    g.adj_[b.a].push_back({ b.b, i });
    if (b.a != b.b)
      g.adj_[b.b].push_back({ b.a, i });
    g.bond_sum_[b.a] += b.order;
    g.bond_sum_[b.b] += b.order;
  }
  return g;
}

int MolecularGraph::add_atom(std::string_view symbol,
                             const ValencyTable &table) {
  return add_atom(symbol, 0, 0, table);
}

int MolecularGraph::add_atom(std::string_view symbol, int charge,
                             int hydrogens, const ValencyTable &table) {
  const int max_valence = table.max_valence(symbol);
  if (hydrogens < 0)
    throw std::invalid_argument("negative hydrogen count");
  if (hydrogens > max_valence)
    throw GraphError(GraphErrc::kValenceOverflow,
                     "I(b_v < b_v*) violated: " + std::to_string(hydrogens)
                       + " hydrogens on " + std::string(symbol));
  atoms_.push_back({ std::string(symbol), charge, hydrogens, max_valence });
  adj_.emplace_back();
  bond_sum_.push_back(hydrogens);
  return num_atoms() - 1;
}

void MolecularGraph::check_index(int v) const {
  if (v < 0 || v >= num_atoms())
    throw GraphError(GraphErrc::kIndexOutOfRange,
                     "atom index " + std::to_string(v) + " out of range");
}

int MolecularGraph::add_bond(int a, int b, int order) {
  check_index(a);
  check_index(b);
  if (order < 1 || order > 3)
    throw GraphError(GraphErrc::kBadBondOrder,
                     "bond order " + std::to_string(order) + " not in 1..3");
  if (a == b)
    throw GraphError(GraphErrc::kSelfLoop,
                     "I(v != u) violated: self loop on atom "
                       + std::to_string(a));
  if (find_bond(a, b) >= 0)
    throw GraphError(GraphErrc::kDuplicateBond,
                     "I(no v<->u exists) violated: bond " + describe_pair(a, b)
                       + " already present");
  for (int v: { a, b }) {
    if (bond_sum_[v] + order > atoms_[v].max_valence)
      throw GraphError(GraphErrc::kValenceOverflow,
                       "I(b_v < b_v*) violated: atom " + std::to_string(v)
                         + " (" + atoms_[v].symbol + ") would carry "
                         + std::to_string(bond_sum_[v] + order) + " > "
                         + std::to_string(atoms_[v].max_valence));
  }

  const int id = num_bonds();
  bonds_.push_back({ a, b, order });
  adj_[a].push_back({ b, id });
  adj_[b].push_back({ a, id });
  bond_sum_[a] += order;
  bond_sum_[b] += order;
  return id;
}

int MolecularGraph::find_bond(int a, int b) const {
  if (a < 0 || a >= num_atoms())
    return -1;
  for (const Neighbor &n: adj_[a])
    if (n.atom == b)
      return n.bond;
  return -1;
}

bool MolecularGraph::operator==(const MolecularGraph &other) const {
  if (num_atoms() != other.num_atoms() || num_bonds() != other.num_bonds())
    return false;
  for (int i = 0; i < num_atoms(); ++i) {
    const Atom &x = atoms_[i], &y = other.atoms_[i];
    if (x.symbol != y.symbol || x.charge != y.charge
        || x.hydrogens != y.hydrogens)
      return false;
  }
  for (const Bond &b: bonds_) {
    const int j = other.find_bond(b.a, b.b);
    if (j < 0 || other.bonds_[j].order != b.order)
      return false;
  }
  return true;
}

ValidityReport validate_structure(const MolecularGraph &g) {
  ValidityReport report;
  auto fail = [&](std::string msg) {
    report.ok = false;
    report.violations.push_back(std::move(msg));
  };

  std::vector<std::pair<int, int>> seen;
  seen.reserve(g.num_bonds());
  std::vector<int> sums(g.num_atoms(), 0);
  for (int i = 0; i < g.num_atoms(); ++i)
    sums[i] = g.atom(i).hydrogens;

  for (const Bond &b: g.bonds()) {
    if (b.a < 0 || b.b < 0 || b.a >= g.num_atoms() || b.b >= g.num_atoms()) {
      fail("bond index out of range: " + describe_pair(b.a, b.b));
      continue;
    }
    if (b.order < 1 || b.order > 3)
      fail("bond order out of range on " + describe_pair(b.a, b.b));
    if (b.a == b.b)
      fail("self loop on atom " + std::to_string(b.a));
    seen.emplace_back(std::min(b.a, b.b), std::max(b.a, b.b));
    sums[b.a] += b.order;
    sums[b.b] += b.order;
  }

  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 1; i < seen.size(); ++i)
    if (seen[i] == seen[i - 1])
      fail("duplicate bond " + describe_pair(seen[i].first, seen[i].second));

  for (int i = 0; i < g.num_atoms(); ++i) {
    if (sums[i] > g.atom(i).max_valence)
      fail("valence exceeded on atom " + std::to_string(i) + " ("
           + g.atom(i).symbol + "): " + std::to_string(sums[i]) + " > "
           + std::to_string(g.atom(i).max_valence));
    if (g.atom(i).max_valence < 1)
      fail("atom " + std::to_string(i) + " has no valence entry");
  }
  return report;
}

ValidityReport validate(const MolecularGraph &g) {
  ValidityReport report = validate_structure(g);
  if (g.empty()) {
    report.ok = false;
    report.violations.emplace_back("empty graph");
  } else if (!is_connected(g)) {
    report.ok = false;
    report.violations.emplace_back("graph is disconnected");
  }
  return report;
}

std::vector<int> distances_from(const MolecularGraph &g, int source) {
  if (source < 0 || source >= g.num_atoms())
    throw GraphError(GraphErrc::kIndexOutOfRange,
                     "atom index " + std::to_string(source) + " out of range");
  std::vector<int> dist(g.num_atoms(), kUnreachable);
  std::deque<int> queue { source };
  dist[source] = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (const Neighbor &n: g.neighbors(v)) {
      if (dist[n.atom] == kUnreachable) {
        dist[n.atom] = dist[v] + 1;
        queue.push_back(n.atom);
      }
    }
  }
  return dist;
}

int graph_distance(const MolecularGraph &g, int v, int u) {
  if (u < 0 || u >= g.num_atoms())
    throw GraphError(GraphErrc::kIndexOutOfRange,
                     "atom index " + std::to_string(u) + " out of range");
  return distances_from(g, v)[u];
}

std::vector<int> connected_component(const MolecularGraph &g, int v) {
  std::vector<int> dist = distances_from(g, v);
  std::vector<int> comp;
  for (int i = 0; i < g.num_atoms(); ++i)
    if (dist[i] != kUnreachable)
      comp.push_back(i);
  return comp;
}

bool is_connected(const MolecularGraph &g) {
  if (g.empty())
    return true;
  return static_cast<int>(connected_component(g, 0).size()) == g.num_atoms();
}

MolecularGraph induced_subgraph(const MolecularGraph &g,
                                std::span<const int> atoms) {
  std::vector<int> remap(g.num_atoms(), -1);
  std::vector<Atom> sub_atoms;
  sub_atoms.reserve(atoms.size());
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i) {
    remap[atoms[i]] = i;
    sub_atoms.push_back(g.atom(atoms[i]));
  }
  std::vector<Bond> sub_bonds;
  for (const Bond &b: g.bonds())
    if (remap[b.a] >= 0 && remap[b.b] >= 0)
      sub_bonds.push_back({ remap[b.a], remap[b.b], b.order });
  return MolecularGraph::from_parts_unchecked(std::move(sub_atoms),
                                              std::move(sub_bonds));
}

MolecularGraph permute_atoms(const MolecularGraph &g,
                             std::span<const int> new_index) {
  if (static_cast<int>(new_index.size()) != g.num_atoms())
    throw std::invalid_argument("permutation size mismatch");
  std::vector<Atom> atoms(g.num_atoms());
  for (int i = 0; i < g.num_atoms(); ++i)
    atoms[new_index[i]] = g.atom(i);
  std::vector<Bond> bonds;
  bonds.reserve(g.num_bonds());
  for (const Bond &b: g.bonds())
    bonds.push_back({ new_index[b.a], new_index[b.b], b.order });
  return MolecularGraph::from_parts_unchecked(std::move(atoms),
                                              std::move(bonds));
}

int ring_count(const MolecularGraph &g) {
  std::vector<char> seen(g.num_atoms(), 0);
  int components = 0;
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (seen[i])
      continue;
    ++components;
    for (int v: connected_component(g, i))
      seen[v] = 1;
  }
  return g.num_bonds() - g.num_atoms() + components;
}

std::string formula(const MolecularGraph &g) {
  std::vector<std::pair<std::string, int>> counts;
  for (const Atom &a: g.atoms()) {
    auto it = std::find_if(counts.begin(), counts.end(),
                           [&](const auto &p) { return p.first == a.symbol; });
    if (it == counts.end())
      counts.emplace_back(a.symbol, 1);
    else
      ++it->second;
  }
  // Hill order: carbon first, then alphabetical.
  std::sort(counts.begin(), counts.end(), [](const auto &x, const auto &y) {
    if ((x.first == "C") != (y.first == "C"))
      return x.first == "C";
    return x.first < y.first;
  });
  std::string out;
  for (const auto &[sym, n]: counts)
    out += sym + std::to_string(n);
  return out;
}

}  // namespace gcgvae
