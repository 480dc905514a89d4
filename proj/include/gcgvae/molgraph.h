//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_MOLGRAPH_H_
#define GCGVAE_MOLGRAPH_H_

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gcgvae {

enum class GraphErrc {
  kUnknownElement,
  kSelfLoop,
  kDuplicateBond,
  kValenceOverflow,
  kIndexOutOfRange,
  kBadBondOrder,
  kDisconnected,
  kInvalidCut,
  kInvalidGraph,
};

class GraphError: public std::runtime_error {
public:
  GraphError(GraphErrc code, const std::string &what)
    : std::runtime_error(what), code_(code) { }

  GraphErrc code() const noexcept { return code_; }

private:
  GraphErrc code_;
};

struct Element {
  std::string symbol;
  int max_valence;
};

/// Maximum total bond order per element. The standard table carries the
/// extended S (6) and P (5) valences; base() is the strict organic set.
class ValencyTable {
public:
  ValencyTable() = default;

  static const ValencyTable &standard();
  static ValencyTable base();

  void set(std::string_view symbol, int max_valence);

  const Element *find(std::string_view symbol) const noexcept;
  bool contains(std::string_view symbol) const noexcept {
    return find(symbol) != nullptr;
  }

  // Throws GraphError(kUnknownElement).
  int max_valence(std::string_view symbol) const;

  const std::vector<Element> &entries() const noexcept { return entries_; }

private:
  std::vector<Element> entries_;
};

struct Atom {
  std::string symbol;
  int charge = 0;
  // Explicit hydrogens from bracket atoms; they count against valence.
  int hydrogens = 0;
  int max_valence = 0;
};

struct Bond {
  int a;
  int b;
  int order;

  int other(int v) const noexcept { return v == a ? b : a; }
};

struct Neighbor {
  int atom;
  int bond;
};

/// Atoms plus typed bonds. Every mutation enforces the structural
/// invariants (no self loops, no parallel bonds, bond sum <= max valence).
/// Copies are independent values.
class MolecularGraph {
public:
  MolecularGraph() = default;

  // Assembles a graph without checking any invariant. Used to probe
  // validate() and by code that already guarantees the invariants.
  static MolecularGraph from_parts_unchecked(std::vector<Atom> atoms,
                                             std::vector<Bond> bonds);

  int add_atom(std::string_view symbol,
               const ValencyTable &table = ValencyTable::standard());
  int add_atom(std::string_view symbol, int charge, int hydrogens,
               const ValencyTable &table = ValencyTable::standard());

  int add_bond(int a, int b, int order);

  int num_atoms() const noexcept { return static_cast<int>(atoms_.size()); }
  int num_bonds() const noexcept { return static_cast<int>(bonds_.size()); }
  bool empty() const noexcept { return atoms_.empty(); }

  const Atom &atom(int i) const { return atoms_[i]; }
  const Bond &bond(int i) const { return bonds_[i]; }
  const std::vector<Atom> &atoms() const noexcept { return atoms_; }
  const std::vector<Bond> &bonds() const noexcept { return bonds_; }

  std::span<const Neighbor> neighbors(int v) const { return adj_[v]; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }

  // Sum of incident bond orders plus explicit hydrogens (b_v).
  int bond_sum(int v) const { return bond_sum_[v]; }
  int free_valence(int v) const {
    return atoms_[v].max_valence - bond_sum_[v];
  }

  // Bond index, or -1.
  int find_bond(int a, int b) const;

  bool operator==(const MolecularGraph &other) const;

private:
  void check_index(int v) const;

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<int> bond_sum_;
};

struct ValidityReport {
  bool ok = true;
  std::vector<std::string> violations;
};

ValidityReport validate(const MolecularGraph &g);

/// Like validate(), without the connectivity requirement. Partial graphs
/// during decoding are checked with this.
ValidityReport validate_structure(const MolecularGraph &g);

inline constexpr int kUnreachable = -1;

int graph_distance(const MolecularGraph &g, int v, int u);

// Hop counts from `source` to every atom; kUnreachable where disconnected.
std::vector<int> distances_from(const MolecularGraph &g, int source);

bool is_connected(const MolecularGraph &g);

// Sorted atom indices of the component containing `v`.
std::vector<int> connected_component(const MolecularGraph &g, int v);

/// Subgraph induced by `atoms`, renumbered in the order given.
MolecularGraph induced_subgraph(const MolecularGraph &g,
                                std::span<const int> atoms);

// new_index[i] is where atom i goes.
MolecularGraph permute_atoms(const MolecularGraph &g,
                             std::span<const int> new_index);

// Cyclomatic number: bonds - atoms + components.
int ring_count(const MolecularGraph &g);

enum class BranchMode { kUppermost, kUniversal };

/// A single-order bridge bond together with the side it detaches. The
/// subtree is the smaller side of the bridge (ties: the side holding the
/// higher-indexed endpoint); `host` is the bridge endpoint that stays and
/// `root` the endpoint inside the subtree.
struct BranchCut {
  int host;
  int root;
  int bond;
  std::vector<int> subtree;
  int size;
};

inline constexpr int kDefaultUppermostMaxAtoms = 2;

std::vector<BranchCut>
enumerate_branches(const MolecularGraph &g, BranchMode mode,
                   int uppermost_max_atoms = kDefaultUppermostMaxAtoms);

/// Exchanges the detached subtrees of two cuts. The first offspring keeps
/// g1's host side, the second keeps g2's.
std::pair<MolecularGraph, MolecularGraph>
swap_branches(const MolecularGraph &g1, const BranchCut &c1,
              const MolecularGraph &g2, const BranchCut &c2);

/// Color classes from iterative neighborhood refinement. Equal ranks for
/// atoms the refinement cannot tell apart; invariant under reindexing.
std::vector<int> refined_ranks(const MolecularGraph &g);

/// Refinement followed by tie breaking, so every atom gets a distinct
/// rank. Used to order output; ties between symmetric atoms are broken by
/// index.
std::vector<int> canonical_ranks(const MolecularGraph &g);

/// Text digest stable under atom reindexing, e.g. "C2O1-0123abcd...".
std::string canonical_key(const MolecularGraph &g);

// Hill-order formula of the heavy atoms, e.g. "C7N1O2".
std::string formula(const MolecularGraph &g);

}  // namespace gcgvae

#endif  // GCGVAE_MOLGRAPH_H_
