//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <deque>
#include <functional>

#include "gcgvae/molgraph.h"

namespace gcgvae {
namespace {
// Tarjan low-link bridge search over a connected graph.
std::vector<int> find_bridges(const MolecularGraph &g) {
  const int n = g.num_atoms();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<int> bridges;
  int timer = 0;

  std::function<void(int, int)> dfs = [&](int v, int parent_bond) {
    disc[v] = low[v] = timer++;
    for (const Neighbor &nb: g.neighbors(v)) {
      if (nb.bond == parent_bond)
        continue;
      if (disc[nb.atom] < 0) {
        dfs(nb.atom, nb.bond);
        low[v] = std::min(low[v], low[nb.atom]);
        if (low[nb.atom] > disc[v])
          bridges.push_back(nb.bond);
      } else {
        low[v] = std::min(low[v], disc[nb.atom]);
      }
    }
  };
  if (n > 0)
    dfs(0, -1);
  std::sort(bridges.begin(), bridges.end());
  return bridges;
}

// Atoms reachable from `start` without crossing bond `cut`, sorted.
std::vector<int> side_of(const MolecularGraph &g, int start, int cut) {
  std::vector<char> seen(g.num_atoms(), 0);
  std::deque<int> queue { start };
  seen[start] = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (const Neighbor &nb: g.neighbors(v)) {
      if (nb.bond == cut || seen[nb.atom])
        continue;
      seen[nb.atom] = 1;
      queue.push_back(nb.atom);
    }
  }
  std::vector<int> out;
  for (int i = 0; i < g.num_atoms(); ++i)
    if (seen[i])
      out.push_back(i);
  return out;
}

void check_cut(const MolecularGraph &g, const BranchCut &c) {
  auto invalid = [](const std::string &why) {
    throw GraphError(GraphErrc::kInvalidCut, "invalid branch cut: " + why);
  };
  if (c.bond < 0 || c.bond >= g.num_bonds())
    invalid("bond index out of range");
  const Bond &b = g.bond(c.bond);
  if (b.order != 1)
    invalid("bridge bond is not single");
  if (!((b.a == c.host && b.b == c.root) || (b.b == c.host && b.a == c.root)))
    invalid("host/root do not match the bridge endpoints");
  std::vector<int> side = side_of(g, c.root, c.bond);
  if (std::binary_search(side.begin(), side.end(), c.host))
    invalid("bond is not a bridge");
  if (side != c.subtree || c.size != static_cast<int>(side.size()))
    invalid("subtree does not match the detached component");
}

std::vector<int> complement(int n, const std::vector<int> &sorted_subset) {
  std::vector<int> out;
  out.reserve(n - sorted_subset.size());
  for (int i = 0, j = 0; i < n; ++i) {
    if (j < static_cast<int>(sorted_subset.size()) && sorted_subset[j] == i)
      ++j;
    else
      out.push_back(i);
  }
  return out;
}

MolecularGraph join(const MolecularGraph &host_graph, int host,
                    const std::vector<int> &host_atoms,
                    const MolecularGraph &branch_graph, int root,
                    const std::vector<int> &branch_atoms) {
  std::vector<int> host_map(host_graph.num_atoms(), -1);
  std::vector<int> branch_map(branch_graph.num_atoms(), -1);
  std::vector<Atom> atoms;
  atoms.reserve(host_atoms.size() + branch_atoms.size());
  for (int v: host_atoms) {
    host_map[v] = static_cast<int>(atoms.size());
    atoms.push_back(host_graph.atom(v));
  }
  for (int v: branch_atoms) {
    branch_map[v] = static_cast<int>(atoms.size());
    atoms.push_back(branch_graph.atom(v));
  }

  std::vector<Bond> bonds;
  for (const Bond &b: host_graph.bonds())
    if (host_map[b.a] >= 0 && host_map[b.b] >= 0)
      bonds.push_back({ host_map[b.a], host_map[b.b], b.order });
  for (const Bond &b: branch_graph.bonds())
    if (branch_map[b.a] >= 0 && branch_map[b.b] >= 0)
      bonds.push_back({ branch_map[b.a], branch_map[b.b], b.order });
  bonds.push_back({ host_map[host], branch_map[root], 1 });
  return MolecularGraph::from_parts_unchecked(std::move(atoms),
                                              std::move(bonds));
}
}  // namespace

std::vector<BranchCut> enumerate_branches(const MolecularGraph &g,
                                          BranchMode mode,
                                          int uppermost_max_atoms) {
  if (g.empty() || !is_connected(g))
    throw GraphError(GraphErrc::kDisconnected,
                     "branch enumeration needs a connected graph");

  std::vector<BranchCut> cuts;
  for (int bond: find_bridges(g)) {
    const Bond &b = g.bond(bond);
    if (b.order != 1)
      continue;

    std::vector<int> side_b = side_of(g, b.b, bond);
    const int n_b = static_cast<int>(side_b.size());
    const int n_a = g.num_atoms() - n_b;
    const int hi = std::max(b.a, b.b);

    bool take_b;
    if (n_b != n_a)
      take_b = n_b < n_a;
    else
      take_b = b.b == hi;

    BranchCut cut;
    cut.bond = bond;
    if (take_b) {
      cut.root = b.b;
      cut.host = b.a;
      cut.subtree = std::move(side_b);
    } else {
      cut.root = b.a;
      cut.host = b.b;
      cut.subtree = side_of(g, b.a, bond);
    }
    cut.size = static_cast<int>(cut.subtree.size());

    if (mode == BranchMode::kUppermost && cut.size > uppermost_max_atoms)
      continue;
    cuts.push_back(std::move(cut));
  }
  return cuts;
}

std::pair<MolecularGraph, MolecularGraph>
swap_branches(const MolecularGraph &g1, const BranchCut &c1,
              const MolecularGraph &g2, const BranchCut &c2) {
  check_cut(g1, c1);
  check_cut(g2, c2);

  const std::vector<int> host1 = complement(g1.num_atoms(), c1.subtree);
  const std::vector<int> host2 = complement(g2.num_atoms(), c2.subtree);

  return {
    join(g1, c1.host, host1, g2, c2.root, c2.subtree),
    join(g2, c2.host, host2, g1, c1.root, c1.subtree),
  };
}

}  // namespace gcgvae
