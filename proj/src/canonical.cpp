//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <array>
#include <cstdio>
#include <tuple>

#include "gcgvae/molgraph.h"

namespace gcgvae {
namespace {
template <class T>
std::vector<int> dense_ranks(const std::vector<T> &keys) {
  std::vector<T> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> ranks(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i)
    ranks[i] = static_cast<int>(
      std::lower_bound(sorted.begin(), sorted.end(), keys[i]) - sorted.begin());
  return ranks;
}

int count_classes(const std::vector<int> &ranks) {
  if (ranks.empty())
    return 0;
  return *std::max_element(ranks.begin(), ranks.end()) + 1;
}

std::vector<int> refine(const MolecularGraph &g, std::vector<int> ranks) {
  using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
  int classes = count_classes(ranks);
  for (;;) {
    std::vector<Signature> sigs(g.num_atoms());
    for (int v = 0; v < g.num_atoms(); ++v) {
      sigs[v].first = ranks[v];
      for (const Neighbor &nb: g.neighbors(v))
        sigs[v].second.emplace_back(g.bond(nb.bond).order, ranks[nb.atom]);
      std::sort(sigs[v].second.begin(), sigs[v].second.end());
    }
    ranks = dense_ranks(sigs);
    const int next = count_classes(ranks);
    if (next == classes)
      return ranks;
    classes = next;
  }
}

std::vector<int> initial_ranks(const MolecularGraph &g) {
  using Invariant = std::tuple<std::string, int, int, int, int>;
  std::vector<Invariant> inv;
  inv.reserve(g.num_atoms());
  for (int v = 0; v < g.num_atoms(); ++v) {
    const Atom &a = g.atom(v);
    inv.emplace_back(a.symbol, a.charge, a.hydrogens, g.degree(v),
                     g.bond_sum(v));
  }
  return dense_ranks(inv);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c: s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}
}  // namespace

std::vector<int> refined_ranks(const MolecularGraph &g) {
  return refine(g, initial_ranks(g));
}

std::vector<int> canonical_ranks(const MolecularGraph &g) {
  std::vector<int> ranks = refined_ranks(g);
  const int n = g.num_atoms();
  while (count_classes(ranks) < n) {
    std::vector<int> size(n, 0);
    for (int r: ranks)
      ++size[r];
    int tied = 0;
    while (size[tied] < 2)
      ++tied;
    int pick = 0;
    while (ranks[pick] != tied)
      ++pick;
    for (int &r: ranks)
      r *= 2;
    ranks[pick] -= 1;
    ranks = refine(g, dense_ranks(ranks));
  }
  return ranks;
}

std::string canonical_key(const MolecularGraph &g) {
  const std::vector<int> ranks = refined_ranks(g);

  std::vector<std::tuple<int, std::string, int, int>> atoms;
  atoms.reserve(g.num_atoms());
  for (int v = 0; v < g.num_atoms(); ++v)
    atoms.emplace_back(ranks[v], g.atom(v).symbol, g.atom(v).charge,
                       g.atom(v).hydrogens);
  std::sort(atoms.begin(), atoms.end());

  std::vector<std::array<int, 3>> bonds;
  bonds.reserve(g.num_bonds());
  for (const Bond &b: g.bonds())
    bonds.push_back({ std::min(ranks[b.a], ranks[b.b]),
                      std::max(ranks[b.a], ranks[b.b]), b.order });
  std::sort(bonds.begin(), bonds.end());

  std::string text;
  for (const auto &[r, sym, chg, h]: atoms)
    text += std::to_string(r) + ':' + sym + ':' + std::to_string(chg) + ':'
            + std::to_string(h) + ';';
  text += '|';
  for (const auto &b: bonds)
    text += std::to_string(b[0]) + '-' + std::to_string(b[1]) + '-'
            + std::to_string(b[2]) + ';';

  char digest[33];
  std::snprintf(digest, sizeof(digest), "%016llx%016llx",
                static_cast<unsigned long long>(
                  fnv1a(text, 0xcbf29ce484222325ULL)),
                static_cast<unsigned long long>(
                  fnv1a(text, 0x84222325cbf29ce4ULL)));
  return formula(g) + '-' + digest;
}

}  // namespace gcgvae
