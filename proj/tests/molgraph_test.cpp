//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/molgraph.h"

#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "gcgvae/rng.h"
#include "gcgvae/smiles.h"

namespace {
using namespace gcgvae;

MolecularGraph chain(int n) {
  MolecularGraph g;
  for (int i = 0; i < n; ++i)
    g.add_atom("C");
  for (int i = 0; i + 1 < n; ++i)
    g.add_bond(i, i + 1, 1);
  return g;
}

// Sorted heavy-atom degree sequence plus bond-order multiset; enough to
// tell the small skeletons below apart.
std::pair<std::vector<int>, std::vector<int>> shape(const MolecularGraph &g) {
  std::vector<int> deg, orders;
  for (int v = 0; v < g.num_atoms(); ++v)
    deg.push_back(g.degree(v));
  for (const Bond &b: g.bonds())
    orders.push_back(b.order);
  std::sort(deg.begin(), deg.end());
  std::sort(orders.begin(), orders.end());
  return { deg, orders };
}

TEST(MolGraphTest, AddAtom) {
  MolecularGraph g;
  g.add_atom("C");
  EXPECT_EQ(g.num_atoms(), 1);
  EXPECT_EQ(g.num_bonds(), 0);

  g.add_atom("O");
  EXPECT_TRUE(validate_structure(g).ok);
  EXPECT_FALSE(validate(g).ok);

  MolecularGraph h;
  try {
    h.add_atom("Xx");
    FAIL() << "unknown element accepted";
  } catch (const GraphError &e) {
    EXPECT_EQ(e.code(), GraphErrc::kUnknownElement);
  }
}

TEST(MolGraphTest, AddBondErrors) {
  MolecularGraph g;
  g.add_atom("C");
  g.add_atom("C");
  g.add_bond(0, 1, 3);
  EXPECT_EQ(g.bond_sum(0), 3);

  auto code_of = [](auto &&fn) {
    try {
      fn();
    } catch (const GraphError &e) {
      return e.code();
    }
    return GraphErrc::kInvalidGraph;
  };
  EXPECT_EQ(code_of([&] { g.add_bond(0, 0, 1); }), GraphErrc::kSelfLoop);
  EXPECT_EQ(code_of([&] { g.add_bond(1, 0, 1); }), GraphErrc::kDuplicateBond);
  EXPECT_EQ(code_of([&] { g.add_bond(0, 5, 1); }), GraphErrc::kIndexOutOfRange);
  EXPECT_EQ(code_of([&] { g.add_bond(0, 1, 4); }), GraphErrc::kBadBondOrder);

  MolecularGraph m;
  m.add_atom("C");
  for (int i = 1; i <= 4; ++i) {
    m.add_atom("C");
    m.add_bond(0, i, 1);
  }
  m.add_atom("C");
  EXPECT_EQ(code_of([&] { m.add_bond(0, 5, 1); }), GraphErrc::kValenceOverflow);
  EXPECT_EQ(m.num_bonds(), 4);
}

TEST(MolGraphTest, Distance) {
  MolecularGraph g = chain(3);
  EXPECT_EQ(graph_distance(g, 1, 1), 0);
  EXPECT_EQ(graph_distance(g, 0, 2), 2);

  MolecularGraph two;
  two.add_atom("C");
  two.add_atom("C");
  EXPECT_EQ(graph_distance(two, 0, 1), kUnreachable);
  EXPECT_THROW(graph_distance(two, 0, 2), GraphError);
}

TEST(MolGraphTest, DistanceIsMetric) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    MolecularGraph g = chain(8);
    for (int k = 0; k < 4; ++k) {
      const int a = rng.below(8), b = rng.below(8);
      if (a != b && g.find_bond(a, b) < 0 && g.free_valence(a) > 0
          && g.free_valence(b) > 0)
        g.add_bond(a, b, 1);
    }
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        ASSERT_EQ(graph_distance(g, a, b), graph_distance(g, b, a));
        for (int c = 0; c < 8; ++c)
          ASSERT_LE(graph_distance(g, a, c),
                    graph_distance(g, a, b) + graph_distance(g, b, c));
      }
  }
}

TEST(MolGraphTest, Validate) {
  MolecularGraph benzene = parse_smiles("C1=CC=CC=C1");
  for (int v = 0; v < 6; ++v)
    EXPECT_EQ(benzene.bond_sum(v), 3);
  EXPECT_TRUE(validate(benzene).ok);

  std::vector<Atom> atoms(6, Atom { "C", 0, 0, 4 });
  std::vector<Bond> bonds;
  for (int i = 1; i <= 5; ++i)
    bonds.push_back({ 0, i, 1 });
  auto report = validate(MolecularGraph::from_parts_unchecked(atoms, bonds));
  EXPECT_FALSE(report.ok);
  ASSERT_FALSE(report.violations.empty());
  EXPECT_NE(report.violations[0].find("valence"), std::string::npos);

  MolecularGraph split;
  split.add_atom("C");
  split.add_atom("N");
  report = validate(split);
  EXPECT_FALSE(report.ok);
  EXPECT_NE(report.violations.back().find("connected"), std::string::npos);
}

TEST(MolGraphTest, BranchesCyclohexane) {
  MolecularGraph g = parse_smiles("C1CCCCC1");
  EXPECT_TRUE(enumerate_branches(g, BranchMode::kUniversal).empty());
  EXPECT_TRUE(enumerate_branches(g, BranchMode::kUppermost).empty());
}

TEST(MolGraphTest, BranchesToluene) {
  MolecularGraph g = parse_smiles("CC1=CC=CC=C1");
  for (auto mode: { BranchMode::kUniversal, BranchMode::kUppermost }) {
    auto cuts = enumerate_branches(g, mode);
    ASSERT_EQ(cuts.size(), 1u);
    EXPECT_EQ(cuts[0].subtree, std::vector<int> { 0 });
    EXPECT_EQ(cuts[0].size, 1);
    EXPECT_EQ(cuts[0].host, 1);
  }
}

TEST(MolGraphTest, BranchesButane) {
  MolecularGraph g = chain(4);
  auto universal = enumerate_branches(g, BranchMode::kUniversal);
  auto upper = enumerate_branches(g, BranchMode::kUppermost);
  EXPECT_EQ(universal.size(), 3u);

  // Brute force: every single bond whose removal splits the chain, kept
  // in uppermost mode iff the smaller side has at most two atoms.
  int expect_upper = 0;
  for (const Bond &b: g.bonds()) {
    const int left = std::min(b.a, b.b) + 1;
    if (std::min(left, 4 - left) <= 2)
      ++expect_upper;
  }
  EXPECT_EQ(upper.size(), static_cast<std::size_t>(expect_upper));
  EXPECT_EQ(upper.size(), 3u);

  EXPECT_TRUE(enumerate_branches(chain(6), BranchMode::kUppermost).size()
              < enumerate_branches(chain(6), BranchMode::kUniversal).size());
}

TEST(MolGraphTest, BranchesSkipMultipleBonds) {
  MolecularGraph g = parse_smiles("C=CC");
  auto cuts = enumerate_branches(g, BranchMode::kUniversal);
  ASSERT_EQ(cuts.size(), 1u);
  EXPECT_EQ(g.bond(cuts[0].bond).order, 1);
}

TEST(MolGraphTest, BranchesRejectDisconnected) {
  MolecularGraph g;
  g.add_atom("C");
  g.add_atom("C");
  EXPECT_THROW(enumerate_branches(g, BranchMode::kUniversal), GraphError);
}

TEST(MolGraphTest, SwapIdentity) {
  MolecularGraph t = parse_smiles("CC1=CC=CC=C1");
  auto cut = enumerate_branches(t, BranchMode::kUppermost).at(0);
  auto [a, b] = swap_branches(t, cut, t, cut);
  EXPECT_EQ(canonical_key(a), canonical_key(t));
  EXPECT_EQ(canonical_key(b), canonical_key(t));
}

TEST(MolGraphTest, SwapEthanePropane) {
  MolecularGraph ethane = chain(2), propane = chain(3);
  auto ce = enumerate_branches(ethane, BranchMode::kUniversal).at(0);
  EXPECT_EQ(ce.host, 0);
  EXPECT_EQ(ce.subtree, std::vector<int> { 1 });

  // Propane cut into CH3 (host) | CH2CH3 (detached).
  BranchCut ethyl { 0, 1, propane.find_bond(0, 1), { 1, 2 }, 2 };
  auto [x, y] = swap_branches(ethane, ce, propane, ethyl);

  // Offspring layout is host atoms then grafted atoms, so the adjacency
  // can be written down by hand: CH3 + CH2CH3 and CH3 + CH3.
  MolecularGraph want_x;
  for (int i = 0; i < 3; ++i)
    want_x.add_atom("C");
  want_x.add_bond(1, 2, 1);
  want_x.add_bond(0, 1, 1);
  MolecularGraph want_y;
  want_y.add_atom("C");
  want_y.add_atom("C");
  want_y.add_bond(0, 1, 1);
  EXPECT_EQ(shape(x), shape(want_x));
  EXPECT_EQ(shape(y), shape(want_y));
  EXPECT_EQ(canonical_key(x), canonical_key(propane));
  EXPECT_EQ(canonical_key(y), canonical_key(ethane));
  EXPECT_EQ(x.num_atoms() + y.num_atoms(), 5);

  // Growing to butane needs an ethyl host on the receiving side.
  MolecularGraph butane_src = chain(3);
  BranchCut methyl { 1, 2, butane_src.find_bond(1, 2), { 2 }, 1 };
  auto [p, q] = swap_branches(butane_src, methyl, propane, ethyl);
  EXPECT_EQ(canonical_key(p), canonical_key(chain(4)));
  EXPECT_EQ(canonical_key(q), canonical_key(chain(2)));
  for (const auto &g: { p, q, x, y })
    EXPECT_TRUE(validate(g).ok);
}

TEST(MolGraphTest, SwapConservesAtoms) {
  const char *smiles[] = {
    "CC(C)CN(C)C(=O)OCC", "OCC1=CC=CC=C1Cl", "CCOC(=O)C1CCN(C)CC1",
    "NC(=O)C1=CC=C(Br)C=C1", "CC(O)C(N)=O",
  };
  Rng rng(3);
  std::vector<MolecularGraph> mols;
  for (auto *s: smiles)
    mols.push_back(parse_smiles(s));
  for (int trial = 0; trial < 200; ++trial) {
    const auto &g1 = mols[rng.below(5)];
    const auto &g2 = mols[rng.below(5)];
    auto c1 = enumerate_branches(g1, BranchMode::kUniversal);
    auto c2 = enumerate_branches(g2, BranchMode::kUniversal);
    auto [a, b] = swap_branches(g1, c1[rng.below(static_cast<int>(c1.size()))],
                                g2, c2[rng.below(static_cast<int>(c2.size()))]);
    ASSERT_TRUE(validate(a).ok);
    ASSERT_TRUE(validate(b).ok);
    ASSERT_EQ(a.num_atoms() + b.num_atoms(), g1.num_atoms() + g2.num_atoms());
  }
}

TEST(MolGraphTest, UppermostSubsetOfUniversal) {
  MolecularGraph g = parse_smiles("CC(C)(C)CCC(CO)C1CC(CCN)C1");
  auto universal = enumerate_branches(g, BranchMode::kUniversal);
  std::set<std::pair<int, int>> all;
  for (auto &c: universal)
    all.emplace(c.bond, c.root);
  for (auto &c: enumerate_branches(g, BranchMode::kUppermost)) {
    EXPECT_TRUE(all.count({ c.bond, c.root }));
    EXPECT_LE(c.size, kDefaultUppermostMaxAtoms);
  }
}

TEST(MolGraphTest, SwapRejectsBadCut) {
  MolecularGraph g = chain(3);
  BranchCut bad { 0, 1, 0, { 1 }, 1 };
  EXPECT_THROW(swap_branches(g, bad, g, bad), GraphError);
}

TEST(MolGraphTest, CanonicalKeyReverse) {
  MolecularGraph g = parse_smiles("CC(=O)NC1=CC=C(O)C=C1");
  std::vector<int> rev(g.num_atoms());
  std::iota(rev.rbegin(), rev.rend(), 0);
  EXPECT_EQ(canonical_key(g), canonical_key(permute_atoms(g, rev)));
  EXPECT_NE(canonical_key(parse_smiles("C")), canonical_key(parse_smiles("N")));
}

TEST(MolGraphTest, CanonicalKeyPermutationFuzz) {
  MolecularGraph g = parse_smiles("CC(C)CC1=CC=C(C=C1)C(C)C(=O)OCC(N)CS");
  ASSERT_EQ(g.num_atoms(), 20);
  Rng rng(2026);
  std::set<std::string> keys;
  std::vector<int> perm(g.num_atoms());
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < 100; ++i) {
    rng.shuffle(perm);
    keys.insert(canonical_key(permute_atoms(g, perm)));
  }
  EXPECT_EQ(keys.size(), 1u);
}

TEST(MolGraphTest, CanonicalKeySeparatesIsomers) {
  EXPECT_NE(canonical_key(parse_smiles("CCCC")),
            canonical_key(parse_smiles("CC(C)C")));
  EXPECT_NE(canonical_key(parse_smiles("C=CCC")),
            canonical_key(parse_smiles("CC=CC")));
  EXPECT_NE(canonical_key(parse_smiles("OCCO")),
            canonical_key(parse_smiles("COCO")));
}

TEST(MolGraphTest, RingCountAndFormula) {
  EXPECT_EQ(ring_count(parse_smiles("C1CC2CCC1C2")), 2);
  EXPECT_EQ(formula(parse_smiles("CC(=O)O")), "C2O2");
  EXPECT_EQ(formula(parse_smiles("NCCl")), "C1Cl1N1");
}
}  // namespace
