//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/smiles.h"

#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gcgvae/rng.h"
#include "test_data.h"

namespace {
using namespace gcgvae;

SmilesErrc error_of(std::string_view s, std::size_t *offset = nullptr) {
  try {
    parse_smiles(s);
  } catch (const SmilesError &e) {
    if (offset != nullptr)
      *offset = e.offset();
    return e.code();
  }
  ADD_FAILURE() << "parsed: " << s;
  return SmilesErrc::kEmpty;
}

TEST(SmilesTest, Basic) {
  MolecularGraph g = parse_smiles("C");
  EXPECT_EQ(g.num_atoms(), 1);
  EXPECT_EQ(g.num_bonds(), 0);

  g = parse_smiles("C1CC1");
  EXPECT_EQ(g.num_atoms(), 3);
  EXPECT_EQ(g.num_bonds(), 3);
  for (const Bond &b: g.bonds())
    EXPECT_EQ(b.order, 1);
}

TEST(SmilesTest, AceticAcidAdjacency) {
  MolecularGraph g = parse_smiles("CC(=O)O");
  ASSERT_EQ(g.num_atoms(), 4);
  // Hand-built: 0 C, 1 C, 2 O (double to 1), 3 O (single to 1).
  const int want[4][4] = {
    { 0, 1, 0, 0 },
    { 1, 0, 2, 1 },
    { 0, 2, 0, 0 },
    { 0, 1, 0, 0 },
  };
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const int bi = g.find_bond(a, b);
      EXPECT_EQ(bi < 0 ? 0 : g.bond(bi).order, want[a][b]) << a << "," << b;
    }
  EXPECT_EQ(g.bond_sum(1), 4);
  EXPECT_EQ(g.atom(2).symbol, "O");
}

TEST(SmilesTest, Remdesivir) {
  MolecularGraph g = parse_smiles(
    "CCC(CC)COC(=O)C(C)NP(=O)(OCC1C(C(C(O1)(CN)C2=CC=C3N2N=CN=C3N)O)O)OC4=CC=CC=C4");
  EXPECT_TRUE(validate(g).ok);
  EXPECT_EQ(g.num_atoms(), 42);
}

TEST(SmilesTest, Errors) {
  std::size_t off = 99;
  EXPECT_EQ(error_of("C1CC", &off), SmilesErrc::kUnmatchedRingClosure);
  EXPECT_EQ(off, 1u);
  EXPECT_EQ(error_of("CC(C", &off), SmilesErrc::kUnmatchedBranch);
  EXPECT_EQ(off, 2u);
  EXPECT_EQ(error_of("CC)C", &off), SmilesErrc::kUnmatchedBranch);
  EXPECT_EQ(off, 2u);
  EXPECT_EQ(error_of("C.C"), SmilesErrc::kMultiFragment);
  EXPECT_EQ(error_of("c1ccccc1", &off), SmilesErrc::kAromaticInput);
  EXPECT_EQ(off, 0u);
  EXPECT_EQ(error_of("C[Xe]"), SmilesErrc::kUnknownElement);
  EXPECT_EQ(error_of("C(C)(C)(C)(C)C"), SmilesErrc::kValenceOverflow);
  EXPECT_EQ(error_of("C=1CC#1"), SmilesErrc::kRingBondConflict);
  EXPECT_EQ(error_of(""), SmilesErrc::kEmpty);
  EXPECT_EQ(error_of("C$C"), SmilesErrc::kInvalidBond);
  EXPECT_EQ(error_of("C?C"), SmilesErrc::kUnexpectedCharacter);
  EXPECT_EQ(error_of("C[C"), SmilesErrc::kBadBracketAtom);
}

TEST(SmilesTest, StereoAndIsotopesDropped) {
  MolecularGraph a = parse_smiles("F/C=C/F");
  MolecularGraph b = parse_smiles("FC=CF");
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  EXPECT_EQ(canonical_key(parse_smiles("N[C@@H](C)C(=O)O")),
            canonical_key(parse_smiles("N[CH](C)C(=O)O")));
  MolecularGraph iso = parse_smiles("[13CH4]");
  EXPECT_EQ(iso.atom(0).hydrogens, 4);
  EXPECT_EQ(iso.bond_sum(0), 4);
}

TEST(SmilesTest, BracketAtoms) {
  // Charges are carried but do not raise the valence limit.
  EXPECT_EQ(error_of("C[N+](C)(C)C"), SmilesErrc::kValenceOverflow);
  MolecularGraph g = parse_smiles("C[N+](C)C");
  EXPECT_EQ(g.atom(1).charge, 1);
  EXPECT_TRUE(validate(g).ok);
  g = parse_smiles("[O-]C(=O)C");
  EXPECT_EQ(g.atom(0).charge, -1);
  EXPECT_EQ(error_of("[CH5]"), SmilesErrc::kValenceOverflow);
}

TEST(SmilesTest, RingClosureOrderFromEitherSide) {
  MolecularGraph a = parse_smiles("C=1CCCCC1");
  MolecularGraph b = parse_smiles("C1CCCCC=1");
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  EXPECT_EQ(a.bond(a.find_bond(0, 5)).order, 2);
}

TEST(SmilesTest, Tokens) {
  auto tokens = tokenize_smiles("CC(=O)Cl");
  ASSERT_EQ(tokens.size(), 7u);
  EXPECT_EQ(tokens[2].kind, SmilesTokenKind::kBranchOpen);
  EXPECT_EQ(tokens[3].kind, SmilesTokenKind::kBond);
  EXPECT_EQ(tokens[6].payload, "Cl");
  for (std::size_t i = 1; i < tokens.size(); ++i)
    EXPECT_LT(tokens[i - 1].position, tokens[i].position);
  auto stereo = tokenize_smiles("F/C=C\\F");
  EXPECT_EQ(stereo[1].kind, SmilesTokenKind::kStereoMark);
  EXPECT_EQ(stereo[5].kind, SmilesTokenKind::kStereoMark);
}

TEST(SmilesTest, WriteSimple) {
  MolecularGraph g;
  g.add_atom("C");
  EXPECT_EQ(write_smiles(g), "C");

  MolecularGraph ring = parse_smiles("C1CC1");
  MolecularGraph back = parse_smiles(write_smiles(ring));
  EXPECT_EQ(back.num_atoms(), 3);
  EXPECT_EQ(back.num_bonds(), 3);

  MolecularGraph split;
  split.add_atom("C");
  split.add_atom("C");
  EXPECT_THROW(write_smiles(split), GraphError);
}

TEST(SmilesTest, WriteIsDeterministicAcrossIndexing) {
  MolecularGraph g = parse_smiles("OC(=O)C1=CC=CC=C1OC(C)=O");
  std::vector<int> perm(g.num_atoms());
  for (int i = 0; i < g.num_atoms(); ++i)
    perm[i] = i;
  Rng rng(5);
  const std::string first = write_smiles(g);
  for (int k = 0; k < 20; ++k) {
    rng.shuffle(perm);
    EXPECT_EQ(write_smiles(permute_atoms(g, perm)), first);
  }
}

TEST(SmilesTest, ManyRingsUsePercentDigits) {
  // Eleven fused rings keep more than nine closures open at once.
  std::string s = "C1";
  for (int i = 2; i <= 11; ++i)
    s += "C" + (i < 10 ? std::to_string(i) : "%" + std::to_string(i));
  s += "CCCCCCCCCC1";
  for (int i = 2; i <= 11; ++i)
    s += "C" + (i < 10 ? std::to_string(i) : "%" + std::to_string(i));
  MolecularGraph g = parse_smiles(s);
  EXPECT_EQ(canonical_key(parse_smiles(write_smiles(g))), canonical_key(g));
}

TEST(SmilesTest, ReferenceTable) {
  int aromatic = 0, parsed = 0;
  for (const auto &row: test_data::reference_molecules()) {
    try {
      MolecularGraph g = parse_smiles(row.smiles);
      ASSERT_TRUE(validate(g).ok) << row.name;
      EXPECT_EQ(canonical_key(parse_smiles(write_smiles(g))), canonical_key(g))
        << row.name;
      ++parsed;
    } catch (const SmilesError &e) {
      EXPECT_EQ(e.code(), SmilesErrc::kAromaticInput) << row.name << ": " << e.what();
      ++aromatic;
    }
  }
  EXPECT_EQ(parsed, 6);
  EXPECT_EQ(aromatic, 12);
}

TEST(SmilesTest, CorpusRoundtrip) {
  auto corpus = test_data::demo_corpus();
  ASSERT_EQ(corpus.size(), 250u);
  for (const auto &s: corpus) {
    MolecularGraph g = parse_smiles(s);
    const std::string out = write_smiles(g);
    ASSERT_EQ(canonical_key(parse_smiles(out)), canonical_key(g)) << s << " -> " << out;
  }
}

TEST(SmilesTest, FuzzNeverYieldsInvalidGraph) {
  const char *alphabet[] = {
    "C", "N", "O", "S", "F", "Cl", "Br", "P", "=", "#", "(", ")", "1", "2",
    "3", "/", "\\", "[NH4+]", "[O-]", "c", ".", "%12", "[C@@H]", "-",
  };
  Rng rng(77);
  int ok = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::string s;
    const int len = 1 + rng.below(14);
    for (int i = 0; i < len; ++i)
      s += alphabet[rng.below(static_cast<int>(std::size(alphabet)))];
    try {
      MolecularGraph g = parse_smiles(s);
      ASSERT_TRUE(validate(g).ok) << s;
      ++ok;
    } catch (const SmilesError &) {
    }
  }
  EXPECT_GT(ok, 100);
}
}  // namespace
