//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/generator.h"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gcgvae/smiles.h"

namespace {
using namespace gcgvae;

GenerationState state_with(const MolecularGraph &g, const ModelParams &p,
                           int focus) {
  Rng rng(0);
  LatentSpec latent;
  latent.z = Eigen::MatrixXd::Zero(p.dims().hidden, g.num_atoms());
  for (int v = 0; v < g.num_atoms(); ++v)
    latent.labels.push_back(vocabulary_index(g.atom(v).symbol));
  GenerationState s = init_nodes(p, g.num_atoms(), rng, latent);
  for (const Bond &b: g.bonds())
    s.graph.add_bond(b.a, b.b, b.order);
  s.queue = { focus };
  return s;
}

TEST(GeneratorTest, InitSingleNode) {
  ModelParams p = ModelParams::random({}, 1);
  Rng rng(1);
  GenerationState s = init_nodes(p, 1, rng);
  EXPECT_EQ(s.size(), 1);
  EXPECT_EQ(s.graph.num_bonds(), 0);
  ASSERT_EQ(s.queue.size(), 1u);
  EXPECT_EQ(s.queue.front(), 0);
  EXPECT_THROW(init_nodes(p, 0, rng), std::invalid_argument);
}

TEST(GeneratorTest, InitIsDeterministic) {
  ModelParams p = ModelParams::random({}, 2);
  Rng a(5), b(5);
  GenerationState x = init_nodes(p, 30, a), y = init_nodes(p, 30, b);
  EXPECT_EQ(x.latent.labels, y.latent.labels);
  EXPECT_EQ(x.first_focus, y.first_focus);
}

TEST(GeneratorTest, ConstantScoresPickFirstElement) {
  ModelParams p = ModelParams::random({}, 3);
  p.view(p.label_w).setZero();
  p.view(p.label_b).setConstant(0.25);
  Rng rng(3);
  GenerationState s = init_nodes(p, 12, rng);
  for (int label: s.latent.labels)
    EXPECT_EQ(label, 0);
  for (const Atom &a: s.graph.atoms())
    EXPECT_EQ(a.symbol, element_vocabulary()[0]);
}

TEST(GeneratorTest, MasksFreshCarbons) {
  MolecularGraph g = parse_smiles("C");
  g.add_atom("C");
  std::vector<char> closed(2, 0);
  Masks m = compute_masks(g, closed, 0);
  // I(b_v<b_v*) I(b_u<b_u*) I(no bond) I(v!=u) I(open): all 1 for u = 1.
  EXPECT_EQ(m.node, (std::vector<char> { 0, 1 }));
  EXPECT_EQ(m.order[3], 1);
  EXPECT_EQ(m.order[4], 1);
  EXPECT_EQ(m.order[5], 1);
}

TEST(GeneratorTest, MasksSaturatedFocus) {
  MolecularGraph g = parse_smiles("CC(C)(C)C");
  g.add_atom("C");
  std::vector<char> closed(6, 0);
  Masks m = compute_masks(g, closed, 1);
  EXPECT_FALSE(m.any());
  for (char c: m.order)
    EXPECT_EQ(c, 0);
}

TEST(GeneratorTest, MasksClosedTarget) {
  MolecularGraph g;
  g.add_atom("C");
  g.add_atom("C");
  std::vector<char> closed { 0, 1 };
  EXPECT_EQ(compute_masks(g, closed, 0).node[1], 0);
}

TEST(GeneratorTest, MasksRemainingCapacity) {
  MolecularGraph g = parse_smiles("CO");
  g.add_atom("C");  // fresh focus, index 2; O has bond sum 1 of 2
  std::vector<char> closed(3, 0);
  Masks m = compute_masks(g, closed, 2);
  EXPECT_EQ(m.node[1], 1);
  EXPECT_EQ(m.order[3 * 1 + 0], 1);
  EXPECT_EQ(m.order[3 * 1 + 1], 0);
  EXPECT_EQ(m.order[3 * 1 + 2], 0);
}

TEST(GeneratorTest, MasksRequireQueuedFocus) {
  ModelParams p = ModelParams::random({}, 4);
  GenerationState s = state_with(parse_smiles("CC"), p, 0);
  EXPECT_THROW(compute_masks(s, 1), std::invalid_argument);
}

TEST(GeneratorTest, AllMaskedMeansStop) {
  ModelParams p = ModelParams::random({}, 5);
  GenerationState s = state_with(parse_smiles("FC"), p, 0);
  EdgeDistribution d = edge_distribution(s, 0, p);
  EXPECT_EQ(d.stop_probability, 1.0);
  for (const auto &c: d.candidates)
    EXPECT_EQ(c.probability, 0.0);

  Rng rng(5);
  DecodeAction a = decode_step(s, p, rng);
  EXPECT_TRUE(a.is_stop());
  EXPECT_TRUE(s.closed[0]);
  EXPECT_EQ(s.graph.num_bonds(), 1);
}

TEST(GeneratorTest, SymmetricTargetsTie) {
  ModelParams p = ModelParams::random({}, 6);
  MolecularGraph g;
  g.add_atom("C");
  g.add_atom("O");
  g.add_atom("O");
  GenerationState s = state_with(g, p, 0);
  EdgeDistribution d = edge_distribution(s, 0, p);
  for (int l = 0; l < 3; ++l)
    EXPECT_NEAR(d.candidates[l].probability, d.candidates[3 + l].probability, 1e-15);
}

TEST(GeneratorTest, NormalizationFuzz) {
  ModelParams p = ModelParams::random({}, 7);
  Rng rng(7);
  int checked = 0;
  while (checked < 1000) {
    GenerationState s = init_nodes(p, 1 + rng.below(12), rng);
    while (!s.done() && checked < 1000) {
      const int v = s.queue.front();
      EdgeDistribution d = edge_distribution(s, v, p);
      double total = d.stop_probability;
      for (const auto &c: d.candidates) {
        total += c.probability;
        if (!d.masks.order[3 * c.target + c.order - 1])
          ASSERT_EQ(c.probability, 0.0);
      }
      ASSERT_NEAR(total, 1.0, 1e-9);
      ++checked;
      decode_step(s, p, rng);
    }
  }
}

TEST(GeneratorTest, ForcedSingleCandidate) {
  ModelParams p = ModelParams::random({}, 8);
  p.view(p.stop_b)(0, 0) = -1e9;
  MolecularGraph g;
  g.add_atom("C");
  g.add_atom("F");
  GenerationState s = state_with(g, p, 0);
  s.discovered = { 1, 0 };
  Rng rng(8);
  DecodeAction a = decode_step(s, p, rng);
  EXPECT_EQ(a.target, 1);
  EXPECT_EQ(a.order, 1);
  EXPECT_EQ(s.graph.num_bonds(), 1);
  EXPECT_EQ(s.queue.back(), 1);
}

TEST(GeneratorTest, TrajectoriesStayValid) {
  ModelParams p = ModelParams::random({}, 9);
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    GenerationState s = init_nodes(p, 1 + rng.below(14), rng);
    while (!s.done()) {
      const auto closed_before = s.closed;
      std::vector<int> deg_before;
      for (int v = 0; v < s.size(); ++v)
        deg_before.push_back(s.graph.degree(v));
      decode_step(s, p, rng);
      ASSERT_TRUE(validate_structure(s.graph).ok);
      for (int v = 0; v < s.size(); ++v)
        if (closed_before[v])
          ASSERT_EQ(s.graph.degree(v), deg_before[v]);
      for (int q: s.queue)
        ASSERT_FALSE(s.closed[q]);
    }
  }
}

TEST(GeneratorTest, GenerateSingleAtom) {
  ModelParams p = ModelParams::random({}, 10);
  Rng rng(10);
  MolecularGraph g = generate(p, 1, rng);
  EXPECT_EQ(g.num_atoms(), 1);
  EXPECT_TRUE(validate(g).ok);
}

TEST(GeneratorTest, GenerateIsValidAndDeterministic) {
  ModelParams p = ModelParams::random({}, 11);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    MolecularGraph g = generate(p, kDefaultMaxNodes, rng);
    ASSERT_TRUE(validate(g).ok) << write_smiles(g);
  }
  Rng a(99), b(99);
  EXPECT_TRUE(generate(p, kDefaultMaxNodes, a) == generate(p, kDefaultMaxNodes, b));
}

TEST(GeneratorTest, IsolatedStatesMatchFullPropagation) {
  ModelParams p = ModelParams::random({}, 12);
  Rng rng(12);
  GenerationState s = init_nodes(p, 10, rng);
  while (s.graph.num_bonds() < 3 && !s.done())
    decode_step(s, p, rng);
  NodeStates full = ggnn_propagate(s.initial, s.graph, p, p.dims().steps);
  EXPECT_LT((full - s.states).cwiseAbs().maxCoeff(), 1e-12);
}
}  // namespace
