//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_SMILES_H_
#define GCGVAE_SMILES_H_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gcgvae/molgraph.h"

namespace gcgvae {

enum class SmilesErrc {
  kEmpty,
  kUnexpectedCharacter,
  kUnmatchedBranch,
  kUnmatchedRingClosure,
  kRingBondConflict,
  kUnknownElement,
  kAromaticInput,
  kValenceOverflow,
  kInvalidBond,
  kMultiFragment,
  kBadBracketAtom,
};

/// Parse failure. offset() is the 0-based character offset of the
/// offending token.
class SmilesError: public std::runtime_error {
public:
  SmilesError(SmilesErrc code, std::size_t offset, const std::string &what);

  SmilesErrc code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  SmilesErrc code_;
  std::size_t offset_;
};

enum class SmilesTokenKind {
  kAtom,
  kBond,
  kBranchOpen,
  kBranchClose,
  kRingClosure,
  kDot,
  kStereoMark,
};

struct SmilesToken {
  SmilesTokenKind kind;
  std::string_view payload;
  std::size_t position;
};

// The returned views point into `smiles`.
std::vector<SmilesToken> tokenize_smiles(std::string_view smiles);

/// Organic subset plus bracket atoms. Stereo marks and isotopes are
/// dropped; lowercase (aromatic) atoms are rejected with kAromaticInput.
MolecularGraph parse_smiles(std::string_view smiles,
                            const ValencyTable &table = ValencyTable::standard());

/// Depth-first from the lowest canonical rank. Throws GraphError on an
/// invalid or disconnected graph.
std::string write_smiles(const MolecularGraph &g);

}  // namespace gcgvae

#endif  // GCGVAE_SMILES_H_
