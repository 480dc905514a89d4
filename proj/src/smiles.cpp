//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/smiles.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>

namespace gcgvae {
namespace {
constexpr std::array<std::string_view, 118> kPeriodicTable = {
  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
  "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
  "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
  "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
  "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
  "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
  "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
  "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
  "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
  "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
};

bool is_element_symbol(std::string_view s) {
  return std::find(kPeriodicTable.begin(), kPeriodicTable.end(), s)
         != kPeriodicTable.end();
}

bool is_aromatic_letter(char c) {
  return c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's';
}

[[noreturn]] void fail(SmilesErrc code, std::size_t offset,
                       const std::string &msg) {
  throw SmilesError(code, offset, msg);
}

[[noreturn]] void aromatic_error(std::size_t offset, std::string_view what) {
  fail(SmilesErrc::kAromaticInput, offset,
       "aromatic atom '" + std::string(what)
         + "' is not supported; supply a kekulized SMILES");
}

struct BracketAtom {
  std::string symbol;
  int charge = 0;
  int hydrogens = 0;
};

BracketAtom parse_bracket(std::string_view tok, std::size_t pos) {
  // tok includes the surrounding brackets.
  std::string_view body = tok.substr(1, tok.size() - 2);
  std::size_t i = 0;
  auto bad = [&](const std::string &why) {
    fail(SmilesErrc::kBadBracketAtom, pos,
         "malformed bracket atom '" + std::string(tok) + "': " + why);
  };
  auto digits = [&]() {
    int v = 0;
    bool any = false;
    while (i < body.size() && std::isdigit(static_cast<unsigned char>(body[i]))) {
      v = v * 10 + (body[i] - '0');
      ++i;
      any = true;
    }
    return any ? std::optional<int>(v) : std::nullopt;
  };

  BracketAtom out;
  digits();  // isotope, dropped

  if (i >= body.size())
    bad("missing element symbol");
  if (std::islower(static_cast<unsigned char>(body[i]))) {
    std::size_t len = 1;
    if (i + 1 < body.size() && std::islower(static_cast<unsigned char>(body[i + 1]))
        && (body.substr(i, 2) == "se" || body.substr(i, 2) == "as"))
      len = 2;
    aromatic_error(pos, body.substr(i, len));
  }
  if (!std::isupper(static_cast<unsigned char>(body[i])))
    bad("missing element symbol");
  if (i + 1 < body.size() && std::islower(static_cast<unsigned char>(body[i + 1]))
      && is_element_symbol(body.substr(i, 2))) {
    out.symbol = body.substr(i, 2);
    i += 2;
  } else {
    out.symbol = body.substr(i, 1);
    i += 1;
  }

  // Chirality, dropped.
  while (i < body.size() && body[i] == '@')
    ++i;
  if (i + 1 < body.size()) {
    std::string_view cls = body.substr(i, 2);
    if (cls == "TH" || cls == "AL" || cls == "SP" || cls == "TB"
        || cls == "OH") {
      if (i > 0 && body[i - 1] == '@') {
        i += 2;
        digits();
      }
    }
  }

  if (i < body.size() && body[i] == 'H') {
    ++i;
    out.hydrogens = digits().value_or(1);
  }

  if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
    const char sign = body[i];
    const int s = sign == '+' ? 1 : -1;
    ++i;
    if (auto n = digits()) {
      out.charge = s * *n;
    } else {
      int count = 1;
      while (i < body.size() && body[i] == sign) {
        ++count;
        ++i;
      }
      out.charge = s * count;
    }
  }

  if (i < body.size() && body[i] == ':') {
    ++i;
    if (!digits())
      bad("atom class without digits");
  }

  if (i != body.size())
    bad("unexpected '" + std::string(1, body[i]) + "'");
  return out;
}

struct PendingBond {
  int order = 0;  // 0: none seen
  bool stereo = false;
  std::size_t position = 0;

  bool present() const { return order > 0 || stereo; }
  // Explicit order, or 0 when unspecified.
  int explicit_order() const { return order; }
};

struct OpenRing {
  int atom;
  PendingBond bond;
  std::size_t position;
};

void add_bond_or_throw(MolecularGraph &g, int a, int b, int order,
                       std::size_t pos) {
  try {
    g.add_bond(a, b, order);
  } catch (const GraphError &e) {
    const SmilesErrc code = e.code() == GraphErrc::kValenceOverflow
                              ? SmilesErrc::kValenceOverflow
                              : SmilesErrc::kInvalidBond;
    fail(code, pos, e.what());
  }
}
}  // namespace

SmilesError::SmilesError(SmilesErrc code, std::size_t offset,
                         const std::string &what)
  : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
    code_(code), offset_(offset) { }

std::vector<SmilesToken> tokenize_smiles(std::string_view s) {
  std::vector<SmilesToken> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const std::size_t start = i;
    auto push = [&](SmilesTokenKind kind, std::size_t len) {
      tokens.push_back({ kind, s.substr(start, len), start });
      i = start + len;
    };

    if (c == '[') {
      const std::size_t close = s.find(']', i);
      if (close == std::string_view::npos)
        fail(SmilesErrc::kBadBracketAtom, i, "unterminated bracket atom");
      push(SmilesTokenKind::kAtom, close - i + 1);
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      if (i + 1 < s.size()
          && ((c == 'C' && s[i + 1] == 'l') || (c == 'B' && s[i + 1] == 'r')))
        push(SmilesTokenKind::kAtom, 2);
      else if (i + 1 < s.size()
               && std::islower(static_cast<unsigned char>(s[i + 1]))
               && !is_aromatic_letter(s[i + 1])
               && is_element_symbol(s.substr(i, 2)))
        // Two-letter symbol outside the organic subset; rejected by the
        // parser as an unknown element.
        push(SmilesTokenKind::kAtom, 2);
      else
        push(SmilesTokenKind::kAtom, 1);
    } else if (is_aromatic_letter(c)) {
      push(SmilesTokenKind::kAtom, 1);
    } else if (c == '-' || c == '=' || c == '#' || c == '$' || c == ':') {
      push(SmilesTokenKind::kBond, 1);
    } else if (c == '/' || c == '\\') {
      push(SmilesTokenKind::kStereoMark, 1);
    } else if (c == '(') {
      push(SmilesTokenKind::kBranchOpen, 1);
    } else if (c == ')') {
      push(SmilesTokenKind::kBranchClose, 1);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      push(SmilesTokenKind::kRingClosure, 1);
    } else if (c == '%') {
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1]))
          || !std::isdigit(static_cast<unsigned char>(s[i + 2])))
        fail(SmilesErrc::kUnexpectedCharacter, i,
             "'%' must be followed by two digits");
      push(SmilesTokenKind::kRingClosure, 3);
    } else if (c == '.') {
      push(SmilesTokenKind::kDot, 1);
    } else {
      fail(SmilesErrc::kUnexpectedCharacter, i,
           "unexpected character '" + std::string(1, c) + "'");
    }
  }
  return tokens;
}

MolecularGraph parse_smiles(std::string_view smiles, const ValencyTable &table) {
  const std::vector<SmilesToken> tokens = tokenize_smiles(smiles);
  if (tokens.empty())
    fail(SmilesErrc::kEmpty, 0, "empty SMILES");

  MolecularGraph g;
  int prev = -1;
  PendingBond pending;
  std::vector<std::pair<int, std::size_t>> branches;
  std::map<int, OpenRing> rings;

  for (const SmilesToken &tok: tokens) {
    switch (tok.kind) {
    case SmilesTokenKind::kAtom: {
      std::string symbol;
      int charge = 0, hydrogens = 0;
      if (tok.payload.front() == '[') {
        BracketAtom ba = parse_bracket(tok.payload, tok.position);
        symbol = std::move(ba.symbol);
        charge = ba.charge;
        hydrogens = ba.hydrogens;
      } else if (std::islower(static_cast<unsigned char>(tok.payload.front()))) {
        aromatic_error(tok.position, tok.payload);
      } else {
        symbol = tok.payload;
      }
      if (!table.contains(symbol))
        fail(SmilesErrc::kUnknownElement, tok.position,
             "unknown element '" + symbol + "'");

      int idx;
      try {
        idx = g.add_atom(symbol, charge, hydrogens, table);
      } catch (const GraphError &e) {
        fail(SmilesErrc::kValenceOverflow, tok.position, e.what());
      }
      if (prev >= 0) {
        add_bond_or_throw(g, prev, idx, std::max(pending.order, 1),
                          tok.position);
      } else if (pending.present()) {
        fail(SmilesErrc::kInvalidBond, pending.position,
             "bond symbol without a preceding atom");
      }
      pending = {};
      prev = idx;
      break;
    }
    case SmilesTokenKind::kBond:
    case SmilesTokenKind::kStereoMark: {
      if (pending.present())
        fail(SmilesErrc::kInvalidBond, tok.position, "consecutive bond symbols");
      pending.position = tok.position;
      switch (tok.payload.front()) {
      case '-':
        pending.order = 1;
        break;
      case '=':
        pending.order = 2;
        break;
      case '#':
        pending.order = 3;
        break;
      case '$':
        fail(SmilesErrc::kInvalidBond, tok.position,
             "quadruple bonds are not supported");
      case ':':
        aromatic_error(tok.position, ":");
      default:
        pending.stereo = true;
      }
      break;
    }
    case SmilesTokenKind::kBranchOpen:
      if (prev < 0)
        fail(SmilesErrc::kUnmatchedBranch, tok.position,
             "branch opened before any atom");
      if (pending.present())
        fail(SmilesErrc::kInvalidBond, pending.position,
             "bond symbol before '('");
      branches.emplace_back(prev, tok.position);
      break;
    case SmilesTokenKind::kBranchClose:
      if (branches.empty())
        fail(SmilesErrc::kUnmatchedBranch, tok.position, "unmatched ')'");
      if (pending.present())
        fail(SmilesErrc::kInvalidBond, pending.position,
             "dangling bond symbol before ')'");
      prev = branches.back().first;
      branches.pop_back();
      break;
    case SmilesTokenKind::kRingClosure: {
      if (prev < 0)
        fail(SmilesErrc::kUnmatchedRingClosure, tok.position,
             "ring closure before any atom");
      const int number = tok.payload.front() == '%'
                           ? std::stoi(std::string(tok.payload.substr(1)))
                           : tok.payload.front() - '0';
      auto it = rings.find(number);
      if (it == rings.end()) {
        rings.emplace(number, OpenRing { prev, pending, tok.position });
      } else {
        const int a = it->second.bond.explicit_order();
        const int b = pending.explicit_order();
        if (a > 0 && b > 0 && a != b)
          fail(SmilesErrc::kRingBondConflict, tok.position,
               "ring closure " + std::to_string(number)
                 + " has conflicting bond orders");
        add_bond_or_throw(g, it->second.atom, prev, std::max({ a, b, 1 }),
                          tok.position);
        rings.erase(it);
      }
      pending = {};
      break;
    }
    case SmilesTokenKind::kDot:
      fail(SmilesErrc::kMultiFragment, tok.position,
           "multi-fragment input is not supported");
    }
  }

  if (!branches.empty())
    fail(SmilesErrc::kUnmatchedBranch, branches.back().second,
         "unmatched '('");
  if (!rings.empty()) {
    auto first = std::min_element(
      rings.begin(), rings.end(), [](const auto &x, const auto &y) {
        return x.second.position < y.second.position;
      });
    fail(SmilesErrc::kUnmatchedRingClosure, first->second.position,
         "unmatched ring closure " + std::to_string(first->first));
  }
  if (pending.present())
    fail(SmilesErrc::kInvalidBond, pending.position, "dangling bond symbol");
  return g;
}

namespace {
bool in_organic_subset(std::string_view symbol) {
  static constexpr std::array<std::string_view, 10> kOrganic = {
    "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I",
  };
  return std::find(kOrganic.begin(), kOrganic.end(), symbol) != kOrganic.end();
}

std::string atom_text(const Atom &a) {
  if (a.charge == 0 && a.hydrogens == 0 && in_organic_subset(a.symbol))
    return a.symbol;
  std::string out = "[" + a.symbol;
  if (a.hydrogens > 0) {
    out += 'H';
    if (a.hydrogens > 1)
      out += std::to_string(a.hydrogens);
  }
  if (a.charge != 0) {
    out += a.charge > 0 ? '+' : '-';
    if (std::abs(a.charge) > 1)
      out += std::to_string(std::abs(a.charge));
  }
  return out + "]";
}

const char *bond_text(int order) {
  switch (order) {
  case 2:
    return "=";
  case 3:
    return "#";
  default:
    return "";
  }
}

std::string ring_label(int digit) {
  if (digit < 10)
    return std::to_string(digit);
  return "%" + std::to_string(digit);
}

class SmilesWriter {
public:
  explicit SmilesWriter(const MolecularGraph &g)
    : g_(g), rank_(canonical_ranks(g)), visited_(g.num_atoms(), 0),
      children_(g.num_atoms()), ring_bonds_(g.num_atoms()),
      is_tree_bond_(g.num_bonds(), 0), ring_digit_(g.num_bonds(), -1) { }

  std::string write() {
    int root = 0;
    for (int v = 1; v < g_.num_atoms(); ++v)
      if (rank_[v] < rank_[root])
        root = v;
    plan(root, -1);
    emit(root, -1);
    return out_;
  }

private:
  std::vector<Neighbor> sorted_neighbors(int v) const {
    std::vector<Neighbor> nbs(g_.neighbors(v).begin(), g_.neighbors(v).end());
    std::sort(nbs.begin(), nbs.end(), [&](const Neighbor &x, const Neighbor &y) {
      return rank_[x.atom] < rank_[y.atom];
    });
    return nbs;
  }

  // First pass: spanning tree plus ring-closure bonds, recorded in the
  // order their endpoints are written.
  void plan(int v, int parent_bond) {
    visited_[v] = 1;
    order_.push_back(v);
    for (const Neighbor &nb: sorted_neighbors(v)) {
      if (nb.bond == parent_bond)
        continue;
      if (!visited_[nb.atom]) {
        is_tree_bond_[nb.bond] = 1;
        children_[v].push_back(nb);
        plan(nb.atom, nb.bond);
      } else if (!is_tree_bond_[nb.bond]
                 && std::find(ring_bonds_[nb.atom].begin(),
                              ring_bonds_[nb.atom].end(), nb.bond)
                      == ring_bonds_[nb.atom].end()) {
        // nb.atom was written earlier; it opens the ring, v closes it.
        ring_bonds_[nb.atom].push_back(nb.bond);
        ring_bonds_[v].push_back(nb.bond);
      }
    }
  }

  void emit(int v, int parent_bond) {
    if (parent_bond >= 0)
      out_ += bond_text(g_.bond(parent_bond).order);
    out_ += atom_text(g_.atom(v));

    std::vector<int> freed;
    for (int bond: ring_bonds_[v]) {
      if (ring_digit_[bond] >= 0) {
        out_ += ring_label(ring_digit_[bond]);
        freed.push_back(ring_digit_[bond]);
      }
    }
    for (int bond: ring_bonds_[v]) {
      if (ring_digit_[bond] >= 0)
        continue;
      int digit = 1;
      while (std::find(used_.begin(), used_.end(), digit) != used_.end()
             || std::find(freed.begin(), freed.end(), digit) != freed.end())
        ++digit;
      ring_digit_[bond] = digit;
      used_.push_back(digit);
      out_ += bond_text(g_.bond(bond).order);
      out_ += ring_label(digit);
    }
    for (int d: freed)
      used_.erase(std::find(used_.begin(), used_.end(), d));
    // Closed bonds must not reopen when the other end is visited again.
    for (int bond: ring_bonds_[v])
      if (std::find(freed.begin(), freed.end(), ring_digit_[bond]) != freed.end())
        ring_digit_[bond] = -2;

    const auto &kids = children_[v];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = i + 1 == kids.size();
      if (!last)
        out_ += '(';
      emit(kids[i].atom, kids[i].bond);
      if (!last)
        out_ += ')';
    }
  }

  const MolecularGraph &g_;
  std::vector<int> rank_;
  std::vector<char> visited_;
  std::vector<int> order_;
  std::vector<std::vector<Neighbor>> children_;
  std::vector<std::vector<int>> ring_bonds_;
  std::vector<char> is_tree_bond_;
  std::vector<int> ring_digit_;
  std::vector<int> used_;
  std::string out_;
};
}  // namespace

std::string write_smiles(const MolecularGraph &g) {
  ValidityReport report = validate(g);
  if (!report.ok)
    throw GraphError(GraphErrc::kInvalidGraph,
                     "cannot write invalid graph: " + report.violations.front());
  return SmilesWriter(g).write();
}

}  // namespace gcgvae
