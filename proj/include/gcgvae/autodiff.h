//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef GCGVAE_AUTODIFF_H_
#define GCGVAE_AUTODIFF_H_

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gcgvae::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid for the tape's
/// lifetime.
struct Var {
  Tape *tape = nullptr;
  int id = -1;

  const Matrix &value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode accumulation over matrix-valued nodes. A tape built with
/// record = false only evaluates values, which is what inference uses.
class Tape {
public:
  explicit Tape(bool record = true): record_(record) { }
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  bool recording() const noexcept { return record_; }

  Var constant(Matrix value);

  // Leaf whose gradient is readable through grad() after backward().
  Var input(Matrix value);

  // Leaf bound to theta[offset .. offset + rows*cols), column-major. Its
  // gradient is scattered into the flat gradient passed to backward().
  Var parameter(const Vector &theta, Eigen::Index offset, Eigen::Index rows,
                Eigen::Index cols);

  // Called with the node's output gradient and its own value.
  using Backward =
    std::function<void(Tape &, const Matrix &grad, const Matrix &value)>;
  Var push(Matrix value, Backward backward);

  const Matrix &value(Var v) const { return nodes_[v.id].value; }
  const Matrix &value(int id) const { return nodes_[id].value; }

  // Seeds d(out)/d(out) = 1; `out` must be 1x1. flat_grad may be null
  // when only input() gradients are wanted.
  void backward(Var out, Vector *flat_grad);

  // Gradient of the last backward() output w.r.t. node v (zero if v did
  // not influence it).
  Matrix grad(Var v) const;

  // Adds g into node v's gradient; used by Backward callbacks.
  void accumulate(int id, const Matrix &g);
  template <class Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived> &g) {
    accumulate(id, Matrix(g));
  }

  std::size_t size() const noexcept { return nodes_.size(); }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Eigen::Index param_offset = -1;
  };

  bool record_;
  std::vector<Node> nodes_;
};

// Elementwise and linear-algebra ops. Binary ops require both operands on
// the same tape.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double s, Var a);
Var matmul(Var a, Var b);
Var cwise_product(Var a, Var b);
Var add_scalar(Var a, double s);

// a (r x c) plus column vector b (r x 1) broadcast over columns.
Var add_colwise(Var a, Var b);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);

Var sum(Var a);        // 1x1
Var mean_cols(Var a);  // r x 1
Var vcat(std::span<const Var> parts);
Var vcat(std::initializer_list<Var> parts);
Var hcat(std::span<const Var> parts);
Var hcat(std::initializer_list<Var> parts);
Var col(Var a, Eigen::Index j);
Var entry(Var a, Eigen::Index i, Eigen::Index j);  // 1x1

// Columns of `a` picked by index.
Var gather_cols(Var a, std::span<const int> idx);

// `base` with columns idx[k] replaced by column k of `sub`.
Var replace_cols(Var base, Var sub, std::span<const int> idx);

/// out.col(j) = sum of a.col(i) over undirected pairs (i, j) in `pairs`.
Var neighbor_sum(Var a, std::span<const std::pair<int, int>> pairs);

/// Log-softmax of the entries of a row or column vector restricted to
/// mask[i] != 0. Masked entries come out as -inf and receive no gradient.
/// At least one entry must be unmasked.
Var masked_log_softmax(Var logits, std::span<const char> mask);

/// Column-wise masked log-softmax of an (r x c) matrix, mask column-major
/// with the same shape. Columns with no unmasked entry are left -inf.
Var masked_log_softmax_cols(Var logits, std::span<const char> mask);

}  // namespace gcgvae::ad

#endif  // GCGVAE_AUTODIFF_H_
