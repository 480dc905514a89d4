//
// Project gcgvae - Copyright 2026 The gcgvae Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "gcgvae/autodiff.h"

#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gcgvae::ad {

const Matrix &Var::value() const {
  return tape->value(*this);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({ std::move(value), Matrix(), nullptr, -1 });
  return { this, static_cast<int>(nodes_.size()) - 1 };
}

Var Tape::input(Matrix value) {
  return constant(std::move(value));
}

Var Tape::parameter(const Vector &theta, Eigen::Index offset,
                    Eigen::Index rows, Eigen::Index cols) {
  Matrix value = Eigen::Map<const Matrix>(theta.data() + offset, rows, cols);
  nodes_.push_back({ std::move(value), Matrix(), nullptr, offset });
  return { this, static_cast<int>(nodes_.size()) - 1 };
}

Var Tape::push(Matrix value, Backward backward) {
  nodes_.push_back(
    { std::move(value), Matrix(), record_ ? std::move(backward) : nullptr, -1 });
  return { this, static_cast<int>(nodes_.size()) - 1 };
}

void Tape::accumulate(int id, const Matrix &g) {
  Matrix &dst = nodes_[id].grad;
  if (dst.size() == 0)
    dst = g;
  else
    dst += g;
}

void Tape::backward(Var out, Vector *flat_grad) {
  if (!record_)
    throw std::logic_error("backward() on a non-recording tape");
  if (out.rows() != 1 || out.cols() != 1)
    throw std::invalid_argument("backward() needs a scalar output");
  for (Node &n: nodes_)
    n.grad.resize(0, 0);
  nodes_[out.id].grad = Matrix::Ones(1, 1);

  // Callbacks only accumulate into lower ids, so references stay valid.
  for (int i = out.id; i >= 0; --i) {
    Node &n = nodes_[i];
    if (n.grad.size() == 0)
      continue;
    if (n.backward)
      n.backward(*this, n.grad, n.value);
    if (n.param_offset >= 0 && flat_grad != nullptr) {
      flat_grad->segment(n.param_offset, n.grad.size()) +=
        Eigen::Map<const Vector>(n.grad.data(), n.grad.size());
    }
  }
}

Matrix Tape::grad(Var v) const {
  const Node &n = nodes_[v.id];
  if (n.grad.size() == 0)
    return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {
void check_same(Var a, Var b) {
  assert(a.tape == b.tape);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("shape mismatch in elementwise op");
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

Var operator+(Var a, Var b) {
  check_same(a, b);
  return a.tape->push(a.value() + b.value(),
                      [ia = a.id, ib = b.id](Tape &t, const Matrix &g,
                                             const Matrix &) {
                        t.accumulate(ia, g);
                        t.accumulate(ib, g);
                      });
}

Var operator-(Var a, Var b) {
  check_same(a, b);
  return a.tape->push(a.value() - b.value(),
                      [ia = a.id, ib = b.id](Tape &t, const Matrix &g,
                                             const Matrix &) {
                        t.accumulate(ia, g);
                        t.accumulate(ib, -g);
                      });
}

Var operator*(double s, Var a) {
  return a.tape->push(s * a.value(),
                      [ia = a.id, s](Tape &t, const Matrix &g, const Matrix &) {
                        t.accumulate(ia, s * g);
                      });
}

Var add_scalar(Var a, double s) {
  return a.tape->push(a.value().array() + s,
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &) {
                        t.accumulate(ia, g);
                      });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul shape mismatch");
  return a.tape->push(a.value() * b.value(),
                      [ia = a.id, ib = b.id](Tape &t, const Matrix &g,
                                             const Matrix &) {
                        t.accumulate(ia, g * t.value(ib).transpose());
                        t.accumulate(ib, t.value(ia).transpose() * g);
                      });
}

Var cwise_product(Var a, Var b) {
  check_same(a, b);
  return a.tape->push(a.value().cwiseProduct(b.value()),
                      [ia = a.id, ib = b.id](Tape &t, const Matrix &g,
                                             const Matrix &) {
                        t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                        t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                      });
}

Var add_colwise(Var a, Var b) {
  if (b.cols() != 1 || b.rows() != a.rows())
    throw std::invalid_argument("add_colwise expects an r x 1 vector");
  Matrix out = a.value();
  out.colwise() += b.value().col(0);
  return a.tape->push(std::move(out),
                      [ia = a.id, ib = b.id](Tape &t, const Matrix &g,
                                             const Matrix &) {
                        t.accumulate(ia, g);
                        t.accumulate(ib, Matrix(g.rowwise().sum()));
                      });
}

Var tanh(Var a) {
  return a.tape->push(a.value().array().tanh(),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &y) {
                        t.accumulate(
                          ia, Matrix(g.array() * (1.0 - y.array().square())));
                      });
}

Var sigmoid(Var a) {
  Matrix y = (1.0 + (-a.value().array()).exp()).inverse();
  return a.tape->push(std::move(y),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &y) {
                        t.accumulate(
                          ia, Matrix(g.array() * y.array() * (1.0 - y.array())));
                      });
}

Var exp(Var a) {
  return a.tape->push(a.value().array().exp(),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &y) {
                        t.accumulate(ia, Matrix(g.cwiseProduct(y)));
                      });
}

Var square(Var a) {
  return a.tape->push(a.value().array().square(),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &) {
                        t.accumulate(ia, Matrix(2.0 * g.cwiseProduct(t.value(ia))));
                      });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &) {
                        const Matrix &x = t.value(ia);
                        t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(),
                                                          g(0, 0)));
                      });
}

Var mean_cols(Var a) {
  if (a.cols() == 0)
    throw std::invalid_argument("mean over zero columns");
  Matrix out = a.value().rowwise().mean();
  return a.tape->push(std::move(out),
                      [ia = a.id](Tape &t, const Matrix &g, const Matrix &) {
                        const Eigen::Index n = t.value(ia).cols();
                        t.accumulate(ia, Matrix(g.replicate(1, n) / n));
                      });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty())
    throw std::invalid_argument("vcat of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (Var p: parts) {
    if (p.cols() != cols)
      throw std::invalid_argument("vcat column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index r = 0;
  for (Var p: parts) {
    out.middleRows(r, p.rows()) = p.value();
    layout.emplace_back(p.id, r);
    r += p.rows();
  }
  return parts.front().tape->push(
    std::move(out),
    [layout = std::move(layout)](Tape &t, const Matrix &g, const Matrix &) {
      for (const auto &[id, start]: layout)
        t.accumulate(id, Matrix(g.middleRows(start, t.value(id).rows())));
    });
}

Var vcat(std::initializer_list<Var> parts) {
  return vcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty())
    throw std::invalid_argument("hcat of nothing");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (Var p: parts) {
    if (p.rows() != rows)
      throw std::invalid_argument("hcat row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index c = 0;
  for (Var p: parts) {
    out.middleCols(c, p.cols()) = p.value();
    layout.emplace_back(p.id, c);
    c += p.cols();
  }
  return parts.front().tape->push(
    std::move(out),
    [layout = std::move(layout)](Tape &t, const Matrix &g, const Matrix &) {
      for (const auto &[id, start]: layout)
        t.accumulate(id, Matrix(g.middleCols(start, t.value(id).cols())));
    });
}

Var hcat(std::initializer_list<Var> parts) {
  return hcat(std::span<const Var>(parts.begin(), parts.size()));
}

Var col(Var a, Eigen::Index j) {
  return a.tape->push(a.value().col(j),
                      [ia = a.id, j](Tape &t, const Matrix &g, const Matrix &) {
                        const Matrix &x = t.value(ia);
                        Matrix full = Matrix::Zero(x.rows(), x.cols());
                        full.col(j) = g.col(0);
                        t.accumulate(ia, full);
                      });
}

Var entry(Var a, Eigen::Index i, Eigen::Index j) {
  Matrix out(1, 1);
  out(0, 0) = a.value()(i, j);
  return a.tape->push(std::move(out), [ia = a.id, i, j](Tape &t, const Matrix &g,
                                                        const Matrix &) {
    const Matrix &x = t.value(ia);
    Matrix full = Matrix::Zero(x.rows(), x.cols());
    full(i, j) = g(0, 0);
    t.accumulate(ia, full);
  });
}

Var gather_cols(Var a, std::span<const int> idx) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(k) = a.value().col(idx[k]);
  return a.tape->push(
    std::move(out), [ia = a.id, idx = std::vector<int>(idx.begin(), idx.end())](
                      Tape &t, const Matrix &g, const Matrix &) {
      const Matrix &x = t.value(ia);
      Matrix full = Matrix::Zero(x.rows(), x.cols());
      for (std::size_t k = 0; k < idx.size(); ++k)
        full.col(idx[k]) += g.col(k);
      t.accumulate(ia, full);
    });
}

Var replace_cols(Var base, Var sub, std::span<const int> idx) {
  if (sub.cols() != static_cast<Eigen::Index>(idx.size())
      || sub.rows() != base.rows())
    throw std::invalid_argument("replace_cols shape mismatch");
  Matrix out = base.value();
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(idx[k]) = sub.value().col(k);
  return base.tape->push(
    std::move(out),
    [ib = base.id, is = sub.id, idx = std::vector<int>(idx.begin(), idx.end())](
      Tape &t, const Matrix &g, const Matrix &) {
      Matrix gb = g;
      Matrix gs(g.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) {
        gs.col(k) = g.col(idx[k]);
        gb.col(idx[k]).setZero();
      }
      t.accumulate(ib, gb);
      t.accumulate(is, gs);
    });
}

Var neighbor_sum(Var a, std::span<const std::pair<int, int>> pairs) {
  auto apply = [](const Matrix &x, std::span<const std::pair<int, int>> ps) {
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    for (const auto &[i, j]: ps) {
      out.col(j) += x.col(i);
      out.col(i) += x.col(j);
    }
    return out;
  };
  // The adjacency is symmetric, so the adjoint is the same map.
  return a.tape->push(
    apply(a.value(), pairs),
    [ia = a.id, apply,
     ps = std::vector<std::pair<int, int>>(pairs.begin(), pairs.end())](
      Tape &t, const Matrix &g, const Matrix &) {
      t.accumulate(ia, apply(g, ps));
    });
}

namespace {
// Column-major masked log-softmax over `count` entries starting at `base`.
void log_softmax_segment(const double *x, const char *mask, double *out,
                         Eigen::Index count) {
  double mx = kNegInf;
  for (Eigen::Index i = 0; i < count; ++i)
    if (mask[i] && x[i] > mx)
      mx = x[i];
  if (mx == kNegInf) {
    for (Eigen::Index i = 0; i < count; ++i)
      out[i] = kNegInf;
    return;
  }
  double total = 0;
  for (Eigen::Index i = 0; i < count; ++i)
    if (mask[i])
      total += std::exp(x[i] - mx);
  const double lse = mx + std::log(total);
  for (Eigen::Index i = 0; i < count; ++i)
    out[i] = mask[i] ? x[i] - lse : kNegInf;
}

void log_softmax_segment_grad(const double *y, const char *mask,
                              const double *g, double *gx, Eigen::Index count) {
  double gsum = 0;
  for (Eigen::Index i = 0; i < count; ++i)
    if (mask[i])
      gsum += g[i];
  for (Eigen::Index i = 0; i < count; ++i)
    gx[i] = mask[i] ? g[i] - std::exp(y[i]) * gsum : 0.0;
}
}  // namespace

Var masked_log_softmax(Var logits, std::span<const char> mask) {
  const Matrix &x = logits.value();
  if (x.rows() != 1 && x.cols() != 1)
    throw std::invalid_argument("masked_log_softmax expects a vector");
  if (static_cast<Eigen::Index>(mask.size()) != x.size())
    throw std::invalid_argument("mask size mismatch");
  bool any = false;
  for (char m: mask)
    any = any || m;
  if (!any)
    throw std::invalid_argument("masked_log_softmax with everything masked");

  Matrix out(x.rows(), x.cols());
  log_softmax_segment(x.data(), mask.data(), out.data(), x.size());
  return logits.tape->push(
    std::move(out), [ia = logits.id, m = std::vector<char>(mask.begin(), mask.end())](
                      Tape &t, const Matrix &g, const Matrix &y) {
      Matrix gx(y.rows(), y.cols());
      log_softmax_segment_grad(y.data(), m.data(), g.data(), gx.data(), y.size());
      t.accumulate(ia, gx);
    });
}

Var masked_log_softmax_cols(Var logits, std::span<const char> mask) {
  const Matrix &x = logits.value();
  if (static_cast<Eigen::Index>(mask.size()) != x.size())
    throw std::invalid_argument("mask size mismatch");
  const Eigen::Index r = x.rows();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    log_softmax_segment(x.data() + c * r, mask.data() + c * r,
                        out.data() + c * r, r);
  return logits.tape->push(
    std::move(out), [ia = logits.id, m = std::vector<char>(mask.begin(), mask.end())](
                      Tape &t, const Matrix &g, const Matrix &y) {
      const Eigen::Index r = y.rows();
      Matrix gx(y.rows(), y.cols());
      for (Eigen::Index c = 0; c < y.cols(); ++c)
        log_softmax_segment_grad(y.data() + c * r, m.data() + c * r,
                                 g.data() + c * r, gx.data() + c * r, r);
      t.accumulate(ia, gx);
    });
}

}  // namespace gcgvae::ad
