#pragma once

#include "lndsm/gmm.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every primitive as a node holding its forward value and a
// closure that pushes the node's gradient into its parents. backward() walks
// the nodes in exact reverse order of creation, so accumulation order (and
// therefore every bit of every gradient) is fixed by the forward program.
// Values are rank <= 2: a [B x n] matrix is a batch of B row vectors.
namespace lndsm::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward; a zero matrix when nothing reached it.
  Matrix grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Matrix value);
  /// Adds a node; it needs a gradient iff any parent does.
  Var record(Matrix value, const std::vector<Var>& parents, Backward backward);

  void backward(const Var& root);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Matrix& g);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Elementwise, same shape.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator+(const Var& a, double c);
Var operator-(const Var& a, double c);

Var matmul(const Var& a, const Var& b);
/// a [B x n] + row [1 x n] broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// Row b of a multiplied by w(b); w is [B x 1].
Var scale_rows(const Var& a, const Var& w);
Var scale_rows(const Var& a, const Eigen::VectorXd& w);

Var sum(const Var& a);       // 1 x 1
Var mean(const Var& a);      // 1 x 1
Var row_sum(const Var& a);   // B x 1
Var dot_rows(const Var& a, const Var& b);  // B x 1

Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
/// x * sigmoid(x)
Var swish(const Var& a);
/// log(1 + e^x), stable for large |x|
Var softplus(const Var& a);
/// Gradient passes only where lo <= x <= hi.
Var clamp(const Var& a, double lo, double hi);

Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Row b of the result is row b of sources[which[b]].
Var gather_rows(const std::vector<Var>& sources, const std::vector<int>& which);

/// Row-wise mixture score; backward applies the (symmetric) Hessian of log pi.
Var gmm_score(std::shared_ptr<const Gmm> model, const Var& z);

}  // namespace lndsm::ad
