#include "lndsm/autodiff.hpp"

#include "lndsm/errors.hpp"

#include <cmath>

namespace lndsm::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  return Matrix::Zero(rows(), cols());
}

double Var::scalar() const {
  require_dim(rows() == 1 && cols() == 1, "Var::scalar on non-scalar");
  return value()(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backward backward) {
#ifndef NDEBUG
  if (!value.allFinite()) throw NumericalError("autodiff: non-finite value produced");
#endif
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw DimensionError("autodiff: operands from different tapes");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, false, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& root) {
  require_dim(root.tape() == this, "backward: root from another tape");
  require_dim(root.rows() == 1 && root.cols() == 1, "backward: root must be scalar");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(root.id(), Matrix::Ones(1, 1));
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
}

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch");
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw DimensionError("autodiff: uninitialised Var");
  return *a.tape();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var operator-(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var operator*(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  const auto ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var operator-(const Var& a) { return a * -1.0; }

Var operator*(const Var& a, double c) {
  const auto ia = a.id();
  return tape_of(a).record(a.value() * c, {a}, [ia, c](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self) * c);
  });
}

Var operator*(double c, const Var& a) { return a * c; }

Var operator+(const Var& a, double c) {
  const auto ia = a.id();
  return tape_of(a).record(a.value().array() + c, {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
  });
}

Var operator-(const Var& a, double c) { return a + (-c); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  const auto ia = a.id(), ib = b.id();
  return tape_of(a).record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.accumulate(ia, t.grad(self) * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * t.grad(self));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionError("add_row: bias shape mismatch");
  const auto ia = a.id(), ir = row.id();
  Matrix v = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(v), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.needs_grad(ir)) t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

Var scale_rows(const Var& a, const Var& w) {
  if (w.cols() != 1 || w.rows() != a.rows()) throw DimensionError("scale_rows: weight shape mismatch");
  const auto ia = a.id(), iw = w.id();
  Matrix v = w.value().col(0).asDiagonal() * a.value();
  return tape_of(a).record(std::move(v), {a, w}, [ia, iw](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.accumulate(ia, t.value(iw).col(0).asDiagonal() * t.grad(self));
    if (t.needs_grad(iw)) t.accumulate(iw, t.grad(self).cwiseProduct(t.value(ia)).rowwise().sum());
  });
}

Var scale_rows(const Var& a, const Eigen::VectorXd& w) {
  return scale_rows(a, tape_of(a).constant(Matrix(w)));
}

Var sum(const Var& a) {
  const auto ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a}, [ia, r, c](Tape& t, std::size_t self) {
    t.accumulate(ia, Matrix::Constant(r, c, t.grad(self)(0, 0)));
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw DimensionError("mean of empty Var");
  return sum(a) * (1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(const Var& a) {
  const auto ia = a.id();
  const Eigen::Index c = a.cols();
  return tape_of(a).record(a.value().rowwise().sum(), {a}, [ia, c](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).replicate(1, c));
  });
}

Var dot_rows(const Var& a, const Var& b) { return row_sum(a * b); }

Var square(const Var& a) {
  const auto ia = a.id();
  return tape_of(a).record(a.value().array().square(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var exp(const Var& a) {
  const auto ia = a.id();
  Var out = tape_of(a).record(a.value().array().exp(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
  return out;
}

Var log(const Var& a) {
  if ((a.value().array() <= 0.0).any()) throw NumericalError("log of non-positive value");
  const auto ia = a.id();
  return tape_of(a).record(a.value().array().log(), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var swish(const Var& a) {
  const auto ia = a.id();
  Matrix v = a.value().unaryExpr([](double x) { return x * sigmoid(x); });
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix d = t.value(ia).unaryExpr([](double x) {
      const double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

Var softplus(const Var& a) {
  const auto ia = a.id();
  Matrix v = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return tape_of(a).record(std::move(v), {a}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ia).unaryExpr([](double x) { return sigmoid(x); })));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  const auto ia = a.id();
  Matrix v = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(v), {a}, [ia, lo, hi](Tape& t, std::size_t self) {
    const Matrix mask = t.value(ia).unaryExpr([lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
    t.accumulate(ia, t.grad(self).cwiseProduct(mask));
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row count mismatch");
  const auto ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  Matrix v(a.rows(), ca + cb);
  v << a.value(), b.value();
  return tape_of(a).record(std::move(v), {a, b}, [ia, ib, ca, cb](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).leftCols(ca));
    t.accumulate(ib, t.grad(self).rightCols(cb));
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols: out of range");
  const auto ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return tape_of(a).record(a.value().middleCols(start, count), {a},
                           [ia, r, c, start, count](Tape& t, std::size_t self) {
                             Matrix g = Matrix::Zero(r, c);
                             g.middleCols(start, count) = t.grad(self);
                             t.accumulate(ia, g);
                           });
}

Var gather_rows(const std::vector<Var>& sources, const std::vector<int>& which) {
  if (sources.empty()) throw DimensionError("gather_rows: no sources");
  const Eigen::Index rows = sources.front().rows(), cols = sources.front().cols();
  if (static_cast<Eigen::Index>(which.size()) != rows) throw DimensionError("gather_rows: index count mismatch");
  for (const auto& s : sources)
    if (s.rows() != rows || s.cols() != cols) throw DimensionError("gather_rows: source shape mismatch");
  Matrix v(rows, cols);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const int k = which[static_cast<std::size_t>(b)];
    if (k < 0 || k >= static_cast<int>(sources.size())) throw DimensionError("gather_rows: index out of range");
    v.row(b) = sources[static_cast<std::size_t>(k)].value().row(b);
  }
  std::vector<std::size_t> ids;
  for (const auto& s : sources) ids.push_back(s.id());
  return tape_of(sources.front())
      .record(std::move(v), sources, [ids, which, rows, cols](Tape& t, std::size_t self) {
        // One scatter per distinct source, in source order.
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          Matrix g = Matrix::Zero(rows, cols);
          bool any = false;
          for (Eigen::Index b = 0; b < rows; ++b)
            if (which[static_cast<std::size_t>(b)] == static_cast<int>(k)) {
              g.row(b) = t.grad(self).row(b);
              any = true;
            }
          if (any) t.accumulate(ids[k], g);
        }
      });
}

Var gmm_score(std::shared_ptr<const Gmm> model, const Var& z) {
  if (!model) throw DimensionError("gmm_score: null model");
  require_dim(z.cols() == model->dim(), "gmm_score: dimension mismatch");
  const auto iz = z.id();
  Matrix v = gmm_score_batch(*model, z.value());
  return tape_of(z).record(std::move(v), {z}, [iz, model](Tape& t, std::size_t self) {
    const Matrix& zv = t.value(iz);
    const Matrix& s = t.value(self);
    const Matrix& g = t.grad(self);
    const Matrix& inv_var = model->inverse_variances();
    Matrix out(zv.rows(), zv.cols());
    for (Eigen::Index b = 0; b < zv.rows(); ++b) {
      const Eigen::VectorXd zb = zv.row(b).transpose();
      const Eigen::VectorXd gb = g.row(b).transpose();
      const Eigen::VectorXd r = gmm_responsibilities(*model, zb);
      Eigen::VectorXd acc = -s.row(b).transpose() * s.row(b).dot(g.row(b));
      for (Eigen::Index c = 0; c < model->components(); ++c) {
        const Eigen::VectorXd iv = inv_var.row(c).transpose();
        const Eigen::VectorXd bc = (model->means().row(c).transpose() - zb).cwiseProduct(iv);
        acc += r(c) * (bc * bc.dot(gb) - gb.cwiseProduct(iv));
      }
      out.row(b) = acc.transpose();
    }
    t.accumulate(iz, out);
  });
}

}  // namespace lndsm::ad
