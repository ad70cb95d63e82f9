#include "lndsm/adam.hpp"

#include "lndsm/errors.hpp"

#include <cmath>

namespace lndsm {

AdamGroup AdamGroup::zeros_like(std::string name, const std::vector<const Eigen::MatrixXd*>& params) {
  AdamGroup g;
  g.name = std::move(name);
  for (const auto* p : params) {
    g.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    g.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  return g;
}

void adam_step(AdamGroup& group, const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads,
               double lr, const AdamOptions& opts) {
  require_dim(params.size() == grads.size() && params.size() == group.m.size(),
              "adam_step: parameter/gradient/moment counts differ in group " + group.name);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require_dim(grads[i].rows() == params[i]->rows() && grads[i].cols() == params[i]->cols(),
                "adam_step: gradient shape mismatch in group " + group.name);
    if (!grads[i].allFinite()) throw NumericalError("non-finite gradient in parameter group '" + group.name + "'");
  }
  ++group.step;
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(group.step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(group.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    group.m[i] = opts.beta1 * group.m[i] + (1.0 - opts.beta1) * grads[i];
    group.v[i] = opts.beta2 * group.v[i] + (1.0 - opts.beta2) * grads[i].cwiseAbs2();
    const Eigen::ArrayXXd m_hat = group.m[i].array() / c1;
    const Eigen::ArrayXXd v_hat = group.v[i].array() / c2;
    params[i]->array() -= lr * m_hat / (v_hat.sqrt() + opts.eps);
  }
}

double global_norm(const std::vector<const std::vector<Eigen::MatrixXd>*>& groups) {
  double sq = 0.0;
  for (const auto* g : groups)
    for (const auto& m : *g) sq += m.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<std::vector<Eigen::MatrixXd>*>& groups, double max_norm) {
  std::vector<const std::vector<Eigen::MatrixXd>*> view(groups.begin(), groups.end());
  const double norm = global_norm(view);
  if (std::isfinite(norm) && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto* g : groups)
      for (auto& m : *g) m *= scale;
  }
  return norm;
}

}  // namespace lndsm
