#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace lndsm {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments and step counter for one parameter group.
struct AdamGroup {
  std::string name;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  std::int64_t step = 0;

  static AdamGroup zeros_like(std::string name, const std::vector<const Eigen::MatrixXd*>& params);
  bool operator==(const AdamGroup&) const = default;
};

/// Bias-corrected Adam update in place. A non-finite gradient throws
/// NumericalError naming the group before anything is modified.
void adam_step(AdamGroup& group, const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads,
               double lr, const AdamOptions& opts = {});

double global_norm(const std::vector<const std::vector<Eigen::MatrixXd>*>& groups);
/// Rescales every gradient so the joint norm is at most max_norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<std::vector<Eigen::MatrixXd>*>& groups, double max_norm);

}  // namespace lndsm
