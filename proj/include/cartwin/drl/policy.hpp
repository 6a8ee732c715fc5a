#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "cartwin/drl/mlp.hpp"

namespace cartwin {

/// Deployable policy: the trained actor plus everything needed to map a
/// raw error vector to a steering rate. Actions replay bit for bit after
/// an export/load round trip.
struct Policy {
  std::shared_ptr<ActorNet<float>> actor;
  Eigen::Vector4d obs_norm = Eigen::Vector4d::Ones();
  double delta_dot_max = 0.0;

  /// Steering rate for one raw (unnormalized) error vector.
  double act(const Eigen::Vector4d& raw_errors) const;
};

void export_policy(const Policy& policy, const std::string& file);
Policy load_policy(const std::string& file);

}  // namespace cartwin
