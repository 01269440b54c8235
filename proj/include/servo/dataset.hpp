#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "servo/featurize.hpp"

namespace servo {

// Interaction triplets (x_t, u_t, x_t+1) stored as whole trajectories so
// consecutive triplets share frames. Frames are float32, matching the
// on-disk payload exactly, so in-memory use and save/load round trips see
// identical values.
struct TrajectoryDataset {
  int n_traj = 0;
  int horizon = 0;  // actions per trajectory; frames per trajectory = horizon + 1
  int channels = 0;
  int height = 0;
  int width = 0;
  int control_dim = 0;
  std::string featurizer_id;
  Standardizer standardizer;
  std::uint64_t seed = 0;
  std::vector<float> frames;   // [traj][step][c][y][x]
  std::vector<float> actions;  // [traj][step][j]

  int triplet_count() const { return n_traj * horizon; }
  size_t frame_size() const { return static_cast<size_t>(channels) * height * width; }

  Observation frame(int traj, int step) const {
    Observation obs(channels, height, width);
    const float* src = frames.data() + (static_cast<size_t>(traj) * (horizon + 1) + step) * frame_size();
    for (size_t i = 0; i < obs.size(); ++i) obs.data[i] = static_cast<double>(src[i]);
    return obs;
  }

  Eigen::VectorXd action(int traj, int step) const {
    Eigen::VectorXd u(control_dim);
    const float* src = actions.data() + (static_cast<size_t>(traj) * horizon + step) * control_dim;
    for (int j = 0; j < control_dim; ++j) u[j] = static_cast<double>(src[j]);
    return u;
  }

  // triplet index i = traj * horizon + step
  void triplet(int i, Observation& x_t, Eigen::VectorXd& u, Observation& x_t1) const {
    const int traj = i / horizon;
    const int step = i % horizon;
    x_t = frame(traj, step);
    u = action(traj, step);
    x_t1 = frame(traj, step + 1);
  }

  void set_frame(int traj, int step, const Observation& obs) {
    float* dst = frames.data() + (static_cast<size_t>(traj) * (horizon + 1) + step) * frame_size();
    for (size_t i = 0; i < obs.size(); ++i) dst[i] = static_cast<float>(obs.data[i]);
  }

  void set_action(int traj, int step, const Eigen::VectorXd& u) {
    float* dst = actions.data() + (static_cast<size_t>(traj) * horizon + step) * control_dim;
    for (int j = 0; j < control_dim; ++j) dst[j] = static_cast<float>(u[j]);
  }

  void allocate() {
    frames.assign(static_cast<size_t>(n_traj) * (horizon + 1) * frame_size(), 0.0f);
    actions.assign(static_cast<size_t>(n_traj) * horizon * control_dim, 0.0f);
  }
};

}  // namespace servo
