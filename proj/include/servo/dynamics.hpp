#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "servo/dataset.hpp"
#include "servo/featurize.hpp"
#include "servo/rng.hpp"

namespace servo {

class Rng;

enum class DynamicsVariant { LocallyConnected, FullyConnected };

std::string to_string(DynamicsVariant v);
DynamicsVariant dynamics_variant_from_string(const std::string& s);

/* One pyramid level of bilinear dynamics parameters.
 *
 * Per channel c and coefficient slot s there is one untied filter bank
 * W[c][k][s][.] (a filter_size x filter_size stencil per output cell k) and
 * one bias grid B[c][k][s]. Slots 0..control_dim-1 are scaled by the matching
 * control coordinate; the last slot is the always-on term.
 */
struct LocallyConnectedLevel {
  int resolution = 0;
  int channels = 0;
  int control_dim = 0;
  int filter_size = 3;
  std::vector<double> weights;  // [c][k][slot][f], f row-major over the stencil
  std::vector<double> biases;   // [c][k][slot]

  int slots() const { return control_dim + 1; }
  int cells() const { return resolution * resolution; }
  int stencil() const { return filter_size * filter_size; }

  size_t weight_index(int c, int k, int slot) const {
    return ((static_cast<size_t>(c) * cells() + k) * slots() + slot) * stencil();
  }
  size_t bias_index(int c, int k, int slot) const {
    return (static_cast<size_t>(c) * cells() + k) * slots() + slot;
  }

  void allocate() {
    weights.assign(static_cast<size_t>(channels) * cells() * slots() * stencil(), 0.0);
    biases.assign(static_cast<size_t>(channels) * cells() * slots(), 0.0);
  }
};

// Dense per-channel variant; practical only at coarse resolutions.
struct FullyConnectedLevel {
  int resolution = 0;
  int channels = 0;
  int control_dim = 0;
  std::vector<Eigen::MatrixXd> weights;  // [c * slots + slot], cells x cells
  std::vector<Eigen::VectorXd> biases;   // [c * slots + slot], cells

  int slots() const { return control_dim + 1; }
  int cells() const { return resolution * resolution; }

  void allocate() {
    weights.assign(static_cast<size_t>(channels) * slots(), Eigen::MatrixXd::Zero(cells(), cells()));
    biases.assign(static_cast<size_t>(channels) * slots(), Eigen::VectorXd::Zero(cells()));
  }
};

constexpr int kMaxFullyConnectedResolution = 16;

struct BilinearModel {
  DynamicsVariant variant = DynamicsVariant::LocallyConnected;
  int levels = 0;  // pyramid depth; level count = levels + 1
  int channels = 0;
  int control_dim = 0;
  int filter_size = 3;
  std::vector<int> resolutions;                 // per level
  std::vector<LocallyConnectedLevel> local;     // used when variant == LocallyConnected
  std::vector<FullyConnectedLevel> dense;       // used when variant == FullyConnected

  // allow_coarse_only=false lifts the fully connected resolution guard
  static BilinearModel zeros(DynamicsVariant variant, const std::vector<int>& resolutions, int channels,
                             int control_dim, int filter_size, bool allow_coarse_only = true);
  static BilinearModel random(DynamicsVariant variant, const std::vector<int>& resolutions, int channels,
                              int control_dim, int filter_size, double stddev, Rng& rng,
                              bool allow_coarse_only = true);
};

/* Untied convolution: out(k) = sum_f W[k][f] * y(k + offset(f)), offsets run
 * over the centered stencil and out-of-range taps contribute zero.
 * W layout: [k][f] with f row-major over the filter_size^2 stencil. */
void locally_connected_apply(const double* W, int resolution, int filter_size, const double* y, double* out);
FeatureMap locally_connected_apply(const std::vector<double>& W, int filter_size, const FeatureMap& y);

// One-step prediction for a single level (y.level picks the parameter block).
FeatureMap predict_level(const BilinearModel& model, const FeatureMap& y, const Eigen::VectorXd& u);
Pyramid predict(const BilinearModel& model, const Pyramid& y, const Eigen::VectorXd& u);

/* Control Jacobian of predict_level around u (independent of u by
 * construction): column j = effect of control j on the flattened map. */
struct LevelJacobian {
  std::vector<Eigen::MatrixXd> per_channel;  // cells x control_dim
};
LevelJacobian jacobian_level(const BilinearModel& model, const FeatureMap& y);
std::vector<LevelJacobian> jacobian(const BilinearModel& model, const Pyramid& y);

// Free prediction (u = 0) of one level-channel, flattened; the exact base
// point of the linearization predict(y, u) = predict(y, 0) + J u.
Eigen::VectorXd predict_free_channel(const BilinearModel& model, const FeatureMap& y, int c);

struct DynamicsTrainConfig {
  int iterations = 10000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 5e-4;
  double init_stddev = 0.01;
  std::uint64_t seed = 0;
  std::vector<int> triplet_indices;  // subset to train on; empty = all
};

struct DynamicsTrainResult {
  BilinearModel model;
  std::vector<double> loss_log;  // training batch loss per iteration
};

/* Minibatch Adam on the summed per-level squared one-step feature error.
 * Deterministic given the seed. Throws on non-finite loss. */
DynamicsTrainResult train_dynamics(const TrajectoryDataset& data, const Featurizer& featurizer,
                                   int pyramid_levels, DynamicsVariant variant, int filter_size,
                                   const DynamicsTrainConfig& config);

// Mean squared per-entry one-step prediction error over the given triplets.
double dynamics_mse(const TrajectoryDataset& data, const Featurizer& featurizer, const BilinearModel& model,
                    const std::vector<int>& triplet_indices);

}  // namespace servo
