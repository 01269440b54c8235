#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace servo {

// Raw rendered image, channel-major [c][y][x], values nominally in [0, 1].
struct Observation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Observation() = default;
  Observation(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
  size_t size() const { return data.size(); }
};

// Square per-channel response grid at one pyramid level.
struct FeatureMap {
  int channels = 0;
  int resolution = 0;
  int level = 0;
  std::vector<double> data;  // [c][y][x]

  FeatureMap() = default;
  FeatureMap(int c, int r, int lvl = 0)
      : channels(c), resolution(r), level(lvl), data(static_cast<size_t>(c) * r * r, 0.0) {}

  double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * resolution + y) * resolution + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<size_t>(c) * resolution + y) * resolution + x]; }

  const double* channel(int c) const { return data.data() + static_cast<size_t>(c) * resolution * resolution; }
  double* channel(int c) { return data.data() + static_cast<size_t>(c) * resolution * resolution; }

  // flattened row-major view of one channel
  Eigen::Map<const Eigen::VectorXd> channel_vec(int c) const {
    return Eigen::Map<const Eigen::VectorXd>(channel(c), static_cast<Eigen::Index>(resolution) * resolution);
  }
};

struct Pyramid {
  std::vector<FeatureMap> levels;  // levels[l] has resolution R0 / 2^l

  int depth() const { return static_cast<int>(levels.size()) - 1; }
  const FeatureMap& level(int l) const { return levels[static_cast<size_t>(l)]; }
};

// Per-channel affine normalization fitted on a training set.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at kMinStd when fitted

  static constexpr double kMinStd = 1e-6;

  static Standardizer identity(int channels) {
    Standardizer s;
    s.mean.assign(channels, 0.0);
    s.stddev.assign(channels, 1.0);
    return s;
  }

  int channels() const { return static_cast<int>(mean.size()); }
  FeatureMap apply(const FeatureMap& raw) const;
};

// Maps an Observation to an unnormalized level-0 FeatureMap.
class Featurizer {
 public:
  virtual ~Featurizer() = default;
  virtual std::string id() const = 0;
  virtual int output_channels(int obs_channels) const = 0;
  virtual FeatureMap raw(const Observation& obs) const = 0;
};

// ids: "pixel" (pass-through channels), "chroma" (reference-color matches + gradient magnitude)
std::unique_ptr<Featurizer> make_featurizer(const std::string& id);

// Anchor colors of the scene palette used by the chroma featurizer.
constexpr int kChromaReferenceCount = 4;
const std::array<Eigen::Vector3d, kChromaReferenceCount>& chroma_reference_colors();
constexpr double kChromaSigma = 0.15;

FeatureMap featurize(const Observation& obs, const Featurizer& featurizer, const Standardizer& standardizer);
FeatureMap featurize(const Observation& obs, const std::string& featurizer_id, const Standardizer& standardizer);

// 2x2 mean pooling; halves the resolution, decrements to level + 1.
FeatureMap downsample(const FeatureMap& fm);

// levels = number of downsamplings; result holds levels + 1 maps.
Pyramid build_pyramid(const FeatureMap& base, int levels);

Standardizer fit_standardizer(const std::vector<Observation>& dataset, const Featurizer& featurizer);

// streaming form, avoids materializing every observation at once
Standardizer fit_standardizer(int count, const std::function<Observation(int)>& get_observation,
                              const Featurizer& featurizer);

}  // namespace servo
