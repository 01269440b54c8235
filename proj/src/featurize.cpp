#include "servo/featurize.hpp"

#include <cmath>
#include <stdexcept>

namespace servo {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

class PixelFeaturizer final : public Featurizer {
 public:
  std::string id() const override { return "pixel"; }
  int output_channels(int obs_channels) const override { return obs_channels; }

  FeatureMap raw(const Observation& obs) const override {
    require(obs.height == obs.width, "pixel featurizer: observation must be square");
    require(obs.channels > 0 && obs.height > 0, "pixel featurizer: empty observation");
    FeatureMap fm(obs.channels, obs.height, 0);
    fm.data = obs.data;
    return fm;
  }
};

class ChromaFeaturizer final : public Featurizer {
 public:
  std::string id() const override { return "chroma"; }
  int output_channels(int) const override { return kChromaReferenceCount + 1; }

  FeatureMap raw(const Observation& obs) const override {
    require(obs.channels == 3, "chroma featurizer: expects a 3-channel observation");
    require(obs.height == obs.width, "chroma featurizer: observation must be square");
    const int r = obs.height;
    FeatureMap fm(kChromaReferenceCount + 1, r, 0);
    const auto& refs = chroma_reference_colors();
    const double inv_two_sigma_sq = 1.0 / (2.0 * kChromaSigma * kChromaSigma);
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const double red = obs.at(0, y, x);
        const double grn = obs.at(1, y, x);
        const double blu = obs.at(2, y, x);
        for (int k = 0; k < kChromaReferenceCount; ++k) {
          const double dr = red - refs[k].x();
          const double dg = grn - refs[k].y();
          const double db = blu - refs[k].z();
          fm.at(k, y, x) = std::exp(-(dr * dr + dg * dg + db * db) * inv_two_sigma_sq);
        }
      }
    }
    // gradient-magnitude channel on mean intensity, central differences,
    // replicated borders
    auto lum = [&](int y, int x) {
      return (obs.at(0, y, x) + obs.at(1, y, x) + obs.at(2, y, x)) / 3.0;
    };
    auto clampi = [r](int v) { return v < 0 ? 0 : (v >= r ? r - 1 : v); };
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const double gx = 0.5 * (lum(y, clampi(x + 1)) - lum(y, clampi(x - 1)));
        const double gy = 0.5 * (lum(clampi(y + 1), x) - lum(clampi(y - 1), x));
        fm.at(kChromaReferenceCount, y, x) = std::sqrt(gx * gx + gy * gy);
      }
    }
    return fm;
  }
};

}  // namespace

const std::array<Eigen::Vector3d, kChromaReferenceCount>& chroma_reference_colors() {
  static const std::array<Eigen::Vector3d, kChromaReferenceCount> refs = {
      Eigen::Vector3d(0.85, 0.15, 0.15),  // target family
      Eigen::Vector3d(0.15, 0.25, 0.85),  // blue clutter
      Eigen::Vector3d(0.90, 0.80, 0.15),  // yellow clutter
      Eigen::Vector3d(0.20, 0.65, 0.20),  // vegetation
  };
  return refs;
}

std::unique_ptr<Featurizer> make_featurizer(const std::string& id) {
  if (id == "pixel") return std::make_unique<PixelFeaturizer>();
  if (id == "chroma") return std::make_unique<ChromaFeaturizer>();
  throw std::invalid_argument("unknown featurizer id: " + id);
}

FeatureMap Standardizer::apply(const FeatureMap& raw) const {
  require(raw.channels == channels(), "standardizer: channel count mismatch");
  FeatureMap out = raw;
  for (int c = 0; c < raw.channels; ++c) {
    const double m = mean[static_cast<size_t>(c)];
    const double inv = 1.0 / stddev[static_cast<size_t>(c)];
    double* p = out.channel(c);
    const size_t n = static_cast<size_t>(raw.resolution) * raw.resolution;
    for (size_t i = 0; i < n; ++i) p[i] = (p[i] - m) * inv;
  }
  return out;
}

FeatureMap featurize(const Observation& obs, const Featurizer& featurizer, const Standardizer& standardizer) {
  return standardizer.apply(featurizer.raw(obs));
}

FeatureMap featurize(const Observation& obs, const std::string& featurizer_id, const Standardizer& standardizer) {
  return featurize(obs, *make_featurizer(featurizer_id), standardizer);
}

FeatureMap downsample(const FeatureMap& fm) {
  require(fm.resolution % 2 == 0, "downsample: resolution must be even");
  require(fm.resolution >= 2, "downsample: resolution too small");
  const int r = fm.resolution / 2;
  FeatureMap out(fm.channels, r, fm.level + 1);
  for (int c = 0; c < fm.channels; ++c) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        out.at(c, y, x) = 0.25 * (fm.at(c, 2 * y, 2 * x) + fm.at(c, 2 * y, 2 * x + 1) +
                                  fm.at(c, 2 * y + 1, 2 * x) + fm.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

Pyramid build_pyramid(const FeatureMap& base, int levels) {
  require(levels >= 0, "build_pyramid: negative level count");
  require(base.resolution % (1 << levels) == 0,
          "build_pyramid: resolution not divisible by 2^levels");
  Pyramid pyr;
  pyr.levels.reserve(static_cast<size_t>(levels) + 1);
  pyr.levels.push_back(base);
  pyr.levels.back().level = 0;
  for (int l = 1; l <= levels; ++l) pyr.levels.push_back(downsample(pyr.levels.back()));
  return pyr;
}

Standardizer fit_standardizer(const std::vector<Observation>& dataset, const Featurizer& featurizer) {
  return fit_standardizer(static_cast<int>(dataset.size()),
                          [&](int i) { return dataset[static_cast<size_t>(i)]; }, featurizer);
}

Standardizer fit_standardizer(int count_obs, const std::function<Observation(int)>& get_observation,
                              const Featurizer& featurizer) {
  require(count_obs > 0, "fit_standardizer: empty dataset");
  Standardizer st;
  // Welford over all pixels of all samples, per channel
  std::vector<double> mean, m2;
  std::vector<long long> count;
  for (int s = 0; s < count_obs; ++s) {
    const FeatureMap fm = featurizer.raw(get_observation(s));
    if (mean.empty()) {
      mean.assign(static_cast<size_t>(fm.channels), 0.0);
      m2.assign(static_cast<size_t>(fm.channels), 0.0);
      count.assign(static_cast<size_t>(fm.channels), 0);
    }
    require(fm.channels == static_cast<int>(mean.size()), "fit_standardizer: inconsistent channel count");
    const size_t n = static_cast<size_t>(fm.resolution) * fm.resolution;
    for (int c = 0; c < fm.channels; ++c) {
      const double* p = fm.channel(c);
      for (size_t i = 0; i < n; ++i) {
        const double delta = p[i] - mean[static_cast<size_t>(c)];
        mean[static_cast<size_t>(c)] += delta / static_cast<double>(++count[static_cast<size_t>(c)]);
        m2[static_cast<size_t>(c)] += delta * (p[i] - mean[static_cast<size_t>(c)]);
      }
    }
  }
  st.mean = mean;
  st.stddev.resize(mean.size());
  for (size_t c = 0; c < mean.size(); ++c) {
    // population standard deviation
    const double var = count[c] > 0 ? m2[c] / static_cast<double>(count[c]) : 0.0;
    st.stddev[c] = std::max(std::sqrt(std::max(var, 0.0)), Standardizer::kMinStd);
  }
  return st;
}

}  // namespace servo
