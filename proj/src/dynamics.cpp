#include "servo/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "servo/rng.hpp"

namespace servo {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

constexpr int kMaxFilterSize = 7;
constexpr int kMaxSlots = 9;

/* Visits every output cell with its zero-padded stencil gathered into a
 * stack buffer. The same walk backs prediction, Jacobians and training. */
template <typename F>
inline void for_each_cell_stencil(const double* y, int resolution, int filter_size, F&& fn) {
  const int r = filter_size / 2;
  const int st = filter_size * filter_size;
  double tap[kMaxFilterSize * kMaxFilterSize];
  for (int kh = 0; kh < resolution; ++kh) {
    for (int kw = 0; kw < resolution; ++kw) {
      int t = 0;
      for (int dh = -r; dh <= r; ++dh) {
        const int ih = kh + dh;
        const bool row_ok = static_cast<unsigned>(ih) < static_cast<unsigned>(resolution);
        const double* row = y + static_cast<size_t>(ih) * resolution;
        for (int dw = -r; dw <= r; ++dw, ++t) {
          const int iw = kw + dw;
          tap[t] = (row_ok && static_cast<unsigned>(iw) < static_cast<unsigned>(resolution)) ? row[iw] : 0.0;
        }
      }
      (void)st;
      fn(kh * resolution + kw, tap);
    }
  }
}

void check_filter(int filter_size) {
  require(filter_size >= 1 && filter_size <= kMaxFilterSize && filter_size % 2 == 1,
          "filter_size must be odd and within [1, 7]");
}

void check_level_input(const BilinearModel& model, const FeatureMap& y) {
  require(y.level >= 0 && y.level <= model.levels, "feature map level outside model range");
  require(y.resolution == model.resolutions[static_cast<size_t>(y.level)],
          "feature map resolution does not match model level");
  require(y.channels == model.channels, "feature map channel count does not match model");
}

Eigen::VectorXd coefficient_vector(const Eigen::VectorXd& u, int control_dim) {
  require(static_cast<int>(u.size()) == control_dim, "control vector has wrong dimension");
  Eigen::VectorXd coeff(control_dim + 1);
  coeff.head(control_dim) = u;
  coeff[control_dim] = 1.0;  // always-on slot
  return coeff;
}

}  // namespace

std::string to_string(DynamicsVariant v) {
  return v == DynamicsVariant::LocallyConnected ? "locally_connected" : "fully_connected";
}

DynamicsVariant dynamics_variant_from_string(const std::string& s) {
  if (s == "locally_connected") return DynamicsVariant::LocallyConnected;
  if (s == "fully_connected") return DynamicsVariant::FullyConnected;
  throw std::invalid_argument("unknown dynamics variant: " + s);
}

BilinearModel BilinearModel::zeros(DynamicsVariant variant, const std::vector<int>& resolutions, int channels,
                                   int control_dim, int filter_size, bool allow_coarse_only) {
  require(!resolutions.empty(), "model needs at least one level");
  require(channels > 0 && control_dim > 0, "channels and control_dim must be positive");
  check_filter(filter_size);
  BilinearModel m;
  m.variant = variant;
  m.levels = static_cast<int>(resolutions.size()) - 1;
  m.channels = channels;
  m.control_dim = control_dim;
  m.filter_size = filter_size;
  m.resolutions = resolutions;
  for (size_t l = 0; l < resolutions.size(); ++l) {
    require(resolutions[l] > 0, "level resolution must be positive");
    if (l > 0) require(resolutions[l] * 2 == resolutions[l - 1], "level resolutions must halve");
    if (variant == DynamicsVariant::LocallyConnected) {
      LocallyConnectedLevel lvl;
      lvl.resolution = resolutions[l];
      lvl.channels = channels;
      lvl.control_dim = control_dim;
      lvl.filter_size = filter_size;
      lvl.allocate();
      m.local.push_back(std::move(lvl));
    } else {
      require(!allow_coarse_only || resolutions[l] <= kMaxFullyConnectedResolution,
              "fully connected dynamics limited to coarse levels (resolution <= 16)");
      FullyConnectedLevel lvl;
      lvl.resolution = resolutions[l];
      lvl.channels = channels;
      lvl.control_dim = control_dim;
      lvl.allocate();
      m.dense.push_back(std::move(lvl));
    }
  }
  return m;
}

BilinearModel BilinearModel::random(DynamicsVariant variant, const std::vector<int>& resolutions, int channels,
                                    int control_dim, int filter_size, double stddev, Rng& rng,
                                    bool allow_coarse_only) {
  BilinearModel m = zeros(variant, resolutions, channels, control_dim, filter_size, allow_coarse_only);
  if (variant == DynamicsVariant::LocallyConnected) {
    for (auto& lvl : m.local) {
      for (double& w : lvl.weights) w = rng.normal(0.0, stddev);
      for (double& b : lvl.biases) b = rng.normal(0.0, stddev);
    }
  } else {
    for (auto& lvl : m.dense) {
      for (auto& W : lvl.weights)
        for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.normal(0.0, stddev);
      for (auto& b : lvl.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.normal(0.0, stddev);
    }
  }
  return m;
}

void locally_connected_apply(const double* W, int resolution, int filter_size, const double* y, double* out) {
  check_filter(filter_size);
  const int st = filter_size * filter_size;
  for_each_cell_stencil(y, resolution, filter_size, [&](int k, const double* tap) {
    const double* w = W + static_cast<size_t>(k) * st;
    double acc = 0.0;
    for (int f = 0; f < st; ++f) acc += w[f] * tap[f];
    out[k] = acc;
  });
}

FeatureMap locally_connected_apply(const std::vector<double>& W, int filter_size, const FeatureMap& y) {
  require(y.channels == 1, "single-channel apply expects a one-channel map");
  const size_t expected = static_cast<size_t>(y.resolution) * y.resolution * filter_size * filter_size;
  require(W.size() == expected, "weight tensor size does not match map and filter size");
  FeatureMap out(1, y.resolution, y.level);
  locally_connected_apply(W.data(), y.resolution, filter_size, y.channel(0), out.channel(0));
  return out;
}

FeatureMap predict_level(const BilinearModel& model, const FeatureMap& y, const Eigen::VectorXd& u) {
  check_level_input(model, y);
  const Eigen::VectorXd coeff = coefficient_vector(u, model.control_dim);
  const int slots = model.control_dim + 1;
  FeatureMap out(y.channels, y.resolution, y.level);
  if (model.variant == DynamicsVariant::LocallyConnected) {
    const LocallyConnectedLevel& lvl = model.local[static_cast<size_t>(y.level)];
    const int st = lvl.stencil();
    for (int c = 0; c < y.channels; ++c) {
      const double* yc = y.channel(c);
      double* oc = out.channel(c);
      const double* Wc = lvl.weights.data() + lvl.weight_index(c, 0, 0);
      const double* Bc = lvl.biases.data() + lvl.bias_index(c, 0, 0);
      for_each_cell_stencil(yc, y.resolution, lvl.filter_size, [&](int k, const double* tap) {
        const double* Wk = Wc + static_cast<size_t>(k) * slots * st;
        const double* Bk = Bc + static_cast<size_t>(k) * slots;
        double acc = yc[k];
        for (int s = 0; s < slots; ++s) {
          const double* w = Wk + static_cast<size_t>(s) * st;
          double dot = 0.0;
          for (int f = 0; f < st; ++f) dot += w[f] * tap[f];
          acc += coeff[s] * (dot + Bk[s]);
        }
        oc[k] = acc;
      });
    }
  } else {
    const FullyConnectedLevel& lvl = model.dense[static_cast<size_t>(y.level)];
    for (int c = 0; c < y.channels; ++c) {
      Eigen::Map<const Eigen::VectorXd> yv(y.channel(c), lvl.cells());
      Eigen::VectorXd acc = yv;
      for (int s = 0; s < slots; ++s) {
        const size_t i = static_cast<size_t>(c) * slots + s;
        acc.noalias() += coeff[s] * (lvl.weights[i] * yv + lvl.biases[i]);
      }
      Eigen::Map<Eigen::VectorXd>(out.channel(c), lvl.cells()) = acc;
    }
  }
  return out;
}

Pyramid predict(const BilinearModel& model, const Pyramid& y, const Eigen::VectorXd& u) {
  require(y.depth() == model.levels, "pyramid depth does not match model");
  Pyramid out;
  out.levels.reserve(y.levels.size());
  for (const FeatureMap& fm : y.levels) out.levels.push_back(predict_level(model, fm, u));
  return out;
}

LevelJacobian jacobian_level(const BilinearModel& model, const FeatureMap& y) {
  check_level_input(model, y);
  const int slots = model.control_dim + 1;
  LevelJacobian jac;
  jac.per_channel.reserve(static_cast<size_t>(y.channels));
  if (model.variant == DynamicsVariant::LocallyConnected) {
    const LocallyConnectedLevel& lvl = model.local[static_cast<size_t>(y.level)];
    const int st = lvl.stencil();
    for (int c = 0; c < y.channels; ++c) {
      Eigen::MatrixXd J(lvl.cells(), model.control_dim);
      const double* yc = y.channel(c);
      const double* Wc = lvl.weights.data() + lvl.weight_index(c, 0, 0);
      const double* Bc = lvl.biases.data() + lvl.bias_index(c, 0, 0);
      for_each_cell_stencil(yc, y.resolution, lvl.filter_size, [&](int k, const double* tap) {
        const double* Wk = Wc + static_cast<size_t>(k) * slots * st;
        const double* Bk = Bc + static_cast<size_t>(k) * slots;
        for (int j = 0; j < model.control_dim; ++j) {
          const double* w = Wk + static_cast<size_t>(j) * st;
          double dot = 0.0;
          for (int f = 0; f < st; ++f) dot += w[f] * tap[f];
          J(k, j) = dot + Bk[j];
        }
      });
      jac.per_channel.push_back(std::move(J));
    }
  } else {
    const FullyConnectedLevel& lvl = model.dense[static_cast<size_t>(y.level)];
    for (int c = 0; c < y.channels; ++c) {
      Eigen::Map<const Eigen::VectorXd> yv(y.channel(c), lvl.cells());
      Eigen::MatrixXd J(lvl.cells(), model.control_dim);
      for (int j = 0; j < model.control_dim; ++j) {
        const size_t i = static_cast<size_t>(c) * slots + j;
        J.col(j).noalias() = lvl.weights[i] * yv + lvl.biases[i];
      }
      jac.per_channel.push_back(std::move(J));
    }
  }
  return jac;
}

std::vector<LevelJacobian> jacobian(const BilinearModel& model, const Pyramid& y) {
  require(y.depth() == model.levels, "pyramid depth does not match model");
  std::vector<LevelJacobian> out;
  out.reserve(y.levels.size());
  for (const FeatureMap& fm : y.levels) out.push_back(jacobian_level(model, fm));
  return out;
}

Eigen::VectorXd predict_free_channel(const BilinearModel& model, const FeatureMap& y, int c) {
  check_level_input(model, y);
  require(c >= 0 && c < model.channels, "channel index out of range");
  const int slots = model.control_dim + 1;
  const int cells = y.resolution * y.resolution;
  Eigen::VectorXd out(cells);
  if (model.variant == DynamicsVariant::LocallyConnected) {
    const LocallyConnectedLevel& lvl = model.local[static_cast<size_t>(y.level)];
    const int st = lvl.stencil();
    const double* yc = y.channel(c);
    const double* Wc = lvl.weights.data() + lvl.weight_index(c, 0, 0);
    const double* Bc = lvl.biases.data() + lvl.bias_index(c, 0, 0);
    const int free_slot = model.control_dim;
    for_each_cell_stencil(yc, y.resolution, lvl.filter_size, [&](int k, const double* tap) {
      const double* w = Wc + (static_cast<size_t>(k) * slots + free_slot) * st;
      double dot = 0.0;
      for (int f = 0; f < st; ++f) dot += w[f] * tap[f];
      out[k] = yc[k] + dot + Bc[static_cast<size_t>(k) * slots + free_slot];
    });
  } else {
    const FullyConnectedLevel& lvl = model.dense[static_cast<size_t>(y.level)];
    Eigen::Map<const Eigen::VectorXd> yv(y.channel(c), cells);
    const size_t i = static_cast<size_t>(c) * slots + model.control_dim;
    out = yv + lvl.weights[i] * yv + lvl.biases[i];
  }
  return out;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  void init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
};

void adam_update(std::vector<double>& theta, const std::vector<double>& grad, AdamState& state,
                 const DynamicsTrainConfig& cfg, int step) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step);
  for (size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + cfg.weight_decay * theta[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    theta[i] -= cfg.learning_rate * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + cfg.adam_epsilon);
  }
}

}  // namespace

DynamicsTrainResult train_dynamics(const TrajectoryDataset& data, const Featurizer& featurizer,
                                   int pyramid_levels, DynamicsVariant variant, int filter_size,
                                   const DynamicsTrainConfig& config) {
  require(data.triplet_count() > 0, "train_dynamics: empty dataset");
  require(data.height == data.width, "train_dynamics: observations must be square");
  require(pyramid_levels >= 0 && data.height % (1 << pyramid_levels) == 0,
          "train_dynamics: resolution not divisible by 2^levels");
  require(config.batch_size > 0 && config.iterations >= 0, "train_dynamics: bad config");

  const int n_channels = featurizer.output_channels(data.channels);
  require(data.standardizer.channels() == n_channels, "train_dynamics: standardizer does not match featurizer");

  std::vector<int> resolutions;
  for (int l = 0; l <= pyramid_levels; ++l) resolutions.push_back(data.height >> l);

  // cache standardized level-0 features per frame (float32 keeps 10k-frame
  // sets within memory; downsampled levels are rebuilt per draw)
  const int n_frames = data.n_traj * (data.horizon + 1);
  const size_t feat_size = static_cast<size_t>(n_channels) * data.height * data.width;
  std::vector<float> cache(static_cast<size_t>(n_frames) * feat_size);
  for (int fi = 0; fi < n_frames; ++fi) {
    const Observation obs = data.frame(fi / (data.horizon + 1), fi % (data.horizon + 1));
    const FeatureMap fm = data.standardizer.apply(featurizer.raw(obs));
    float* dst = cache.data() + static_cast<size_t>(fi) * feat_size;
    for (size_t i = 0; i < feat_size; ++i) dst[i] = static_cast<float>(fm.data[i]);
  }
  auto pyramid_of = [&](int frame_index) {
    FeatureMap base(n_channels, data.height, 0);
    const float* src = cache.data() + static_cast<size_t>(frame_index) * feat_size;
    for (size_t i = 0; i < feat_size; ++i) base.data[i] = static_cast<double>(src[i]);
    return build_pyramid(base, pyramid_levels);
  };

  Rng rng(config.seed);
  BilinearModel model = BilinearModel::random(variant, resolutions, n_channels, data.control_dim, filter_size,
                                              config.init_stddev, rng);

  const int slots = data.control_dim + 1;
  std::vector<AdamState> adam_w(resolutions.size()), adam_b(resolutions.size());
  std::vector<std::vector<double>> grad_w(resolutions.size()), grad_b(resolutions.size());
  std::vector<std::vector<double>*> theta_w(resolutions.size()), theta_b(resolutions.size());
  std::vector<std::vector<double>> dense_theta_w, dense_theta_b;  // flattened dense params
  if (variant == DynamicsVariant::LocallyConnected) {
    for (size_t l = 0; l < resolutions.size(); ++l) {
      theta_w[l] = &model.local[l].weights;
      theta_b[l] = &model.local[l].biases;
    }
  } else {
    dense_theta_w.resize(resolutions.size());
    dense_theta_b.resize(resolutions.size());
    for (size_t l = 0; l < resolutions.size(); ++l) {
      FullyConnectedLevel& lvl = model.dense[l];
      const size_t nw = static_cast<size_t>(lvl.cells()) * lvl.cells();
      dense_theta_w[l].resize(lvl.weights.size() * nw);
      dense_theta_b[l].resize(lvl.biases.size() * static_cast<size_t>(lvl.cells()));
      theta_w[l] = &dense_theta_w[l];
      theta_b[l] = &dense_theta_b[l];
    }
  }
  auto sync_dense_from_flat = [&]() {
    if (variant != DynamicsVariant::FullyConnected) return;
    for (size_t l = 0; l < resolutions.size(); ++l) {
      FullyConnectedLevel& lvl = model.dense[l];
      const size_t nw = static_cast<size_t>(lvl.cells()) * lvl.cells();
      for (size_t i = 0; i < lvl.weights.size(); ++i)
        std::copy_n(dense_theta_w[l].data() + i * nw, nw, lvl.weights[i].data());
      for (size_t i = 0; i < lvl.biases.size(); ++i)
        std::copy_n(dense_theta_b[l].data() + i * static_cast<size_t>(lvl.cells()), lvl.cells(),
                    lvl.biases[i].data());
    }
  };
  auto seed_flat_from_dense = [&]() {
    if (variant != DynamicsVariant::FullyConnected) return;
    for (size_t l = 0; l < resolutions.size(); ++l) {
      FullyConnectedLevel& lvl = model.dense[l];
      const size_t nw = static_cast<size_t>(lvl.cells()) * lvl.cells();
      for (size_t i = 0; i < lvl.weights.size(); ++i)
        std::copy_n(lvl.weights[i].data(), nw, dense_theta_w[l].data() + i * nw);
      for (size_t i = 0; i < lvl.biases.size(); ++i)
        std::copy_n(lvl.biases[i].data(), lvl.cells(), dense_theta_b[l].data() + i * static_cast<size_t>(lvl.cells()));
    }
  };
  seed_flat_from_dense();
  for (size_t l = 0; l < resolutions.size(); ++l) {
    adam_w[l].init(theta_w[l]->size());
    adam_b[l].init(theta_b[l]->size());
    grad_w[l].assign(theta_w[l]->size(), 0.0);
    grad_b[l].assign(theta_b[l]->size(), 0.0);
  }

  DynamicsTrainResult result;
  result.loss_log.reserve(static_cast<size_t>(config.iterations));

  std::vector<int> pool = config.triplet_indices;
  if (pool.empty()) {
    pool.resize(static_cast<size_t>(data.triplet_count()));
    for (int i = 0; i < data.triplet_count(); ++i) pool[static_cast<size_t>(i)] = i;
  }
  for (const int idx : pool)
    require(idx >= 0 && idx < data.triplet_count(), "train_dynamics: triplet index out of range");

  std::vector<int> batch(static_cast<size_t>(config.batch_size));
  Eigen::VectorXd u(data.control_dim), coeff(slots);
  for (int iter = 1; iter <= config.iterations; ++iter) {
    for (int b = 0; b < config.batch_size; ++b)
      batch[static_cast<size_t>(b)] = pool[rng.uniform_index(pool.size())];
    for (size_t l = 0; l < resolutions.size(); ++l) {
      std::fill(grad_w[l].begin(), grad_w[l].end(), 0.0);
      std::fill(grad_b[l].begin(), grad_b[l].end(), 0.0);
    }
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(config.batch_size);
    for (int b = 0; b < config.batch_size; ++b) {
      const int idx = batch[static_cast<size_t>(b)];
      const int traj = idx / data.horizon;
      const int step = idx % data.horizon;
      const int frame0 = traj * (data.horizon + 1) + step;
      const Pyramid pt = pyramid_of(frame0);
      const Pyramid pt1 = pyramid_of(frame0 + 1);
      u = data.action(traj, step);
      coeff.head(data.control_dim) = u;
      coeff[data.control_dim] = 1.0;

      for (size_t l = 0; l < resolutions.size(); ++l) {
        const FeatureMap& y0 = pt.levels[l];
        const FeatureMap& y1 = pt1.levels[l];
        if (variant == DynamicsVariant::LocallyConnected) {
          LocallyConnectedLevel& lvl = model.local[l];
          const int st = lvl.stencil();
          for (int c = 0; c < n_channels; ++c) {
            const double* yc = y0.channel(c);
            const double* y1c = y1.channel(c);
            const double* Wc = lvl.weights.data() + lvl.weight_index(c, 0, 0);
            const double* Bc = lvl.biases.data() + lvl.bias_index(c, 0, 0);
            double* gWc = grad_w[l].data() + lvl.weight_index(c, 0, 0);
            double* gBc = grad_b[l].data() + lvl.bias_index(c, 0, 0);
            for_each_cell_stencil(yc, y0.resolution, lvl.filter_size, [&](int k, const double* tap) {
              const double* Wk = Wc + static_cast<size_t>(k) * slots * st;
              const double* Bk = Bc + static_cast<size_t>(k) * slots;
              double pred = yc[k];
              for (int s = 0; s < slots; ++s) {
                const double* w = Wk + static_cast<size_t>(s) * st;
                double dot = 0.0;
                for (int f = 0; f < st; ++f) dot += w[f] * tap[f];
                pred += coeff[s] * (dot + Bk[s]);
              }
              const double e = pred - y1c[k];
              loss += e * e;
              double* gWk = gWc + static_cast<size_t>(k) * slots * st;
              double* gBk = gBc + static_cast<size_t>(k) * slots;
              const double se = scale * e;
              for (int s = 0; s < slots; ++s) {
                const double g = se * coeff[s];
                gBk[s] += g;
                double* gw = gWk + static_cast<size_t>(s) * st;
                for (int f = 0; f < st; ++f) gw[f] += g * tap[f];
              }
            });
          }
        } else {
          FullyConnectedLevel& lvl = model.dense[l];
          const int cells = lvl.cells();
          const size_t nw = static_cast<size_t>(cells) * cells;
          for (int c = 0; c < n_channels; ++c) {
            Eigen::Map<const Eigen::VectorXd> yv(y0.channel(c), cells);
            Eigen::Map<const Eigen::VectorXd> y1v(y1.channel(c), cells);
            Eigen::VectorXd pred = yv;
            for (int s = 0; s < slots; ++s) {
              const size_t i = static_cast<size_t>(c) * slots + s;
              pred.noalias() += coeff[s] * (lvl.weights[i] * yv + lvl.biases[i]);
            }
            const Eigen::VectorXd e = pred - y1v;
            loss += e.squaredNorm();
            for (int s = 0; s < slots; ++s) {
              const size_t i = static_cast<size_t>(c) * slots + s;
              Eigen::Map<Eigen::MatrixXd> gW(grad_w[l].data() + i * nw, cells, cells);
              Eigen::Map<Eigen::VectorXd> gB(grad_b[l].data() + i * static_cast<size_t>(cells), cells);
              const double g = scale * coeff[s];
              gW.noalias() += g * e * yv.transpose();
              gB.noalias() += g * e;
            }
          }
        }
      }
    }
    loss /= static_cast<double>(config.batch_size);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_dynamics: non-finite loss at iteration " + std::to_string(iter));
    result.loss_log.push_back(loss);

    for (size_t l = 0; l < resolutions.size(); ++l) {
      adam_update(*theta_w[l], grad_w[l], adam_w[l], config, iter);
      adam_update(*theta_b[l], grad_b[l], adam_b[l], config, iter);
    }
    sync_dense_from_flat();
  }

  result.model = std::move(model);
  return result;
}

double dynamics_mse(const TrajectoryDataset& data, const Featurizer& featurizer, const BilinearModel& model,
                    const std::vector<int>& triplet_indices) {
  require(!triplet_indices.empty(), "dynamics_mse: no triplets given");
  double err = 0.0;
  size_t count = 0;
  Observation x0, x1;
  Eigen::VectorXd u;
  for (const int idx : triplet_indices) {
    data.triplet(idx, x0, u, x1);
    const Pyramid p0 = build_pyramid(featurize(x0, featurizer, data.standardizer), model.levels);
    const Pyramid p1 = build_pyramid(featurize(x1, featurizer, data.standardizer), model.levels);
    const Pyramid pred = predict(model, p0, u);
    for (size_t l = 0; l < pred.levels.size(); ++l) {
      const auto& a = pred.levels[l].data;
      const auto& b = p1.levels[l].data;
      for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        err += d * d;
      }
      count += a.size();
    }
  }
  return err / static_cast<double>(count);
}

}  // namespace servo
