#include "servo/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "servo/rng.hpp"

namespace servo {

double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

Eigen::Matrix3d camera_rotation(const CameraPose& pose, double pitch) {
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  Eigen::Matrix3d R;
  // columns: right, image-down, optical axis (world coordinates)
  R.col(0) = Eigen::Vector3d(sy, -cy, 0.0);
  R.col(1) = Eigen::Vector3d(sp * cy, sp * sy, -cp);
  R.col(2) = Eigen::Vector3d(cp * cy, cp * sy, sp);
  return R;
}

Eigen::Vector3d world_to_camera(const CameraPose& pose, double pitch, const Eigen::Vector3d& p_world) {
  return camera_rotation(pose, pitch).transpose() * (p_world - pose.position);
}

Eigen::Vector3d camera_to_world(const CameraPose& pose, double pitch, const Eigen::Vector3d& p_cam) {
  return pose.position + camera_rotation(pose, pitch) * p_cam;
}

bool point_in_fov(const Eigen::Vector3d& p_cam, double vertical_fov) {
  if (p_cam.z() <= 0.0) return false;
  const double s = std::tan(0.5 * vertical_fov);
  return std::abs(p_cam.x()) <= s * p_cam.z() && std::abs(p_cam.y()) <= s * p_cam.z();
}

Twist action_to_twist(const Action& u, double yaw, const SimParams& params) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d left(-std::sin(yaw), std::cos(yaw), 0.0);
  Twist t;
  t.linear = params.max_speed * (u[0] * forward + u[1] * left + u[2] * Eigen::Vector3d::UnitZ());
  t.yaw_rate = params.max_yaw_rate * u[3];
  return t;
}

CameraPose apply_twist(const CameraPose& pose, const Twist& twist, double dt) {
  CameraPose next = pose;
  next.position += dt * twist.linear;
  next.yaw = wrap_angle(pose.yaw + dt * twist.yaw_rate);
  return next;
}

Action twist_to_action(const Eigen::Vector3d& v_world, double yaw_rate, double yaw, const SimParams& params) {
  const Eigen::Vector3d forward(std::cos(yaw), std::sin(yaw), 0.0);
  const Eigen::Vector3d left(-std::sin(yaw), std::cos(yaw), 0.0);
  Action u(4);
  u[0] = v_world.dot(forward) / params.max_speed;
  u[1] = v_world.dot(left) / params.max_speed;
  u[2] = v_world.z() / params.max_speed;
  u[3] = yaw_rate / params.max_yaw_rate;
  for (int j = 0; j < 4; ++j) u[j] = std::clamp(u[j], -1.0, 1.0);
  return u;
}

double static_cost(const Eigen::Vector3d& p_cam, double pz_star) {
  const double ax = p_cam.x() / p_cam.z();
  const double ay = p_cam.y() / p_cam.z();
  const double az = 1.0 / p_cam.z() - 1.0 / pz_star;
  return std::sqrt(ax * ax + ay * ay + az * az);
}

CostOutcome step_cost(const Eigen::Vector3d& p_next_cam, double pz_star, double tau, int t, int horizon,
                      double prev_cost, double vertical_fov) {
  const double dist = p_next_cam.norm();
  if (dist < tau) return {static_cast<double>(horizon - t + 1) * prev_cost, Termination::TooClose};
  if (!point_in_fov(p_next_cam, vertical_fov))
    return {static_cast<double>(horizon - t + 1) * prev_cost, Termination::OutOfView};
  return {static_cost(p_next_cam, pz_star), t >= horizon ? Termination::Horizon : Termination::None};
}

void Polyline::rebuild() {
  cumulative.assign(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i) cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
  total = pts.empty() ? 0.0 : cumulative.back();
}

Eigen::Vector2d Polyline::point_at(double s) const {
  s = std::clamp(s, 0.0, total);
  size_t i = 1;
  while (i + 1 < pts.size() && cumulative[i] < s) ++i;
  const double seg = cumulative[i] - cumulative[i - 1];
  const double f = seg > 0.0 ? (s - cumulative[i - 1]) / seg : 0.0;
  return pts[i - 1] + f * (pts[i] - pts[i - 1]);
}

Eigen::Vector2d Polyline::direction_at(double s) const {
  s = std::clamp(s, 0.0, total);
  size_t i = 1;
  while (i + 1 < pts.size() && cumulative[i] < s) ++i;
  return (pts[i] - pts[i - 1]).normalized();
}

double Polyline::distance(const Eigen::Vector2d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 1; i < pts.size(); ++i) {
    const Eigen::Vector2d e = pts[i] - pts[i - 1];
    const double len2 = e.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((p - pts[i - 1]).dot(e) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (pts[i - 1] + f * e)).squaredNorm());
  }
  return std::sqrt(best);
}

Eigen::Vector2d MovingDistractor::position(double s) const {
  const double len = (b - a).norm();
  if (len <= 0.0) return a;
  const double cycle = std::fmod(s, 2.0 * len);
  const double along = cycle <= len ? cycle : 2.0 * len - cycle;
  return a + (along / len) * (b - a);
}

const std::vector<Eigen::Vector3d>& target_palette(TargetSplit split) {
  static const std::vector<Eigen::Vector3d> train = {
      {0.85, 0.15, 0.15}, {0.90, 0.20, 0.10}, {0.78, 0.12, 0.20}, {0.92, 0.10, 0.12}, {0.75, 0.18, 0.10},
  };
  static const std::vector<Eigen::Vector3d> novel = {
      {0.88, 0.25, 0.18}, {0.70, 0.10, 0.12}, {0.95, 0.16, 0.08}, {0.80, 0.22, 0.25}, {0.83, 0.08, 0.05},
  };
  return split == TargetSplit::Train ? train : novel;
}

Eigen::Vector3d target_center(const Scene& scene, const TargetState& target) {
  return {target.position.x(), target.position.y(), scene.target_half.z()};
}

OrientedBox target_box(const Scene& scene, const TargetState& target) {
  OrientedBox box;
  box.center = target_center(scene, target);
  box.yaw = target.heading;
  box.half = scene.target_half;
  box.color = scene.target_color;
  return box;
}

namespace {

struct ScreenRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

ScreenRect project_box_rect(const OrientedBox& box, const CameraPose& cam, const SimParams& params) {
  const Eigen::Matrix3d R = camera_rotation(cam, params.camera_pitch);
  const double s = std::tan(0.5 * params.vertical_fov);
  const int W = params.resolution;
  double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
  const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d local((i & 1 ? box.half.x() : -box.half.x()), (i & 2 ? box.half.y() : -box.half.y()),
                                (i & 4 ? box.half.z() : -box.half.z()));
    const Eigen::Vector3d world = box.center + Eigen::Vector3d(cy * local.x() - sy * local.y(),
                                                               sy * local.x() + cy * local.y(), local.z());
    const Eigen::Vector3d p = R.transpose() * (world - cam.position);
    if (p.z() < 0.05) {  // corner near or behind the image plane: no safe bound
      ScreenRect full;
      full.x0 = 0;
      full.y0 = 0;
      full.x1 = W - 1;
      full.y1 = W - 1;
      return full;
    }
    const double px = (p.x() / p.z() / s + 1.0) * 0.5 * W;
    const double py = (p.y() / p.z() / s + 1.0) * 0.5 * W;
    xmin = std::min(xmin, px);
    xmax = std::max(xmax, px);
    ymin = std::min(ymin, py);
    ymax = std::max(ymax, py);
  }
  ScreenRect rect;
  rect.x0 = std::max(0, static_cast<int>(std::floor(xmin)) - 1);
  rect.y0 = std::max(0, static_cast<int>(std::floor(ymin)) - 1);
  rect.x1 = std::min(W - 1, static_cast<int>(std::ceil(xmax)) + 1);
  rect.y1 = std::min(W - 1, static_cast<int>(std::ceil(ymax)) + 1);
  return rect;
}

// slab test in the box frame; returns entry distance or infinity
double ray_box_hit(const OrientedBox& box, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
  auto to_local = [&](const Eigen::Vector3d& v) {
    return Eigen::Vector3d(cy * v.x() + sy * v.y(), -sy * v.x() + cy * v.y(), v.z());
  };
  const Eigen::Vector3d p = to_local(origin - box.center);
  const Eigen::Vector3d d = to_local(dir);
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-12) {
      if (std::abs(p[i]) > box.half[i]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double lo = (-box.half[i] - p[i]) / d[i];
    double hi = (box.half[i] - p[i]) / d[i];
    if (lo > hi) std::swap(lo, hi);
    tmin = std::max(tmin, lo);
    tmax = std::min(tmax, hi);
    if (tmin > tmax) return std::numeric_limits<double>::infinity();
  }
  return tmin > 1e-9 ? tmin : std::numeric_limits<double>::infinity();
}

std::vector<OrientedBox> scene_boxes(const Scene& scene, const WorldState& world) {
  std::vector<OrientedBox> boxes;
  boxes.reserve(scene.clutter.size() + 2);
  boxes.push_back(target_box(scene, world.target));
  for (const OrientedBox& b : scene.clutter) boxes.push_back(b);
  OrientedBox mover;
  const Eigen::Vector2d mp = scene.mover.position(world.mover_s);
  mover.center = {mp.x(), mp.y(), scene.mover.half.z()};
  const Eigen::Vector2d md = scene.mover.b - scene.mover.a;
  mover.yaw = std::atan2(md.y(), md.x());
  mover.half = scene.mover.half;
  mover.color = scene.mover.color;
  boxes.push_back(mover);
  return boxes;
}

}  // namespace

Observation render(const Scene& scene, const WorldState& world, const SimParams& params) {
  const int W = params.resolution;
  const int ss = std::max(1, params.supersample);
  Observation obs(3, W, W);
  const Eigen::Matrix3d R = camera_rotation(world.camera, params.camera_pitch);
  const Eigen::Vector3d right = R.col(0), down = R.col(1), fwd = R.col(2);
  const Eigen::Vector3d origin = world.camera.position;
  const double s = std::tan(0.5 * params.vertical_fov);

  const std::vector<OrientedBox> boxes = scene_boxes(scene, world);
  std::vector<ScreenRect> rects;
  rects.reserve(boxes.size());
  for (const OrientedBox& b : boxes) rects.push_back(project_box_rect(b, world.camera, params));

  const double inv_samples = 1.0 / static_cast<double>(ss * ss);
  std::vector<int> candidates;
  candidates.reserve(boxes.size());
  for (int v = 0; v < W; ++v) {
    for (int u = 0; u < W; ++u) {
      candidates.clear();
      for (size_t bi = 0; bi < boxes.size(); ++bi)
        if (rects[bi].contains(u, v)) candidates.push_back(static_cast<int>(bi));
      Eigen::Vector3d accum = Eigen::Vector3d::Zero();
      for (int a = 0; a < ss; ++a) {
        for (int b = 0; b < ss; ++b) {
          const double px = u + (b + 0.5) / ss;
          const double py = v + (a + 0.5) / ss;
          const double xn = s * (2.0 * px / W - 1.0);
          const double yn = s * (2.0 * py / W - 1.0);
          const Eigen::Vector3d dir = xn * right + yn * down + fwd;
          double t_best = std::numeric_limits<double>::infinity();
          Eigen::Vector3d color = scene.sky_color;
          if (dir.z() < -1e-12) {
            t_best = -origin.z() / dir.z();
            const Eigen::Vector2d g(origin.x() + t_best * dir.x(), origin.y() + t_best * dir.y());
            color = scene.path.distance(g) <= scene.road_half_width ? scene.road_color : scene.ground_color;
          }
          for (const int bi : candidates) {
            const double t_hit = ray_box_hit(boxes[static_cast<size_t>(bi)], origin, dir);
            if (t_hit < t_best) {
              t_best = t_hit;
              color = boxes[static_cast<size_t>(bi)].color;
            }
          }
          accum += color;
        }
      }
      accum *= inv_samples;
      obs.at(0, v, u) = accum.x();
      obs.at(1, v, u) = accum.y();
      obs.at(2, v, u) = accum.z();
    }
  }
  return obs;
}

FeaturePointSet target_bbox_features(const Scene& scene, const WorldState& world, const SimParams& params) {
  FeaturePointSet fps;
  const OrientedBox box = target_box(scene, world.target);
  const double cy = std::cos(box.yaw), sy = std::sin(box.yaw);
  double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d local((i & 1 ? box.half.x() : -box.half.x()), (i & 2 ? box.half.y() : -box.half.y()),
                                (i & 4 ? box.half.z() : -box.half.z()));
    const Eigen::Vector3d world_pt = box.center + Eigen::Vector3d(cy * local.x() - sy * local.y(),
                                                                  sy * local.x() + cy * local.y(), local.z());
    const Eigen::Vector3d p = world_to_camera(world.camera, params.camera_pitch, world_pt);
    if (p.z() <= 1e-6) return fps;  // box partially behind the camera
    xmin = std::min(xmin, p.x() / p.z());
    xmax = std::max(xmax, p.x() / p.z());
    ymin = std::min(ymin, p.y() / p.z());
    ymax = std::max(ymax, p.y() / p.z());
  }
  const double depth = world_to_camera(world.camera, params.camera_pitch, box.center).z();
  fps.points.row(0) << xmin, ymin;
  fps.points.row(1) << xmax, ymin;
  fps.points.row(2) << xmax, ymax;
  fps.points.row(3) << xmin, ymax;
  fps.depths.setConstant(depth);
  fps.valid = true;
  return fps;
}

DeskEnv::DeskEnv(SimParams params) : params_(std::move(params)) {}

void DeskEnv::reset(std::uint64_t scenario_seed, ResetMode mode) {
  Rng rng(scenario_seed);
  scene_ = Scene{};
  scene_.ground_color = {0.30, 0.55, 0.30};
  scene_.road_color = {0.45, 0.45, 0.48};
  scene_.sky_color = {0.60, 0.75, 0.92};

  // target path: a handful of gently turning road segments
  scene_.path.pts.clear();
  Eigen::Vector2d p(0.0, 0.0);
  double heading = rng.uniform(0.0, 2.0 * M_PI);
  scene_.path.pts.push_back(p);
  for (int i = 0; i < 8; ++i) {
    const double len = rng.uniform(15.0, 30.0);
    p += len * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    scene_.path.pts.push_back(p);
    heading += rng.uniform(-M_PI / 4.0, M_PI / 4.0);
  }
  scene_.path.rebuild();

  world_ = WorldState{};
  world_.target.path_s = rng.uniform(2.0, 8.0);
  world_.target.position = scene_.path.point_at(world_.target.path_s);
  const Eigen::Vector2d dir0 = scene_.path.direction_at(world_.target.path_s);
  world_.target.heading = std::atan2(dir0.y(), dir0.x());

  const auto& palette = target_palette(params_.split);
  scene_.target_color = palette[rng.uniform_index(palette.size())];

  // static clutter drawn from the same palette family as the backdrop
  static const Eigen::Vector3d kBlue(0.15, 0.25, 0.85);
  static const Eigen::Vector3d kYellow(0.90, 0.80, 0.15);
  static const Eigen::Vector3d kGreen(0.20, 0.65, 0.20);
  const Eigen::Vector3d bases[6] = {kBlue, kYellow, kGreen, kBlue, kYellow, kBlue};
  const bool is_pole[6] = {false, true, false, false, true, false};
  scene_.clutter.clear();
  for (int i = 0; i < 6; ++i) {
    const double s_i = std::clamp(world_.target.path_s + rng.uniform(-10.0, 45.0), 0.0, scene_.path.total);
    const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
    const double lateral = rng.uniform(4.0, 16.0);
    const Eigen::Vector2d at = scene_.path.point_at(s_i);
    const Eigen::Vector2d d = scene_.path.direction_at(s_i);
    const Eigen::Vector2d perp(-d.y(), d.x());
    OrientedBox box;
    if (is_pole[i]) {
      box.half = {0.45, 0.45, rng.uniform(3.0, 5.0)};
    } else {
      box.half = {rng.uniform(1.2, 2.0), rng.uniform(1.2, 2.0), rng.uniform(1.2, 2.0)};
    }
    const Eigen::Vector2d c2 = at + side * lateral * perp;
    box.center = {c2.x(), c2.y(), box.half.z()};
    box.yaw = std::atan2(d.y(), d.x());
    for (int ch = 0; ch < 3; ++ch)
      box.color[ch] = std::clamp(bases[i][ch] + rng.uniform(-0.06, 0.06), 0.0, 1.0);
    scene_.clutter.push_back(box);
  }

  // one distractor shuttling across the road ahead of the target
  {
    const double s_m = std::clamp(world_.target.path_s + rng.uniform(8.0, 20.0), 0.0, scene_.path.total);
    const Eigen::Vector2d at = scene_.path.point_at(s_m);
    const Eigen::Vector2d d = scene_.path.direction_at(s_m);
    const Eigen::Vector2d perp(-d.y(), d.x());
    scene_.mover.a = at - 8.0 * perp;
    scene_.mover.b = at + 8.0 * perp;
    scene_.mover.speed = 1.0;
    scene_.mover.half = {1.25, 1.25, 1.25};
    for (int ch = 0; ch < 3; ++ch)
      scene_.mover.color[ch] = std::clamp(kBlue[ch] + rng.uniform(-0.06, 0.06), 0.0, 1.0);
    world_.mover_s = rng.uniform(0.0, 32.0);
  }

  // camera on a cylinder around the target, aimed so the target sits on the
  // optical axis; the fixed pitch determines the radius for a given height
  const double azimuth = mode == ResetMode::Evaluation ? 0.0 : rng.uniform(-M_PI / 2.0, M_PI / 2.0);
  const double height = mode == ResetMode::Evaluation ? 15.0 : rng.uniform(12.0, 18.0);
  const Eigen::Vector3d t_center = target_center(scene_, world_.target);
  const double radius = (height - t_center.z()) / std::tan(-params_.camera_pitch);
  const double dir_angle = world_.target.heading + M_PI + azimuth;
  world_.camera.position = {t_center.x() + radius * std::cos(dir_angle),
                            t_center.y() + radius * std::sin(dir_angle), height};
  world_.camera.yaw = std::atan2(t_center.y() - world_.camera.position.y(),
                                 t_center.x() - world_.camera.position.x());

  world_.t = 0;
  status_ = Termination::None;
  warned_clip_ = false;

  const Eigen::Vector3d p0 = target_in_camera();
  goal_.pz_star = p0.z();
  goal_.p_star = {0.0, 0.0, goal_.pz_star};
  goal_.relative_yaw = wrap_angle(world_.target.heading - world_.camera.yaw);
  goal_.camera = world_.camera;
  goal_.features = current_bbox();
  prev_cost_ = static_cost(p0, goal_.pz_star);

  goal_obs_ = render(scene_, world_, params_);
  obs_cache_ = goal_obs_;
  obs_cached_ = true;
  initialized_ = true;
}

const Observation& DeskEnv::observation() const {
  if (!obs_cached_) {
    obs_cache_ = render(scene_, world_, params_);
    obs_cached_ = true;
  }
  return obs_cache_;
}

Eigen::Vector3d DeskEnv::target_in_camera() const {
  return world_to_camera(world_.camera, params_.camera_pitch, target_center(scene_, world_.target));
}

double DeskEnv::heading_error() const { return wrap_angle(world_.target.heading - world_.camera.yaw); }

TargetState DeskEnv::peek_target_next() const {
  TargetState next = world_.target;
  next.path_s = std::min(next.path_s + params_.target_speed * params_.dt, scene_.path.total);
  next.position = scene_.path.point_at(next.path_s);
  const Eigen::Vector2d d = scene_.path.direction_at(next.path_s);
  next.heading = std::atan2(d.y(), d.x());
  return next;
}

FeaturePointSet DeskEnv::next_bbox_static_camera() const {
  WorldState w = world_;
  w.target = peek_target_next();
  return target_bbox_features(scene_, w, params_);
}

void DeskEnv::advance(const Action& u_in) {
  if (!initialized_) throw std::logic_error("DeskEnv: advance before reset");
  if (static_cast<int>(u_in.size()) != 4) throw std::invalid_argument("DeskEnv: action must have 4 coordinates");
  Action u = u_in;
  for (int j = 0; j < 4; ++j) {
    if (std::abs(u[j]) > 1.0 + 1e-12 && !warned_clip_) {
      std::fprintf(stderr, "warning: action outside [-1, 1], clipping\n");
      warned_clip_ = true;
    }
    u[j] = std::clamp(u[j], -1.0, 1.0);
  }
  const Twist twist = action_to_twist(u, world_.camera.yaw, params_);
  world_.camera = apply_twist(world_.camera, twist, params_.dt);
  world_.target.path_s = std::min(world_.target.path_s + params_.target_speed * params_.dt, scene_.path.total);
  world_.target.position = scene_.path.point_at(world_.target.path_s);
  const Eigen::Vector2d d = scene_.path.direction_at(world_.target.path_s);
  world_.target.heading = std::atan2(d.y(), d.x());
  world_.mover_s += scene_.mover.speed * params_.dt;
  world_.t += 1;
  obs_cached_ = false;
}

StepOutcome DeskEnv::step(const Action& u) {
  if (done()) throw std::logic_error("DeskEnv: step after episode end");
  advance(u);
  const CostOutcome co =
      step_cost(target_in_camera(), goal_.pz_star, params_.tau, world_.t, params_.horizon, prev_cost_,
                params_.vertical_fov);
  StepOutcome out;
  out.cost = co.cost;
  out.reason = co.reason;
  if (!out.absorbing()) prev_cost_ = out.cost;
  status_ = co.reason;
  return out;
}

RolloutResult rollout(DeskEnv& env, const Controller& controller, std::uint64_t scenario_seed, ResetMode mode) {
  env.reset(scenario_seed, mode);
  RolloutResult result;
  while (!env.done()) {
    const Action u = controller(env);
    const StepOutcome out = env.step(u);
    result.total_cost += out.cost;
    result.costs.push_back(out.cost);
    result.steps += 1;
    result.end = out.reason;
  }
  return result;
}

TrajectoryDataset generate_dataset(const SimParams& params, int n_traj, int horizon, std::uint64_t seed,
                                   const Featurizer& featurizer, double noise_sigma, double proportional_gain) {
  if (n_traj <= 0 || horizon <= 0) throw std::invalid_argument("generate_dataset: counts must be positive");
  TrajectoryDataset ds;
  ds.n_traj = n_traj;
  ds.horizon = horizon;
  ds.channels = 3;
  ds.height = params.resolution;
  ds.width = params.resolution;
  ds.control_dim = 4;
  ds.featurizer_id = featurizer.id();
  ds.seed = seed;
  ds.allocate();

  DeskEnv env(params);
  for (int i = 0; i < n_traj; ++i) {
    env.reset(sub_seed(seed, "scenario", static_cast<std::uint64_t>(i)), ResetMode::DataCollection);
    Rng ctrl(sub_seed(seed, "controller", static_cast<std::uint64_t>(i)));
    // viewpoint to hold, expressed relative to the moving target
    const double az_d = ctrl.uniform(-M_PI / 2.0, M_PI / 2.0);
    const double h_d = ctrl.uniform(12.0, 18.0);
    ds.set_frame(i, 0, env.observation());
    for (int t = 0; t < horizon; ++t) {
      const Eigen::Vector3d t_center = target_center(env.scene(), env.world().target);
      const double radius = (h_d - t_center.z()) / std::tan(-params.camera_pitch);
      const double dir_angle = env.world().target.heading + M_PI + az_d;
      const Eigen::Vector3d pos_des(t_center.x() + radius * std::cos(dir_angle),
                                    t_center.y() + radius * std::sin(dir_angle), h_d);
      const double yaw_des = std::atan2(t_center.y() - pos_des.y(), t_center.x() - pos_des.x());
      const Eigen::Vector3d v = proportional_gain * (pos_des - env.world().camera.position);
      const double yaw_rate = proportional_gain * wrap_angle(yaw_des - env.world().camera.yaw);
      Action u = twist_to_action(v, yaw_rate, env.world().camera.yaw, params);
      for (int j = 0; j < 4; ++j) u[j] = std::clamp(u[j] + ctrl.normal(0.0, noise_sigma), -1.0, 1.0);
      ds.set_action(i, t, u);
      env.advance(u);
      ds.set_frame(i, t + 1, env.observation());
    }
  }

  const int frames_per_traj = horizon + 1;
  ds.standardizer = fit_standardizer(
      n_traj * frames_per_traj,
      [&](int idx) { return ds.frame(idx / frames_per_traj, idx % frames_per_traj); }, featurizer);
  return ds;
}

}  // namespace servo
