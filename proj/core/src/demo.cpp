#include "locoforge/demo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "locoforge/dynamics.hpp"

namespace locoforge {

namespace {

constexpr const char* kMagic = "# locoforge-demo v1";
constexpr const char* kColumns = "x,z,th,qfh,qfk,qbh,qbk,vx,vz,vth,dqfh,dqfk,dqbh,dqbk";
constexpr int kColumnCount = 14;

const char* column_name(int i) {
  static const char* names[kColumnCount] = {"x",  "z",  "th",   "qfh",  "qfk",
                                            "qbh", "qbk", "vx",  "vz",   "vth",
                                            "dqfh", "dqfk", "dqbh", "dqbk"};
  return names[i];
}

// closure tolerance is measured in these per-column scales
double column_scale(int i) { return i < 7 ? 1.0 : 10.0; }

}  // namespace

std::string task_name(Task task) {
  return task == Task::Hopping ? "hopping" : "bounding";
}

Task parse_task(const std::string& name) {
  if (name == "hopping") return Task::Hopping;
  if (name == "bounding") return Task::Bounding;
  throw std::runtime_error("unknown task '" + name + "' (expected hopping|bounding)");
}

void DemoTrajectory::validate(double closure_tol) const {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("DemoTrajectory: " + what);
  };
  if (frames.size() < 2) fail("needs at least 2 frames");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive and finite");
  for (size_t f = 0; f < frames.size(); ++f) {
    for (int i = 0; i < kNumDof; ++i) {
      if (!std::isfinite(frames[f].q[i]))
        fail("non-finite value at frame " + std::to_string(f) + ", column " +
             column_name(i));
      if (!std::isfinite(frames[f].v[i]))
        fail("non-finite value at frame " + std::to_string(f) + ", column " +
             column_name(7 + i));
    }
  }
  if (cyclic) {
    const DemoFrame& a = frames.front();
    const DemoFrame& b = frames.back();
    for (int i = 0; i < kNumDof; ++i) {
      if (std::abs(a.q[i] - b.q[i]) / column_scale(i) > closure_tol)
        fail(std::string("cyclic closure violated in column ") + column_name(i));
      if (std::abs(a.v[i] - b.v[i]) / column_scale(7 + i) > closure_tol)
        fail(std::string("cyclic closure violated in column ") + column_name(7 + i));
    }
  }
}

int DemoTrajectory::wrap_index(long long index) const {
  const int n = cycle_length();
  if (cyclic) {
    long long m = index % n;
    if (m < 0) m += n;
    return static_cast<int>(m);
  }
  return static_cast<int>(std::clamp<long long>(index, 0, frame_count() - 1));
}

Vec4 DemoTrajectory::mean_joint_posture() const {
  Vec4 mean = Vec4::Zero();
  for (const auto& f : frames) mean += f.q.tail<4>();
  return mean / static_cast<double>(frames.size());
}

double DemoTrajectory::mean_base_height() const {
  double z = 0.0;
  for (const auto& f : frames) z += f.q[1];
  return z / static_cast<double>(frames.size());
}

DemoTrajectory load_demo(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_demo: cannot open " + path);

  auto parse_fail = [&](int line, const std::string& what) {
    throw std::runtime_error("load_demo: " + path + ":" + std::to_string(line) + ": " +
                             what);
  };

  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    parse_fail(1, std::string("expected '") + kMagic + "'");

  if (!std::getline(is, line)) parse_fail(2, "missing metadata line");
  char task_buf[32] = {0};
  double dt = 0.0;
  int cyclic_flag = -1;
  if (std::sscanf(line.c_str(), "task=%31[a-z],dt=%lf,cyclic=%d", task_buf, &dt,
                  &cyclic_flag) != 3 ||
      (cyclic_flag != 0 && cyclic_flag != 1))
    parse_fail(2, "expected 'task=<hopping|bounding>,dt=<float>,cyclic=<0|1>'");

  DemoTrajectory demo;
  demo.task = parse_task(task_buf);
  demo.dt = dt;
  demo.cyclic = cyclic_flag == 1;

  if (!std::getline(is, line) || line != kColumns)
    parse_fail(3, std::string("expected column header '") + kColumns + "'");

  int lineno = 3;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    DemoFrame frame;
    const char* p = line.c_str();
    for (int c = 0; c < kColumnCount; ++c) {
      char* end = nullptr;
      const double value = std::strtod(p, &end);
      if (end == p)
        parse_fail(lineno, std::string("cannot parse column ") + column_name(c) +
                               " (column " + std::to_string(c + 1) + ")");
      if (c < 7) frame.q[c] = value;
      else frame.v[c - 7] = value;
      p = end;
      if (c + 1 < kColumnCount) {
        if (*p != ',')
          parse_fail(lineno, "expected ',' after column " + std::to_string(c + 1));
        ++p;
      }
    }
    while (*p == ' ' || *p == '\r') ++p;
    if (*p != '\0') parse_fail(lineno, "trailing characters after 14 columns");
    demo.frames.push_back(frame);
  }

  demo.validate();
  return demo;
}

void save_demo(const DemoTrajectory& demo, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_demo: cannot open " + path);
  os << kMagic << "\n";
  char meta[96];
  std::snprintf(meta, sizeof(meta), "task=%s,dt=%.17g,cyclic=%d",
                task_name(demo.task).c_str(), demo.dt, demo.cyclic ? 1 : 0);
  os << meta << "\n" << kColumns << "\n";
  char buf[32];
  for (const auto& frame : demo.frames) {
    for (int c = 0; c < kColumnCount; ++c) {
      const double value = c < 7 ? frame.q[c] : frame.v[c - 7];
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      os << (c > 0 ? "," : "") << buf;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("save_demo: write failed for " + path);
}

double knee_sign(Foot foot) { return foot == Foot::Front ? 1.0 : -1.0; }

Vec2 leg_inverse_kinematics(const PlanarModel& model, const Vec2& target,
                            double knee_sign) {
  const double l1 = model.upper_leg_length, l2 = model.lower_leg_length;
  const double r = target.norm();
  if (r > l1 + l2 + 1e-12 || r < std::abs(l1 - l2) - 1e-12 || r < 1e-9)
    throw std::runtime_error("leg_inverse_kinematics: target out of reach (r=" +
                             std::to_string(r) + ")");

  const double phi = std::atan2(target.x(), -target.y());
  const double cos_gamma =
      std::clamp((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r), -1.0, 1.0);
  const double cos_beta =
      std::clamp((l1 * l1 + l2 * l2 - r * r) / (2.0 * l1 * l2), -1.0, 1.0);
  const double gamma = std::acos(cos_gamma);
  const double beta = std::acos(cos_beta);
  return Vec2(phi + knee_sign * gamma, knee_sign * (beta - M_PI));
}

namespace {

// d(foot position relative to hip, base frame)/d(hip, knee)
Mat2 leg_jacobian_rel(const PlanarModel& model, double qh, double qk) {
  const Vec2 d_upper = drot2(qh) * Vec2(0.0, -model.upper_leg_length);
  const Vec2 d_lower = drot2(qh + qk) * Vec2(0.0, -model.lower_leg_length);
  Mat2 jac;
  jac.col(0) = d_upper + d_lower;
  jac.col(1) = d_lower;
  return jac;
}

void set_leg(DemoFrame& frame, Foot foot, const Vec2& angles, const Vec2& rates) {
  const int base = foot == Foot::Front ? 3 : 5;
  frame.q[base] = angles[0];
  frame.q[base + 1] = angles[1];
  frame.v[base] = rates[0];
  frame.v[base + 1] = rates[1];
}

// joint angles + velocities from a relative foot target and its time derivative
std::pair<Vec2, Vec2> leg_track(const PlanarModel& model, Foot foot, const Vec2& rel,
                                const Vec2& rel_dot) {
  const Vec2 angles = leg_inverse_kinematics(model, rel, knee_sign(foot));
  const Mat2 jac = leg_jacobian_rel(model, angles[0], angles[1]);
  Vec2 rates = Vec2::Zero();
  const double det = jac.determinant();
  if (std::abs(det) > 1e-9) rates = jac.inverse() * rel_dot;
  return {angles, rates};
}

}  // namespace

DemoTrajectory synthesize_hop_demo(double apex_height, double stance_depth,
                                   double period, double dt,
                                   const PlanarModel& model) {
  if (dt <= 0.0) throw std::invalid_argument("synthesize_hop_demo: dt must be positive");
  if (period <= 0.0) throw std::invalid_argument("synthesize_hop_demo: period must be positive");
  const double g = model.gravity;
  const double stand = 0.84 * model.leg_reach();
  if (apex_height <= stand + 1e-6)
    throw std::invalid_argument("synthesize_hop_demo: apex must exceed standing height " +
                                std::to_string(stand));

  // quantize flight so the apex lands exactly on a frame
  const double v_lift0 = std::sqrt(2.0 * g * (apex_height - stand));
  const int n_half = std::max(1, static_cast<int>(std::lround(v_lift0 / (g * dt))));
  const double v_lift = g * dt * n_half;
  const double apex = stand + 0.5 * v_lift * v_lift / g;

  const int n_stance = static_cast<int>(std::lround((period - 2.0 * n_half * dt) / dt));
  if (n_stance < 2)
    throw std::invalid_argument("synthesize_hop_demo: period too short for the flight phase");
  const double t_stance = n_stance * dt;

  // stance curve z(u) = stand - a(1-cos(2 pi u))/2 - b sin(pi u), u in [0,1]:
  // b matches the lift-off speed, a tops up the requested depth
  const double b = v_lift * t_stance / M_PI;
  const double a = stance_depth - b;
  if (a < 0.0)
    throw std::invalid_argument(
        "synthesize_hop_demo: stance_depth too small for the lift-off speed (needs >= " +
        std::to_string(b) + ")");
  if (stand - stance_depth < 0.3 * model.leg_reach())
    throw std::invalid_argument("synthesize_hop_demo: stance too deep for leg workspace");

  const int total = 2 * n_half + n_stance;
  DemoTrajectory demo;
  demo.dt = dt;
  demo.task = Task::Hopping;
  demo.cyclic = true;
  demo.frames.reserve(total + 1);

  for (int i = 0; i < total; ++i) {
    double z, vz;
    if (i <= n_half) {  // descending flight from the apex
      const double t = i * dt;
      z = apex - 0.5 * g * t * t;
      vz = -g * t;
    } else if (i <= n_half + n_stance) {  // stance
      const double u = (i - n_half) * dt / t_stance;
      z = stand - 0.5 * a * (1.0 - std::cos(2.0 * M_PI * u)) - b * std::sin(M_PI * u);
      vz = (-a * M_PI * std::sin(2.0 * M_PI * u) - b * M_PI * std::cos(M_PI * u)) / t_stance;
    } else {  // ascending flight back to the apex
      const double t = (i - n_half - n_stance) * dt;
      z = stand + v_lift * t - 0.5 * g * t * t;
      vz = v_lift - g * t;
    }

    DemoFrame frame;
    frame.q[1] = z;
    frame.v[1] = vz;
    const bool in_stance = i > n_half && i < n_half + n_stance;
    for (Foot foot : {Foot::Front, Foot::Back}) {
      // feet pinned under the hips during stance, held at stand length in flight
      const Vec2 rel = in_stance ? Vec2(0.0, -z) : Vec2(0.0, -stand);
      const Vec2 rel_dot = in_stance ? Vec2(0.0, -vz) : Vec2(0.0, 0.0);
      auto [angles, rates] = leg_track(model, foot, rel, rel_dot);
      set_leg(frame, foot, angles, rates);
    }
    demo.frames.push_back(frame);
  }
  demo.frames.push_back(demo.frames.front());  // exact cycle closure

  demo.validate();
  return demo;
}

DemoTrajectory synthesize_bound_demo(double pitch_amplitude, double hop_height,
                                     double period, double dt,
                                     const PlanarModel& model) {
  if (dt <= 0.0) throw std::invalid_argument("synthesize_bound_demo: dt must be positive");
  const int quarter = std::max(1, static_cast<int>(std::lround(period / (4.0 * dt))));
  const int total = 4 * quarter;  // pitch extrema land exactly on frames
  const double cycle_time = total * dt;

  const double z0 = 0.78 * model.leg_reach();
  const double lift = 0.02;
  const double s_touchdown = 0.05, s_liftoff = 0.45;  // back-leg stance window

  // base trajectory in cycle phase s
  auto base_z = [&](double s) { return z0 + 0.5 * hop_height * (1.0 + std::cos(4.0 * M_PI * s)); };
  auto base_z_ds = [&](double s) { return -2.0 * M_PI * hop_height * std::sin(4.0 * M_PI * s); };
  auto base_th = [&](double s) { return pitch_amplitude * std::sin(2.0 * M_PI * s); };
  auto base_th_ds = [&](double s) { return 2.0 * M_PI * pitch_amplitude * std::cos(2.0 * M_PI * s); };

  DemoTrajectory demo;
  demo.dt = dt;
  demo.task = Task::Bounding;
  demo.cyclic = true;
  demo.frames.reserve(total + 1);

  for (int i = 0; i < total; ++i) {
    const double s = static_cast<double>(i) / total;
    DemoFrame frame;
    frame.q[1] = base_z(s);
    frame.q[2] = base_th(s);
    frame.v[1] = base_z_ds(s) / cycle_time;
    frame.v[2] = base_th_ds(s) / cycle_time;

    for (Foot foot : {Foot::Front, Foot::Back}) {
      // the front leg runs the same schedule half a period later
      const double shift = foot == Foot::Front ? 0.5 : 0.0;
      double sf = s - shift;
      sf -= std::floor(sf);
      const Vec2 offset = foot == Foot::Front ? model.front_hip_offset : model.back_hip_offset;
      const double anchor_x = offset.x();  // foot planted under the nominal hip

      // world-frame foot target: pinned during stance, clearance arc in swing
      Vec2 foot_w, foot_w_dt;
      if (sf >= s_touchdown && sf <= s_liftoff) {
        foot_w = Vec2(anchor_x, 0.0);
        foot_w_dt = Vec2::Zero();
      } else {
        double u = (sf - s_liftoff) / (1.0 - (s_liftoff - s_touchdown));
        u -= std::floor(u);
        foot_w = Vec2(anchor_x, lift * std::sin(M_PI * u));
        const double du_ds = 1.0 / (1.0 - (s_liftoff - s_touchdown));
        foot_w_dt = Vec2(0.0, lift * M_PI * std::cos(M_PI * u) * du_ds / cycle_time);
      }

      const double th = frame.q[2], thd = frame.v[2];
      const Vec2 hip_w = Vec2(0.0, frame.q[1]) + rot2(th) * offset;
      const Vec2 hip_w_dt = Vec2(0.0, frame.v[1]) + thd * (drot2(th) * offset);
      Vec2 rel = rot2(th).transpose() * (foot_w - hip_w);
      Vec2 rel_dot = rot2(th).transpose() * (foot_w_dt - hip_w_dt) +
                     thd * (drot2(th).transpose() * (foot_w - hip_w));

      // swing targets just outside the workspace are pulled radially inward;
      // stance targets must be exactly reachable
      const double reach = 0.995 * model.leg_reach();
      if (rel.norm() > reach) {
        const bool in_stance = sf >= s_touchdown && sf <= s_liftoff;
        if (in_stance)
          throw std::runtime_error("synthesize_bound_demo: stance foot target out of reach");
        const double scale = reach / rel.norm();
        rel *= scale;
        rel_dot *= scale;
      }
      auto [angles, rates] = leg_track(model, foot, rel, rel_dot);
      set_leg(frame, foot, angles, rates);
    }
    demo.frames.push_back(frame);
  }
  demo.frames.push_back(demo.frames.front());  // exact cycle closure

  demo.validate();
  return demo;
}

std::pair<int, RobotState> sample_demo_point(const DemoTrajectory& demo,
                                             RandomEngine& rng) {
  const int index = static_cast<int>(rng.uniform_index(demo.frames.size()));
  RobotState state;
  state.q = demo.frames[index].q;
  state.v = demo.frames[index].v;
  state.t = 0.0;
  return {index, state};
}

double nearest_path_distance(const DemoTrajectory& demo, double z_base, double pitch) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& frame : demo.frames) {
    const double dz = frame.q[1] - z_base;
    const double dth = frame.q[2] - pitch;
    best = std::min(best, std::hypot(dz, dth));
  }
  return best;
}

}  // namespace locoforge
