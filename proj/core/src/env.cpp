#include "locoforge/env.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace locoforge {

void EnvConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("EnvConfig: ") + what);
  };
  require(stage == 1 || stage == 2, "stage must be 1 or 2");
  require(control_dt > 0.0, "control_dt must be positive");
  require(substeps >= 1, "substeps must be >= 1");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(tilt_limit > 0.0, "tilt_limit must be positive");
  require(init_height_lo <= init_height_hi, "init height range must be ordered");
  require(init_tilt >= 0.0 && init_joint_perturb >= 0.0, "init ranges must be >= 0");
  require(ground_height_lo <= ground_height_hi, "ground height range must be ordered");
  require(friction_lo <= friction_hi, "friction range must be ordered");
}

EnvConfig EnvConfig::defaults_for(Task task, int stage) {
  EnvConfig cfg;
  cfg.task = task;
  cfg.stage = stage;
  if (task == Task::Bounding) {
    cfg.tilt_limit = 1.2;
    cfg.init_tilt = 0.9;
  }
  return cfg;
}

int observation_dim(Task task) { return task == Task::Hopping ? 10 : 12; }

ObservationScales ObservationScales::defaults_for(Task task) {
  const int dim = observation_dim(task);
  ObservationScales s;
  s.offset = Eigen::VectorXd::Zero(dim);
  s.scale = Eigen::VectorXd::Ones(dim);
  s.offset[0] = 0.21;  // base height about standing
  s.scale[0] = 0.15;
  s.scale[1] = 1.5;  // base vertical velocity
  for (int j = 0; j < kNumJoints; ++j) {
    s.scale[2 + j] = 1.0;
    s.scale[6 + j] = 8.0;
  }
  if (task == Task::Bounding) {
    s.scale[10] = 0.5;  // pitch
    s.scale[11] = 4.0;  // pitch rate
  }
  return s;
}

Env::Env(PlanarModel model, PDGains gains, GroundModel nominal_ground,
         RewardWeights weights, DemoTrajectory demo, EnvConfig config)
    : model_(std::move(model)),
      gains_(std::move(gains)),
      nominal_ground_(nominal_ground),
      weights_(weights),
      demo_(std::move(demo)),
      config_(config),
      scales_(ObservationScales::defaults_for(config.task)) {
  model_.validate();
  gains_.validate();
  nominal_ground_.validate();
  weights_.validate();
  demo_.validate();
  config_.validate();
  if (demo_.task != config_.task)
    throw std::invalid_argument("Env: demo task does not match env task");

  const double ratio = config_.control_dt / demo_.dt;
  demo_steps_per_control_ = static_cast<int>(std::lround(ratio));
  if (demo_steps_per_control_ < 1 ||
      std::abs(ratio - demo_steps_per_control_) > 1e-9)
    throw std::invalid_argument(
        "Env: control_dt must be an integer multiple of the demo dt");
}

bool Env::fails_termination_check(const RobotState& s) const {
  if (std::abs(s.pitch()) > config_.tilt_limit) return true;
  for (Foot foot : {Foot::Front, Foot::Back})
    if (knee_position(model_, s, foot).y() < ground_.height) return true;
  for (const Vec2& corner : base_corners(model_, s))
    if (corner.y() < ground_.height) return true;
  return false;
}

void Env::begin_episode(const RobotState& state, const GroundModel& ground,
                        int demo_index) {
  state_ = state;
  ground_ = ground;
  episode_steps_ = 0;
  demo_start_index_ = demo_index;
  prev_torque_.setZero();
  has_prev_torque_ = false;
  terminated_ = false;
  truncated_ = false;
  needs_reset_ = false;
  trace_.clear();
  if (trace_enabled_) {
    TraceRow row;
    row.t = state_.t;
    row.state = state_;
    row.demo_index = demo_index;
    const ContactReport report = contact_forces(model_, state_, ground_);
    for (int i = 0; i < kNumFeet; ++i) {
      row.contact_flags[i] = report.feet[i].in_contact;
      row.contact_forces[i] = report.feet[i].force;
    }
    trace_.push_back(row);
  }
}

Eigen::VectorXd Env::reset(RandomEngine& rng) {
  if (config_.stage == 1) {
    auto [index, state] = sample_demo_point(demo_, rng);
    begin_episode(state, nominal_ground_, index);
    return observe();
  }

  // stage 2: wider initialization plus environment randomization, rejection
  // sampled so episodes never begin in a terminated or penetrating pose
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GroundModel ground = nominal_ground_;
    ground.height = rng.uniform(config_.ground_height_lo, config_.ground_height_hi);
    ground.friction_coeff = rng.uniform(config_.friction_lo, config_.friction_hi);
    if (try_randomized_pose(rng, ground)) return observe();
  }
  throw std::runtime_error("Env::reset: could not sample a valid initial state");
}

Eigen::VectorXd Env::reset_with_ground(RandomEngine& rng, const GroundModel& ground) {
  for (int attempt = 0; attempt < 1000; ++attempt)
    if (try_randomized_pose(rng, ground)) return observe();
  throw std::runtime_error("Env::reset_with_ground: could not sample a valid initial state");
}

bool Env::try_randomized_pose(RandomEngine& rng, const GroundModel& ground) {
  const Vec4 mean_posture = demo_.mean_joint_posture();
  RobotState state;
  state.q[1] = rng.uniform(config_.init_height_lo, config_.init_height_hi);
  state.q[2] = rng.uniform(-config_.init_tilt, config_.init_tilt);
  for (int j = 0; j < kNumJoints; ++j)
    state.q[3 + j] = mean_posture[j] +
                     rng.uniform(-config_.init_joint_perturb, config_.init_joint_perturb);

  bool feet_clear = true;
  for (Foot foot : {Foot::Front, Foot::Back})
    if (foot_kinematics(model_, state, foot).position.y() < ground.height)
      feet_clear = false;

  const GroundModel saved = ground_;
  ground_ = ground;
  const bool bad = fails_termination_check(state);
  ground_ = saved;
  if (!feet_clear || bad) return false;

  begin_episode(state, ground, 0);
  return true;
}

Eigen::VectorXd Env::reset_to(const RobotState& state, const GroundModel& ground) {
  begin_episode(state, ground, 0);
  return observe();
}

int Env::tracked_demo_index() const {
  return demo_.wrap_index(demo_start_index_ +
                          static_cast<long long>(episode_steps_) * demo_steps_per_control_);
}

StepResult Env::step(const Action& action) {
  if (needs_reset_ || terminated_ || truncated_)
    throw std::logic_error("Env::step: episode is done, call reset first");

  Action applied = action;
  applied.q_des = applied.q_des.cwiseMax(model_.joint_lower).cwiseMin(model_.joint_upper);

  const RobotState before = state_;
  const double dt = config_.control_dt / config_.substeps;

  Vec4 torque = pd_torques(gains_, applied, state_);
  if (!has_prev_torque_) {
    prev_torque_ = torque;  // tau(t-1) = tau(t) on the first step
    has_prev_torque_ = true;
  }

  bool blew_up = false;
  for (int k = 0; k < config_.substeps; ++k) {
    const Vec4 tau_sub = k == 0 ? torque : pd_torques(gains_, applied, state_);
    try {
      state_ = locoforge::step(model_, state_, tau_sub, ground_, dt);
    } catch (const std::runtime_error&) {
      blew_up = true;
      break;
    }
  }
  ++episode_steps_;

  StepResult result;
  result.applied_action = applied;
  result.torque = torque;
  result.contact = contact_forces(model_, state_, ground_);

  StepContext ctx;
  ctx.state = before;
  ctx.next_state = state_;
  ctx.action = applied;
  ctx.torque = torque;
  ctx.prev_torque = prev_torque_;
  ctx.contact = result.contact;
  ctx.demo = &demo_;
  ctx.demo_index = tracked_demo_index();

  result.breakdown = reward_breakdown(ctx, weights_, config_.task, config_.stage);
  result.reward = result.breakdown.total;

  terminated_ = blew_up || fails_termination_check(state_);
  truncated_ = !terminated_ && episode_steps_ >= config_.max_steps;
  result.terminated = terminated_;
  result.truncated = truncated_;
  result.observation = observe();

  prev_torque_ = torque;

  if (trace_enabled_) {
    TraceRow row;
    row.t = state_.t;
    row.state = state_;
    row.action = applied;
    row.torque = torque;
    row.breakdown = result.breakdown;
    for (int i = 0; i < kNumFeet; ++i) {
      row.contact_flags[i] = result.contact.feet[i].in_contact;
      row.contact_forces[i] = result.contact.feet[i].force;
    }
    row.demo_index = ctx.demo_index;
    trace_.push_back(row);
  }
  return result;
}

Eigen::VectorXd Env::observe() const {
  Eigen::VectorXd raw(obs_dim());
  raw[0] = state_.base_z();
  raw[1] = state_.v[1];
  raw.segment<4>(2) = state_.joints();
  raw.segment<4>(6) = state_.joint_velocities();
  if (config_.task == Task::Bounding) {
    raw[10] = state_.pitch();
    raw[11] = state_.v[2];
  }
  return scales_.normalize(raw);
}

namespace {

constexpr const char* kTraceHeader =
    "t,x,z,th,qfh,qfk,qbh,qbk,vx,vz,vth,dqfh,dqfk,dqbh,dqbk,"
    "a_fh,a_fk,a_bh,a_bk,tau_fh,tau_fk,tau_bh,tau_bk,"
    "r_tt,r_ti,r_hp,r_ps,r_ct,r_ts,r_bn,r_cc,r_total,"
    "contact_front,contact_back,ffx,ffz,fbx,fbz,demo_idx";
constexpr int kTraceColumns = 39;

}  // namespace

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
  os << kTraceHeader << "\n";
  char buf[32];
  auto put = [&](double v, bool first = false) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    if (!first) os << ",";
    os << buf;
  };
  for (const auto& row : trace) {
    put(row.t, true);
    for (int i = 0; i < kNumDof; ++i) put(row.state.q[i]);
    for (int i = 0; i < kNumDof; ++i) put(row.state.v[i]);
    for (int i = 0; i < kNumJoints; ++i) put(row.action.q_des[i]);
    for (int i = 0; i < kNumJoints; ++i) put(row.torque[i]);
    put(row.breakdown.tt);
    put(row.breakdown.ti);
    put(row.breakdown.hp);
    put(row.breakdown.ps);
    put(row.breakdown.ct);
    put(row.breakdown.ts);
    put(row.breakdown.bn);
    put(row.breakdown.cc);
    put(row.breakdown.total);
    put(row.contact_flags[0] ? 1.0 : 0.0);
    put(row.contact_flags[1] ? 1.0 : 0.0);
    put(row.contact_forces[0].x());
    put(row.contact_forces[0].y());
    put(row.contact_forces[1].x());
    put(row.contact_forces[1].y());
    put(static_cast<double>(row.demo_index));
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_trace_csv: write failed for " + path);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader)
    throw std::runtime_error("read_trace_csv: unexpected header in " + path);

  std::vector<TraceRow> trace;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    double vals[kTraceColumns];
    const char* p = line.c_str();
    for (int c = 0; c < kTraceColumns; ++c) {
      char* end = nullptr;
      vals[c] = std::strtod(p, &end);
      if (end == p)
        throw std::runtime_error("read_trace_csv: " + path + ":" +
                                 std::to_string(lineno) + ": bad column " +
                                 std::to_string(c + 1));
      p = end;
      if (c + 1 < kTraceColumns) {
        if (*p != ',')
          throw std::runtime_error("read_trace_csv: " + path + ":" +
                                   std::to_string(lineno) + ": expected ','");
        ++p;
      }
    }
    while (*p == ' ' || *p == '\r') ++p;
    if (*p != '\0')
      throw std::runtime_error("read_trace_csv: " + path + ":" + std::to_string(lineno) +
                               ": trailing characters");
    TraceRow row;
    int c = 0;
    row.t = vals[c++];
    for (int i = 0; i < kNumDof; ++i) row.state.q[i] = vals[c++];
    for (int i = 0; i < kNumDof; ++i) row.state.v[i] = vals[c++];
    for (int i = 0; i < kNumJoints; ++i) row.action.q_des[i] = vals[c++];
    for (int i = 0; i < kNumJoints; ++i) row.torque[i] = vals[c++];
    row.breakdown.tt = vals[c++];
    row.breakdown.ti = vals[c++];
    row.breakdown.hp = vals[c++];
    row.breakdown.ps = vals[c++];
    row.breakdown.ct = vals[c++];
    row.breakdown.ts = vals[c++];
    row.breakdown.bn = vals[c++];
    row.breakdown.cc = vals[c++];
    row.breakdown.total = vals[c++];
    row.contact_flags[0] = vals[c++] != 0.0;
    row.contact_flags[1] = vals[c++] != 0.0;
    row.contact_forces[0].x() = vals[c++];
    row.contact_forces[0].y() = vals[c++];
    row.contact_forces[1].x() = vals[c++];
    row.contact_forces[1].y() = vals[c++];
    row.demo_index = static_cast<int>(vals[c++]);
    trace.push_back(row);
  }
  return trace;
}

}  // namespace locoforge
