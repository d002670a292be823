#include "locoforge/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "locoforge/dynamics.hpp"

namespace locoforge {

std::array<Vec2, kNumFeet> estimate_contact_force(const PlanarModel& model,
                                                  const RobotState& state,
                                                  const Vec4& joint_torques,
                                                  double det_threshold) {
  std::array<Vec2, kNumFeet> forces;
  for (int i = 0; i < kNumFeet; ++i) {
    const Foot foot = static_cast<Foot>(i);
    const Mat2 jac = foot_kinematics(model, state, foot).jacobian;
    const double det = jac.determinant();
    if (std::abs(det) < det_threshold)
      throw std::runtime_error(std::string("estimate_contact_force: singular jacobian on ") +
                               (foot == Foot::Front ? "front" : "back") +
                               " leg (straight knee)");
    const Vec2 tau_leg = foot == Foot::Front ? Vec2(joint_torques[0], joint_torques[1])
                                             : Vec2(joint_torques[2], joint_torques[3]);
    forces[i] = -jac.transpose().inverse() * tau_leg;
  }
  return forces;
}

CycleMetrics cycle_metrics_from_series(const std::vector<double>& peaks,
                                       double tolerance) {
  CycleMetrics m;
  m.peaks = peaks;
  const int n = static_cast<int>(peaks.size());
  if (n < 3) return m;  // non-convergent by contract

  // smallest i such that |peaks[j+1] - peaks[j]| < tol for all j >= i;
  // reported as a 1-based cycle count
  int idx = n - 1;
  for (int j = n - 2; j >= 0; --j) {
    if (std::abs(peaks[j + 1] - peaks[j]) < tolerance) idx = j;
    else break;
  }
  if (idx <= n - 2) {
    m.converged = true;
    m.convergence_index = idx + 1;
    const int tail = std::min(3, n - idx);
    double sum = 0.0;
    for (int j = n - tail; j < n; ++j) sum += peaks[j];
    m.steady_value = sum / tail;
    m.steady_amplitude = m.steady_value;
  }
  return m;
}

namespace {

bool in_flight(const TraceRow& row) {
  return !row.contact_flags[0] && !row.contact_flags[1];
}

std::vector<double> detect_peaks(const std::vector<TraceRow>& trace, Task task,
                                 bool maxima) {
  std::vector<double> peaks;
  for (size_t i = 1; i + 1 < trace.size(); ++i) {
    const double rate_prev = task == Task::Hopping ? trace[i - 1].state.v[1]
                                                   : trace[i - 1].state.v[2];
    const double rate = task == Task::Hopping ? trace[i].state.v[1] : trace[i].state.v[2];
    const bool crossing = maxima ? (rate_prev > 0.0 && rate <= 0.0)
                                 : (rate_prev < 0.0 && rate >= 0.0);
    if (!crossing) continue;
    if (task == Task::Hopping && !in_flight(trace[i])) continue;  // apex needs flight
    peaks.push_back(task == Task::Hopping ? trace[i].state.q[1] : trace[i].state.q[2]);
  }
  return peaks;
}

}  // namespace

CycleMetrics cycle_metrics(const std::vector<TraceRow>& trace, Task task,
                           double tolerance, const PlanarModel& model) {
  const std::vector<double> peaks = detect_peaks(trace, task, true);
  CycleMetrics m = cycle_metrics_from_series(peaks, tolerance);

  if (task == Task::Bounding) {
    m.troughs = detect_peaks(trace, task, false);
    if (m.converged && m.troughs.size() >= 3) {
      const int tail = 3;
      double sum = 0.0;
      for (int j = static_cast<int>(m.troughs.size()) - tail;
           j < static_cast<int>(m.troughs.size()); ++j)
        sum += m.troughs[j];
      m.steady_amplitude = 0.5 * (m.steady_value - sum / tail);
    }
  }

  double peak_force = 0.0;
  for (const auto& row : trace) {
    bool singular = false;
    std::array<Vec2, kNumFeet> est{};
    try {
      est = estimate_contact_force(model, row.state, row.torque);
    } catch (const std::runtime_error&) {
      singular = true;  // straight-knee frames are skipped for the force stat
    }
    if (singular) continue;
    for (const auto& f : est) peak_force = std::max(peak_force, f.norm());
  }
  m.peak_force_estimate = peak_force;
  return m;
}

std::vector<DropTestResult> drop_test(const PolicyParams& params,
                                      const DropTestSpec& spec, Env& env) {
  if (spec.conditions.empty())
    throw std::invalid_argument("drop_test: conditions must be nonempty");

  const Vec4 posture = env.demo().mean_joint_posture();
  const bool hopping = env.config().task == Task::Hopping;
  std::vector<DropTestResult> results;

  for (double condition : spec.conditions) {
    RobotState init;
    init.q[1] = hopping ? condition : 0.35;
    init.q[2] = hopping ? 0.0 : condition;
    init.q.tail<4>() = posture;

    DropTestResult result;
    result.condition = condition;
    env.set_trace_enabled(true);
    env.reset_to(init, env.nominal_ground());
    bool alive = true;
    for (int t = 0; t < spec.horizon && alive; ++t) {
      Action act;
      act.q_des = actor_forward(params, env.observe());
      const StepResult r = env.step(act);
      if (r.terminated) alive = false;
      if (r.truncated) break;
    }
    result.survived = alive;
    result.trace = env.trace();
    result.metrics = cycle_metrics(result.trace, env.config().task, spec.apex_tolerance,
                                   env.model());
    if (!alive) result.metrics.converged = false;
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<SweepCell> robustness_sweep(const PolicyParams& params, Env& env,
                                        const std::vector<double>& ground_heights,
                                        const std::vector<double>& frictions,
                                        int episodes_per_cell, std::uint64_t seed) {
  std::vector<SweepCell> cells;
  int cell_index = 0;
  for (double height : ground_heights) {
    for (double friction : frictions) {
      SweepCell cell;
      cell.ground_height = height;
      cell.friction = friction;
      cell.episodes = episodes_per_cell;

      for (int ep = 0; ep < episodes_per_cell; ++ep) {
        RandomEngine rng(seed + static_cast<std::uint64_t>(cell_index) * 100003 + ep);
        GroundModel ground = env.ground();
        ground.height = height;
        ground.friction_coeff = friction;

        env.reset_with_ground(rng, ground);
        double episode_return = 0.0;
        bool survived = false;
        while (true) {
          Action act;
          act.q_des = actor_forward(params, env.observe());
          const StepResult r = env.step(act);
          episode_return += r.reward;
          if (r.terminated) break;
          if (r.truncated) {
            survived = true;
            break;
          }
        }
        cell.mean_return += episode_return;
        if (survived) ++cell.survived;
      }
      cell.mean_return /= episodes_per_cell;
      cell.survival_rate = static_cast<double>(cell.survived) / episodes_per_cell;
      cells.push_back(cell);
      ++cell_index;
    }
  }
  return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  os << "ground_height,friction,episodes,survived,survival_rate,mean_return\n";
  char buf[200];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d,%.17g,%.17g\n", c.ground_height,
                  c.friction, c.episodes, c.survived, c.survival_rate, c.mean_return);
    os << buf;
  }
  if (!os) throw std::runtime_error("write_sweep_csv: write failed for " + path);
}

PolicyEvalStats evaluate_policy(const PolicyParams& params, Env& env, int episodes,
                                std::uint64_t seed, bool stochastic) {
  PolicyEvalStats stats;
  int total_steps = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    RandomEngine rng(seed + ep);
    env.reset(rng);
    double episode_return = 0.0;
    int steps = 0;
    while (true) {
      Action act;
      if (stochastic)
        act.q_des = sample_action(params, env.observe(), rng).first;
      else
        act.q_des = actor_forward(params, env.observe());
      const StepResult r = env.step(act);
      episode_return += r.reward;
      ++steps;
      stats.mean_step_terms.tt += r.breakdown.tt;
      stats.mean_step_terms.ti += r.breakdown.ti;
      stats.mean_step_terms.hp += r.breakdown.hp;
      stats.mean_step_terms.ps += r.breakdown.ps;
      stats.mean_step_terms.ct += r.breakdown.ct;
      stats.mean_step_terms.ts += r.breakdown.ts;
      stats.mean_step_terms.bn += r.breakdown.bn;
      stats.mean_step_terms.cc += r.breakdown.cc;
      stats.mean_step_terms.total += r.breakdown.total;
      if (r.terminated || r.truncated) break;
    }
    stats.mean_return += episode_return;
    stats.mean_episode_length += steps;
    total_steps += steps;
    ++stats.episodes;
  }
  if (stats.episodes > 0) {
    stats.mean_return /= stats.episodes;
    stats.mean_episode_length /= stats.episodes;
  }
  if (total_steps > 0) {
    const double inv = 1.0 / total_steps;
    stats.mean_step_terms.tt *= inv;
    stats.mean_step_terms.ti *= inv;
    stats.mean_step_terms.hp *= inv;
    stats.mean_step_terms.ps *= inv;
    stats.mean_step_terms.ct *= inv;
    stats.mean_step_terms.ts *= inv;
    stats.mean_step_terms.bn *= inv;
    stats.mean_step_terms.cc *= inv;
    stats.mean_step_terms.total *= inv;
  }
  return stats;
}

}  // namespace locoforge
