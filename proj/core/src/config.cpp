#include "locoforge/config.hpp"

#include <filesystem>
#include <fstream>

#include <set>

#include <json.hpp>

namespace locoforge {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

DemoTrajectory resolve_demo(const DemoSource& source, const PlanarModel& model) {
  if (!source.file.empty()) return load_demo(source.file);
  if (source.task == Task::Hopping)
    return synthesize_hop_demo(source.apex, source.stance_depth, source.period,
                               source.dt, model);
  return synthesize_bound_demo(source.amplitude, source.hop_height, source.period,
                               source.dt, model);
}

void RunConfig::validate() const {
  model.validate();
  gains.validate();
  ground.validate();
  env.validate();
  rewards.validate();
  ppo.validate();
  if (!demo.file.empty() && !fs::exists(demo.file))
    throw std::runtime_error("RunConfig: demo file does not exist: " + demo.file);
  if (out_dir.empty()) throw std::runtime_error("RunConfig: out_dir must not be empty");
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw std::runtime_error("config " + origin + ": " + what);
}

class SectionReader {
 public:
  SectionReader(const json& obj, std::string path, const std::string& origin)
      : obj_(obj), path_(std::move(path)), origin_(origin) {
    if (!obj.is_object()) fail(origin_, path_ + " must be an object");
  }
  ~SectionReader() = default;

  double number(const char* key, double fallback) {
    mark(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_number()) fail(origin_, path_ + "." + key + " must be a number");
    return obj_[key].get<double>();
  }
  int integer(const char* key, int fallback) {
    mark(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_number_integer())
      fail(origin_, path_ + "." + key + " must be an integer");
    return obj_[key].get<int>();
  }
  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) {
    mark(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_number_unsigned())
      fail(origin_, path_ + "." + key + " must be a nonnegative integer");
    return obj_[key].get<std::uint64_t>();
  }
  std::string text(const char* key, const std::string& fallback) {
    mark(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_string()) fail(origin_, path_ + "." + key + " must be a string");
    return obj_[key].get<std::string>();
  }
  Vec4 vec4(const char* key, const Vec4& fallback) {
    mark(key);
    if (!obj_.contains(key)) return fallback;
    const auto& arr = obj_[key];
    if (!arr.is_array() || arr.size() != 4)
      fail(origin_, path_ + "." + key + " must be an array of 4 numbers");
    Vec4 v;
    for (int i = 0; i < 4; ++i) v[i] = arr[i].get<double>();
    return v;
  }
  bool has(const char* key) {
    mark(key);
    return obj_.contains(key);
  }
  const json& raw(const char* key) { return obj_[key]; }

  // call after reading every known key
  void finish() {
    for (const auto& item : obj_.items())
      if (!seen_.count(item.key()))
        fail(origin_, "unknown key '" + path_ + "." + item.key() + "'");
  }

 private:
  void mark(const char* key) { seen_.insert(key); }
  const json& obj_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> seen_;
};

Task read_task(const std::string& name, const std::string& origin) {
  try {
    return parse_task(name);
  } catch (const std::exception& e) {
    fail(origin, e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("JSON parse error: ") + e.what());
  }

  RunConfig cfg;
  SectionReader top(root, "", origin);
  cfg.seed = top.unsigned_integer("seed", cfg.seed);
  cfg.out_dir = top.text("out_dir", cfg.out_dir);

  if (top.has("model")) {
    SectionReader s(top.raw("model"), "model", origin);
    auto& m = cfg.model;
    m.base_mass = s.number("base_mass", m.base_mass);
    m.base_inertia = s.number("base_inertia", m.base_inertia);
    m.upper_leg_length = s.number("upper_leg_length", m.upper_leg_length);
    m.lower_leg_length = s.number("lower_leg_length", m.lower_leg_length);
    m.upper_leg_mass = s.number("upper_leg_mass", m.upper_leg_mass);
    m.lower_leg_mass = s.number("lower_leg_mass", m.lower_leg_mass);
    m.upper_leg_inertia = s.number("upper_leg_inertia", m.upper_leg_inertia);
    m.lower_leg_inertia = s.number("lower_leg_inertia", m.lower_leg_inertia);
    m.front_hip_offset.x() = s.number("front_hip_offset_x", m.front_hip_offset.x());
    m.front_hip_offset.y() = s.number("front_hip_offset_z", m.front_hip_offset.y());
    m.back_hip_offset.x() = s.number("back_hip_offset_x", m.back_hip_offset.x());
    m.back_hip_offset.y() = s.number("back_hip_offset_z", m.back_hip_offset.y());
    m.torque_limit = s.number("torque_limit", m.torque_limit);
    m.gravity = s.number("gravity", m.gravity);
    m.joint_lower = s.vec4("joint_lower", m.joint_lower);
    m.joint_upper = s.vec4("joint_upper", m.joint_upper);
    m.joint_limit_stiffness = s.number("joint_limit_stiffness", m.joint_limit_stiffness);
    m.joint_limit_damping = s.number("joint_limit_damping", m.joint_limit_damping);
    m.base_half_length = s.number("base_half_length", m.base_half_length);
    m.base_half_height = s.number("base_half_height", m.base_half_height);
    s.finish();
  }

  if (top.has("control")) {
    SectionReader s(top.raw("control"), "control", origin);
    cfg.gains.kp.setConstant(s.number("kp", cfg.gains.kp[0]));
    cfg.gains.kd.setConstant(s.number("kd", cfg.gains.kd[0]));
    cfg.gains.torque_limit = s.number("torque_limit", cfg.gains.torque_limit);
    s.finish();
  }

  if (top.has("ground")) {
    SectionReader s(top.raw("ground"), "ground", origin);
    auto& g = cfg.ground;
    g.height = s.number("height", g.height);
    g.friction_coeff = s.number("friction_coeff", g.friction_coeff);
    g.contact_stiffness = s.number("contact_stiffness", g.contact_stiffness);
    g.contact_damping = s.number("contact_damping", g.contact_damping);
    g.tangential_stiffness = s.number("tangential_stiffness", g.tangential_stiffness);
    s.finish();
  }

  if (top.has("env")) {
    SectionReader s(top.raw("env"), "env", origin);
    const Task task = read_task(s.text("task", "hopping"), origin);
    const int stage = s.integer("stage", 1);
    EnvConfig e = EnvConfig::defaults_for(task, stage);
    e.control_dt = s.number("control_dt", e.control_dt);
    e.substeps = s.integer("substeps", e.substeps);
    e.max_steps = s.integer("max_steps", e.max_steps);
    e.tilt_limit = s.number("tilt_limit", e.tilt_limit);
    e.init_height_lo = s.number("init_height_lo", e.init_height_lo);
    e.init_height_hi = s.number("init_height_hi", e.init_height_hi);
    e.init_tilt = s.number("init_tilt", e.init_tilt);
    e.init_joint_perturb = s.number("init_joint_perturb", e.init_joint_perturb);
    e.ground_height_lo = s.number("ground_height_lo", e.ground_height_lo);
    e.ground_height_hi = s.number("ground_height_hi", e.ground_height_hi);
    e.friction_lo = s.number("friction_lo", e.friction_lo);
    e.friction_hi = s.number("friction_hi", e.friction_hi);
    cfg.env = e;
    s.finish();
  }

  if (top.has("rewards")) {
    SectionReader s(top.raw("rewards"), "rewards", origin);
    auto& w = cfg.rewards;
    w.k_tt = s.number("k_tt", w.k_tt);
    for (int i = 0; i < 12; ++i) {
      const std::string key = "k_ti" + std::to_string(i + 1);
      w.k_ti[i] = s.number(key.c_str(), w.k_ti[i]);
    }
    w.k_hp = s.number("k_hp", w.k_hp);
    w.z_base_min = s.number("z_base_min", w.z_base_min);
    w.z_base_max = s.number("z_base_max", w.z_base_max);
    for (int i = 0; i < 10; ++i) {
      const std::string key = "k_ps" + std::to_string(i + 1);
      w.k_ps[i] = s.number(key.c_str(), w.k_ps[i]);
    }
    w.k_ct = s.number("k_ct", w.k_ct);
    w.foot_force_limit = s.number("foot_force_limit", w.foot_force_limit);
    w.k_ts1 = s.number("k_ts1", w.k_ts1);
    w.k_ts2 = s.number("k_ts2", w.k_ts2);
    w.k_bn = s.number("k_bn", w.k_bn);
    w.k_cc = s.number("k_cc", w.k_cc);
    s.finish();
  }

  if (top.has("ppo")) {
    SectionReader s(top.raw("ppo"), "ppo", origin);
    auto& p = cfg.ppo;
    p.clip_ratio = s.number("clip_ratio", p.clip_ratio);
    p.learning_rate = s.number("learning_rate", p.learning_rate);
    p.epochs = s.integer("epochs", p.epochs);
    p.minibatch_size = s.integer("minibatch_size", p.minibatch_size);
    p.horizon = s.integer("horizon", p.horizon);
    p.env_count = s.integer("env_count", p.env_count);
    p.gamma = s.number("gamma", p.gamma);
    p.gae_lambda = s.number("gae_lambda", p.gae_lambda);
    p.value_coef = s.number("value_coef", p.value_coef);
    p.entropy_coef = s.number("entropy_coef", p.entropy_coef);
    p.grad_clip = s.number("grad_clip", p.grad_clip);
    p.total_updates = s.integer("total_updates", p.total_updates);
    p.checkpoint_interval = s.integer("checkpoint_interval", p.checkpoint_interval);
    p.log_std_init = s.number("log_std_init", p.log_std_init);
    s.finish();
  }

  bool demo_task_explicit = false;
  if (top.has("demo")) {
    SectionReader s(top.raw("demo"), "demo", origin);
    auto& d = cfg.demo;
    d.file = s.text("file", d.file);
    demo_task_explicit = s.has("task");
    d.task = read_task(s.text("task", task_name(d.task)), origin);
    d.apex = s.number("apex", d.apex);
    d.stance_depth = s.number("stance_depth", d.stance_depth);
    d.amplitude = s.number("amplitude", d.amplitude);
    d.hop_height = s.number("hop_height", d.hop_height);
    d.period = s.number("period", d.period);
    d.dt = s.number("dt", d.dt);
    s.finish();
  }
  top.finish();

  // the PPO seed follows the run seed; a synthesized demo follows the env task
  cfg.ppo.seed = cfg.seed;
  if (cfg.demo.file.empty() && !demo_task_explicit) cfg.demo.task = cfg.env.task;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_run_config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_run_config(text, path);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["out_dir"] = cfg.out_dir;

  json m;
  m["base_mass"] = cfg.model.base_mass;
  m["base_inertia"] = cfg.model.base_inertia;
  m["upper_leg_length"] = cfg.model.upper_leg_length;
  m["lower_leg_length"] = cfg.model.lower_leg_length;
  m["upper_leg_mass"] = cfg.model.upper_leg_mass;
  m["lower_leg_mass"] = cfg.model.lower_leg_mass;
  m["upper_leg_inertia"] = cfg.model.upper_leg_inertia;
  m["lower_leg_inertia"] = cfg.model.lower_leg_inertia;
  m["front_hip_offset_x"] = cfg.model.front_hip_offset.x();
  m["front_hip_offset_z"] = cfg.model.front_hip_offset.y();
  m["back_hip_offset_x"] = cfg.model.back_hip_offset.x();
  m["back_hip_offset_z"] = cfg.model.back_hip_offset.y();
  m["torque_limit"] = cfg.model.torque_limit;
  m["gravity"] = cfg.model.gravity;
  m["joint_lower"] = {cfg.model.joint_lower[0], cfg.model.joint_lower[1],
                      cfg.model.joint_lower[2], cfg.model.joint_lower[3]};
  m["joint_upper"] = {cfg.model.joint_upper[0], cfg.model.joint_upper[1],
                      cfg.model.joint_upper[2], cfg.model.joint_upper[3]};
  m["joint_limit_stiffness"] = cfg.model.joint_limit_stiffness;
  m["joint_limit_damping"] = cfg.model.joint_limit_damping;
  m["base_half_length"] = cfg.model.base_half_length;
  m["base_half_height"] = cfg.model.base_half_height;
  root["model"] = m;

  json c;
  c["kp"] = cfg.gains.kp[0];
  c["kd"] = cfg.gains.kd[0];
  c["torque_limit"] = cfg.gains.torque_limit;
  root["control"] = c;

  json g;
  g["height"] = cfg.ground.height;
  g["friction_coeff"] = cfg.ground.friction_coeff;
  g["contact_stiffness"] = cfg.ground.contact_stiffness;
  g["contact_damping"] = cfg.ground.contact_damping;
  g["tangential_stiffness"] = cfg.ground.tangential_stiffness;
  root["ground"] = g;

  json e;
  e["task"] = task_name(cfg.env.task);
  e["stage"] = cfg.env.stage;
  e["control_dt"] = cfg.env.control_dt;
  e["substeps"] = cfg.env.substeps;
  e["max_steps"] = cfg.env.max_steps;
  e["tilt_limit"] = cfg.env.tilt_limit;
  e["init_height_lo"] = cfg.env.init_height_lo;
  e["init_height_hi"] = cfg.env.init_height_hi;
  e["init_tilt"] = cfg.env.init_tilt;
  e["init_joint_perturb"] = cfg.env.init_joint_perturb;
  e["ground_height_lo"] = cfg.env.ground_height_lo;
  e["ground_height_hi"] = cfg.env.ground_height_hi;
  e["friction_lo"] = cfg.env.friction_lo;
  e["friction_hi"] = cfg.env.friction_hi;
  root["env"] = e;

  json w;
  w["k_tt"] = cfg.rewards.k_tt;
  for (int i = 0; i < 12; ++i) w["k_ti" + std::to_string(i + 1)] = cfg.rewards.k_ti[i];
  w["k_hp"] = cfg.rewards.k_hp;
  w["z_base_min"] = cfg.rewards.z_base_min;
  w["z_base_max"] = cfg.rewards.z_base_max;
  for (int i = 0; i < 10; ++i) w["k_ps" + std::to_string(i + 1)] = cfg.rewards.k_ps[i];
  w["k_ct"] = cfg.rewards.k_ct;
  w["foot_force_limit"] = cfg.rewards.foot_force_limit;
  w["k_ts1"] = cfg.rewards.k_ts1;
  w["k_ts2"] = cfg.rewards.k_ts2;
  w["k_bn"] = cfg.rewards.k_bn;
  w["k_cc"] = cfg.rewards.k_cc;
  root["rewards"] = w;

  json p;
  p["clip_ratio"] = cfg.ppo.clip_ratio;
  p["learning_rate"] = cfg.ppo.learning_rate;
  p["epochs"] = cfg.ppo.epochs;
  p["minibatch_size"] = cfg.ppo.minibatch_size;
  p["horizon"] = cfg.ppo.horizon;
  p["env_count"] = cfg.ppo.env_count;
  p["gamma"] = cfg.ppo.gamma;
  p["gae_lambda"] = cfg.ppo.gae_lambda;
  p["value_coef"] = cfg.ppo.value_coef;
  p["entropy_coef"] = cfg.ppo.entropy_coef;
  p["grad_clip"] = cfg.ppo.grad_clip;
  p["total_updates"] = cfg.ppo.total_updates;
  p["checkpoint_interval"] = cfg.ppo.checkpoint_interval;
  p["log_std_init"] = cfg.ppo.log_std_init;
  root["ppo"] = p;

  json d;
  if (!cfg.demo.file.empty()) {
    d["file"] = cfg.demo.file;
  } else {
    d["task"] = task_name(cfg.demo.task);
    if (cfg.demo.task == Task::Hopping) {
      d["apex"] = cfg.demo.apex;
      d["stance_depth"] = cfg.demo.stance_depth;
    } else {
      d["amplitude"] = cfg.demo.amplitude;
      d["hop_height"] = cfg.demo.hop_height;
    }
    d["period"] = cfg.demo.period;
    d["dt"] = cfg.demo.dt;
  }
  root["demo"] = d;

  return root.dump(2) + "\n";
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_run_config: cannot open " + path);
  os << run_config_to_json(config);
  if (!os) throw std::runtime_error("save_run_config: write failed for " + path);
}

std::string config_hash(const RunConfig& config) {
  const std::string text = run_config_to_json(config);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string build_identifier() {
#if defined(__clang__)
  return "locoforge 0.1.0 clang " __clang_version__;
#elif defined(__GNUC__)
  return "locoforge 0.1.0 gcc " __VERSION__;
#else
  return "locoforge 0.1.0";
#endif
}

void write_manifest(const std::string& out_dir, const RunConfig& config,
                    const std::string& command) {
  fs::create_directories(out_dir);
  json m;
  m["command"] = command;
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed;
  m["build"] = build_identifier();
  std::ofstream os(out_dir + "/manifest.json");
  if (!os) throw std::runtime_error("write_manifest: cannot open " + out_dir);
  os << m.dump(2) << "\n";
}

}  // namespace locoforge
