#pragma once

#include <string>

#include "locoforge/control.hpp"
#include "locoforge/env.hpp"
#include "locoforge/ppo.hpp"

namespace locoforge {

// Demonstration source: an explicit file, or synthesizer parameters.
struct DemoSource {
  std::string file;  // non-empty wins over synthesis
  Task task = Task::Hopping;
  double apex = 0.35;           // m, hopping
  double stance_depth = 0.09;   // m, hopping
  double amplitude = 0.35;      // rad, bounding
  double hop_height = 0.03;     // m, bounding
  double period = 0.5;          // s
  double dt = 0.01;             // s
};

DemoTrajectory resolve_demo(const DemoSource& source, const PlanarModel& model);

// One structured document binding every module's parameters.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  PlanarModel model;
  PDGains gains;
  GroundModel ground;
  EnvConfig env = EnvConfig::defaults_for(Task::Hopping, 1);
  RewardWeights rewards;
  PpoConfig ppo;
  DemoSource demo;

  // Validates every module-level invariant and referenced files.
  void validate() const;
};

// Strict JSON with sections named after the modules; unknown keys are errors.
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::string& path);

// FNV-1a over the normalized JSON form.
std::string config_hash(const RunConfig& config);

// manifest.json with the config hash, seed and build identifier.
void write_manifest(const std::string& out_dir, const RunConfig& config,
                    const std::string& command);

std::string build_identifier();

}  // namespace locoforge
