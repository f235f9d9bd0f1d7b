#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pamtt/ball_physics.hpp"
#include "pamtt/hysr.hpp"
#include "pamtt/launcher.hpp"
#include "pamtt/ppo.hpp"
#include "pamtt/rewards.hpp"
#include "pamtt/robot_sim.hpp"

namespace pamtt {

/// Run configuration. Text form: one `key = value` per line, dotted
/// sections (physics, arm, launcher, reward, ppo, hysr), `#` comments, lists
/// comma-separated. Unknown keys are errors. When reward.r0 is not given it
/// follows the arm's rest posture.
struct Config {
    AeroParams aero;
    TableGeometry table;
    ArmModel arm = ArmModel::default_arm();
    Vec3 base_position{0.62, 1.62, -0.05};
    double base_yaw = 3.141592653589793;
    LauncherConfig launcher;
    RewardConfig reward;
    PpoHyper ppo;
    HysrConfig hysr;

    /// Rebuilds arm.base_pose from base_position and base_yaw.
    void sync_base();
    void validate() const;
    /// Episode setup with the standard observation normalization.
    HysrSetup setup() const;
    /// Digest of the canonical serialization.
    std::string digest() const;
};

struct ConfigKey {
    std::string key;
    std::string default_value;
};

/// Every key with its default, in canonical order.
std::vector<ConfigKey> config_keys();

/// Throws ParseError (malformed line or value) or ConfigError (unknown key,
/// invalid settings); messages start with `source:line`.
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);
/// Canonical text: every key in canonical order, shortest round-trip numbers.
std::string serialize_config(const Config& c);

}  // namespace pamtt
