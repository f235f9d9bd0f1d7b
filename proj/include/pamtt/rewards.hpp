#pragma once

#include <optional>

#include "pamtt/ball_physics.hpp"
#include "pamtt/types.hpp"

namespace pamtt {

enum class Task { Return, Smash };

struct RewardConfig {
    Task task = Task::Return;
    Vec2 b_des{0.0, -0.685};           // target landing point, opponent half (y < 0)
    Vec3 r0{-0.017043275596807211, 1.62, 0.12086493498321021};  // racket center at the default rest posture
    double exponent = 0.75;
    double floor = -0.2;

    /// c = 1 / |r0 - b_des|, with b_des lifted onto the tabletop plane.
    double normalization(double surface_z = 0.0) const;
    /// Throws ConfigError when exponent is outside (0, 1], floor >= 0, or
    /// b_des is not on the opponent half.
    void validate(const TableGeometry& table = {}) const;
};

/// What happened in one stroke, as needed by the reward.
struct StrokeOutcome {
    bool hit = false;
    std::optional<double> t_hit;
    std::optional<ContactEvent> landing;
    std::optional<double> max_speed_after_hit;
    double min_ball_racket_distance = 0.0;
    bool net_fault = false;
};

/// Minimum over time of the ball-to-racket-center distance, negated.
double hitting_reward(const StrokeOutcome& outcome);

/// Landing accuracy term 1 - c d^exponent (times the post-hit maximum speed
/// for the smash task), floored. A hit without a valid landing (net fault,
/// off the table, timeout) earns the floor. Throws NotHit when hit is false.
double table_tennis_reward(const StrokeOutcome& outcome, const RewardConfig& cfg,
                           double surface_z = 0.0);

/// Table-tennis reward when the racket touched the ball, hitting reward
/// otherwise.
double episode_reward(const StrokeOutcome& outcome, const RewardConfig& cfg, double surface_z = 0.0);

}  // namespace pamtt
