#include "pamtt/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "pamtt/error.hpp"

namespace pamtt {

double RewardConfig::normalization(double surface_z) const {
    const Vec3 target(b_des.x(), b_des.y(), surface_z);
    return 1.0 / (r0 - target).norm();
}

void RewardConfig::validate(const TableGeometry& table) const {
    if (!(exponent > 0.0 && exponent <= 1.0)) throw Error(ErrorCode::ConfigError, "reward.exponent must lie in (0, 1]");
    if (!(floor < 0.0)) throw Error(ErrorCode::ConfigError, "reward.floor must be negative");
    if (!(b_des.y() < table.net_y) || !table.within_bounds(b_des.x(), b_des.y())) {
        throw Error(ErrorCode::ConfigError, "reward.b_des must lie on the opponent half");
    }
    if (!std::isfinite(normalization(table.surface_z))) {
        throw Error(ErrorCode::ConfigError, "reward.r0 coincides with b_des");
    }
}

double hitting_reward(const StrokeOutcome& outcome) { return -outcome.min_ball_racket_distance; }

double table_tennis_reward(const StrokeOutcome& outcome, const RewardConfig& cfg, double surface_z) {
    if (!outcome.hit) throw Error(ErrorCode::NotHit, "table tennis reward needs a racket contact");
    if (!outcome.landing || outcome.net_fault) return cfg.floor;

    const Vec2 land = outcome.landing->point.head<2>();
    const double d = (land - cfg.b_des).norm();
    const double accuracy = 1.0 - std::pow(cfg.normalization(surface_z) * d, cfg.exponent);
    double r = accuracy;
    if (cfg.task == Task::Smash) r *= outcome.max_speed_after_hit.value_or(0.0);
    return std::max(r, cfg.floor);
}

double episode_reward(const StrokeOutcome& outcome, const RewardConfig& cfg, double surface_z) {
    return outcome.hit ? table_tennis_reward(outcome, cfg, surface_z) : hitting_reward(outcome);
}

}  // namespace pamtt
