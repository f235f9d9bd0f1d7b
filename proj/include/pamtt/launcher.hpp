#pragma once

#include <cstdint>

#include "pamtt/ball_physics.hpp"
#include "pamtt/dataset.hpp"

namespace pamtt {

/// Synthetic ball gun. Each ball gets a Gaussian launch position, speed and
/// direction around fixed settings, flies under ball_physics (bouncing on the
/// table), and is observed at `rate_hz` with i.i.d. Gaussian position noise.
struct LauncherConfig {
    Vec3 position{0.0, -2.7, 0.4};   // m, beyond the far table edge
    double speed = 6.0;              // m/s
    double elevation_deg = 33.0;     // above horizontal
    double azimuth_deg = 0.0;        // from +y toward +x
    double sigma_pos = 0.01;         // m, per axis
    double sigma_speed = 0.15;       // m/s
    double sigma_dir_deg = 1.0;      // per angle
    double obs_noise = 0.005;        // m, per axis
    double rate_hz = 180.0;
    double truncate_y = 2.0;         // robot workspace plane
    double t_max = 2.5;              // s

    /// Throws ConfigError on negative noise, non-positive rate, or speeds
    /// outside [2, 15] m/s.
    void validate() const;
};

/// Generates n trajectories with ids 0..n-1. Ball i draws from substream i
/// of `seed`, so the output is identical for any worker count.
Dataset generate_dataset(const LauncherConfig& cfg, std::size_t n, std::uint64_t seed,
                         const TableGeometry& table = {}, const AeroParams& aero = {},
                         unsigned workers = 1);

/// Simulates a single ball from its own generator.
RecordedTrajectory generate_trajectory(const LauncherConfig& cfg, std::int64_t id, Rng& rng,
                                       const TableGeometry& table = {}, const AeroParams& aero = {});

/// 1000 balls at seed 0, binned at the sampling period in time and 5 cm in y.
VariabilityReport launcher_selftest(const LauncherConfig& cfg, const TableGeometry& table = {},
                                    const AeroParams& aero = {}, std::size_t n = 1000,
                                    std::uint64_t seed = 0);

}  // namespace pamtt
