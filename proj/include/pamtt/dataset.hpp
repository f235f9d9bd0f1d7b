#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pamtt/ball_physics.hpp"
#include "pamtt/rng.hpp"
#include "pamtt/types.hpp"

namespace pamtt {

struct TrajectorySample {
    double t = 0.0;
    Vec3 pos = Vec3::Zero();

    bool operator==(const TrajectorySample&) const = default;
};

/// Timestamped ball positions as a vision system would report them.
/// Velocities are never stored; resample() derives them.
struct RecordedTrajectory {
    std::int64_t id = 0;
    double sample_rate_hz = 180.0;
    std::vector<TrajectorySample> samples;

    static constexpr std::size_t kMinSamples = 10;
    static constexpr double kMaxDuration = 3.0;

    double duration() const;
    /// Throws SchemaError on fewer than kMinSamples samples, non-increasing
    /// times, a duration above kMaxDuration, or non-finite values.
    void validate() const;

    bool operator==(const RecordedTrajectory&) const = default;
};

struct Dataset {
    std::vector<RecordedTrajectory> trajectories;
    std::string meta;  // digest of the generating configuration

    /// Throws SchemaError when empty, on duplicate ids, or invalid members.
    void validate() const;
    const RecordedTrajectory& by_id(std::int64_t id) const;

    bool operator==(const Dataset&) const = default;
};

/// JSON Lines: an optional header line {"meta": "..."} followed by one
/// {"id": int, "rate_hz": float, "samples": [[t,x,y,z], ...]} per line.
/// Output is canonical (fixed key order, shortest round-trip doubles).
void save_dataset(const Dataset& d, const std::filesystem::path& path);
std::string serialize_dataset(const Dataset& d);
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);

/// Uniform draw over all trajectories. Throws EmptyDataset.
const RecordedTrajectory& sample_trajectory(const Dataset& d, Rng& rng);

/// Positions linearly interpolated onto t0 + k*dt; velocities by central
/// differences on the resampled grid, one-sided at the ends. Throws
/// TooShort with fewer than 2 samples.
std::vector<BallState> resample(const RecordedTrajectory& traj, double dt);

struct BinStats {
    double center = 0.0;
    std::size_t count = 0;
    Vec3 mean = Vec3::Zero();
    Vec3 stddev = Vec3::Zero();  // population standard deviation
};

struct BounceStats {
    std::size_t count = 0;
    Vec2 mean = Vec2::Zero();    // (x, y) of the first bounce
    Vec2 stddev = Vec2::Zero();
};

/// Spread of a dataset over time and along the table.
struct VariabilityReport {
    double time_bin = 0.0;
    double y_bin = 0.0;
    std::vector<BinStats> by_time;  // stats of (x, y, z)
    std::vector<BinStats> by_y;     // stats of (t, x, z)
    BounceStats first_bounce;
    std::vector<double> bounce_times;  // per trajectory that bounced
};

/// First bounce of a sampled trajectory: the first near-surface local minimum
/// of z, located by extending a line fitted to the incoming branch (up to four
/// samples before the minimum) down to the tabletop plane. Sampled positions never show the ball
/// below the plane, so a sample-pair crossing test would miss most bounces.
std::optional<ContactEvent> first_bounce(const RecordedTrajectory& traj, const TableGeometry& table = {},
                                         double near_surface = 0.04);

/// Time is measured from each trajectory's first sample. Bin k of width w
/// covers [k w, (k+1) w); a 1e-9 relative guard keeps grid-aligned samples in
/// their own bin. The first bounce is the first downward crossing of the
/// tabletop plane, found by first_bounce().
VariabilityReport variability_stats(const Dataset& d, double time_bin, double y_bin,
                                    const TableGeometry& table = {});

/// Columns: bin_center, mean_x, std_x, mean_y, std_y, mean_z, std_z.
void write_time_stats_csv(const VariabilityReport& r, const std::filesystem::path& path);
/// Columns: bin_center, mean_t, std_t, mean_x, std_x, mean_z, std_z.
void write_y_stats_csv(const VariabilityReport& r, const std::filesystem::path& path);
/// Columns: count, mean_x, std_x, mean_y, std_y.
void write_bounce_csv(const VariabilityReport& r, const std::filesystem::path& path);

}  // namespace pamtt
