#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pamtt/hysr.hpp"
#include "pamtt/launcher.hpp"
#include "pamtt/ppo.hpp"

namespace pamtt {

struct EvalReport {
    int n_episodes = 0;
    int hits = 0;
    int returns = 0;
    double hit_rate = 0.0;
    double return_rate = 0.0;
    std::vector<Vec2> landing_points;   // returned balls
    Vec2 landing_mean = Vec2::Zero();
    Eigen::Matrix2d landing_cov = Eigen::Matrix2d::Zero();  // unbiased; zero below two points
    std::vector<double> speed_samples;  // max speed after the hit, returned balls
    std::vector<double> rewards;
    double mean_rtt = 0.0;
};

/// Aggregates finished episodes.
EvalReport summarize(const std::vector<EpisodeRollout>& episodes, const TableGeometry& table);

/// Episode i runs on trajectory i with policy seed substream_seed(seed, i).
/// Episodes run in parallel and are merged in index order.
EvalReport evaluate_policy(const PolicyFn& policy, const HysrSetup& setup, const Dataset& trajectories,
                           std::uint64_t seed, bool deterministic, unsigned workers = 1);

/// Evaluates on n freshly generated launcher trajectories.
EvalReport evaluate_policy(const PolicyParams& params, const HysrSetup& setup, const LauncherConfig& launcher,
                           int n, std::uint64_t seed, bool deterministic, unsigned workers = 1);

/// Trajectories used by evaluate_policy for (launcher, n, seed).
Dataset evaluation_trajectories(const LauncherConfig& launcher, const HysrSetup& setup, int n, std::uint64_t seed);

struct SpeedHistogram {
    double bin_width = 0.0;
    std::vector<int> counts;            // bin k covers [k w, (k+1) w)
    std::vector<double> probabilities;
};

/// Throws EmptyInput on no samples, InvalidArgument on a non-positive bin
/// width or a negative speed.
SpeedHistogram speed_histogram(const std::vector<double>& speeds, double bin_width);

struct EpisodeRecord {
    int update = 0;
    double reward = 0.0;
};

struct CurvePoint {
    int update = 0;
    int n = 0;
    double mean = 0.0;
    double std = 0.0;  // unbiased; 0 for a single episode
};

/// Per-update mean and standard deviation of episode rewards, ordered by
/// update.
std::vector<CurvePoint> learning_curve(const std::vector<EpisodeRecord>& records);
std::vector<CurvePoint> learning_curve(const std::vector<UpdateLog>& log);

/// landing_points.csv (x, y), speeds.csv (speed), speed_histogram.csv
/// (bin_lo, bin_hi, count, probability) and summary.csv (n_episodes, hits,
/// returns, hit_rate, return_rate, mean_rtt, landing_mean_x, landing_mean_y,
/// cov_xx, cov_xy, cov_yy) in `dir`.
void write_eval_csvs(const EvalReport& r, const std::filesystem::path& dir, double speed_bin = 0.5);
/// Columns: update, mean_rtt, std_rtt, n_episodes.
void write_learning_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

/// Planar two-link reach: hold the racket at a fixed target. The reward,
/// paid at the last step, is minus the final distance in units of the
/// initial distance.
class ReachEnv final : public Environment {
public:
    explicit ReachEnv(int horizon = 50, double dt = 0.01);

    int obs_dim() const override { return model_.dof() * 2 + model_.muscles() + 1; }
    int act_dim() const override { return model_.muscles(); }
    VecX reset(Rng& rng) override;
    EnvStep step(const VecX& action) override;
    VecX observation() const override;

    const Vec3& target() const { return target_; }
    double initial_distance() const { return d0_; }

private:
    ArmModel model_;
    Vec3 target_;
    double d0_;
    int horizon_;
    double dt_;
    int k_ = 0;
    RobotState state_;
};

struct ReachBenchmark {
    std::vector<UpdateLog> log;
    double initial_mean = 0.0;  // update 0
    double final_mean = 0.0;    // last update
};

/// Hyperparameters used by the reach benchmark: the standard ones with 51
/// updates (0 through 50) and a 64-unit hidden layer.
PpoHyper reach_hyper();

ReachBenchmark toy_reach_benchmark(const PpoHyper& hyper, std::uint64_t seed, unsigned workers = 1);

}  // namespace pamtt
