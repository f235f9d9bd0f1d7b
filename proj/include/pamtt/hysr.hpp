#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "pamtt/ball_physics.hpp"
#include "pamtt/dataset.hpp"
#include "pamtt/env.hpp"
#include "pamtt/rewards.hpp"
#include "pamtt/robot_sim.hpp"

namespace pamtt {

/// Static per-dimension affine map: obs = (raw - offset) / scale.
struct NormalizationSpec {
    VecX offset;
    VecX scale;

    int size() const { return static_cast<int>(offset.size()); }
    void validate() const;

    bool operator==(const NormalizationSpec& o) const {
        return offset.size() == o.offset.size() && scale.size() == o.scale.size() && offset == o.offset &&
               scale == o.scale;
    }

    static NormalizationSpec identity(int n);
    /// Joint angles by joint range, velocities by 10 rad/s, pressures to
    /// [-1, 1], ball positions by table half-extents plus 1 m, ball
    /// velocities by 10 m/s.
    static NormalizationSpec standard(const ArmModel& model, const TableGeometry& table);
};

/// Raw observation [q, qdot, p, ball pos, ball vel].
VecX raw_observation(const RobotState& robot, const BallState& ball);
VecX compose_observation(const RobotState& robot, const BallState& ball, const NormalizationSpec& norm);
VecX denormalize(const Eigen::Ref<const VecX>& obs, const NormalizationSpec& norm);

struct HysrConfig {
    double dt = 0.01;              // control period
    double substep = 0.001;        // ball integrator step after the hit
    int max_steps = 150;
    double racket_restitution = 0.78;
    double contact_margin = 0.005;
    double lost_depth = 0.5;       // below the tabletop
    double lost_radius = 3.0;      // from the table center
    double flight_t_max = 3.0;
    int n_envs = 8;                // parallel episode slots in training

    void validate() const;
};

/// Everything an episode needs besides the policy and the recording.
struct HysrSetup {
    ArmModel arm = ArmModel::default_arm();
    TableGeometry table;
    AeroParams aero;
    RewardConfig reward;
    HysrConfig hysr;
    NormalizationSpec norm;

    /// Fills norm with the standard spec when it is empty, then validates.
    void finalize();
};

/// The robot side of an episode. The surrogate is both the simulated and the
/// "real" robot, so copying real into simulated state is the identity.
class Plant {
public:
    virtual ~Plant() = default;
    virtual RobotState reset() = 0;
    virtual RobotState read() const = 0;
    virtual void command(const Action& action) = 0;
    virtual void advance(double dt) = 0;
};

class SurrogatePlant final : public Plant {
public:
    explicit SurrogatePlant(ArmModel model);
    RobotState reset() override;
    RobotState read() const override { return state_; }
    void command(const Action& action) override;
    void advance(double dt) override;

private:
    ArmModel model_;
    RobotState state_;
};

/// Per-step record. `robot` and `ball` are the state the action was chosen in.
struct StepLog {
    double t = 0.0;
    RobotState robot;
    BallState ball;
    Vec3 racket = Vec3::Zero();
    bool touched = false;   // ball under simulation at this step
    VecX action;
    double reward = 0.0;
};

enum class EpisodeEnd { Landed, NetFault, BallLost, ReplayExhausted, Timeout, Running };

/// One HYSR episode driven step by step: the recorded ball is replayed until
/// the racket touches it, then the ball is simulated. Reward is paid on the
/// terminal step only.
class HysrEpisode {
public:
    /// `replay` is the recording resampled to the control period.
    HysrEpisode(const HysrSetup& setup, std::vector<BallState> replay, std::int64_t traj_id,
                std::unique_ptr<Plant> plant = nullptr);

    VecX observation() const;
    const RobotState& robot() const { return robot_; }
    const BallState& ball() const { return ball_; }
    int steps() const { return k_; }
    bool done() const { return end_ != EpisodeEnd::Running; }
    bool touched() const { return touched_; }
    int contact_switches() const { return switches_; }
    EpisodeEnd end() const { return end_; }
    const StrokeOutcome& outcome() const { return outcome_; }
    std::int64_t traj_id() const { return traj_id_; }
    const std::vector<StepLog>& logs() const { return logs_; }

    /// Applies an action and advances one control step. Returns the reward
    /// for this step (non-zero only when the episode ends).
    double step(const VecX& action);

private:
    void finish(EpisodeEnd end);
    void track_distance();

    const HysrSetup* setup_;
    std::vector<BallState> replay_;
    std::int64_t traj_id_;
    std::unique_ptr<Plant> plant_;

    RobotState robot_;
    BallState ball_;
    int k_ = 0;
    bool touched_ = false;
    int switches_ = 0;
    std::optional<FlightTracker> flight_;
    StrokeOutcome outcome_;
    EpisodeEnd end_ = EpisodeEnd::Running;
    std::vector<StepLog> logs_;
};

struct RolloutStep {
    VecX observation;
    VecX action;
    VecX raw_action;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
};

struct EpisodeRollout {
    std::vector<RolloutStep> steps;
    StrokeOutcome outcome;
    EpisodeEnd end = EpisodeEnd::Running;
    std::int64_t traj_id = 0;
    std::uint64_t seed = 0;
    int contact_switches = 0;
    std::vector<StepLog> logs;
    RobotState final_robot;  // state after the terminal step
    BallState final_ball;

    double reward() const { return steps.empty() ? 0.0 : steps.back().reward; }
    /// Landing on the opponent half without a net fault.
    bool returned(const TableGeometry& table = {}) const;
};

/// Runs a whole episode. The rng (seeded from `seed`) drives action sampling.
EpisodeRollout run_episode(const PolicyFn& policy, const HysrSetup& setup, const RecordedTrajectory& traj,
                           std::uint64_t seed, bool deterministic);

/// Per-step CSV: t, q1..qN, qd1..qdN, p1a, p1b, ..., pdes1a, ..., ball_x,
/// ball_y, ball_z, a1..aM, reward.
void write_rollout_csv(const EpisodeRollout& rollout, const std::filesystem::path& path);

/// Training environment: each reset draws a recording uniformly from the
/// dataset. Recordings are resampled once and shared.
class HysrEnv final : public Environment {
public:
    HysrEnv(std::shared_ptr<const HysrSetup> setup, std::shared_ptr<const Dataset> data);

    int obs_dim() const override;
    int act_dim() const override;
    VecX reset(Rng& rng) override;
    EnvStep step(const VecX& action) override;
    VecX observation() const override;

private:
    std::shared_ptr<const HysrSetup> setup_;
    std::shared_ptr<const Dataset> data_;
    std::shared_ptr<const std::vector<std::vector<BallState>>> replays_;
    std::unique_ptr<HysrEpisode> episode_;
};

}  // namespace pamtt
