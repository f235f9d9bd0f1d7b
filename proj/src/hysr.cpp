#include "pamtt/hysr.hpp"

#include <cmath>
#include <limits>

#include "pamtt/csv.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

namespace {

constexpr int kContactSamples = 10;

VecX lerp(const VecX& a, const VecX& b, double s) { return a + s * (b - a); }

EpisodeEnd end_of_flight(FlightEnd f) {
    switch (f) {
        case FlightEnd::Landed: return EpisodeEnd::Landed;
        case FlightEnd::NetFault: return EpisodeEnd::NetFault;
        case FlightEnd::Timeout: return EpisodeEnd::Timeout;
        default: return EpisodeEnd::BallLost;
    }
}

}  // namespace

void NormalizationSpec::validate() const {
    if (offset.size() != scale.size()) throw Error(ErrorCode::ShapeMismatch, "normalization offset/scale sizes differ");
    if (!offset.allFinite() || !scale.allFinite() || (scale.array() <= 0.0).any()) {
        throw Error(ErrorCode::InvalidArgument, "normalization scales must be positive and finite");
    }
}

NormalizationSpec NormalizationSpec::identity(int n) {
    return {VecX::Zero(n), VecX::Ones(n)};
}

NormalizationSpec NormalizationSpec::standard(const ArmModel& model, const TableGeometry& table) {
    const int n = model.dof();
    const int m = model.muscles();
    NormalizationSpec s;
    s.offset = VecX::Zero(2 * n + m + 6);
    s.scale = VecX::Ones(2 * n + m + 6);
    s.offset.head(n) = 0.5 * (model.q_max + model.q_min);
    s.scale.head(n) = 0.5 * (model.q_max - model.q_min);
    s.scale.segment(n, n).setConstant(10.0);
    s.offset.segment(2 * n, m) = 0.5 * (model.pressure_max + model.pressure_min);
    s.scale.segment(2 * n, m) = 0.5 * (model.pressure_max - model.pressure_min);
    const int b = 2 * n + m;
    s.offset[b + 2] = table.surface_z;
    s.scale[b] = table.half_width() + 1.0;
    s.scale[b + 1] = table.half_length() + 1.0;
    s.scale[b + 2] = 1.0;
    s.scale.segment(b + 3, 3).setConstant(10.0);
    return s;
}

VecX raw_observation(const RobotState& robot, const BallState& ball) {
    const auto n = robot.q.size();
    const auto m = robot.p.size();
    VecX raw(2 * n + m + 6);
    raw << robot.q, robot.qdot, robot.p, ball.pos, ball.vel;
    return raw;
}

VecX compose_observation(const RobotState& robot, const BallState& ball, const NormalizationSpec& norm) {
    VecX raw = raw_observation(robot, ball);
    if (raw.size() != norm.offset.size()) throw Error(ErrorCode::ShapeMismatch, "observation size does not match normalization");
    return ((raw - norm.offset).array() / norm.scale.array()).matrix();
}

VecX denormalize(const Eigen::Ref<const VecX>& obs, const NormalizationSpec& norm) {
    if (obs.size() != norm.offset.size()) throw Error(ErrorCode::ShapeMismatch, "observation size does not match normalization");
    return (obs.array() * norm.scale.array()).matrix() + norm.offset;
}

void HysrConfig::validate() const {
    const auto fail = [](const char* what) { throw Error(ErrorCode::ConfigError, what); };
    if (!(dt > 0.0 && dt <= 0.05)) fail("hysr.dt must lie in (0, 0.05]");
    if (!(substep > 0.0 && substep <= dt)) fail("hysr.substep must lie in (0, hysr.dt]");
    if (max_steps < 1) fail("hysr.max_steps must be positive");
    if (!(racket_restitution > 0.0 && racket_restitution <= 1.5)) fail("physics.racket_restitution must lie in (0, 1.5]");
    if (!(contact_margin >= 0.0)) fail("physics.contact_margin must be non-negative");
    if (!(lost_depth > 0.0) || !(lost_radius > 0.0)) fail("hysr ball-lost limits must be positive");
    if (!(flight_t_max > 0.0 && flight_t_max <= 3.0)) fail("hysr.flight_t_max must lie in (0, 3]");
    if (n_envs < 1) fail("hysr.n_envs must be positive");
}

void HysrSetup::finalize() {
    if (norm.size() == 0) norm = NormalizationSpec::standard(arm, table);
    arm.validate();
    table.validate();
    aero.validate();
    hysr.validate();
    reward.validate(table);
    norm.validate();
    if (norm.size() != 2 * arm.dof() + arm.muscles() + 6) {
        throw Error(ErrorCode::ConfigError, "normalization does not match the arm");
    }
}

SurrogatePlant::SurrogatePlant(ArmModel model) : model_(std::move(model)), state_(reset_robot(model_)) {}

RobotState SurrogatePlant::reset() {
    state_ = reset_robot(model_);
    return state_;
}

void SurrogatePlant::command(const Action& action) { state_ = apply_action(state_, action, model_); }

void SurrogatePlant::advance(double dt) { state_ = step_robot(state_, model_, dt); }

HysrEpisode::HysrEpisode(const HysrSetup& setup, std::vector<BallState> replay, std::int64_t traj_id,
                         std::unique_ptr<Plant> plant)
    : setup_(&setup), replay_(std::move(replay)), traj_id_(traj_id), plant_(std::move(plant)) {
    if (replay_.empty()) throw Error(ErrorCode::TooShort, "empty replay trajectory");
    if (!plant_) plant_ = std::make_unique<SurrogatePlant>(setup.arm);
    robot_ = plant_->reset();
    ball_ = replay_.front();
    outcome_.min_ball_racket_distance = std::numeric_limits<double>::infinity();
    track_distance();
}

VecX HysrEpisode::observation() const { return compose_observation(robot_, ball_, setup_->norm); }

void HysrEpisode::track_distance() {
    const double d = (ball_.pos - forward_kinematics(robot_.q, setup_->arm).center).norm();
    outcome_.min_ball_racket_distance = std::min(outcome_.min_ball_racket_distance, d);
}

double HysrEpisode::step(const VecX& action) {
    if (done()) throw Error(ErrorCode::InvalidArgument, "step on a finished episode");
    if (action.size() != setup_->arm.muscles()) throw Error(ErrorCode::ShapeMismatch, "action size does not match the arm");
    const HysrSetup& s = *setup_;
    const double dt = s.hysr.dt;

    StepLog log;
    log.t = k_ * dt;
    log.robot = robot_;
    log.ball = ball_;
    log.racket = forward_kinematics(robot_.q, s.arm).center;
    log.touched = touched_;
    log.action = action;

    const RobotState prev_robot = robot_;
    const BallState prev_ball = ball_;

    plant_->command(Action{action});
    plant_->advance(dt);
    robot_ = plant_->read();
    ++k_;

    EpisodeEnd end = EpisodeEnd::Running;
    if (touched_) {
        flight_->advance(dt);
        ball_ = flight_->state();
        if (flight_->done()) end = end_of_flight(flight_->result().end);
    } else if (static_cast<std::size_t>(k_) < replay_.size()) {
        ball_ = replay_[k_];
        for (int i = 1; i <= kContactSamples; ++i) {
            const double u = static_cast<double>(i) / kContactSamples;
            BallState b{prev_ball.pos + u * (ball_.pos - prev_ball.pos), prev_ball.vel + u * (ball_.vel - prev_ball.vel)};
            const VecX q = lerp(prev_robot.q, robot_.q, u);
            RacketPose racket = forward_kinematics(q, s.arm);
            if (!detect_racket_contact(b, racket, s.aero.radius, s.hysr.contact_margin)) continue;
            racket.velocity = racket_velocity(q, robot_.qdot, s.arm);
            const BallState start{b.pos, racket_rebound(b.vel, racket, s.hysr.racket_restitution)};
            touched_ = true;
            ++switches_;
            outcome_.hit = true;
            outcome_.t_hit = (k_ - 1 + u) * dt;
            flight_.emplace(start, s.table, s.aero, s.hysr.substep, s.hysr.flight_t_max);
            flight_->advance((1.0 - u) * dt);
            ball_ = flight_->state();
            if (flight_->done()) end = end_of_flight(flight_->result().end);
            break;
        }
    } else {
        end = EpisodeEnd::ReplayExhausted;
    }

    if (end == EpisodeEnd::Running) {
        const bool lost = ball_.pos.z() < s.table.surface_z - s.hysr.lost_depth ||
                          ball_.pos.norm() > s.hysr.lost_radius;
        if (lost) {
            end = EpisodeEnd::BallLost;
        } else if (k_ >= s.hysr.max_steps) {
            if (touched_) {
                flight_->run_to_end();
                end = end_of_flight(flight_->result().end);
            } else {
                end = EpisodeEnd::Timeout;
            }
        }
    }
    track_distance();

    double reward = 0.0;
    if (end != EpisodeEnd::Running) {
        finish(end);
        reward = episode_reward(outcome_, s.reward, s.table.surface_z);
    }
    log.reward = reward;
    logs_.push_back(std::move(log));
    return reward;
}

void HysrEpisode::finish(EpisodeEnd end) {
    end_ = end;
    if (flight_) {
        const FlightResult& r = flight_->result();
        outcome_.landing = r.landing;
        outcome_.max_speed_after_hit = r.max_speed;
        outcome_.net_fault = r.end == FlightEnd::NetFault;
    }
}

bool EpisodeRollout::returned(const TableGeometry& table) const {
    return outcome.hit && !outcome.net_fault && outcome.landing && outcome.landing->point.y() < table.net_y;
}

EpisodeRollout run_episode(const PolicyFn& policy, const HysrSetup& setup, const RecordedTrajectory& traj,
                           std::uint64_t seed, bool deterministic) {
    HysrEpisode episode(setup, resample(traj, setup.hysr.dt), traj.id);
    Rng rng(seed);
    EpisodeRollout out;
    out.traj_id = traj.id;
    out.seed = seed;
    while (!episode.done()) {
        RolloutStep st;
        st.observation = episode.observation();
        PolicyDecision d = policy(st.observation, rng, deterministic);
        st.reward = episode.step(d.action);
        st.action = std::move(d.action);
        st.raw_action = std::move(d.raw_action);
        st.log_prob = d.log_prob;
        st.value = d.value;
        out.steps.push_back(std::move(st));
    }
    out.outcome = episode.outcome();
    out.end = episode.end();
    out.contact_switches = episode.contact_switches();
    out.logs = episode.logs();
    out.final_robot = episode.robot();
    out.final_ball = episode.ball();
    return out;
}

void write_rollout_csv(const EpisodeRollout& rollout, const std::filesystem::path& path) {
    if (rollout.logs.empty()) throw Error(ErrorCode::EmptyInput, "rollout has no steps");
    const auto& first = rollout.logs.front();
    const auto n = first.robot.q.size();
    const auto m = first.robot.p.size();
    const auto a = first.action.size();
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 1; i <= n; ++i) header.push_back("q" + std::to_string(i));
    for (Eigen::Index i = 1; i <= n; ++i) header.push_back("qd" + std::to_string(i));
    const auto muscle = [](Eigen::Index j) { return std::to_string(j / 2 + 1) + (j % 2 == 0 ? "a" : "b"); };
    for (Eigen::Index j = 0; j < m; ++j) header.push_back("p" + muscle(j));
    for (Eigen::Index j = 0; j < m; ++j) header.push_back("pdes" + muscle(j));
    for (const char* c : {"ball_x", "ball_y", "ball_z"}) header.emplace_back(c);
    for (Eigen::Index j = 1; j <= a; ++j) header.push_back("a" + std::to_string(j));
    header.emplace_back("reward");

    CsvWriter w(path, header);
    std::vector<double> row;
    for (const StepLog& s : rollout.logs) {
        row.clear();
        row.push_back(s.t);
        for (const VecX* v : {&s.robot.q, &s.robot.qdot, &s.robot.p, &s.robot.p_des}) {
            row.insert(row.end(), v->data(), v->data() + v->size());
        }
        row.insert(row.end(), s.ball.pos.data(), s.ball.pos.data() + 3);
        row.insert(row.end(), s.action.data(), s.action.data() + s.action.size());
        row.push_back(s.reward);
        w.row(row);
    }
}

HysrEnv::HysrEnv(std::shared_ptr<const HysrSetup> setup, std::shared_ptr<const Dataset> data)
    : setup_(std::move(setup)), data_(std::move(data)) {
    if (!data_ || data_->trajectories.empty()) throw Error(ErrorCode::EmptyDataset, "training needs at least one trajectory");
    auto replays = std::make_shared<std::vector<std::vector<BallState>>>();
    replays->reserve(data_->trajectories.size());
    for (const auto& t : data_->trajectories) replays->push_back(resample(t, setup_->hysr.dt));
    replays_ = std::move(replays);
}

int HysrEnv::obs_dim() const { return setup_->norm.size(); }
int HysrEnv::act_dim() const { return setup_->arm.muscles(); }

VecX HysrEnv::reset(Rng& rng) {
    const std::size_t i = rng.index(data_->trajectories.size());
    episode_ = std::make_unique<HysrEpisode>(*setup_, (*replays_)[i], data_->trajectories[i].id);
    return episode_->observation();
}

EnvStep HysrEnv::step(const VecX& action) {
    if (!episode_) throw Error(ErrorCode::InvalidArgument, "step before reset");
    EnvStep out;
    out.reward = episode_->step(action);
    out.done = episode_->done();
    if (out.done) {
        EpisodeInfo info;
        info.reward = out.reward;
        info.hit = episode_->outcome().hit;
        const auto& o = episode_->outcome();
        info.returned = o.hit && !o.net_fault && o.landing && o.landing->point.y() < setup_->table.net_y;
        info.traj_id = episode_->traj_id();
        info.length = episode_->steps();
        out.info = info;
    }
    return out;
}

VecX HysrEnv::observation() const {
    if (!episode_) throw Error(ErrorCode::InvalidArgument, "observation before reset");
    return episode_->observation();
}

}  // namespace pamtt
