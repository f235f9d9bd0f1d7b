#include "pamtt/robot_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pamtt/error.hpp"

namespace pamtt {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void require(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace

void ArmModel::validate() const {
    const auto n = link_lengths.size();
    require(n > 0, "arm needs at least one joint");
    require(joint_axes.size() == static_cast<std::size_t>(n) &&
                link_dirs.size() == static_cast<std::size_t>(n),
            "joint axes / link directions size mismatch");
    require(muscle_gain.size() == n && inertia.size() == n && viscous_damping.size() == n &&
                q_min.size() == n && q_max.size() == n && initial_posture.size() == n,
            "per-joint parameter size mismatch");
    require(pressure_min.size() == 2 * n && pressure_max.size() == 2 * n,
            "per-muscle pressure range size mismatch");
    require((inertia.array() > 0.0).all(), "inertia must be positive");
    require(pressure_time_constant > 0.0, "pressure time constant must be positive");
    require((pressure_min.array() < pressure_max.array()).all(), "p_min must be < p_max");
    require((pressure_min.array() >= 0.0).all() && (pressure_max.array() <= 1.0).all(),
            "pressure ranges must lie in [0, 1]");
    require((q_min.array() < q_max.array()).all(), "q_min must be < q_max");
    require((initial_posture.array() >= q_min.array()).all() &&
                (initial_posture.array() <= q_max.array()).all(),
            "initial posture outside joint limits");
    require(max_delta > 0.0, "max_delta must be positive");
    require(racket_radius > 0.0, "racket radius must be positive");
    for (const auto& a : joint_axes) require(std::abs(a.norm() - 1.0) < 1e-9, "joint axis not unit");
    require(std::abs(racket_normal_local.norm() - 1.0) < 1e-9, "racket normal not unit");
}

ArmModel ArmModel::default_arm() {
    ArmModel m;
    m.link_lengths = Eigen::Vector4d(0.30, 0.30, 0.25, 0.10);
    // Base yaw, shoulder and elbow pitch, and a wrist joint about the forearm
    // axis that opens/closes the racket face.
    m.joint_axes = {Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitY(), Vec3::UnitX()};
    m.link_dirs = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitX(), Vec3::UnitX()};
    // Mounted beside the robot's end of the table, arm pointing along -x at
    // q = 0 so the racket face looks down the table.
    m.base_pose = Eigen::Isometry3d::Identity();
    m.base_pose.translate(Vec3(0.62, 1.62, -0.05));
    m.base_pose.rotate(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ()));
    m.racket_normal_local = Vec3::UnitY();
    m.racket_radius = 0.075;

    m.inertia = Eigen::Vector4d(0.04, 0.04, 0.02, 0.005);
    m.muscle_gain = 60.0 * m.inertia;
    m.viscous_damping = 20.0 * m.inertia;
    m.pressure_time_constant = 0.05;

    m.pressure_min = VecX::Zero(8);
    m.pressure_max = VecX::Ones(8);
    m.q_min = Eigen::Vector4d(-90.0, -60.0, -90.0, -60.0) * kDeg;
    m.q_max = Eigen::Vector4d(90.0, 60.0, 90.0, 60.0) * kDeg;
    // Rest posture: shoulder pitched down, racket below the incoming balls.
    m.initial_posture = Eigen::Vector4d(0.0, 0.2, 0.0, 0.0);
    return m;
}

ArmModel ArmModel::planar_two_link() {
    ArmModel m;
    m.link_lengths = Eigen::Vector2d(0.30, 0.30);
    m.joint_axes = {Vec3::UnitY(), Vec3::UnitY()};
    m.link_dirs = {Vec3::UnitX(), Vec3::UnitX()};
    m.racket_normal_local = Vec3::UnitZ();
    m.inertia = Eigen::Vector2d(0.04, 0.02);
    m.muscle_gain = 60.0 * m.inertia;
    m.viscous_damping = 20.0 * m.inertia;
    m.pressure_min = VecX::Zero(4);
    m.pressure_max = VecX::Ones(4);
    m.q_min = Eigen::Vector2d(-90.0, -120.0) * kDeg;
    m.q_max = Eigen::Vector2d(90.0, 120.0) * kDeg;
    m.initial_posture = VecX::Zero(2);
    return m;
}

RobotState apply_action(const RobotState& state, const Action& action, const ArmModel& model) {
    if (action.dp_des.size() != model.muscles()) {
        throw Error(ErrorCode::ShapeMismatch, "action size does not match muscle count");
    }
    RobotState next = state;
    const VecX delta = action.dp_des.cwiseMax(-model.max_delta).cwiseMin(model.max_delta);
    next.p_des = (state.p_des + delta).cwiseMax(model.pressure_min).cwiseMin(model.pressure_max);
    return next;
}

VecX joint_torques(const RobotState& state, const ArmModel& model) {
    const int n = model.dof();
    VecX tau(n);
    for (int i = 0; i < n; ++i) {
        const double diff = state.p[2 * i] - state.p[2 * i + 1];
        double t = model.muscle_gain[i] * diff - model.viscous_damping[i] * state.qdot[i];

        const double band = model.soft_limit_band;
        const double k = model.soft_limit_gain * model.muscle_gain[i] / (band * band);
        const double low = model.q_min[i] + band - state.q[i];
        const double high = state.q[i] - (model.q_max[i] - band);
        if (low > 0.0) t += k * low * low;
        if (high > 0.0) t -= k * high * high;
        tau[i] = t;
    }
    return tau;
}

RobotState step_robot(const RobotState& state, const ArmModel& model, double dt) {
    if (!state.q.allFinite() || !state.qdot.allFinite() || !state.p.allFinite() ||
        !state.p_des.allFinite()) {
        throw Error(ErrorCode::NonFinite, "robot state contains NaN/Inf");
    }
    if (!(dt > 0.0) || dt > model.pressure_time_constant) {
        throw Error(ErrorCode::InvalidArgument, "robot dt must lie in (0, tau_p]");
    }
    RobotState next = state;
    next.p = (state.p + (dt / model.pressure_time_constant) * (state.p_des - state.p))
                 .cwiseMax(model.pressure_min)
                 .cwiseMin(model.pressure_max);

    const VecX tau = joint_torques(next, model);
    next.qdot = state.qdot + dt * tau.cwiseQuotient(model.inertia);
    next.q = state.q + dt * next.qdot;
    for (int i = 0; i < model.dof(); ++i) {
        if (next.q[i] > model.q_max[i]) {
            next.q[i] = model.q_max[i];
            next.qdot[i] = 0.0;
        } else if (next.q[i] < model.q_min[i]) {
            next.q[i] = model.q_min[i];
            next.qdot[i] = 0.0;
        }
    }
    return next;
}

RacketPose forward_kinematics(const Eigen::Ref<const VecX>& q, const ArmModel& model) {
    Eigen::Quaterniond rot(model.base_pose.rotation());
    Vec3 pos = model.base_pose.translation();
    for (int i = 0; i < model.dof(); ++i) {
        rot = rot * Eigen::Quaterniond(Eigen::AngleAxisd(q[i], model.joint_axes[i]));
        pos += rot * (model.link_lengths[i] * model.link_dirs[i]);
    }
    RacketPose pose;
    pose.center = pos;
    pose.normal = (rot * model.racket_normal_local).normalized();
    pose.radius = model.racket_radius;
    return pose;
}

Vec3 racket_velocity(const Eigen::Ref<const VecX>& q, const Eigen::Ref<const VecX>& qdot,
                     const ArmModel& model) {
    constexpr double h = 1e-6;
    Vec3 v = Vec3::Zero();
    VecX qp = q;
    VecX qm = q;
    for (int i = 0; i < model.dof(); ++i) {
        if (qdot[i] == 0.0) continue;
        qp[i] = q[i] + h;
        qm[i] = q[i] - h;
        const Vec3 column =
            (forward_kinematics(qp, model).center - forward_kinematics(qm, model).center) /
            (2.0 * h);
        v += column * qdot[i];
        qp[i] = q[i];
        qm[i] = q[i];
    }
    return v;
}

RacketPose racket_pose(const RobotState& state, const ArmModel& model) {
    RacketPose pose = forward_kinematics(state.q, model);
    pose.velocity = racket_velocity(state.q, state.qdot, model);
    return pose;
}

RobotState reset_robot(const ArmModel& model) {
    model.validate();
    RobotState s;
    s.q = model.initial_posture;
    s.qdot = VecX::Zero(model.dof());
    s.p = 0.5 * (model.pressure_min + model.pressure_max);
    s.p_des = s.p;
    return s;
}

bool within_safety_ranges(const RobotState& state, const ArmModel& model) {
    const auto in = [](const VecX& v, const VecX& lo, const VecX& hi) {
        return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
    };
    return in(state.p, model.pressure_min, model.pressure_max) &&
           in(state.p_des, model.pressure_min, model.pressure_max) &&
           in(state.q, model.q_min, model.q_max);
}

}  // namespace pamtt
