#pragma once

#include <vector>

#include "pamtt/ball_physics.hpp"
#include "pamtt/types.hpp"

namespace pamtt {

/// Surrogate muscular arm. Each degree of freedom i is driven by an
/// antagonistic pair of pressures: muscle 2i (agonist, positive torque) and
/// muscle 2i+1 (antagonist). Pressures are normalized to [0, 1].
///
/// The plant is a first-order lag from desired to actual pressure and a
/// linear antagonistic torque on a damped rigid joint. Hysteresis,
/// temperature drift and cable friction are not modeled.
struct ArmModel {
    VecX link_lengths;                 // m, one per joint
    std::vector<Vec3> joint_axes;      // unit, in the frame before each joint
    std::vector<Vec3> link_dirs;       // unit, direction of each link after its joint
    Eigen::Isometry3d base_pose = Eigen::Isometry3d::Identity();
    Vec3 racket_normal_local = Vec3::UnitY();
    double racket_radius = 0.075;

    VecX muscle_gain;                  // N m per unit pressure difference
    VecX inertia;                      // kg m^2
    VecX viscous_damping;              // N m s
    double pressure_time_constant = 0.05;  // s

    VecX pressure_min;                 // per muscle
    VecX pressure_max;
    VecX q_min;                        // rad
    VecX q_max;
    VecX initial_posture;

    double max_delta = 0.3;            // per control step, normalized pressure
    double soft_limit_band = 0.08726646259971647;  // 5 degrees
    double soft_limit_gain = 1.0;      // multiple of muscle_gain at the hard stop

    int dof() const { return static_cast<int>(link_lengths.size()); }
    int muscles() const { return 2 * dof(); }

    /// Throws InvalidArgument on inconsistent sizes or ranges.
    void validate() const;

    /// Four-joint arm: base yaw, shoulder pitch, elbow pitch, and a wrist
    /// joint pitching the racket face about the forearm axis.
    static ArmModel default_arm();
    /// Two pitch joints in the x-z plane; used by the reach benchmark.
    static ArmModel planar_two_link();
};

struct RobotState {
    VecX q;
    VecX qdot;
    VecX p;
    VecX p_des;

    bool operator==(const RobotState&) const = default;
};

struct Action {
    VecX dp_des;
};

/// p_des <- clamp(p_des + clamp(dp, +-max_delta), pressure range). Saturates,
/// never rejects.
RobotState apply_action(const RobotState& state, const Action& action, const ArmModel& model);

/// One control step of the surrogate plant. Throws NonFinite on NaN input.
RobotState step_robot(const RobotState& state, const ArmModel& model, double dt);

/// Joint torques for the current pressures and velocities, including the
/// soft joint-limit term.
VecX joint_torques(const RobotState& state, const ArmModel& model);

/// Racket center and normal for joint angles q. Velocity is zero.
RacketPose forward_kinematics(const Eigen::Ref<const VecX>& q, const ArmModel& model);

/// Racket center velocity: per-joint central differences of the forward
/// kinematics (step 1e-6 rad) contracted with qdot.
Vec3 racket_velocity(const Eigen::Ref<const VecX>& q, const Eigen::Ref<const VecX>& qdot,
                     const ArmModel& model);

/// Racket pose with its center velocity filled in.
RacketPose racket_pose(const RobotState& state, const ArmModel& model);

/// q = initial posture, qdot = 0, p = p_des = mid-range co-contraction.
RobotState reset_robot(const ArmModel& model);

/// True when every pressure and joint angle lies in its configured range.
bool within_safety_ranges(const RobotState& state, const ArmModel& model);

/// Position of the base (origin of joint 1).
inline Vec3 base_position(const ArmModel& model) { return model.base_pose.translation(); }

}  // namespace pamtt
