#include "pamtt/ball_physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pamtt/error.hpp"

namespace pamtt {

void BallState::validate() const {
    if (!pos.allFinite() || !vel.allFinite()) {
        throw Error(ErrorCode::NonFinite, "ball state contains NaN/Inf");
    }
    if (vel.norm() > kMaxSpeed) {
        throw Error(ErrorCode::NonFinite, "ball speed exceeds sanity bound");
    }
}

double AeroParams::drag_factor() const {
    const double area = std::numbers::pi * radius * radius;
    return 0.5 * air_density * drag_coeff * area / mass;
}

void AeroParams::validate() const {
    if (!(mass > 0.0) || !(radius > 0.0) || !(drag_coeff >= 0.0) || !(air_density >= 0.0) ||
        !(gravity >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "aero parameters out of range");
    }
}

bool TableGeometry::within_bounds(double x, double y) const {
    return std::abs(x) <= half_width() && std::abs(y) <= half_length();
}

void TableGeometry::validate() const {
    if (!(length_y > 0.0) || !(width_x > 0.0) || !(restitution_normal > 0.0) ||
        !(restitution_normal <= 1.0) || !(tangential_retention > 0.0) ||
        !(tangential_retention <= 1.0) || !(net_height >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "table geometry out of range");
    }
}

BallState step_ball(const BallState& state, double dt, const AeroParams& aero) {
    if (!state.pos.allFinite() || !state.vel.allFinite() || !std::isfinite(dt)) {
        throw Error(ErrorCode::NonFinite, "step_ball input contains NaN/Inf");
    }
    if (!(dt > 0.0) || dt > 0.02) {
        throw Error(ErrorCode::InvalidArgument, "step_ball dt must lie in (0, 0.02]");
    }
    Vec3 acc = -aero.drag_factor() * state.vel.norm() * state.vel;
    acc.z() -= aero.gravity;

    BallState next;
    next.vel = state.vel + dt * acc;
    next.pos = state.pos + dt * next.vel;
    return next;
}

std::optional<ContactEvent> detect_table_contact(const BallState& prev, const BallState& next,
                                                 const TableGeometry& table, double t_prev,
                                                 double dt) {
    const double above = prev.pos.z() - table.surface_z;
    const double below = next.pos.z() - table.surface_z;
    if (!(above > 0.0 && below <= 0.0)) return std::nullopt;

    const double frac = above / (above - below);
    Vec3 point = prev.pos + frac * (next.pos - prev.pos);
    point.z() = table.surface_z;
    if (!table.within_bounds(point.x(), point.y())) return std::nullopt;

    ContactEvent ev;
    ev.kind = ContactKind::TableLand;
    ev.time = t_prev + frac * dt;
    ev.point = point;
    ev.ball_vel_before = prev.vel + frac * (next.vel - prev.vel);
    ev.ball_vel_after = ev.ball_vel_before;
    return ev;
}

bool crosses_plane_off_table(const BallState& prev, const BallState& next,
                             const TableGeometry& table) {
    const double above = prev.pos.z() - table.surface_z;
    const double below = next.pos.z() - table.surface_z;
    if (!(above > 0.0 && below <= 0.0)) return false;
    const double frac = above / (above - below);
    const Vec3 point = prev.pos + frac * (next.pos - prev.pos);
    return !table.within_bounds(point.x(), point.y());
}

Vec3 table_bounce(const Vec3& vel_in, const TableGeometry& table) {
    if (!(vel_in.z() < 0.0)) {
        throw Error(ErrorCode::BadBounce, "table bounce needs a downward velocity");
    }
    return {table.tangential_retention * vel_in.x(), table.tangential_retention * vel_in.y(),
            -table.restitution_normal * vel_in.z()};
}

NormalSplit split_along(const Vec3& v, const Vec3& unit_normal) {
    NormalSplit s;
    s.normal = v.dot(unit_normal);
    s.tangential = v - s.normal * unit_normal;
    return s;
}

namespace {

Vec3 checked_unit_normal(const RacketPose& racket) {
    const double norm = racket.normal.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
        throw Error(ErrorCode::BadNormal, "racket normal is not unit length");
    }
    return racket.normal / norm;
}

}  // namespace

NormalSplit racket_rebound_components(const Vec3& ball_vel_in, const RacketPose& racket,
                                      double eps_r) {
    if (!(eps_r > 0.0) || eps_r > 1.5) {
        throw Error(ErrorCode::InvalidArgument, "racket restitution must lie in (0, 1.5]");
    }
    const Vec3 n = checked_unit_normal(racket);
    NormalSplit split = split_along(ball_vel_in, n);
    const double racket_n = racket.velocity.dot(n);
    split.normal = racket_n + eps_r * (racket_n - split.normal);
    return split;
}

Vec3 racket_rebound(const Vec3& ball_vel_in, const RacketPose& racket, double eps_r) {
    const NormalSplit out = racket_rebound_components(ball_vel_in, racket, eps_r);
    return out.tangential + out.normal * checked_unit_normal(racket);
}

double distance_to_disc(const Vec3& point, const RacketPose& racket) {
    const Vec3 n = racket.normal.normalized();
    const Vec3 d = point - racket.center;
    const double h = d.dot(n);
    const double radial = (d - h * n).norm();
    if (radial <= racket.radius) return std::abs(h);
    const double out = radial - racket.radius;
    return std::sqrt(h * h + out * out);
}

bool detect_racket_contact(const BallState& ball, const RacketPose& racket, double ball_radius,
                           double contact_margin) {
    return distance_to_disc(ball.pos, racket) <= ball_radius + contact_margin;
}

FlightTracker::FlightTracker(const BallState& start, const TableGeometry& table,
                             const AeroParams& aero, double substep, double t_max)
    : state_(start), table_(table), aero_(aero), substep_(substep), t_max_(t_max) {
    start.validate();
    if (!(substep > 0.0) || substep > 0.02) {
        throw Error(ErrorCode::InvalidArgument, "flight substep must lie in (0, 0.02]");
    }
    if (!(t_max > 0.0) || t_max > 3.0) {
        throw Error(ErrorCode::InvalidArgument, "flight t_max must lie in (0, 3]");
    }
    result_.max_speed = start.vel.norm();
    result_.final_state = start;
}

void FlightTracker::substep_once() {
    const BallState prev = state_;
    const BallState next = step_ball(prev, substep_, aero_);
    const double t_prev = result_.elapsed;
    result_.elapsed += substep_;
    result_.max_speed = std::max(result_.max_speed, next.vel.norm());
    state_ = next;
    result_.final_state = next;

    // Net plane.
    const double side_prev = prev.pos.y() - table_.net_y;
    const double side_next = next.pos.y() - table_.net_y;
    if ((side_prev < 0.0) != (side_next < 0.0)) {
        const double frac = side_prev / (side_prev - side_next);
        ContactEvent ev;
        ev.kind = ContactKind::NetCross;
        ev.time = t_prev + frac * substep_;
        ev.point = prev.pos + frac * (next.pos - prev.pos);
        ev.ball_vel_before = prev.vel + frac * (next.vel - prev.vel);
        ev.ball_vel_after = ev.ball_vel_before;
        result_.net_crossings.push_back(ev);
        const bool over_net_span = std::abs(ev.point.x()) <= table_.half_width();
        const bool below_top = ev.point.z() < table_.surface_z + table_.net_height;
        if (over_net_span && below_top && ev.point.z() >= table_.surface_z) {
            result_.end = FlightEnd::NetFault;
            return;
        }
    }

    if (auto land = detect_table_contact(prev, next, table_, t_prev, substep_)) {
        result_.landing = *land;
        result_.end = FlightEnd::Landed;
        return;
    }
    if (crosses_plane_off_table(prev, next, table_)) {
        result_.end = FlightEnd::OffTable;
        return;
    }
    if (next.pos.z() < table_.surface_z - kFloorDepth) {
        result_.end = FlightEnd::Floor;
        return;
    }
    if (next.vel.norm() > BallState::kMaxSpeed || !next.pos.allFinite()) {
        result_.end = FlightEnd::Lost;
        return;
    }
    if (result_.elapsed >= t_max_ - 1e-12) {
        result_.end = FlightEnd::Timeout;
    }
}

void FlightTracker::advance(double duration) {
    const long n = std::lround(duration / substep_);
    for (long i = 0; i < n && !done(); ++i) substep_once();
}

void FlightTracker::run_to_end() {
    while (!done()) substep_once();
}

FlightResult simulate_until_landing(const BallState& state, const TableGeometry& table,
                                    const AeroParams& aero, double dt, double t_max) {
    FlightTracker tracker(state, table, aero, dt, t_max);
    tracker.run_to_end();
    return tracker.result();
}

}  // namespace pamtt
