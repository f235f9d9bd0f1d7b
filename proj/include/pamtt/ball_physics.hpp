#pragma once

#include <optional>
#include <vector>

#include "pamtt/types.hpp"

namespace pamtt {

/// Ball position and velocity in the table frame (origin at the table
/// center, z up, tabletop at `TableGeometry::surface_z`).
struct BallState {
    Vec3 pos = Vec3::Zero();
    Vec3 vel = Vec3::Zero();

    static constexpr double kMaxSpeed = 60.0;

    /// Throws NonFinite on NaN/Inf or a speed beyond kMaxSpeed.
    void validate() const;
};

struct AeroParams {
    double mass = 2.7e-3;         // kg
    double radius = 0.02;         // m
    double drag_coeff = 0.4;
    double air_density = 1.204;   // kg/m^3
    double gravity = 9.81;        // m/s^2

    /// Quadratic drag factor k with a_drag = -k |v| v.
    double drag_factor() const;
    void validate() const;
};

struct TableGeometry {
    double length_y = 2.74;
    double width_x = 1.525;
    double surface_z = 0.0;
    double net_y = 0.0;
    double net_height = 0.1525;
    double restitution_normal = 0.9;
    double tangential_retention = 0.8;

    double half_length() const { return 0.5 * length_y; }
    double half_width() const { return 0.5 * width_x; }
    bool within_bounds(double x, double y) const;
    void validate() const;
};

struct RacketPose {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitY();
    Vec3 velocity = Vec3::Zero();
    double radius = 0.075;
};

enum class ContactKind { RacketHit, TableLand, NetCross };

struct ContactEvent {
    ContactKind kind = ContactKind::TableLand;
    double time = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 ball_vel_before = Vec3::Zero();
    Vec3 ball_vel_after = Vec3::Zero();
};

/// One semi-implicit Euler step under gravity and quadratic drag.
/// dt must lie in (0, 0.02].
BallState step_ball(const BallState& state, double dt, const AeroParams& aero);

/// Downward crossing of the tabletop plane inside the table bounds between
/// two consecutive integrator states. `t_prev` is the time of `prev` and `dt`
/// the step separating the two states; the event time is interpolated.
std::optional<ContactEvent> detect_table_contact(const BallState& prev, const BallState& next,
                                                 const TableGeometry& table, double t_prev = 0.0,
                                                 double dt = 1.0);

/// True when the segment prev->next crosses the tabletop plane downward
/// outside the table bounds (the ball is lost).
bool crosses_plane_off_table(const BallState& prev, const BallState& next,
                             const TableGeometry& table);

/// Componentwise bounce: z flipped and scaled by restitution, x/y scaled by
/// the tangential retention. Throws BadBounce unless vel_in.z < 0.
Vec3 table_bounce(const Vec3& vel_in, const TableGeometry& table);

/// Split of a velocity into its component along a unit normal and the
/// remaining tangential part.
struct NormalSplit {
    double normal = 0.0;
    Vec3 tangential = Vec3::Zero();
};

NormalSplit split_along(const Vec3& v, const Vec3& unit_normal);

/// Normal-direction rebound off a moving racket:
///   v_out_n - r_n = eps_r * (r_n - v_in_n)
/// with all quantities measured along the racket normal. The tangential ball
/// velocity passes through unchanged. Throws BadNormal when the racket normal
/// is not unit length within 1e-6, InvalidArgument when eps_r is outside
/// (0, 1.5].
Vec3 racket_rebound(const Vec3& ball_vel_in, const RacketPose& racket, double eps_r);

/// Same as racket_rebound but returns the pieces: the outgoing normal
/// component and the (untouched) tangential part.
NormalSplit racket_rebound_components(const Vec3& ball_vel_in, const RacketPose& racket,
                                      double eps_r);

/// Distance from a point to the racket disc (center, normal, radius).
double distance_to_disc(const Vec3& point, const RacketPose& racket);

inline constexpr double kDefaultContactMargin = 0.005;

bool detect_racket_contact(const BallState& ball, const RacketPose& racket, double ball_radius,
                           double contact_margin = kDefaultContactMargin);

enum class FlightEnd { Landed, NetFault, OffTable, Floor, Lost, Timeout, InFlight };

struct FlightResult {
    std::optional<ContactEvent> landing;
    std::vector<ContactEvent> net_crossings;
    double max_speed = 0.0;
    double elapsed = 0.0;
    FlightEnd end = FlightEnd::InFlight;
    BallState final_state;
};

/// Incremental post-hit flight. Owns the simulated ball after a racket
/// contact and advances it substep by substep, recording the landing, net
/// crossings and the running maximum speed. simulate_until_landing is this
/// tracker run to completion; HYSR advances it one control step at a time.
class FlightTracker {
public:
    FlightTracker(const BallState& start, const TableGeometry& table, const AeroParams& aero,
                  double substep, double t_max);

    /// Advances by up to `duration` seconds; stops early when the flight ends.
    void advance(double duration);
    void run_to_end();

    bool done() const { return result_.end != FlightEnd::InFlight; }
    const BallState& state() const { return state_; }
    const FlightResult& result() const { return result_; }

    /// Floor plane below the tabletop.
    static constexpr double kFloorDepth = 0.76;

private:
    void substep_once();

    BallState state_;
    TableGeometry table_;
    AeroParams aero_;
    double substep_;
    double t_max_;
    FlightResult result_;
};

/// Integrates a post-rebound ball until a table landing, a net fault, an
/// off-table plane crossing, the floor, or t_max (at most 3 s).
FlightResult simulate_until_landing(const BallState& state, const TableGeometry& table,
                                    const AeroParams& aero, double dt, double t_max);

}  // namespace pamtt
