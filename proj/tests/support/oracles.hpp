#pragma once

// Reference computations written independently of the library code they
// check: plain loops, dense matrices, brute force.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "pamtt/policy.hpp"
#include "pamtt/robot_sim.hpp"

namespace oracle {

using pamtt::Vec3;
using pamtt::VecX;

inline Vec3 projectile(const Vec3& p0, const Vec3& v0, double g, double t) {
    return p0 + v0 * t - 0.5 * g * t * t * Vec3::UnitZ();
}

/// Minimum distance from a point to a disc, sampled on a polar grid plus the rim.
inline double disc_distance(const Vec3& p, const Vec3& c, const Vec3& n, double radius, int rings = 400,
                            int spokes = 720) {
    Vec3 u = n.unitOrthogonal();
    Vec3 v = n.cross(u);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= rings; ++i) {
        const double r = radius * i / rings;
        for (int j = 0; j < spokes; ++j) {
            const double a = 2.0 * std::numbers::pi * j / spokes;
            const Vec3 s = c + r * (std::cos(a) * u + std::sin(a) * v);
            best = std::min(best, (p - s).norm());
        }
    }
    return best;
}

inline Eigen::Matrix4d rotation(const Vec3& axis, double angle) {
    const Vec3 k = axis.normalized();
    Eigen::Matrix3d K;
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.topLeftCorner<3, 3>() = Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
    return T;
}

inline Eigen::Matrix4d translation(const Vec3& d) {
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    T.topRightCorner<3, 1>() = d;
    return T;
}

struct Pose {
    Vec3 center;
    Vec3 normal;
};

/// Homogeneous-matrix chain: base, then per joint a Rodrigues rotation and a link translation.
inline Pose forward_kinematics(const VecX& q, const pamtt::ArmModel& m) {
    Eigen::Matrix4d T = m.base_pose.matrix();
    for (int i = 0; i < q.size(); ++i) {
        T = T * rotation(m.joint_axes[i], q[i]) * translation(m.link_lengths[i] * m.link_dirs[i]);
    }
    return {T.topRightCorner<3, 1>(), T.topLeftCorner<3, 3>() * m.racket_normal_local};
}

/// A_t = sum_l (gamma lam)^l delta_{t+l}, truncated at the end of the episode.
inline std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<bool>& done, double gamma, double lam) {
    const std::size_t T = r.size();
    std::vector<double> adv(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double coef = 1.0;
        for (std::size_t k = t; k < T; ++k) {
            const double next = done[k] ? 0.0 : v[k + 1];
            const double delta = r[k] + gamma * next - v[k];
            adv[t] += coef * delta;
            if (done[k]) break;
            coef *= gamma * lam;
        }
    }
    return adv;
}

struct Forward {
    VecX raw_mean;
    VecX std;
    double value = 0.0;
};

/// Network evaluated with scalar loops straight from the flat parameter vector.
inline Forward forward(const pamtt::PolicyParams& p, const VecX& obs) {
    using B = pamtt::PolicyParams;
    const VecX& th = p.flat();
    const int O = p.obs_dim();
    const int H = p.hidden();
    const int A = p.act_dim();
    const auto w = [&](B::Block b, int rows, int i, int j) { return th[p.block_offset(b) + j * rows + i]; };
    const auto b = [&](B::Block blk, int i) { return th[p.block_offset(blk) + i]; };

    Forward f;
    std::vector<double> h(H), hv(H);
    for (int i = 0; i < H; ++i) {
        double s = b(B::PiB1, i);
        double sv = b(B::VfB1, i);
        for (int j = 0; j < O; ++j) {
            s += w(B::PiW1, H, i, j) * obs[j];
            sv += w(B::VfW1, H, i, j) * obs[j];
        }
        h[i] = std::tanh(s);
        hv[i] = std::tanh(sv);
    }
    f.raw_mean.resize(A);
    f.std.resize(A);
    for (int a = 0; a < A; ++a) {
        double s = b(B::PiB2, a);
        for (int i = 0; i < H; ++i) s += w(B::PiW2, A, a, i) * h[i];
        f.raw_mean[a] = s;
        f.std[a] = std::exp(b(B::LogStd, a));
    }
    f.value = b(B::VfB2, 0);
    for (int i = 0; i < H; ++i) f.value += w(B::VfW2, 1, 0, i) * hv[i];
    return f;
}

/// Composite Simpson rule on [lo, hi] with n (even) intervals.
template <class F>
double simpson(F f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
    return s * h / 3.0;
}

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace oracle
