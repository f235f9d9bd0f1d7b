#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "pamtt/dataset.hpp"
#include "pamtt/env.hpp"
#include "pamtt/robot_sim.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("pamtt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Straight-line recording p(t) = target + vel (t - t_hit), sampled at rate_hz from t = 0.
inline pamtt::RecordedTrajectory straight_line(std::int64_t id, const pamtt::Vec3& target, const pamtt::Vec3& vel,
                                               double t_hit, double duration, double rate_hz = 180.0) {
    pamtt::RecordedTrajectory tr;
    tr.id = id;
    tr.sample_rate_hz = rate_hz;
    const int n = static_cast<int>(duration * rate_hz) + 1;
    for (int k = 0; k < n; ++k) {
        const double t = k / rate_hz;
        tr.samples.push_back({t, target + vel * (t - t_hit)});
    }
    return tr;
}

/// Racket center at the arm's rest posture.
inline pamtt::Vec3 rest_racket(const pamtt::ArmModel& arm = pamtt::ArmModel::default_arm()) {
    return pamtt::forward_kinematics(arm.initial_posture, arm).center;
}

/// Policy that never changes the desired pressures.
inline pamtt::PolicyFn still_policy(int act_dim) {
    return [act_dim](const pamtt::VecX&, pamtt::Rng&, bool) {
        pamtt::PolicyDecision d;
        d.action = pamtt::VecX::Zero(act_dim);
        d.raw_action = d.action;
        return d;
    };
}

}  // namespace fixture
