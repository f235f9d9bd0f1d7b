#include "pamtt/launcher.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "pamtt/csv.hpp"
#include "pamtt/digest.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string launcher_digest(const LauncherConfig& c, std::size_t n, std::uint64_t seed) {
    std::ostringstream s;
    s << "launcher";
    for (double v : {c.position.x(), c.position.y(), c.position.z(), c.speed, c.elevation_deg,
                     c.azimuth_deg, c.sigma_pos, c.sigma_speed, c.sigma_dir_deg, c.obs_noise,
                     c.rate_hz, c.truncate_y, c.t_max}) {
        s << ' ' << format_double(v);
    }
    s << " n=" << n << " seed=" << seed;
    return hex_digest(s.str());
}

}  // namespace

void LauncherConfig::validate() const {
    const auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (!(sigma_pos >= 0.0) || !(sigma_speed >= 0.0) || !(sigma_dir_deg >= 0.0) || !(obs_noise >= 0.0)) {
        fail("launcher noise levels must be non-negative");
    }
    if (!(rate_hz > 0.0)) fail("launcher.rate_hz must be positive");
    if (!(speed >= 2.0 && speed <= 15.0)) fail("launcher.speed must lie in [2, 15] m/s");
    if (!(t_max > 0.0 && t_max <= RecordedTrajectory::kMaxDuration)) fail("launcher.t_max must lie in (0, 3] s");
    if (!position.allFinite()) fail("launcher.position must be finite");
}

RecordedTrajectory generate_trajectory(const LauncherConfig& cfg, std::int64_t id, Rng& rng,
                                       const TableGeometry& table, const AeroParams& aero) {
    BallState ball;
    for (int i = 0; i < 3; ++i) ball.pos[i] = cfg.position[i] + cfg.sigma_pos * rng.normal();
    const double speed = cfg.speed + cfg.sigma_speed * rng.normal();
    const double elev = (cfg.elevation_deg + cfg.sigma_dir_deg * rng.normal()) * kDeg;
    const double azim = (cfg.azimuth_deg + cfg.sigma_dir_deg * rng.normal()) * kDeg;
    ball.vel = speed * Vec3(std::sin(azim) * std::cos(elev), std::cos(azim) * std::cos(elev), std::sin(elev));

    const double period = 1.0 / cfg.rate_hz;
    const int substeps = static_cast<int>(std::ceil(period / 1e-3 - 1e-9));
    const double h = period / substeps;

    RecordedTrajectory traj;
    traj.id = id;
    traj.sample_rate_hz = cfg.rate_hz;

    const auto observe = [&](double t) {
        Vec3 p = ball.pos;
        for (int i = 0; i < 3; ++i) p[i] += cfg.obs_noise * rng.normal();
        traj.samples.push_back({t, p});
    };

    observe(0.0);
    for (long k = 1;; ++k) {
        const double t = static_cast<double>(k) * period;
        if (t > cfg.t_max) break;
        bool lost = false;
        for (int s = 0; s < substeps; ++s) {
            BallState next = step_ball(ball, h, aero);
            if (auto contact = detect_table_contact(ball, next, table, 0.0, h)) {
                const double rest = h - contact->time;
                ball.pos = contact->point;
                ball.vel = table_bounce(contact->ball_vel_before, table);
                if (rest > 1e-12) ball = step_ball(ball, rest, aero);
            } else {
                ball = next;
            }
            if (ball.pos.z() < table.surface_z - 0.5) lost = true;
        }
        if (lost || ball.pos.y() > cfg.truncate_y) break;
        observe(t);
    }
    if (traj.samples.size() < RecordedTrajectory::kMinSamples) {
        throw Error(ErrorCode::ConfigError, "launcher settings produce trajectories shorter than 10 samples");
    }
    return traj;
}

Dataset generate_dataset(const LauncherConfig& cfg, std::size_t n, std::uint64_t seed,
                         const TableGeometry& table, const AeroParams& aero, unsigned workers) {
    cfg.validate();
    if (n == 0) throw Error(ErrorCode::ConfigError, "dataset size must be at least 1");
    Dataset d;
    d.meta = launcher_digest(cfg, n, seed);
    d.trajectories.resize(n);

    const auto work = [&](unsigned w, unsigned stride) {
        for (std::size_t i = w; i < n; i += stride) {
            Rng rng(substream_seed(seed, i));
            d.trajectories[i] = generate_trajectory(cfg, static_cast<std::int64_t>(i), rng, table, aero);
        }
    };
    workers = std::max(1u, workers);
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        work(w, workers);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return d;
}

VariabilityReport launcher_selftest(const LauncherConfig& cfg, const TableGeometry& table,
                                    const AeroParams& aero, std::size_t n, std::uint64_t seed) {
    const Dataset d = generate_dataset(cfg, n, seed, table, aero);
    return variability_stats(d, 1.0 / cfg.rate_hz, 0.05, table);
}

}  // namespace pamtt
