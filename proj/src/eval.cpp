#include "pamtt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "pamtt/csv.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

EvalReport summarize(const std::vector<EpisodeRollout>& episodes, const TableGeometry& table) {
    EvalReport r;
    r.n_episodes = static_cast<int>(episodes.size());
    for (const EpisodeRollout& e : episodes) {
        r.rewards.push_back(e.reward());
        if (e.outcome.hit) ++r.hits;
        if (e.returned(table)) {
            ++r.returns;
            r.landing_points.push_back(e.outcome.landing->point.head<2>());
            r.speed_samples.push_back(e.outcome.max_speed_after_hit.value_or(0.0));
        }
    }
    if (r.n_episodes > 0) {
        r.hit_rate = static_cast<double>(r.hits) / r.n_episodes;
        r.return_rate = static_cast<double>(r.returns) / r.n_episodes;
        double sum = 0.0;
        for (double x : r.rewards) sum += x;
        r.mean_rtt = sum / r.n_episodes;
    }
    const auto m = r.landing_points.size();
    if (m > 0) {
        for (const Vec2& p : r.landing_points) r.landing_mean += p;
        r.landing_mean /= static_cast<double>(m);
    }
    if (m > 1) {
        for (const Vec2& p : r.landing_points) {
            const Vec2 d = p - r.landing_mean;
            r.landing_cov += d * d.transpose();
        }
        r.landing_cov /= static_cast<double>(m - 1);
    }
    return r;
}

EvalReport evaluate_policy(const PolicyFn& policy, const HysrSetup& setup, const Dataset& trajectories,
                           std::uint64_t seed, bool deterministic, unsigned workers) {
    const std::size_t n = trajectories.trajectories.size();
    if (n == 0) throw Error(ErrorCode::EmptyDataset, "evaluation needs at least one trajectory");
    std::vector<EpisodeRollout> episodes(n);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    std::vector<std::exception_ptr> errors(workers);
    const auto work = [&](unsigned w) {
        try {
            for (std::size_t i = w; i < n; i += workers) {
                episodes[i] = run_episode(policy, setup, trajectories.trajectories[i], substream_seed(seed, i), deterministic);
                episodes[i].logs.clear();
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return summarize(episodes, setup.table);
}

Dataset evaluation_trajectories(const LauncherConfig& launcher, const HysrSetup& setup, int n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "evaluation needs n >= 1");
    return generate_dataset(launcher, static_cast<std::size_t>(n), substream_seed(seed, 0x5EED'E7A1ULL), setup.table,
                            setup.aero);
}

EvalReport evaluate_policy(const PolicyParams& params, const HysrSetup& setup, const LauncherConfig& launcher,
                           int n, std::uint64_t seed, bool deterministic, unsigned workers) {
    const Dataset d = evaluation_trajectories(launcher, setup, n, seed);
    return evaluate_policy(make_policy_fn(params), setup, d, seed, deterministic, workers);
}

SpeedHistogram speed_histogram(const std::vector<double>& speeds, double bin_width) {
    if (speeds.empty()) throw Error(ErrorCode::EmptyInput, "no speed samples");
    if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
    double hi = 0.0;
    for (double s : speeds) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "speeds must be finite and non-negative");
        hi = std::max(hi, s);
    }
    SpeedHistogram h;
    h.bin_width = bin_width;
    h.counts.assign(static_cast<std::size_t>(std::floor(hi / bin_width)) + 1, 0);
    for (double s : speeds) {
        const auto k = std::min(static_cast<std::size_t>(std::floor(s / bin_width)), h.counts.size() - 1);
        ++h.counts[k];
    }
    const double n = static_cast<double>(speeds.size());
    for (int c : h.counts) h.probabilities.push_back(c / n);
    return h;
}

std::vector<CurvePoint> learning_curve(const std::vector<EpisodeRecord>& records) {
    std::map<int, std::vector<double>> groups;
    for (const EpisodeRecord& r : records) groups[r.update].push_back(r.reward);
    std::vector<CurvePoint> out;
    for (const auto& [update, xs] : groups) {
        CurvePoint p;
        p.update = update;
        p.n = static_cast<int>(xs.size());
        double sum = 0.0;
        for (double x : xs) sum += x;
        p.mean = sum / p.n;
        if (p.n > 1) {
            double ss = 0.0;
            for (double x : xs) ss += (x - p.mean) * (x - p.mean);
            p.std = std::sqrt(ss / (p.n - 1));
        }
        out.push_back(p);
    }
    return out;
}

std::vector<CurvePoint> learning_curve(const std::vector<UpdateLog>& log) {
    std::vector<EpisodeRecord> records;
    for (const UpdateLog& l : log) {
        for (double r : l.episode_rewards) records.push_back({l.update, r});
    }
    return learning_curve(records);
}

void write_eval_csvs(const EvalReport& r, const std::filesystem::path& dir, double speed_bin) {
    std::filesystem::create_directories(dir);
    {
        CsvWriter w(dir / "landing_points.csv", {"x", "y"});
        for (const Vec2& p : r.landing_points) w.row({p.x(), p.y()});
    }
    {
        CsvWriter w(dir / "speeds.csv", {"speed"});
        for (double s : r.speed_samples) w.row({s});
    }
    {
        CsvWriter w(dir / "speed_histogram.csv", {"bin_lo", "bin_hi", "count", "probability"});
        if (!r.speed_samples.empty()) {
            const SpeedHistogram h = speed_histogram(r.speed_samples, speed_bin);
            for (std::size_t k = 0; k < h.counts.size(); ++k) {
                w.row({k * speed_bin, (k + 1) * speed_bin, static_cast<double>(h.counts[k]), h.probabilities[k]});
            }
        }
    }
    CsvWriter w(dir / "summary.csv", {"n_episodes", "hits", "returns", "hit_rate", "return_rate", "mean_rtt",
                                      "landing_mean_x", "landing_mean_y", "cov_xx", "cov_xy", "cov_yy"});
    w.row({static_cast<double>(r.n_episodes), static_cast<double>(r.hits), static_cast<double>(r.returns), r.hit_rate,
           r.return_rate, r.mean_rtt, r.landing_mean.x(), r.landing_mean.y(), r.landing_cov(0, 0), r.landing_cov(0, 1),
           r.landing_cov(1, 1)});
}

void write_learning_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
    CsvWriter w(path, {"update", "mean_rtt", "std_rtt", "n_episodes"});
    for (const CurvePoint& p : curve) w.row({static_cast<double>(p.update), p.mean, p.std, static_cast<double>(p.n)});
}

ReachEnv::ReachEnv(int horizon, double dt)
    : model_(ArmModel::planar_two_link()), target_(0.3, 0.0, -0.3), horizon_(horizon), dt_(dt) {
    if (horizon < 1 || !(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "reach horizon and dt must be positive");
    state_ = reset_robot(model_);
    d0_ = (forward_kinematics(state_.q, model_).center - target_).norm();
}

VecX ReachEnv::reset(Rng&) {
    state_ = reset_robot(model_);
    k_ = 0;
    return observation();
}

EnvStep ReachEnv::step(const VecX& action) {
    state_ = step_robot(apply_action(state_, Action{action}, model_), model_, dt_);
    ++k_;
    EnvStep out;
    if (k_ >= horizon_) {
        out.done = true;
        out.reward = -(forward_kinematics(state_.q, model_).center - target_).norm() / d0_;
        EpisodeInfo info;
        info.reward = out.reward;
        info.length = k_;
        out.info = info;
    }
    return out;
}

VecX ReachEnv::observation() const {
    const int n = model_.dof();
    const int m = model_.muscles();
    VecX o(obs_dim());
    o.head(n) = ((2.0 * state_.q - model_.q_max - model_.q_min).array() / (model_.q_max - model_.q_min).array()).matrix();
    o.segment(n, n) = state_.qdot / 10.0;
    o.segment(2 * n, m) = 2.0 * state_.p.array() - 1.0;
    o[2 * n + m] = static_cast<double>(k_) / horizon_;
    return o;
}

PpoHyper reach_hyper() {
    PpoHyper h;
    h.hidden = 64;
    h.total_timesteps = 51.0 * h.nsteps;
    return h;
}

ReachBenchmark toy_reach_benchmark(const PpoHyper& hyper, std::uint64_t seed, unsigned workers) {
    TrainOptions opts;
    opts.workers = workers;
    ReachBenchmark b;
    b.log = train([] { return std::make_unique<ReachEnv>(); }, hyper, seed, opts).log;
    b.initial_mean = b.log.front().mean_rtt;
    b.final_mean = b.log.back().mean_rtt;
    return b;
}

}  // namespace pamtt
