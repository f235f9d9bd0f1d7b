#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pamtt/csv.hpp"
#include "pamtt/error.hpp"
#include "pamtt/eval.hpp"

using namespace pamtt;

namespace {

EpisodeRollout synthetic(bool hit, std::optional<Vec2> landing, double speed, double reward, bool net = false) {
    EpisodeRollout e;
    e.outcome.hit = hit;
    if (landing) {
        ContactEvent ev;
        ev.point = Vec3(landing->x(), landing->y(), 0.0);
        e.outcome.landing = ev;
    }
    if (hit) e.outcome.max_speed_after_hit = speed;
    e.outcome.net_fault = net;
    RolloutStep s;
    s.reward = reward;
    e.steps.push_back(s);
    return e;
}

Dataset single(const RecordedTrajectory& t, int copies) {
    Dataset d;
    for (int i = 0; i < copies; ++i) {
        RecordedTrajectory c = t;
        c.id = i;
        d.trajectories.push_back(c);
    }
    return d;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("summary of synthetic episodes") {
    const std::vector<EpisodeRollout> eps{
        synthetic(false, std::nullopt, 0, -0.4),
        synthetic(true, Vec2(0.1, -0.6), 4.0, 0.8),
        synthetic(true, Vec2(-0.1, -0.8), 6.0, 0.6),
        synthetic(true, Vec2(0.0, -0.7), 5.0, -0.2, true),
        synthetic(true, Vec2(0.0, 0.5), 3.0, -0.2),
    };
    const EvalReport r = summarize(eps, TableGeometry{});
    CHECK(r.n_episodes == 5);
    CHECK(r.hits == 4);
    CHECK(r.returns == 2);
    CHECK(r.hit_rate == 0.8);
    CHECK(r.return_rate == 0.4);
    CHECK(r.mean_rtt == doctest::Approx(0.12));
    CHECK(r.speed_samples == std::vector<double>{4.0, 6.0});
    CHECK(r.landing_mean.isApprox(Vec2(0.0, -0.7)));
    CHECK(r.landing_cov(0, 0) == doctest::Approx(0.02));
    CHECK(r.landing_cov(0, 1) == doctest::Approx(0.02));
    CHECK(r.landing_cov(1, 1) == doctest::Approx(0.02));

    const EvalReport empty = summarize({}, TableGeometry{});
    CHECK(empty.hit_rate == 0.0);
    CHECK(empty.landing_cov.isZero());
}

TEST_CASE("hit rate on fixtures") {
    HysrSetup setup;
    setup.finalize();
    const RecordedTrajectory away =
        fixture::straight_line(0, fixture::rest_racket() + Vec3(0.7, 0, 0.5), Vec3(0, 6, 0), 0.5, 1.0);
    const EvalReport miss = evaluate_policy(fixture::still_policy(8), setup, single(away, 5), 1, true);
    CHECK(miss.hit_rate == 0.0);
    CHECK(miss.return_rate == 0.0);

    const RecordedTrajectory into = fixture::straight_line(0, fixture::rest_racket(), Vec3(0, 6, 0), 0.5, 1.0);
    const EvalReport hit = evaluate_policy(fixture::still_policy(8), setup, single(into, 5), 1, true);
    CHECK(hit.hit_rate == 1.0);
    CHECK(hit.return_rate <= hit.hit_rate);
    CHECK_THROWS_AS(evaluate_policy(fixture::still_policy(8), setup, Dataset{}, 1, true), Error);
}

TEST_CASE("evaluation is reproducible and worker-independent") {
    HysrSetup setup;
    setup.finalize();
    Rng rng(4);
    const PolicyParams p = PolicyParams::initialize(22, 16, 8, 0.3, rng, std::log(0.4));
    const EvalReport a = evaluate_policy(p, setup, LauncherConfig{}, 12, 5, false, 1);
    const EvalReport b = evaluate_policy(p, setup, LauncherConfig{}, 12, 5, false, 3);
    CHECK(a.rewards == b.rewards);
    CHECK(a.hits == b.hits);
    CHECK(a.return_rate <= a.hit_rate);
    CHECK(serialize_dataset(evaluation_trajectories(LauncherConfig{}, setup, 4, 5)) ==
          serialize_dataset(evaluation_trajectories(LauncherConfig{}, setup, 4, 5)));
}

TEST_CASE("speed histogram") {
    const SpeedHistogram h = speed_histogram({0.1, 0.4, 0.5, 1.2, 0.0}, 0.5);
    CHECK(h.counts == std::vector<int>{3, 1, 1});
    CHECK(h.probabilities[0] == doctest::Approx(0.6));
    double total = 0.0;
    for (double p : h.probabilities) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(speed_histogram({2.0}, 1.0).counts == std::vector<int>{0, 0, 1});
    CHECK_THROWS_AS(speed_histogram({}, 0.5), Error);
    CHECK_THROWS_AS(speed_histogram({1.0}, 0.0), Error);
    CHECK_THROWS_AS(speed_histogram({-1.0}, 0.5), Error);
}

TEST_CASE("learning curve aggregation") {
    const std::vector<CurvePoint> c = learning_curve(std::vector<EpisodeRecord>{{1, 2.0}, {0, 1.0}, {1, 4.0}, {0, 3.0}, {2, 5.0}});
    REQUIRE(c.size() == 3);
    CHECK(c[0].update == 0);
    CHECK(c[0].mean == 2.0);
    CHECK(c[0].std == doctest::Approx(std::sqrt(2.0)));
    CHECK(c[1].mean == 3.0);
    CHECK(c[2].n == 1);
    CHECK(c[2].std == 0.0);

    std::vector<UpdateLog> log(10);
    Rng rng(6);
    std::map<int, std::vector<double>> by_update;
    for (int u = 0; u < 10; ++u) {
        log[u].update = u;
        const int n = 1 + static_cast<int>(rng.index(6));
        for (int i = 0; i < n; ++i) {
            const double r = rng.normal(-0.5 + 0.1 * u, 0.2);
            log[u].episode_rewards.push_back(r);
            by_update[u].push_back(r);
        }
    }
    const std::vector<CurvePoint> curve = learning_curve(log);
    REQUIRE(curve.size() == 10);
    for (const CurvePoint& p : curve) {
        const auto& xs = by_update[p.update];
        CHECK(p.n == static_cast<int>(xs.size()));
        CHECK(p.mean == doctest::Approx(oracle::mean(xs)).epsilon(1e-14));
        if (xs.size() > 1) CHECK(p.std == doctest::Approx(oracle::sample_std(xs)).epsilon(1e-12));
    }
}

TEST_CASE("evaluation CSV schemas") {
    fixture::TempDir dir("eval");
    const std::vector<EpisodeRollout> eps{synthetic(true, Vec2(0.1, -0.6), 4.0, 0.8),
                                          synthetic(true, Vec2(-0.1, -0.8), 6.2, 0.6)};
    const EvalReport r = summarize(eps, TableGeometry{});
    write_eval_csvs(r, dir.path());
    CHECK(read_csv(dir / "landing_points.csv").header == std::vector<std::string>{"x", "y"});
    CHECK(read_csv(dir / "landing_points.csv").rows.size() == 2);
    CHECK(read_csv(dir / "speeds.csv").header == std::vector<std::string>{"speed"});
    const CsvTable h = read_csv(dir / "speed_histogram.csv");
    CHECK(h.header == std::vector<std::string>{"bin_lo", "bin_hi", "count", "probability"});
    CHECK(h.rows.size() == 13);
    const CsvTable s = read_csv(dir / "summary.csv");
    CHECK(s.header == std::vector<std::string>{"n_episodes", "hits", "returns", "hit_rate", "return_rate", "mean_rtt",
                                               "landing_mean_x", "landing_mean_y", "cov_xx", "cov_xy", "cov_yy"});
    CHECK(s.rows.at(0)[s.column("returns")] == 2.0);

    write_learning_curve_csv(learning_curve(std::vector<EpisodeRecord>{{0, 1.0}, {0, 2.0}}), dir / "lc.csv");
    const CsvTable lc = read_csv(dir / "lc.csv");
    CHECK(lc.header == std::vector<std::string>{"update", "mean_rtt", "std_rtt", "n_episodes"});
    CHECK(lc.rows.at(0)[1] == 1.5);
}

TEST_CASE("reach environment") {
    ReachEnv env;
    Rng rng(0);
    env.reset(rng);
    CHECK(env.initial_distance() > 0.0);
    EnvStep s;
    int n = 0;
    do {
        s = env.step(VecX::Zero(env.act_dim()));
        ++n;
    } while (!s.done);
    CHECK(n == 50);
    REQUIRE(s.info);
    CHECK(s.reward <= 0.0);
    CHECK(s.info->reward == s.reward);
}

}
