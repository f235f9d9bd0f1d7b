#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "pamtt/csv.hpp"
#include "pamtt/dataset.hpp"
#include "pamtt/error.hpp"
#include "pamtt/launcher.hpp"

using namespace pamtt;

namespace {

RecordedTrajectory affine(std::int64_t id, const Vec3& p0, const Vec3& v, double rate = 180.0, int n = 60) {
    RecordedTrajectory t;
    t.id = id;
    t.sample_rate_hz = rate;
    for (int k = 0; k < n; ++k) t.samples.push_back({k / rate, p0 + v * (k / rate)});
    return t;
}

Dataset small_dataset() {
    Dataset d;
    d.meta = "fixture";
    d.trajectories.push_back(affine(0, Vec3(0, -2, 0.4), Vec3(0.1, 5, -0.3)));
    d.trajectories.push_back(affine(7, Vec3(0.1, -2, 0.41), Vec3(-0.2, 5.5, 0.1)));
    d.trajectories.back().samples[3].pos.x() = 0.1 + 1.0 / 3.0;
    return d;
}

ErrorCode code_of(const auto& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no exception");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("save, load, save is byte-identical and lossless") {
    fixture::TempDir dir("ds");
    const Dataset d = small_dataset();
    save_dataset(d, dir / "a.jsonl");
    const Dataset back = load_dataset(dir / "a.jsonl");
    CHECK(back == d);
    save_dataset(back, dir / "b.jsonl");
    CHECK(fixture::slurp(dir / "a.jsonl") == fixture::slurp(dir / "b.jsonl"));
}

TEST_CASE("line format") {
    const std::string text = serialize_dataset(small_dataset());
    CHECK(text.rfind("{\"meta\":\"fixture\"}\n", 0) == 0);
    CHECK(text.find("{\"id\":0,\"rate_hz\":180.0,\"samples\":[[0.0,0.0,-2.0,0.4]") != std::string::npos);
}

TEST_CASE("schema errors") {
    fixture::TempDir dir("ds");
    CHECK(code_of([&] { save_dataset(Dataset{}, dir / "e.jsonl"); }) == ErrorCode::SchemaError);

    Dataset dup = small_dataset();
    dup.trajectories[1].id = 0;
    CHECK(code_of([&] { dup.validate(); }) == ErrorCode::SchemaError);

    Dataset short_one = small_dataset();
    short_one.trajectories[0].samples.resize(9);
    CHECK(code_of([&] { short_one.validate(); }) == ErrorCode::SchemaError);

    Dataset unordered = small_dataset();
    std::swap(unordered.trajectories[0].samples[4], unordered.trajectories[0].samples[5]);
    CHECK(code_of([&] { unordered.validate(); }) == ErrorCode::SchemaError);

    CHECK(code_of([] { parse_dataset("{\"id\":1,\"rate_hz\":180}\n"); }) == ErrorCode::SchemaError);
}

TEST_CASE("truncated file names the line") {
    std::string text = serialize_dataset(small_dataset());
    text.resize(text.size() - 40);
    try {
        parse_dataset(text);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("missing file") {
    try {
        load_dataset("/nonexistent/dir/data.jsonl");
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
        CHECK(std::string(e.what()).find("/nonexistent/dir/data.jsonl") != std::string::npos);
    }
}

TEST_CASE("uniform sampling") {
    SUBCASE("single trajectory") {
        Dataset d = small_dataset();
        d.trajectories.resize(1);
        Rng rng(1);
        for (int i = 0; i < 50; ++i) CHECK(&sample_trajectory(d, rng) == &d.trajectories[0]);
    }
    SUBCASE("frequencies within five sigma") {
        Dataset d;
        for (int i = 0; i < 100; ++i) d.trajectories.push_back(affine(i, Vec3::Zero(), Vec3(0, 1, 0)));
        Rng rng(9);
        std::vector<int> counts(100, 0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) ++counts[sample_trajectory(d, rng).id];
        const double p = 0.01;
        const double sigma = std::sqrt(draws * p * (1 - p));
        for (int c : counts) CHECK(std::abs(c - draws * p) < 5.0 * sigma);
    }
    SUBCASE("reproducible") {
        Dataset d;
        for (int i = 0; i < 20; ++i) d.trajectories.push_back(affine(i, Vec3::Zero(), Vec3(0, 1, 0)));
        Rng a(4), b(4);
        for (int i = 0; i < 100; ++i) CHECK(sample_trajectory(d, a).id == sample_trajectory(d, b).id);
    }
    SUBCASE("empty") { CHECK(code_of([] { Rng r; sample_trajectory(Dataset{}, r); }) == ErrorCode::EmptyDataset); }
}

TEST_CASE("resample") {
    SUBCASE("already on the grid") {
        const RecordedTrajectory t = affine(0, Vec3(0, -2, 0.4), Vec3(0.3, 5, 1), 100.0);
        const auto r = resample(t, 0.01);
        REQUIRE(r.size() == t.samples.size());
        for (std::size_t k = 0; k < r.size(); ++k) CHECK((r[k].pos - t.samples[k].pos).norm() < 1e-14);
    }
    SUBCASE("affine motion gives exact constant velocity") {
        const Vec3 v(0.3, 5, 1);
        const auto r = resample(affine(0, Vec3(0, -2, 0.4), v), 0.01);
        for (const BallState& s : r) CHECK((s.vel - v).norm() < 1e-9);
    }
    SUBCASE("parabola and a sine: Taylor remainder bound") {
        const auto make = [](auto f) {
            RecordedTrajectory t;
            t.sample_rate_hz = 10000.0;
            for (int k = 0; k <= 5000; ++k) {
                const double s = k / t.sample_rate_hz;
                t.samples.push_back({s, Vec3(0, 5 * s, f(s))});
            }
            return t;
        };
        const double a = -9.81;
        const auto para = resample(make([&](double s) { return 1 + 2 * s + 0.5 * a * s * s; }), 0.01);
        for (std::size_t k = 1; k + 1 < para.size(); ++k) CHECK(para[k].vel.z() == doctest::Approx(2 + a * k * 0.01).epsilon(1e-6));

        const double w = 6.0;
        std::vector<double> errs;
        for (double dt : {0.02, 0.01, 0.005}) {
            const auto r = resample(make([&](double s) { return std::sin(w * s); }), dt);
            double err = 0.0;
            for (std::size_t k = 1; k + 1 < r.size(); ++k) err = std::max(err, std::abs(r[k].vel.z() - w * std::cos(w * k * dt)));
            CHECK(err <= w * w * w * dt * dt / 6.0 + 1e-6);
            errs.push_back(err);
        }
        CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.05));
        CHECK(errs[1] / errs[2] == doctest::Approx(4.0).epsilon(0.05));
    }
    SUBCASE("endpoints") {
        const Vec3 v(0.3, 5, 1);
        const RecordedTrajectory t = affine(0, Vec3(0, -2, 0.4), v, 180.0, 50);
        const auto r = resample(t, 0.01);
        CHECK((r.front().pos - t.samples.front().pos).norm() < 1e-12);
        CHECK((r.back().pos - t.samples.back().pos).norm() <= 0.01 * v.norm());
    }
    SUBCASE("errors") {
        RecordedTrajectory t;
        t.samples.push_back({0.0, Vec3::Zero()});
        CHECK(code_of([&] { resample(t, 0.01); }) == ErrorCode::TooShort);
        CHECK(code_of([&] { resample(affine(0, Vec3::Zero(), Vec3::UnitY()), 0.0); }) == ErrorCode::InvalidArgument);
    }
}

TEST_CASE("variability statistics") {
    SUBCASE("identical trajectories") {
        Dataset d;
        for (int i = 0; i < 4; ++i) d.trajectories.push_back(affine(i, Vec3(0, -2, 0.4), Vec3(0, 5, -0.2)));
        const VariabilityReport r = variability_stats(d, 1.0 / 180, 0.05);
        for (const BinStats& b : r.by_time) CHECK(b.stddev.isZero());
        for (const BinStats& b : r.by_y) CHECK(b.stddev.y() == 0.0);
    }
    SUBCASE("two trajectories offset in x") {
        Dataset d;
        d.trajectories.push_back(affine(0, Vec3(0.1, -2, 0.4), Vec3(0, 5, 0)));
        d.trajectories.push_back(affine(1, Vec3(-0.1, -2, 0.4), Vec3(0, 5, 0)));
        const VariabilityReport r = variability_stats(d, 1.0 / 180, 0.05);
        std::size_t total = 0;
        for (const BinStats& b : r.by_time) {
            CHECK(b.stddev.x() == doctest::Approx(0.1).epsilon(1e-12));
            CHECK(b.mean.x() == doctest::Approx(0.0).scale(1.0));
            total += b.count;
        }
        CHECK(total == 120);
    }
    SUBCASE("bin widths") { CHECK(code_of([] { variability_stats(small_dataset(), 0.0, 0.05); }) == ErrorCode::InvalidArgument); }
}

TEST_CASE("first bounce of a synthetic ball") {
    LauncherConfig cfg;
    cfg.obs_noise = 0.0;
    Rng rng(0);
    const RecordedTrajectory t = generate_trajectory(cfg, 0, rng);
    const auto b = first_bounce(t);
    REQUIRE(b);
    CHECK(b->point.z() == doctest::Approx(0.0));
    CHECK(b->point.y() > 0.0);
    CHECK(b->point.y() < TableGeometry{}.half_length());
}

TEST_CASE("statistics CSV schemas") {
    fixture::TempDir dir("ds");
    const VariabilityReport r = variability_stats(generate_dataset(LauncherConfig{}, 20, 1), 1.0 / 180, 0.05);
    write_time_stats_csv(r, dir / "t.csv");
    write_y_stats_csv(r, dir / "y.csv");
    write_bounce_csv(r, dir / "b.csv");
    const CsvTable t = read_csv(dir / "t.csv");
    CHECK(t.header == std::vector<std::string>{"bin_center", "mean_x", "std_x", "mean_y", "std_y", "mean_z", "std_z"});
    CHECK(t.rows.size() == r.by_time.size());
    CHECK(read_csv(dir / "y.csv").header ==
          std::vector<std::string>{"bin_center", "mean_t", "std_t", "mean_x", "std_x", "mean_z", "std_z"});
    const CsvTable b = read_csv(dir / "b.csv");
    CHECK(b.header == std::vector<std::string>{"count", "mean_x", "std_x", "mean_y", "std_y"});
    CHECK(b.rows.at(0).at(0) == 20.0);
    CHECK_THROWS_AS(t.column("nope"), Error);
}

}
