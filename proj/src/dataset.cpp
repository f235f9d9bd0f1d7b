#include "pamtt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pamtt/csv.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

using nlohmann::json;

double RecordedTrajectory::duration() const {
    if (samples.empty()) return 0.0;
    return samples.back().t - samples.front().t;
}

void RecordedTrajectory::validate() const {
    const std::string who = "trajectory " + std::to_string(id);
    if (samples.size() < kMinSamples) {
        throw Error(ErrorCode::SchemaError, who + " has fewer than 10 samples");
    }
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw Error(ErrorCode::SchemaError, who + " has a non-positive sample rate");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].t) || !samples[i].pos.allFinite()) {
            throw Error(ErrorCode::SchemaError, who + " contains NaN/Inf");
        }
        if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
            throw Error(ErrorCode::SchemaError, who + " times are not strictly increasing");
        }
    }
    if (duration() > kMaxDuration) {
        throw Error(ErrorCode::SchemaError, who + " is longer than 3 s");
    }
}

void Dataset::validate() const {
    if (trajectories.empty()) throw Error(ErrorCode::SchemaError, "dataset has no trajectories");
    std::set<std::int64_t> ids;
    for (const auto& t : trajectories) {
        t.validate();
        if (!ids.insert(t.id).second) {
            throw Error(ErrorCode::SchemaError, "duplicate trajectory id " + std::to_string(t.id));
        }
    }
}

const RecordedTrajectory& Dataset::by_id(std::int64_t id) const {
    for (const auto& t : trajectories) {
        if (t.id == id) return t;
    }
    throw Error(ErrorCode::InvalidArgument, "no trajectory with id " + std::to_string(id));
}

std::string serialize_dataset(const Dataset& d) {
    d.validate();
    std::string out;
    out += json{{"meta", d.meta}}.dump();
    out += '\n';
    for (const auto& traj : d.trajectories) {
        json samples = json::array();
        for (const auto& s : traj.samples) {
            samples.push_back({s.t, s.pos.x(), s.pos.y(), s.pos.z()});
        }
        json line = {{"id", traj.id}, {"rate_hz", traj.sample_rate_hz}, {"samples", samples}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    const std::string text = serialize_dataset(d);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

RecordedTrajectory trajectory_from_json(const json& j, std::size_t line_no) {
    const auto where = [&] { return "line " + std::to_string(line_no); };
    for (const char* key : {"id", "rate_hz", "samples"}) {
        if (!j.contains(key)) {
            throw Error(ErrorCode::SchemaError, where() + ": missing field '" + key + "'");
        }
    }
    RecordedTrajectory traj;
    try {
        traj.id = j.at("id").get<std::int64_t>();
        traj.sample_rate_hz = j.at("rate_hz").get<double>();
        for (const auto& s : j.at("samples")) {
            if (!s.is_array() || s.size() != 4) {
                throw Error(ErrorCode::SchemaError, where() + ": sample must be [t,x,y,z]");
            }
            traj.samples.push_back(
                {s[0].get<double>(), Vec3(s[1].get<double>(), s[2].get<double>(), s[3].get<double>())});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, where() + ": " + e.what());
    }
    try {
        traj.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::SchemaError, where() + ": " + e.what());
    }
    return traj;
}

}  // namespace

Dataset parse_dataset(const std::string& text) {
    Dataset d;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": not a JSON object");
        }
        if (j.contains("meta") && !j.contains("samples")) {
            d.meta = j.at("meta").is_string() ? j.at("meta").get<std::string>() : j.at("meta").dump();
            continue;
        }
        d.trajectories.push_back(trajectory_from_json(j, line_no));
    }
    d.validate();
    return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot read dataset " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    try {
        return parse_dataset(buf.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

const RecordedTrajectory& sample_trajectory(const Dataset& d, Rng& rng) {
    if (d.trajectories.empty()) throw Error(ErrorCode::EmptyDataset, "cannot sample from an empty dataset");
    return d.trajectories[rng.index(d.trajectories.size())];
}

std::vector<BallState> resample(const RecordedTrajectory& traj, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "resample dt must be positive");
    const auto& s = traj.samples;
    if (s.size() < 2) throw Error(ErrorCode::TooShort, "resample needs at least 2 samples");

    const double t0 = s.front().t;
    const double t_end = s.back().t;
    const auto n = static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9)) + 1;

    std::vector<BallState> out(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = std::min(t0 + static_cast<double>(k) * dt, t_end);
        while (seg + 1 < s.size() - 1 && s[seg + 1].t <= t) ++seg;
        const auto& a = s[seg];
        const auto& b = s[seg + 1];
        if (t == a.t) {
            out[k].pos = a.pos;
        } else if (t == b.t) {
            out[k].pos = b.pos;
        } else {
            const double w = (t - a.t) / (b.t - a.t);
            out[k].pos = a.pos + w * (b.pos - a.pos);
        }
    }
    if (n == 1) return out;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0) {
            out[k].vel = (out[1].pos - out[0].pos) / dt;
        } else if (k + 1 == n) {
            out[k].vel = (out[k].pos - out[k - 1].pos) / dt;
        } else {
            out[k].vel = (out[k + 1].pos - out[k - 1].pos) / (2.0 * dt);
        }
    }
    return out;
}

namespace {

// Welford accumulator over 3 channels; identical inputs give exactly zero
// spread.
struct Accumulator {
    std::size_t n = 0;
    Vec3 mean = Vec3::Zero();
    Vec3 m2 = Vec3::Zero();

    void add(const Vec3& v) {
        ++n;
        const Vec3 delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta.cwiseProduct(v - mean);
    }

    BinStats finish(double center) const {
        BinStats b;
        b.center = center;
        b.count = n;
        b.mean = mean;
        b.stddev = (m2 / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
        return b;
    }
};

long bin_index(double value, double width) { return static_cast<long>(std::floor(value / width + 1e-9)); }

}  // namespace

std::optional<ContactEvent> first_bounce(const RecordedTrajectory& traj, const TableGeometry& table,
                                         double near_surface) {
    const auto& s = traj.samples;
    for (std::size_t i = 2; i + 1 < s.size(); ++i) {
        const double z = s[i].pos.z();
        if (z - table.surface_z > near_surface) continue;
        if (z > s[i - 1].pos.z() || z > s[i + 1].pos.z()) continue;
        // Samples before the minimum are on the incoming branch. A least-squares
        // line through up to four of them, extended to the plane, is robust to
        // observation noise.
        const std::size_t first = i >= 4 ? i - 4 : 0;
        const double n = static_cast<double>(i - first);
        double t_mean = 0.0;
        Vec3 p_mean = Vec3::Zero();
        for (std::size_t k = first; k < i; ++k) {
            t_mean += s[k].t / n;
            p_mean += s[k].pos / n;
        }
        double stt = 0.0;
        Vec3 stp = Vec3::Zero();
        for (std::size_t k = first; k < i; ++k) {
            stt += (s[k].t - t_mean) * (s[k].t - t_mean);
            stp += (s[k].t - t_mean) * (s[k].pos - p_mean);
        }
        const Vec3 slope = stp / stt;
        if (!(slope.z() < 0.0)) continue;
        const double tc = std::clamp(t_mean + (table.surface_z - p_mean.z()) / slope.z(), s[i - 1].t,
                                     s[i + 1].t);
        ContactEvent ev;
        ev.kind = ContactKind::TableLand;
        ev.time = tc;
        ev.point = p_mean + (tc - t_mean) * slope;
        ev.point.z() = table.surface_z;
        ev.ball_vel_before = slope;
        ev.ball_vel_after = slope;
        return ev;
    }
    return std::nullopt;
}

VariabilityReport variability_stats(const Dataset& d, double time_bin, double y_bin,
                                    const TableGeometry& table) {
    if (!(time_bin > 0.0) || !(y_bin > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "bin widths must be positive");
    }
    std::map<long, Accumulator> by_time;
    std::map<long, Accumulator> by_y;
    Accumulator bounce;
    VariabilityReport r;
    r.time_bin = time_bin;
    r.y_bin = y_bin;

    for (const auto& traj : d.trajectories) {
        if (traj.samples.empty()) continue;
        const double t0 = traj.samples.front().t;
        for (const auto& s : traj.samples) {
            const double t = s.t - t0;
            by_time[bin_index(t, time_bin)].add(s.pos);
            by_y[bin_index(s.pos.y(), y_bin)].add(Vec3(t, s.pos.x(), s.pos.z()));
        }
        if (const auto b = first_bounce(traj, table)) {
            bounce.add(Vec3(b->point.x(), b->point.y(), 0.0));
            r.bounce_times.push_back(b->time - t0);
        }
    }
    for (const auto& [k, acc] : by_time) r.by_time.push_back(acc.finish((k + 0.5) * time_bin));
    for (const auto& [k, acc] : by_y) r.by_y.push_back(acc.finish((k + 0.5) * y_bin));
    if (bounce.n > 0) {
        const BinStats b = bounce.finish(0.0);
        r.first_bounce.count = b.count;
        r.first_bounce.mean = b.mean.head<2>();
        r.first_bounce.stddev = b.stddev.head<2>();
    }
    return r;
}

void write_time_stats_csv(const VariabilityReport& r, const std::filesystem::path& path) {
    CsvWriter csv(path, {"bin_center", "mean_x", "std_x", "mean_y", "std_y", "mean_z", "std_z"});
    for (const auto& b : r.by_time) {
        csv.row({b.center, b.mean.x(), b.stddev.x(), b.mean.y(), b.stddev.y(), b.mean.z(), b.stddev.z()});
    }
}

void write_y_stats_csv(const VariabilityReport& r, const std::filesystem::path& path) {
    CsvWriter csv(path, {"bin_center", "mean_t", "std_t", "mean_x", "std_x", "mean_z", "std_z"});
    for (const auto& b : r.by_y) {
        csv.row({b.center, b.mean.x(), b.stddev.x(), b.mean.y(), b.stddev.y(), b.mean.z(), b.stddev.z()});
    }
}

void write_bounce_csv(const VariabilityReport& r, const std::filesystem::path& path) {
    CsvWriter csv(path, {"count", "mean_x", "std_x", "mean_y", "std_y"});
    const auto& b = r.first_bounce;
    csv.row({static_cast<double>(b.count), b.mean.x(), b.stddev.x(), b.mean.y(), b.stddev.y()});
}

}  // namespace pamtt
