#include "pamtt/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pamtt/config.hpp"
#include "pamtt/csv.hpp"
#include "pamtt/dataset.hpp"
#include "pamtt/digest.hpp"
#include "pamtt/error.hpp"
#include "pamtt/eval.hpp"
#include "pamtt/launcher.hpp"
#include "pamtt/ppo.hpp"

#ifndef PAMTT_VERSION
#define PAMTT_VERSION "dev"
#endif

namespace pamtt {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
    std::string ckpt;
    std::string task;
    std::uint64_t seed = 0;
    std::size_t n = 100;
    long traj = 0;
    int updates = 0;
    unsigned workers = 1;
    bool deterministic = false;
};

Config load_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex_digest(ss.str());
}

void write_manifest(const fs::path& path, const std::string& command, const Config& cfg, std::uint64_t seed,
                    nlohmann::ordered_json extra) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["code_version"] = PAMTT_VERSION;
    j["config_digest"] = cfg.digest();
    j["seed"] = seed;
    j["parameters"] = std::move(extra);
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << j.dump(2) << '\n';
}

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".run_manifest.json"); }

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_gen_data(const Options& o, std::ostream& out) {
    const Config cfg = load_or_default(o.config);
    const Dataset d = generate_dataset(cfg.launcher, o.n, o.seed, cfg.table, cfg.aero, o.workers);
    ensure_parent(o.out);
    save_dataset(d, o.out);
    write_manifest(manifest_for(o.out), "gen-data", cfg, o.seed, {{"n", o.n}, {"dataset_digest", file_digest(o.out)}});
    out << "wrote " << d.trajectories.size() << " trajectories to " << o.out << '\n';
    return 0;
}

int cmd_stats(const Options& o, std::ostream& out) {
    const Config cfg = load_or_default(o.config);
    const Dataset d = load_dataset(o.data);
    const double rate = d.trajectories.front().sample_rate_hz;
    const VariabilityReport r = variability_stats(d, 1.0 / rate, 0.05, cfg.table);
    const fs::path base(o.out);
    ensure_parent(base);
    const fs::path by_y = base.parent_path() / (base.stem().string() + "_by_y.csv");
    const fs::path bounce = base.parent_path() / (base.stem().string() + "_bounce.csv");
    write_time_stats_csv(r, base);
    write_y_stats_csv(r, by_y);
    write_bounce_csv(r, bounce);
    write_manifest(manifest_for(base), "stats", cfg, 0, {{"dataset_digest", file_digest(o.data)}});
    out << "first bounce: n=" << r.first_bounce.count << " mean_y=" << format_double(r.first_bounce.mean.y())
        << " std_y=" << format_double(r.first_bounce.stddev.y()) << '\n';
    out << "wrote " << base.string() << ", " << by_y.string() << ", " << bounce.string() << '\n';
    return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    Config cfg = load_or_default(o.config);
    if (o.task == "smash") {
        cfg.reward.task = Task::Smash;
    } else if (o.task == "return") {
        cfg.reward.task = Task::Return;
    }
    auto data = std::make_shared<const Dataset>(load_dataset(o.data));
    auto setup = std::make_shared<const HysrSetup>(cfg.setup());

    TrainOptions opts;
    opts.n_envs = cfg.hysr.n_envs;
    opts.workers = o.workers;
    opts.max_action = cfg.arm.max_delta;
    if (o.updates > 0) opts.max_updates = o.updates;

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r = train([&] { return std::make_unique<HysrEnv>(setup, data); }, cfg.ppo, o.seed, opts,
                          [&](const UpdateLog& l, const PolicyParams&) {
                              const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                              err << "update " << l.update << " timesteps " << l.timesteps << " mean_rtt "
                                  << format_double(l.mean_rtt) << " hit_rate " << format_double(l.hit_rate) << " ("
                                  << format_double(std::round(s * 10.0) / 10.0) << " s)\n";
                          });

    ensure_parent(o.out);
    ensure_parent(o.log);
    save_checkpoint({r.params, setup->norm, cfg.digest(), static_cast<int>(r.log.size())}, o.out);
    write_update_log_csv(r.log, o.log);
    const fs::path curve = fs::path(o.log).parent_path() / "learning_curve.csv";
    write_learning_curve_csv(learning_curve(r.log), curve);
    write_manifest(manifest_for(o.out), "train", cfg, o.seed,
                   {{"task", cfg.reward.task == Task::Smash ? "smash" : "return"},
                    {"updates", r.log.size()},
                    {"dataset_digest", file_digest(o.data)}});
    out << "trained " << r.log.size() << " updates; checkpoint " << o.out << ", log " << o.log << '\n';
    return 0;
}

Checkpoint load_checked(const std::string& path, const HysrSetup& setup, std::ostream& err, const Config& cfg) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.params.obs_dim() != setup.norm.size() || ck.params.act_dim() != setup.arm.muscles()) {
        throw Error(ErrorCode::ShapeMismatch, path + ": checkpoint does not match the configured arm");
    }
    if (ck.config_digest != cfg.digest()) err << "note: " << path << " was trained with a different configuration\n";
    return ck;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    const Config cfg = load_or_default(o.config);
    HysrSetup setup = cfg.setup();
    const Checkpoint ck = load_checked(o.ckpt, setup, err, cfg);
    setup.norm = ck.norm;
    const EvalReport r = evaluate_policy(ck.params, setup, cfg.launcher, static_cast<int>(o.n), o.seed, o.deterministic, o.workers);
    write_eval_csvs(r, o.out);
    write_manifest(fs::path(o.out) / "run_manifest.json", "eval", cfg, o.seed,
                   {{"n", o.n}, {"deterministic", o.deterministic}, {"checkpoint_digest", file_digest(o.ckpt)}});
    out << "hit_rate " << format_double(r.hit_rate) << " return_rate " << format_double(r.return_rate) << " mean_rtt "
        << format_double(r.mean_rtt) << '\n';
    return 0;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
    const Config cfg = load_or_default(o.config);
    HysrSetup setup = cfg.setup();
    const Checkpoint ck = load_checked(o.ckpt, setup, err, cfg);
    setup.norm = ck.norm;
    const Dataset d = load_dataset(o.data);
    const RecordedTrajectory& traj = d.by_id(o.traj);
    const EpisodeRollout r = run_episode(make_policy_fn(ck.params), setup, traj, substream_seed(o.seed, static_cast<std::uint64_t>(o.traj)), o.deterministic);
    ensure_parent(o.out);
    write_rollout_csv(r, o.out);
    write_manifest(manifest_for(o.out), "replay", cfg, o.seed,
                   {{"traj", o.traj}, {"deterministic", o.deterministic}, {"checkpoint_digest", file_digest(o.ckpt)}});
    out << "steps " << r.steps.size() << " hit " << (r.outcome.hit ? 1 : 0) << " reward " << format_double(r.reward()) << '\n';
    return 0;
}

int cmd_bench_toy(const Options& o, std::ostream& out) {
    const ReachBenchmark b = toy_reach_benchmark(reach_hyper(), o.seed, o.workers);
    if (!o.out.empty()) {
        ensure_parent(o.out);
        write_update_log_csv(b.log, o.out);
    }
    out << "update 0 mean " << format_double(b.initial_mean) << ", update " << b.log.back().update << " mean "
        << format_double(b.final_mean) << ", improvement " << format_double(b.final_mean - b.initial_mean) << '\n';
    return 0;
}

int cmd_config(const Options& o, std::ostream& out) {
    out << serialize_config(load_or_default(o.config));
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulated muscular-arm table tennis: data generation, training and evaluation", "pamtt"};
    app.require_subcommand(1);
    Options o;

    auto* gen = app.add_subcommand("gen-data", "Generate launcher trajectories (JSON Lines)");
    gen->add_option("--config", o.config, "Config file");
    gen->add_option("--n", o.n, "Number of trajectories")->check(CLI::PositiveNumber);
    gen->add_option("--out", o.out, "Output dataset")->required();
    gen->add_option("--seed", o.seed, "Master seed");
    gen->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* stats = app.add_subcommand("stats", "Dataset variability statistics (CSV)");
    stats->add_option("--data", o.data, "Dataset")->required();
    stats->add_option("--out", o.out, "Time-binned statistics CSV")->required();
    stats->add_option("--config", o.config, "Config file");

    auto* tr = app.add_subcommand("train", "Train a policy with HYSR and PPO");
    tr->add_option("--config", o.config, "Config file");
    tr->add_option("--data", o.data, "Training dataset")->required();
    tr->add_option("--task", o.task, "return or smash")->check(CLI::IsMember({"return", "smash"}));
    tr->add_option("--out", o.out, "Checkpoint path")->required();
    tr->add_option("--log", o.log, "Per-update log CSV")->required();
    tr->add_option("--seed", o.seed, "Master seed");
    tr->add_option("--updates", o.updates, "Stop after this many updates")->check(CLI::PositiveNumber);
    tr->add_option("--workers", o.workers, "Rollout threads")->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on fresh trajectories");
    ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    ev->add_option("--config", o.config, "Config file");
    ev->add_option("--n", o.n, "Episodes")->check(CLI::PositiveNumber);
    ev->add_option("--out", o.out, "Output directory")->required();
    ev->add_option("--seed", o.seed, "Seed");
    ev->add_flag("--deterministic", o.deterministic, "Use the policy mean");
    ev->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* rp = app.add_subcommand("replay", "Per-step log of one episode (CSV)");
    rp->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    rp->add_option("--data", o.data, "Dataset")->required();
    rp->add_option("--traj", o.traj, "Trajectory id")->required();
    rp->add_option("--out", o.out, "Output CSV")->required();
    rp->add_option("--config", o.config, "Config file");
    rp->add_option("--seed", o.seed, "Seed");
    rp->add_flag("--deterministic", o.deterministic, "Use the policy mean");

    auto* bt = app.add_subcommand("bench-toy", "Two-link reach benchmark");
    bt->add_option("--seed", o.seed, "Seed");
    bt->add_option("--out", o.out, "Per-update log CSV");
    bt->add_option("--workers", o.workers, "Rollout threads")->check(CLI::PositiveNumber);

    auto* cf = app.add_subcommand("config", "Print the resolved configuration");
    cf->add_option("--config", o.config, "Config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) return cmd_gen_data(o, out);
        if (*stats) return cmd_stats(o, out);
        if (*tr) return cmd_train(o, out, err);
        if (*ev) return cmd_eval(o, out, err);
        if (*rp) return cmd_replay(o, out, err);
        if (*bt) return cmd_bench_toy(o, out);
        if (*cf) return cmd_config(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace pamtt
