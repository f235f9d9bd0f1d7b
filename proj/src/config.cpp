#include "pamtt/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pamtt/csv.hpp"
#include "pamtt/digest.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

namespace {

struct Field {
    std::string key;
    std::function<std::string(Config&)> get;
    std::function<void(Config&, std::string_view)> set;
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
    }
    return v;
}

int parse_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::ParseError, "not an integer: '" + std::string(s) + "'");
    }
    return v;
}

std::vector<double> parse_list(std::string_view s) {
    std::vector<double> out;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(parse_double(s.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

std::string join(const double* v, Eigen::Index n) {
    std::string s;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i) s += ", ";
        s += format_double(v[i]);
    }
    return s;
}

Field num(std::string key, double& (*ref)(Config&)) {
    return {std::move(key), [ref](Config& c) { return format_double(ref(c)); },
            [ref](Config& c, std::string_view v) { ref(c) = parse_double(v); }};
}

Field integer(std::string key, int& (*ref)(Config&)) {
    return {std::move(key), [ref](Config& c) { return std::to_string(ref(c)); },
            [ref](Config& c, std::string_view v) { ref(c) = parse_int(v); }};
}

// Fixed-size vectors (size > 0) or any length (size 0).
template <typename V>
Field vec(std::string key, V& (*ref)(Config&), int size = 0) {
    return {key, [ref](Config& c) { return join(ref(c).data(), ref(c).size()); },
            [ref, size, key](Config& c, std::string_view v) {
                const auto xs = parse_list(v);
                if (size > 0 && static_cast<int>(xs.size()) != size) {
                    throw Error(ErrorCode::ParseError, key + " expects " + std::to_string(size) + " values");
                }
                V out;
                if constexpr (std::is_same_v<V, VecX>) out.resize(static_cast<Eigen::Index>(xs.size()));
                for (std::size_t i = 0; i < xs.size(); ++i) out[static_cast<Eigen::Index>(i)] = xs[i];
                ref(c) = out;
            }};
}

Field directions(std::string key, std::vector<Vec3>& (*ref)(Config&)) {
    return {key,
            [ref](Config& c) {
                std::vector<double> flat;
                for (const Vec3& a : ref(c)) flat.insert(flat.end(), a.data(), a.data() + 3);
                return join(flat.data(), static_cast<Eigen::Index>(flat.size()));
            },
            [ref, key](Config& c, std::string_view v) {
                const auto xs = parse_list(v);
                if (xs.size() % 3 != 0) throw Error(ErrorCode::ParseError, key + " expects a multiple of 3 values");
                std::vector<Vec3> out;
                for (std::size_t i = 0; i < xs.size(); i += 3) out.emplace_back(xs[i], xs[i + 1], xs[i + 2]);
                ref(c) = out;
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        num("physics.mass", [](Config& c) -> double& { return c.aero.mass; }),
        num("physics.radius", [](Config& c) -> double& { return c.aero.radius; }),
        num("physics.drag_coeff", [](Config& c) -> double& { return c.aero.drag_coeff; }),
        num("physics.air_density", [](Config& c) -> double& { return c.aero.air_density; }),
        num("physics.gravity", [](Config& c) -> double& { return c.aero.gravity; }),
        num("physics.table_length", [](Config& c) -> double& { return c.table.length_y; }),
        num("physics.table_width", [](Config& c) -> double& { return c.table.width_x; }),
        num("physics.surface_z", [](Config& c) -> double& { return c.table.surface_z; }),
        num("physics.net_y", [](Config& c) -> double& { return c.table.net_y; }),
        num("physics.net_height", [](Config& c) -> double& { return c.table.net_height; }),
        num("physics.table_restitution", [](Config& c) -> double& { return c.table.restitution_normal; }),
        num("physics.table_tangential", [](Config& c) -> double& { return c.table.tangential_retention; }),
        num("physics.racket_restitution", [](Config& c) -> double& { return c.hysr.racket_restitution; }),
        num("physics.contact_margin", [](Config& c) -> double& { return c.hysr.contact_margin; }),

        vec<VecX>("arm.link_lengths", [](Config& c) -> VecX& { return c.arm.link_lengths; }),
        directions("arm.joint_axes", [](Config& c) -> std::vector<Vec3>& { return c.arm.joint_axes; }),
        directions("arm.link_dirs", [](Config& c) -> std::vector<Vec3>& { return c.arm.link_dirs; }),
        vec<Vec3>("arm.base_position", [](Config& c) -> Vec3& { return c.base_position; }, 3),
        num("arm.base_yaw", [](Config& c) -> double& { return c.base_yaw; }),
        vec<Vec3>("arm.racket_normal", [](Config& c) -> Vec3& { return c.arm.racket_normal_local; }, 3),
        num("arm.racket_radius", [](Config& c) -> double& { return c.arm.racket_radius; }),
        vec<VecX>("arm.muscle_gain", [](Config& c) -> VecX& { return c.arm.muscle_gain; }),
        vec<VecX>("arm.inertia", [](Config& c) -> VecX& { return c.arm.inertia; }),
        vec<VecX>("arm.viscous_damping", [](Config& c) -> VecX& { return c.arm.viscous_damping; }),
        num("arm.pressure_time_constant", [](Config& c) -> double& { return c.arm.pressure_time_constant; }),
        vec<VecX>("arm.pressure_min", [](Config& c) -> VecX& { return c.arm.pressure_min; }),
        vec<VecX>("arm.pressure_max", [](Config& c) -> VecX& { return c.arm.pressure_max; }),
        vec<VecX>("arm.q_min", [](Config& c) -> VecX& { return c.arm.q_min; }),
        vec<VecX>("arm.q_max", [](Config& c) -> VecX& { return c.arm.q_max; }),
        vec<VecX>("arm.initial_posture", [](Config& c) -> VecX& { return c.arm.initial_posture; }),
        num("arm.max_delta", [](Config& c) -> double& { return c.arm.max_delta; }),
        num("arm.soft_limit_band", [](Config& c) -> double& { return c.arm.soft_limit_band; }),
        num("arm.soft_limit_gain", [](Config& c) -> double& { return c.arm.soft_limit_gain; }),

        vec<Vec3>("launcher.position", [](Config& c) -> Vec3& { return c.launcher.position; }, 3),
        num("launcher.speed", [](Config& c) -> double& { return c.launcher.speed; }),
        num("launcher.elevation_deg", [](Config& c) -> double& { return c.launcher.elevation_deg; }),
        num("launcher.azimuth_deg", [](Config& c) -> double& { return c.launcher.azimuth_deg; }),
        num("launcher.sigma_pos", [](Config& c) -> double& { return c.launcher.sigma_pos; }),
        num("launcher.sigma_speed", [](Config& c) -> double& { return c.launcher.sigma_speed; }),
        num("launcher.sigma_dir_deg", [](Config& c) -> double& { return c.launcher.sigma_dir_deg; }),
        num("launcher.obs_noise", [](Config& c) -> double& { return c.launcher.obs_noise; }),
        num("launcher.rate_hz", [](Config& c) -> double& { return c.launcher.rate_hz; }),
        num("launcher.truncate_y", [](Config& c) -> double& { return c.launcher.truncate_y; }),
        num("launcher.t_max", [](Config& c) -> double& { return c.launcher.t_max; }),

        {"reward.task", [](Config& c) { return std::string(c.reward.task == Task::Smash ? "smash" : "return"); },
         [](Config& c, std::string_view v) {
             v = trim(v);
             if (v == "return") {
                 c.reward.task = Task::Return;
             } else if (v == "smash") {
                 c.reward.task = Task::Smash;
             } else {
                 throw Error(ErrorCode::ParseError, "reward.task must be 'return' or 'smash'");
             }
         }},
        vec<Vec2>("reward.b_des", [](Config& c) -> Vec2& { return c.reward.b_des; }, 2),
        vec<Vec3>("reward.r0", [](Config& c) -> Vec3& { return c.reward.r0; }, 3),
        num("reward.exponent", [](Config& c) -> double& { return c.reward.exponent; }),
        num("reward.floor", [](Config& c) -> double& { return c.reward.floor; }),

        integer("ppo.nsteps", [](Config& c) -> int& { return c.ppo.nsteps; }),
        num("ppo.ent_coef", [](Config& c) -> double& { return c.ppo.ent_coef; }),
        num("ppo.lr", [](Config& c) -> double& { return c.ppo.lr; }),
        num("ppo.vf_coef", [](Config& c) -> double& { return c.ppo.vf_coef; }),
        num("ppo.max_grad_norm", [](Config& c) -> double& { return c.ppo.max_grad_norm; }),
        num("ppo.gamma", [](Config& c) -> double& { return c.ppo.gamma; }),
        num("ppo.lam", [](Config& c) -> double& { return c.ppo.lam; }),
        integer("ppo.nminibatches", [](Config& c) -> int& { return c.ppo.nminibatches; }),
        integer("ppo.noptepochs", [](Config& c) -> int& { return c.ppo.noptepochs; }),
        num("ppo.cliprange", [](Config& c) -> double& { return c.ppo.cliprange; }),
        num("ppo.total_timesteps", [](Config& c) -> double& { return c.ppo.total_timesteps; }),
        integer("ppo.hidden", [](Config& c) -> int& { return c.ppo.hidden; }),
        num("ppo.log_std_init", [](Config& c) -> double& { return c.ppo.log_std_init; }),
        num("ppo.hidden_gain", [](Config& c) -> double& { return c.ppo.hidden_gain; }),
        num("ppo.adam_beta1", [](Config& c) -> double& { return c.ppo.adam_beta1; }),
        num("ppo.adam_beta2", [](Config& c) -> double& { return c.ppo.adam_beta2; }),
        num("ppo.adam_eps", [](Config& c) -> double& { return c.ppo.adam_eps; }),

        num("hysr.dt", [](Config& c) -> double& { return c.hysr.dt; }),
        num("hysr.substep", [](Config& c) -> double& { return c.hysr.substep; }),
        integer("hysr.max_steps", [](Config& c) -> int& { return c.hysr.max_steps; }),
        num("hysr.lost_depth", [](Config& c) -> double& { return c.hysr.lost_depth; }),
        num("hysr.lost_radius", [](Config& c) -> double& { return c.hysr.lost_radius; }),
        num("hysr.flight_t_max", [](Config& c) -> double& { return c.hysr.flight_t_max; }),
        integer("hysr.n_envs", [](Config& c) -> int& { return c.hysr.n_envs; }),
    };
    return f;
}

}  // namespace

void Config::sync_base() {
    arm.base_pose = Eigen::Isometry3d::Identity();
    arm.base_pose.translate(base_position);
    arm.base_pose.rotate(Eigen::AngleAxisd(base_yaw, Vec3::UnitZ()));
}

void Config::validate() const {
    try {
        aero.validate();
        table.validate();
        arm.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    launcher.validate();
    reward.validate(table);
    ppo.validate();
    hysr.validate();
    if (ppo.nsteps % hysr.n_envs != 0) throw Error(ErrorCode::ConfigError, "ppo.nsteps must be divisible by hysr.n_envs");
}

HysrSetup Config::setup() const {
    HysrSetup s;
    s.arm = arm;
    s.table = table;
    s.aero = aero;
    s.reward = reward;
    s.hysr = hysr;
    s.finalize();
    return s;
}

std::string Config::digest() const { return hex_digest(serialize_config(*this)); }

std::vector<ConfigKey> config_keys() {
    Config c;
    std::vector<ConfigKey> out;
    for (const Field& f : fields()) out.push_back({f.key, f.get(c)});
    return out;
}

Config parse_config(const std::string& text, const std::string& source) {
    Config c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, where + ": expected 'key = value'");
        const std::string key(trim(s.substr(0, eq)));
        const std::string_view value = trim(s.substr(eq + 1));
        const auto& fs = fields();
        const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
        if (it == fs.end()) throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw Error(ErrorCode::ConfigError, where + ": duplicate key '" + key + "'");
        try {
            it->set(c, value);
        } catch (const Error& e) {
            throw Error(e.code(), where + ": " + e.what());
        }
    }
    c.sync_base();
    if (!seen.count("reward.r0")) {
        try {
            c.reward.r0 = forward_kinematics(c.arm.initial_posture, c.arm).center;
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, source + ": " + e.what());
        }
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(e.code(), source + ": " + e.what());
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string serialize_config(const Config& c) {
    Config copy = c;
    std::string out;
    std::string section;
    for (const Field& f : fields()) {
        const std::string sec = f.key.substr(0, f.key.find('.'));
        if (sec != section) {
            if (!section.empty()) out += '\n';
            section = sec;
        }
        out += f.key + " = " + f.get(copy) + '\n';
    }
    return out;
}

}  // namespace pamtt
