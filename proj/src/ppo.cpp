#include "pamtt/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>
#include <thread>

#include "pamtt/csv.hpp"
#include "pamtt/error.hpp"

namespace pamtt {

int PpoHyper::total_updates() const { return static_cast<int>(std::floor(total_timesteps / nsteps)); }

void PpoHyper::validate() const {
    const auto fail = [](const char* what) { throw Error(ErrorCode::ConfigError, what); };
    if (nsteps < 1 || nminibatches < 1 || noptepochs < 1 || hidden < 1) fail("ppo counts must be positive");
    if (nsteps % nminibatches != 0) fail("ppo.nsteps must be divisible by ppo.nminibatches");
    if (!(ent_coef >= 0.0) || !(lr > 0.0) || !(vf_coef > 0.0) || !(max_grad_norm > 0.0)) {
        fail("ppo coefficients must be positive");
    }
    if (!(gamma > 0.0 && gamma <= 1.0) || !(lam >= 0.0 && lam <= 1.0)) fail("ppo.gamma and ppo.lam must lie in (0, 1]");
    if (!(cliprange > 0.0 && cliprange < 1.0)) fail("ppo.cliprange must lie in (0, 1)");
    if (!(total_timesteps >= nsteps)) fail("ppo.total_timesteps must be at least ppo.nsteps");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
        fail("ppo Adam settings out of range");
    }
    if (!std::isfinite(log_std_init) || !(hidden_gain > 0.0)) fail("ppo initialization settings out of range");
}

double learning_rate(const PpoHyper& hyper, int update_index) {
    return hyper.lr * (1.0 - static_cast<double>(update_index) / hyper.total_updates());
}

GaeResult gae(const VecX& rewards, const VecX& values, const std::vector<bool>& dones, double gamma, double lam) {
    const Eigen::Index n = rewards.size();
    if (values.size() != n + 1 || static_cast<Eigen::Index>(dones.size()) != n) {
        throw Error(ErrorCode::LengthMismatch, "gae needs values of length T+1 and dones of length T");
    }
    GaeResult r;
    r.advantages.resize(n);
    double next = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double live = dones[t] ? 0.0 : 1.0;
        const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lam * live * next;
        r.advantages[t] = next;
    }
    r.returns = r.advantages + values.head(n);
    return r;
}

VecX normalize_advantages(const VecX& a) {
    if (a.size() == 0) return a;
    const double mean = a.mean();
    VecX c = a.array() - mean;
    const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(a.size()));
    if (sd > 0.0) c /= sd;
    return c;
}

double clip_global_norm(VecX& g, double max_norm) {
    const double norm = g.norm();
    if (norm > max_norm) g *= max_norm / norm;
    return norm;
}

void adam_step(VecX& theta, const VecX& grad, AdamState& s, double lr, double beta1, double beta2, double eps) {
    if (s.m.size() != theta.size()) {
        s.m = VecX::Zero(theta.size());
        s.v = VecX::Zero(theta.size());
        s.t = 0;
    }
    ++s.t;
    s.m = beta1 * s.m + (1.0 - beta1) * grad;
    s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double td = static_cast<double>(s.t);
    const double lr_t = lr * std::sqrt(1.0 - std::pow(beta2, td)) / (1.0 - std::pow(beta1, td));
    theta.array() -= lr_t * s.m.array() / (s.v.array().sqrt() + eps);
}

UpdateStats ppo_update(PolicyParams& params, const Batch& batch, const PpoHyper& hyper, int update_index,
                       AdamState& adam, Rng& rng) {
    const Eigen::Index n = batch.size();
    if (n == 0 || n % hyper.nminibatches != 0) {
        throw Error(ErrorCode::ShapeMismatch, "batch size must be a positive multiple of nminibatches");
    }
    Batch b = batch;
    b.advantages = normalize_advantages(batch.advantages);

    UpdateStats stats;
    stats.lr = learning_rate(hyper, update_index);
    const Eigen::Index mb = n / hyper.nminibatches;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    VecX grad;
    int count = 0;
    for (int epoch = 0; epoch < hyper.noptepochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (int k = 0; k < hyper.nminibatches; ++k) {
            const std::vector<Eigen::Index> idx(order.begin() + k * mb, order.begin() + (k + 1) * mb);
            const LossTerms t = ppo_loss(params, b.select(idx), hyper.cliprange, hyper.vf_coef, hyper.ent_coef, &grad);
            if (!std::isfinite(t.total) || !grad.allFinite()) {
                throw Error(ErrorCode::NonFiniteLoss, "non-finite loss in update " + std::to_string(update_index) +
                                                          ", epoch " + std::to_string(epoch) + ", minibatch " +
                                                          std::to_string(k));
            }
            stats.grad_norm += clip_global_norm(grad, hyper.max_grad_norm);
            adam_step(params.flat(), grad, adam, stats.lr, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps);
            params.clamp_log_std();
            stats.loss.total += t.total;
            stats.loss.policy += t.policy;
            stats.loss.value += t.value;
            stats.loss.entropy += t.entropy;
            stats.loss.approx_kl += t.approx_kl;
            stats.loss.clipfrac += t.clipfrac;
            ++count;
        }
    }
    const double inv = 1.0 / count;
    for (double* v : {&stats.loss.total, &stats.loss.policy, &stats.loss.value, &stats.loss.entropy,
                      &stats.loss.approx_kl, &stats.loss.clipfrac, &stats.grad_norm}) {
        *v *= inv;
    }
    return stats;
}

namespace {

struct Slot {
    std::unique_ptr<Environment> env;
    Rng rng;
    VecX obs;
    std::uint64_t episode = 0;

    // Per-update segment.
    MatX obs_buf;
    MatX raw_buf;
    VecX logp;
    VecX values;
    VecX rewards;
    std::vector<bool> dones;
    std::vector<EpisodeInfo> finished;
};

void collect(Slot& s, const PolicyParams& params, int steps) {
    s.obs_buf.resize(params.obs_dim(), steps);
    s.raw_buf.resize(params.act_dim(), steps);
    s.logp.resize(steps);
    s.values.resize(steps + 1);
    s.rewards.resize(steps);
    s.dones.assign(static_cast<std::size_t>(steps), false);
    s.finished.clear();
    for (int t = 0; t < steps; ++t) {
        const PolicyDecision d = act(params, s.obs, s.rng, false);
        s.obs_buf.col(t) = s.obs;
        s.raw_buf.col(t) = d.raw_action;
        s.logp[t] = d.log_prob;
        s.values[t] = d.value;
        const EnvStep r = s.env->step(d.action);
        s.rewards[t] = r.reward;
        s.dones[t] = r.done;
        if (r.done) {
            if (r.info) s.finished.push_back(*r.info);
            ++s.episode;
            s.obs = s.env->reset(s.rng);
        } else {
            s.obs = s.env->observation();
        }
    }
    s.values[steps] = policy_forward(params, s.obs).value;
}

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += workers) f(i);
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

}  // namespace

TrainResult train(const EnvFactory& make_env, const PpoHyper& hyper, std::uint64_t seed, const TrainOptions& opts,
                  const UpdateCallback& callback) {
    hyper.validate();
    if (opts.n_envs < 1 || hyper.nsteps % opts.n_envs != 0) {
        throw Error(ErrorCode::ConfigError, "ppo.nsteps must be divisible by hysr.n_envs");
    }
    const int per_slot = hyper.nsteps / opts.n_envs;

    std::vector<Slot> slots(static_cast<std::size_t>(opts.n_envs));
    for (std::size_t e = 0; e < slots.size(); ++e) {
        slots[e].env = make_env();
        slots[e].rng = Rng(substream_seed(seed, 1000 + e));
    }
    const int obs_dim = slots[0].env->obs_dim();
    const int act_dim = slots[0].env->act_dim();

    Rng init_rng(substream_seed(seed, 0));
    Rng shuffle_rng(substream_seed(seed, 1));
    TrainResult out;
    out.params = PolicyParams::initialize(obs_dim, hyper.hidden, act_dim, opts.max_action, init_rng,
                                          hyper.log_std_init, hyper.hidden_gain);
    for (auto& s : slots) s.obs = s.env->reset(s.rng);

    int updates = hyper.total_updates();
    if (opts.max_updates) updates = std::min(updates, *opts.max_updates);
    long timesteps = 0;
    for (int u = 0; u < updates; ++u) {
        const PolicyParams& snapshot = out.params;
        parallel_for(slots.size(), opts.workers, [&](std::size_t e) {
            try {
                collect(slots[e], snapshot, per_slot);
            } catch (const Error& err) {
                throw Error(err.code(), std::string(err.what()) + " (slot " + std::to_string(e) + ", episode " +
                                            std::to_string(slots[e].episode) + ", seed " + std::to_string(seed) + ")");
            }
        });

        Batch batch;
        batch.obs.resize(obs_dim, hyper.nsteps);
        batch.raw_actions.resize(act_dim, hyper.nsteps);
        batch.log_prob.resize(hyper.nsteps);
        batch.values.resize(hyper.nsteps);
        batch.advantages.resize(hyper.nsteps);
        batch.returns.resize(hyper.nsteps);
        UpdateLog log;
        log.update = u;
        int hits = 0;
        int returns = 0;
        for (std::size_t e = 0; e < slots.size(); ++e) {
            Slot& s = slots[e];
            const GaeResult g = gae(s.rewards, s.values, s.dones, hyper.gamma, hyper.lam);
            const Eigen::Index off = static_cast<Eigen::Index>(e) * per_slot;
            batch.obs.middleCols(off, per_slot) = s.obs_buf;
            batch.raw_actions.middleCols(off, per_slot) = s.raw_buf;
            batch.log_prob.segment(off, per_slot) = s.logp;
            batch.values.segment(off, per_slot) = s.values.head(per_slot);
            batch.advantages.segment(off, per_slot) = g.advantages;
            batch.returns.segment(off, per_slot) = g.returns;
            for (const EpisodeInfo& info : s.finished) {
                log.episode_rewards.push_back(info.reward);
                hits += info.hit;
                returns += info.returned;
            }
        }
        timesteps += hyper.nsteps;

        const UpdateStats st = ppo_update(out.params, batch, hyper, u, out.adam, shuffle_rng);

        log.timesteps = timesteps;
        log.episodes = static_cast<int>(log.episode_rewards.size());
        if (log.episodes > 0) {
            const VecX r = Eigen::Map<const VecX>(log.episode_rewards.data(), log.episodes);
            log.mean_rtt = r.mean();
            log.std_rtt = log.episodes > 1 ? std::sqrt((r.array() - log.mean_rtt).square().sum() / (log.episodes - 1)) : 0.0;
            log.hit_rate = static_cast<double>(hits) / log.episodes;
            log.return_rate = static_cast<double>(returns) / log.episodes;
        }
        log.policy_loss = st.loss.policy;
        log.value_loss = st.loss.value;
        log.entropy = st.loss.entropy;
        log.approx_kl = st.loss.approx_kl;
        log.clipfrac = st.loss.clipfrac;
        log.grad_norm = st.grad_norm;
        log.lr = st.lr;
        out.log.push_back(log);
        if (callback) callback(out.log.back(), out.params);
    }
    return out;
}

void write_update_log_csv(const std::vector<UpdateLog>& log, const std::filesystem::path& path) {
    CsvWriter w(path, {"update", "timesteps", "episodes", "mean_rtt", "std_rtt", "hit_rate", "return_rate",
                       "policy_loss", "value_loss", "entropy", "approx_kl", "clipfrac", "grad_norm", "lr"});
    for (const UpdateLog& l : log) {
        w.row({static_cast<double>(l.update), static_cast<double>(l.timesteps), static_cast<double>(l.episodes),
               l.mean_rtt, l.std_rtt, l.hit_rate, l.return_rate, l.policy_loss, l.value_loss, l.entropy,
               l.approx_kl, l.clipfrac, l.grad_norm, l.lr});
    }
}

namespace {

constexpr char kMagic[8] = {'P', 'A', 'M', 'T', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_vec(std::ostream& os, const VecX& v) {
    put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& is, const std::string& where) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(ErrorCode::ParseError, where + ": truncated checkpoint");
    return v;
}

VecX get_vec(std::istream& is, const std::string& where, std::uint64_t limit) {
    const auto n = get<std::uint64_t>(is, where);
    if (n > limit) throw Error(ErrorCode::ParseError, where + ": implausible array length in checkpoint");
    VecX v(static_cast<Eigen::Index>(n));
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
        throw Error(ErrorCode::ParseError, where + ": truncated checkpoint");
    }
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put<std::int32_t>(os, ck.params.obs_dim());
    put<std::int32_t>(os, ck.params.hidden());
    put<std::int32_t>(os, ck.params.act_dim());
    put<double>(os, ck.params.max_action());
    put_vec(os, ck.params.flat());
    put_vec(os, ck.norm.offset);
    put_vec(os, ck.norm.scale);
    put<std::uint64_t>(os, ck.config_digest.size());
    os.write(ck.config_digest.data(), static_cast<std::streamsize>(ck.config_digest.size()));
    put<std::int32_t>(os, ck.updates);
    if (!os) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string where = path.string();
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + where);
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorCode::ParseError, where + ": not a checkpoint");
    }
    if (get<std::uint32_t>(is, where) != kVersion) throw Error(ErrorCode::ParseError, where + ": unsupported checkpoint version");
    const auto obs = get<std::int32_t>(is, where);
    const auto hidden = get<std::int32_t>(is, where);
    const auto act = get<std::int32_t>(is, where);
    const auto max_action = get<double>(is, where);
    if (obs < 1 || hidden < 1 || act < 1 || obs > 100000 || hidden > 100000 || act > 100000) {
        throw Error(ErrorCode::ParseError, where + ": bad network shape");
    }
    Checkpoint ck;
    ck.params = PolicyParams(obs, hidden, act, max_action);
    const VecX theta = get_vec(is, where, 1u << 28);
    if (theta.size() != ck.params.flat().size()) throw Error(ErrorCode::ShapeMismatch, where + ": parameter count does not match shape");
    ck.params.flat() = theta;
    ck.norm.offset = get_vec(is, where, 1u << 20);
    ck.norm.scale = get_vec(is, where, 1u << 20);
    const auto len = get<std::uint64_t>(is, where);
    if (len > 4096) throw Error(ErrorCode::ParseError, where + ": bad digest length");
    ck.config_digest.resize(len);
    if (!is.read(ck.config_digest.data(), static_cast<std::streamsize>(len))) throw Error(ErrorCode::ParseError, where + ": truncated checkpoint");
    ck.updates = get<std::int32_t>(is, where);
    if (ck.norm.size() != obs) throw Error(ErrorCode::ShapeMismatch, where + ": normalization does not match the network");
    return ck;
}

PolicyFn make_policy_fn(PolicyParams params) {
    auto p = std::make_shared<const PolicyParams>(std::move(params));
    return [p](const VecX& obs, Rng& rng, bool deterministic) { return act(*p, obs, rng, deterministic); };
}

}  // namespace pamtt
