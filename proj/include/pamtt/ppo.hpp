#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pamtt/env.hpp"
#include "pamtt/hysr.hpp"
#include "pamtt/policy.hpp"

namespace pamtt {

struct PpoHyper {
    int nsteps = 4096;
    double ent_coef = 0.001;
    double lr = 1e-3;                // initial rate, decays linearly to 0
    double vf_coef = 0.66023;
    double max_grad_norm = 0.05;
    double gamma = 0.9999;
    double lam = 0.98438;
    int nminibatches = 8;
    int noptepochs = 32;
    double cliprange = 0.4;
    double total_timesteps = 1.5e6;

    int hidden = 512;
    double log_std_init = -0.916290731874155;  // ln(0.4)
    double hidden_gain = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-5;

    /// floor(total_timesteps / nsteps).
    int total_updates() const;
    /// Throws ConfigError on non-positive values, cliprange >= 1, or nsteps
    /// not divisible by nminibatches.
    void validate() const;
};

/// lr * (1 - update_index / total_updates).
double learning_rate(const PpoHyper& hyper, int update_index);

struct GaeResult {
    VecX advantages;
    VecX returns;
};

/// Generalized advantage estimation over one contiguous segment. `values`
/// has one more entry than `rewards`: the bootstrap value of the state after
/// the last step (ignored when that step is terminal). dones[t] marks an
/// episode ending with step t. Throws LengthMismatch.
GaeResult gae(const VecX& rewards, const VecX& values, const std::vector<bool>& dones, double gamma, double lam);

/// (a - mean) / std; only centered when the std is zero.
VecX normalize_advantages(const VecX& a);

/// Scales g so its Euclidean norm is at most max_norm. Returns the norm
/// before clipping.
double clip_global_norm(VecX& g, double max_norm);

struct AdamState {
    VecX m;
    VecX v;
    long t = 0;
};

/// Bias-corrected Adam step: theta -= lr_t m / (sqrt(v) + eps).
void adam_step(VecX& theta, const VecX& grad, AdamState& state, double lr, double beta1, double beta2, double eps);

struct UpdateStats {
    LossTerms loss;         // averaged over all minibatch steps
    double grad_norm = 0.0; // mean pre-clip norm
    double lr = 0.0;
};

/// noptepochs passes over nminibatches shuffled minibatches. Advantages are
/// normalized over the whole batch first. log_std is clamped after every
/// optimizer step. Throws NonFiniteLoss naming the epoch and minibatch.
UpdateStats ppo_update(PolicyParams& params, const Batch& batch, const PpoHyper& hyper, int update_index,
                       AdamState& adam, Rng& rng);

struct UpdateLog {
    int update = 0;
    long timesteps = 0;
    int episodes = 0;
    double mean_rtt = std::nan("");
    double std_rtt = std::nan("");
    double hit_rate = std::nan("");
    double return_rate = std::nan("");
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clipfrac = 0.0;
    double grad_norm = 0.0;
    double lr = 0.0;
    std::vector<double> episode_rewards;
};

struct TrainOptions {
    int n_envs = 8;                 // episode slots; nsteps must be divisible by it
    unsigned workers = 1;           // threads for rollout collection
    std::optional<int> max_updates; // stop early (the schedule still spans total_updates)
    double max_action = 0.3;
};

struct TrainResult {
    PolicyParams params;
    std::vector<UpdateLog> log;
    AdamState adam;
};

/// Called after each update with its log and the updated parameters.
using UpdateCallback = std::function<void(const UpdateLog&, const PolicyParams&)>;

/// PPO training. Each slot keeps its own environment and random stream and
/// steps nsteps / n_envs transitions per update, continuing episodes across
/// updates. Results do not depend on the worker count.
TrainResult train(const EnvFactory& make_env, const PpoHyper& hyper, std::uint64_t seed, const TrainOptions& opts,
                  const UpdateCallback& callback = {});

/// Columns: update, timesteps, episodes, mean_rtt, std_rtt, hit_rate,
/// return_rate, policy_loss, value_loss, entropy, approx_kl, clipfrac,
/// grad_norm, lr.
void write_update_log_csv(const std::vector<UpdateLog>& log, const std::filesystem::path& path);

struct Checkpoint {
    PolicyParams params;
    NormalizationSpec norm;
    std::string config_digest;
    int updates = 0;

    bool operator==(const Checkpoint&) const = default;
};

/// Versioned little-endian binary: magic, version, shapes, parameters,
/// normalization, config digest.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Read-only snapshot of the parameters as a policy callable.
PolicyFn make_policy_fn(PolicyParams params);

}  // namespace pamtt
