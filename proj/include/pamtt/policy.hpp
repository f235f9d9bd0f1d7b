#pragma once

#include <array>
#include <string_view>

#include "pamtt/env.hpp"
#include "pamtt/rng.hpp"
#include "pamtt/types.hpp"

namespace pamtt {

/// Gaussian tanh-squashed policy and a separate value network, each with one
/// tanh hidden layer. All parameters live in one flat vector so the optimizer
/// and the checkpoint see a single array; blocks are column-major views.
class PolicyParams {
public:
    enum Block { PiW1, PiB1, PiW2, PiB2, LogStd, VfW1, VfB1, VfW2, VfB2, kBlockCount };

    static constexpr double kLogStdMin = -5.0;
    static constexpr double kLogStdMax = 2.0;

    PolicyParams() = default;
    /// All-zero parameters.
    PolicyParams(int obs_dim, int hidden, int act_dim, double max_action);

    /// Orthogonal hidden layers scaled by `hidden_gain`, zero heads and
    /// biases, log_std = log_std_init.
    static PolicyParams initialize(int obs_dim, int hidden, int act_dim, double max_action, Rng& rng,
                                   double log_std_init, double hidden_gain = 1.0);

    int obs_dim() const { return obs_; }
    int hidden() const { return hidden_; }
    int act_dim() const { return act_; }
    double max_action() const { return max_action_; }

    VecX& flat() { return theta_; }
    const VecX& flat() const { return theta_; }

    Eigen::Map<MatX> block(Block b);
    Eigen::Map<const MatX> block(Block b) const;
    Eigen::Index block_offset(Block b) const { return offsets_[b]; }
    Eigen::Index block_size(Block b) const { return offsets_[b + 1] - offsets_[b]; }
    static std::string_view block_name(Block b);

    void clamp_log_std();
    bool operator==(const PolicyParams& o) const;

private:
    void layout();

    int obs_ = 0;
    int hidden_ = 0;
    int act_ = 0;
    double max_action_ = 1.0;
    VecX theta_;
    std::array<Eigen::Index, kBlockCount + 1> offsets_{};
    std::array<std::pair<int, int>, kBlockCount> dims_{};
};

struct PolicyOutput {
    VecX mean;       // squashed and scaled, within [-max_action, max_action]
    VecX raw_mean;   // pre-squash
    VecX std;
    double value = 0.0;
};

/// Throws ShapeMismatch when obs does not match the network input.
PolicyOutput policy_forward(const PolicyParams& params, const Eigen::Ref<const VecX>& obs);

/// Log density of a squashed action given by its pre-squash value `raw`:
/// diagonal Gaussian log density minus sum log(max_action (1 - tanh(raw)^2)).
double log_prob(const VecX& raw_mean, const VecX& std, const VecX& raw, double max_action);

/// Draws raw ~ N(raw_mean, std) and squashes it. Deterministic mode takes the
/// mean and draws nothing.
PolicyDecision sample_action(const PolicyOutput& out, double max_action, Rng& rng, bool deterministic);

PolicyDecision act(const PolicyParams& params, const Eigen::Ref<const VecX>& obs, Rng& rng, bool deterministic);

/// Entropy of the pre-squash Gaussian: sum(log_std + 0.5 ln(2 pi e)).
double gaussian_entropy(const Eigen::Ref<const VecX>& log_std);

/// Training samples, one column (or entry) per transition.
struct Batch {
    MatX obs;
    MatX raw_actions;
    VecX log_prob;
    VecX values;
    VecX advantages;
    VecX returns;

    Eigen::Index size() const { return log_prob.size(); }
    Batch select(const std::vector<Eigen::Index>& idx) const;
};

struct LossTerms {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clipfrac = 0.0;
};

/// Clipped-surrogate PPO loss
///   -mean(min(rho A, clip(rho, 1 +- cliprange) A)) + vf_coef mean((v - R)^2)
///   - ent_coef entropy
/// using the batch advantages as given. When `grad` is non-null it receives
/// the gradient with respect to params.flat().
LossTerms ppo_loss(const PolicyParams& params, const Batch& batch, double cliprange, double vf_coef,
                   double ent_coef, VecX* grad = nullptr);

}  // namespace pamtt
