#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "pamtt/rng.hpp"
#include "pamtt/types.hpp"

namespace pamtt {

/// Summary of a finished episode, reported on its final step.
struct EpisodeInfo {
    double reward = 0.0;
    bool hit = false;
    bool returned = false;
    std::int64_t traj_id = -1;
    int length = 0;
};

struct EnvStep {
    double reward = 0.0;
    bool done = false;
    std::optional<EpisodeInfo> info;  // set when done
};

/// Episodic environment stepped by the trainer. Each instance is owned by
/// one worker at a time.
class Environment {
public:
    virtual ~Environment() = default;

    virtual int obs_dim() const = 0;
    virtual int act_dim() const = 0;

    /// Starts a new episode and returns its first observation.
    virtual VecX reset(Rng& rng) = 0;
    /// Applies a (squashed) action. After done, reset() must be called.
    virtual EnvStep step(const VecX& action) = 0;
    virtual VecX observation() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// Action chosen by a policy for one observation.
struct PolicyDecision {
    VecX action;       // squashed, within the action bounds
    VecX raw_action;   // pre-squash Gaussian sample
    double log_prob = 0.0;
    double value = 0.0;
};

using PolicyFn = std::function<PolicyDecision(const VecX& obs, Rng& rng, bool deterministic)>;

}  // namespace pamtt
