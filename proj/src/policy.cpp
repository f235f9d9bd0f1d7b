#include "pamtt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "pamtt/error.hpp"

namespace pamtt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2 pi)

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|.
double log_sech2(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

double squash_correction(const VecX& raw, double max_action) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < raw.size(); ++i) c += std::log(max_action) + log_sech2(raw[i]);
    return c;
}

MatX orthogonal(int rows, int cols, double gain, Rng& rng) {
    const bool tall = rows >= cols;
    const int r = tall ? rows : cols;
    const int c = tall ? cols : rows;
    MatX a(r, c);
    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < r; ++i) a(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<MatX> qr(a);
    MatX q = qr.householderQ() * MatX::Identity(r, c);
    const MatX rr = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
    for (int j = 0; j < c; ++j) {
        if (rr(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return gain * (tall ? q : MatX(q.transpose()));
}

}  // namespace

PolicyParams::PolicyParams(int obs_dim, int hidden, int act_dim, double max_action)
    : obs_(obs_dim), hidden_(hidden), act_(act_dim), max_action_(max_action) {
    if (obs_dim < 1 || hidden < 1 || act_dim < 1) throw Error(ErrorCode::InvalidArgument, "network sizes must be positive");
    if (!(max_action > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_action must be positive");
    layout();
    theta_ = VecX::Zero(offsets_[kBlockCount]);
}

void PolicyParams::layout() {
    dims_ = {{{hidden_, obs_}, {hidden_, 1}, {act_, hidden_}, {act_, 1}, {act_, 1},
              {hidden_, obs_}, {hidden_, 1}, {1, hidden_}, {1, 1}}};
    offsets_[0] = 0;
    for (int b = 0; b < kBlockCount; ++b) {
        offsets_[b + 1] = offsets_[b] + static_cast<Eigen::Index>(dims_[b].first) * dims_[b].second;
    }
}

PolicyParams PolicyParams::initialize(int obs_dim, int hidden, int act_dim, double max_action, Rng& rng,
                                      double log_std_init, double hidden_gain) {
    PolicyParams p(obs_dim, hidden, act_dim, max_action);
    p.block(PiW1) = orthogonal(hidden, obs_dim, hidden_gain, rng);
    p.block(VfW1) = orthogonal(hidden, obs_dim, hidden_gain, rng);
    p.block(LogStd).setConstant(log_std_init);
    p.clamp_log_std();
    return p;
}

Eigen::Map<MatX> PolicyParams::block(Block b) {
    return {theta_.data() + offsets_[b], dims_[b].first, dims_[b].second};
}

Eigen::Map<const MatX> PolicyParams::block(Block b) const {
    return {theta_.data() + offsets_[b], dims_[b].first, dims_[b].second};
}

std::string_view PolicyParams::block_name(Block b) {
    static constexpr std::array<std::string_view, kBlockCount> names{
        "pi/w1", "pi/b1", "pi/w2", "pi/b2", "pi/log_std", "vf/w1", "vf/b1", "vf/w2", "vf/b2"};
    return names[b];
}

void PolicyParams::clamp_log_std() {
    auto s = theta_.segment(offsets_[LogStd], block_size(LogStd));
    s = s.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

bool PolicyParams::operator==(const PolicyParams& o) const {
    return obs_ == o.obs_ && hidden_ == o.hidden_ && act_ == o.act_ && max_action_ == o.max_action_ &&
           theta_.size() == o.theta_.size() && theta_ == o.theta_;
}

PolicyOutput policy_forward(const PolicyParams& p, const Eigen::Ref<const VecX>& obs) {
    if (obs.size() != p.obs_dim()) throw Error(ErrorCode::ShapeMismatch, "observation does not match the policy input");
    using B = PolicyParams;
    PolicyOutput out;
    const VecX h = (p.block(B::PiW1) * obs + p.block(B::PiB1)).array().tanh().matrix();
    out.raw_mean = p.block(B::PiW2) * h + p.block(B::PiB2);
    out.mean = p.max_action() * out.raw_mean.array().tanh().matrix();
    out.std = p.block(B::LogStd).array().exp().matrix();
    const VecX hv = (p.block(B::VfW1) * obs + p.block(B::VfB1)).array().tanh().matrix();
    out.value = (p.block(B::VfW2) * hv)(0, 0) + p.block(B::VfB2)(0, 0);
    return out;
}

double log_prob(const VecX& raw_mean, const VecX& std, const VecX& raw, double max_action) {
    if (raw_mean.size() != std.size() || raw.size() != std.size()) {
        throw Error(ErrorCode::ShapeMismatch, "log_prob arguments differ in size");
    }
    double lp = 0.0;
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        const double z = (raw[i] - raw_mean[i]) / std[i];
        lp += -0.5 * z * z - std::log(std[i]) - 0.5 * kLog2Pi;
    }
    return lp - squash_correction(raw, max_action);
}

PolicyDecision sample_action(const PolicyOutput& out, double max_action, Rng& rng, bool deterministic) {
    PolicyDecision d;
    if (deterministic) {
        d.raw_action = out.raw_mean;
    } else {
        d.raw_action.resize(out.raw_mean.size());
        for (Eigen::Index i = 0; i < d.raw_action.size(); ++i) {
            d.raw_action[i] = out.raw_mean[i] + out.std[i] * rng.normal();
        }
    }
    d.action = max_action * d.raw_action.array().tanh().matrix();
    d.log_prob = log_prob(out.raw_mean, out.std, d.raw_action, max_action);
    d.value = out.value;
    return d;
}

PolicyDecision act(const PolicyParams& params, const Eigen::Ref<const VecX>& obs, Rng& rng, bool deterministic) {
    return sample_action(policy_forward(params, obs), params.max_action(), rng, deterministic);
}

double gaussian_entropy(const Eigen::Ref<const VecX>& log_std) {
    return log_std.sum() + 0.5 * (kLog2Pi + 1.0) * static_cast<double>(log_std.size());
}

Batch Batch::select(const std::vector<Eigen::Index>& idx) const {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Batch b;
    b.obs.resize(obs.rows(), n);
    b.raw_actions.resize(raw_actions.rows(), n);
    b.log_prob.resize(n);
    b.values.resize(n);
    b.advantages.resize(n);
    b.returns.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index i = idx[j];
        b.obs.col(j) = obs.col(i);
        b.raw_actions.col(j) = raw_actions.col(i);
        b.log_prob[j] = log_prob[i];
        b.values[j] = values[i];
        b.advantages[j] = advantages[i];
        b.returns[j] = returns[i];
    }
    return b;
}

LossTerms ppo_loss(const PolicyParams& p, const Batch& batch, double cliprange, double vf_coef, double ent_coef,
                   VecX* grad) {
    using B = PolicyParams;
    const Eigen::Index n = batch.size();
    if (n == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
    if (batch.obs.rows() != p.obs_dim() || batch.obs.cols() != n || batch.raw_actions.rows() != p.act_dim() ||
        batch.raw_actions.cols() != n || batch.advantages.size() != n || batch.returns.size() != n) {
        throw Error(ErrorCode::ShapeMismatch, "batch does not match the policy");
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto& X = batch.obs;
    const auto& U = batch.raw_actions;

    MatX pre = p.block(B::PiW1) * X;
    pre.colwise() += VecX(p.block(B::PiB1));
    const MatX H = pre.array().tanh().matrix();
    MatX mu = p.block(B::PiW2) * H;
    mu.colwise() += VecX(p.block(B::PiB2));

    MatX vpre = p.block(B::VfW1) * X;
    vpre.colwise() += VecX(p.block(B::VfB1));
    const MatX HV = vpre.array().tanh().matrix();
    const VecX v = (p.block(B::VfW2) * HV).transpose().array() + p.block(B::VfB2)(0, 0);

    const VecX log_std = p.block(B::LogStd);
    const VecX inv_var = (-2.0 * log_std).array().exp().matrix();
    const MatX diff = U - mu;  // raw - mean

    LossTerms t;
    VecX g_logp(n);
    const double log_norm = log_std.sum() + 0.5 * kLog2Pi * static_cast<double>(p.act_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        double quad = 0.0;
        for (Eigen::Index j = 0; j < diff.rows(); ++j) quad += diff(j, i) * diff(j, i) * inv_var[j];
        double corr = 0.0;
        for (Eigen::Index j = 0; j < U.rows(); ++j) corr += std::log(p.max_action()) + log_sech2(U(j, i));
        const double lp = -0.5 * quad - log_norm - corr;
        const double delta = lp - batch.log_prob[i];
        const double ratio = std::exp(delta);
        const double a = batch.advantages[i];
        const double s1 = ratio * a;
        const double s2 = std::clamp(ratio, 1.0 - cliprange, 1.0 + cliprange) * a;
        t.policy -= std::min(s1, s2) * inv_n;
        g_logp[i] = s1 <= s2 ? -inv_n * s1 : 0.0;
        t.approx_kl += 0.5 * delta * delta * inv_n;
        if (std::abs(ratio - 1.0) > cliprange) t.clipfrac += inv_n;
    }
    const VecX verr = v - batch.returns;
    t.value = verr.squaredNorm() * inv_n;
    t.entropy = gaussian_entropy(log_std);
    t.total = t.policy + vf_coef * t.value - ent_coef * t.entropy;

    if (grad) {
        grad->setZero(p.flat().size());
        const auto put = [&](B::Block b, const MatX& m) {
            grad->segment(p.block_offset(b), p.block_size(b)) = Eigen::Map<const VecX>(m.data(), m.size());
        };
        // d logp / d mu = diff / var ; d logp / d log_std = z^2 - 1
        const MatX g_mu = (inv_var.asDiagonal() * diff) * g_logp.asDiagonal();
        put(B::PiW2, g_mu * H.transpose());
        put(B::PiB2, g_mu.rowwise().sum());
        const MatX g_pre = ((p.block(B::PiW2).transpose() * g_mu).array() * (1.0 - H.array().square())).matrix();
        put(B::PiW1, g_pre * X.transpose());
        put(B::PiB1, g_pre.rowwise().sum());
        const VecX z2 = (diff.array().square().colwise() * inv_var.array()).matrix() * g_logp;
        put(B::LogStd, z2 - VecX::Constant(p.act_dim(), g_logp.sum() + ent_coef));

        const VecX g_v = (2.0 * vf_coef * inv_n) * verr;
        put(B::VfW2, g_v.transpose() * HV.transpose());
        put(B::VfB2, MatX::Constant(1, 1, g_v.sum()));
        const MatX g_vpre = ((p.block(B::VfW2).transpose() * g_v.transpose()).array() *
                             (1.0 - HV.array().square())).matrix();
        put(B::VfW1, g_vpre * X.transpose());
        put(B::VfB1, g_vpre.rowwise().sum());
    }
    return t;
}

}  // namespace pamtt
