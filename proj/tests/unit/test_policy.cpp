#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pamtt/error.hpp"
#include "pamtt/policy.hpp"

using namespace pamtt;

namespace {

PolicyParams random_params(int obs, int hidden, int act, double max_action, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    PolicyParams p(obs, hidden, act, max_action);
    for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()[i] = scale * rng.normal();
    return p;
}

VecX random_vec(int n, Rng& rng, double s = 1.0) {
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = s * rng.normal();
    return v;
}

Batch random_batch(const PolicyParams& p, int n, std::uint64_t seed) {
    Rng rng(seed);
    Batch b;
    b.obs.resize(p.obs_dim(), n);
    b.raw_actions.resize(p.act_dim(), n);
    b.log_prob.resize(n);
    b.values.resize(n);
    b.advantages.resize(n);
    b.returns.resize(n);
    for (int i = 0; i < n; ++i) {
        b.obs.col(i) = random_vec(p.obs_dim(), rng);
        const PolicyOutput out = policy_forward(p, b.obs.col(i));
        b.raw_actions.col(i) = out.raw_mean + (out.std.array() * random_vec(p.act_dim(), rng).array()).matrix();
        b.log_prob[i] = log_prob(out.raw_mean, out.std, b.raw_actions.col(i), p.max_action()) + 0.3 * rng.normal();
        b.values[i] = rng.normal();
        b.advantages[i] = rng.normal();
        b.returns[i] = rng.normal();
    }
    return b;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("parameter layout") {
    const PolicyParams p(22, 512, 8, 0.3);
    CHECK(p.flat().size() == 22 * 512 + 512 + 512 * 8 + 8 + 8 + 22 * 512 + 512 + 512 + 1);
    CHECK(p.block_size(PolicyParams::PiW1) == 512 * 22);
    CHECK(p.block(PolicyParams::PiW2).rows() == 8);
    CHECK(p.block(PolicyParams::VfW2).rows() == 1);
    CHECK(PolicyParams::block_name(PolicyParams::LogStd) == "pi/log_std");
    Eigen::Index total = 0;
    for (int b = 0; b < PolicyParams::kBlockCount; ++b) {
        CHECK(p.block_offset(static_cast<PolicyParams::Block>(b)) == total);
        total += p.block_size(static_cast<PolicyParams::Block>(b));
    }
    CHECK(total == p.flat().size());
}

TEST_CASE("zero weights, zero observation") {
    PolicyParams p(22, 16, 8, 0.3);
    p.block(PolicyParams::LogStd).setConstant(std::log(0.4));
    const PolicyOutput out = policy_forward(p, VecX::Zero(22));
    CHECK(out.mean.isZero());
    CHECK(out.value == 0.0);
    for (int i = 0; i < 8; ++i) CHECK(out.std[i] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK_THROWS_AS(policy_forward(p, VecX::Zero(21)), Error);
}

TEST_CASE("initialization") {
    Rng rng(0);
    const PolicyParams p = PolicyParams::initialize(22, 64, 8, 0.3, rng, std::log(0.4));
    const MatX W = p.block(PolicyParams::PiW1);
    CHECK((W.transpose() * W - MatX::Identity(22, 22)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.block(PolicyParams::PiW2).isZero());
    CHECK(p.block(PolicyParams::VfW2).isZero());
    CHECK(p.block(PolicyParams::PiB1).isZero());
    CHECK(p.block(PolicyParams::LogStd).isConstant(std::log(0.4)));
    Rng again(0);
    CHECK(PolicyParams::initialize(22, 64, 8, 0.3, again, std::log(0.4)) == p);
}

TEST_CASE("forward pass against the scalar-loop oracle") {
    const PolicyParams p = random_params(7, 5, 3, 0.3, 12);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const VecX obs = random_vec(7, rng);
        const PolicyOutput out = policy_forward(p, obs);
        const oracle::Forward ref = oracle::forward(p, obs);
        CHECK((out.raw_mean - ref.raw_mean).norm() < 1e-13);
        CHECK((out.std - ref.std).norm() < 1e-13);
        CHECK(out.value == doctest::Approx(ref.value).epsilon(1e-13));
        CHECK((out.mean - 0.3 * ref.raw_mean.array().tanh().matrix()).norm() < 1e-13);
        CHECK(out.mean.cwiseAbs().maxCoeff() <= 0.3);
    }
}

TEST_CASE("log density") {
    SUBCASE("mode with unit std") {
        const VecX zero = VecX::Zero(8);
        const double lp = log_prob(zero, VecX::Ones(8), zero, 0.3);
        CHECK(lp == doctest::Approx(-4.0 * std::log(2.0 * std::numbers::pi) - 8.0 * std::log(0.3)).epsilon(1e-14));
    }
    SUBCASE("squashed density integrates to one") {
        const double M = 0.3;
        for (double mu : {0.0, 0.7, -1.5}) {
            for (double sd : {0.2, 0.6, 1.3}) {
                const auto density = [&](double a) {
                    const double raw = std::atanh(a / M);
                    return std::exp(log_prob(VecX::Constant(1, mu), VecX::Constant(1, sd), VecX::Constant(1, raw), M));
                };
                const double lim = M * (1.0 - 1e-12);
                CHECK(oracle::simpson(density, -lim, lim, 200000) == doctest::Approx(1.0).epsilon(2e-4));
            }
        }
    }
    SUBCASE("stable far in the tails") {
        const double lp = log_prob(VecX::Zero(1), VecX::Ones(1), VecX::Constant(1, 30.0), 0.3);
        CHECK(std::isfinite(lp));
        CHECK(lp == doctest::Approx(-450.0 - 0.5 * std::log(2 * std::numbers::pi) - std::log(0.3) - 2 * (std::log(2.0) - 30.0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(log_prob(VecX::Zero(2), VecX::Ones(3), VecX::Zero(3), 0.3), Error);
}

TEST_CASE("sampling") {
    const PolicyParams p = random_params(4, 6, 2, 0.3, 3, 0.3);
    Rng a(5), b(5);
    const VecX obs = VecX::Constant(4, 0.2);
    const PolicyDecision d1 = act(p, obs, a, false);
    const PolicyDecision d2 = act(p, obs, b, false);
    CHECK(d1.raw_action == d2.raw_action);
    CHECK(d1.action.cwiseAbs().maxCoeff() < 0.3);
    const PolicyOutput out = policy_forward(p, obs);
    CHECK(d1.log_prob == log_prob(out.raw_mean, out.std, d1.raw_action, 0.3));

    Rng c(5);
    const auto before = c.engine();
    const PolicyDecision det = act(p, obs, c, true);
    CHECK(c.engine() == before);
    CHECK(det.action == out.mean);
    CHECK(det.value == out.value);
}

TEST_CASE("entropy") {
    const VecX ls = VecX::Constant(8, std::log(0.4));
    CHECK(gaussian_entropy(ls) == doctest::Approx(8.0 * (std::log(0.4) + 0.5 * std::log(2 * std::numbers::pi * std::numbers::e))));
}

TEST_CASE("surrogate at the old parameters") {
    const PolicyParams p = random_params(5, 4, 3, 0.3, 8);
    Batch b = random_batch(p, 12, 2);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const PolicyOutput out = policy_forward(p, b.obs.col(i));
        b.log_prob[i] = log_prob(out.raw_mean, out.std, b.raw_actions.col(i), p.max_action());
    }
    const LossTerms t = ppo_loss(p, b, 0.4, 0.5, 0.0);
    CHECK(t.policy == doctest::Approx(-b.advantages.mean()).epsilon(1e-12));
    CHECK(t.approx_kl == doctest::Approx(0.0).scale(1.0).epsilon(1e-24));
    CHECK(t.clipfrac == 0.0);
    VecX v(b.size());
    for (Eigen::Index i = 0; i < b.size(); ++i) v[i] = policy_forward(p, b.obs.col(i)).value;
    CHECK(t.value == doctest::Approx((v - b.returns).squaredNorm() / 12.0));
}

TEST_CASE("clipped branch") {
    const PolicyParams p = random_params(5, 4, 3, 0.3, 8);
    Batch b = random_batch(p, 1, 4);
    const PolicyOutput out = policy_forward(p, b.obs.col(0));
    b.log_prob[0] = log_prob(out.raw_mean, out.std, b.raw_actions.col(0), p.max_action()) - std::log(2.0);
    b.advantages[0] = 1.7;
    const LossTerms t = ppo_loss(p, b, 0.4, 0.5, 0.0);
    CHECK(t.policy == doctest::Approx(-1.4 * 1.7).epsilon(1e-12));
    CHECK(t.clipfrac == 1.0);
    VecX g;
    ppo_loss(p, b, 0.4, 0.0, 0.0, &g);
    CHECK(g.isZero());
}

TEST_CASE("gradient against central differences") {
    const PolicyParams p = random_params(6, 4, 3, 0.3, 31);
    const Batch b = random_batch(p, 16, 7);
    VecX g;
    ppo_loss(p, b, 0.4, 0.66023, 0.01, &g);
    const double h = 1e-5;
    for (int blk = 0; blk < PolicyParams::kBlockCount; ++blk) {
        const auto B = static_cast<PolicyParams::Block>(blk);
        double num = 0.0;
        double den = 0.0;
        for (Eigen::Index i = p.block_offset(B); i < p.block_offset(B) + p.block_size(B); ++i) {
            PolicyParams plus = p, minus = p;
            plus.flat()[i] += h;
            minus.flat()[i] -= h;
            const double fd = (ppo_loss(plus, b, 0.4, 0.66023, 0.01).total - ppo_loss(minus, b, 0.4, 0.66023, 0.01).total) / (2 * h);
            num = std::max(num, std::abs(fd - g[i]));
            den = std::max(den, std::abs(fd));
        }
        INFO(PolicyParams::block_name(B));
        CHECK(num / std::max(den, 1e-8) < 1e-4);
    }
}

TEST_CASE("log_std clamp") {
    PolicyParams p(2, 2, 2, 1.0);
    p.block(PolicyParams::LogStd) << -9.0, 4.0;
    p.clamp_log_std();
    CHECK(p.block(PolicyParams::LogStd)(0, 0) == PolicyParams::kLogStdMin);
    CHECK(p.block(PolicyParams::LogStd)(1, 0) == PolicyParams::kLogStdMax);
}

TEST_CASE("batch selection") {
    const PolicyParams p = random_params(3, 2, 2, 0.3, 1);
    const Batch b = random_batch(p, 6, 1);
    const Batch s = b.select({4, 1});
    CHECK(s.size() == 2);
    CHECK(s.obs.col(0) == b.obs.col(4));
    CHECK(s.returns[1] == b.returns[1]);
}

}
