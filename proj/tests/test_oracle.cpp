#include "softctrl/oracle.hpp"

#include <cmath>

#include "doctest.h"
#include "softctrl/errors.hpp"
#include "softctrl/rng.hpp"

using namespace softctrl;
using namespace softctrl::oracle;

namespace {

Eigen::MatrixXd uniform_policy(int n, int m) {
    return Eigen::MatrixXd::Constant(n, m, 1.0 / m);
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("finite mdp: validation rejects malformed inputs") {
    Rng rng(1);
    FiniteMdp mdp = random_mdp(rng, 4, 3, 0.9);
    CHECK_NOTHROW(mdp.validate());

    FiniteMdp bad = mdp;
    bad.trans[1](2, 0) += 1e-9;  // row no longer sums to 1
    CHECK_THROWS_AS(bad.validate(), InvariantViolation);

    bad = mdp;
    bad.trans[0](0, 0) = -0.1;
    CHECK_THROWS_AS(bad.validate(), InvariantViolation);

    bad = mdp;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvariantViolation);

    bad = mdp;
    bad.trans.pop_back();
    CHECK_THROWS_AS(bad.validate(), InvariantViolation);

    CHECK_THROWS_AS(soft_vi(mdp, 0.0, 10), InvariantViolation);
    CHECK_THROWS_AS(munchausen_vi(mdp, 1.0, 1.5, uniform_policy(4, 3), 10),
                    InvariantViolation);
    CHECK_THROWS_AS(entkl_vi(mdp, -0.1, 0.5, uniform_policy(4, 3), 10), InvariantViolation);
    CHECK_THROWS_AS(entkl_vi(mdp, 0.0, 0.0, uniform_policy(4, 3), 10), InvariantViolation);
    CHECK_THROWS_AS(munchausen_vi(mdp, 1.0, 0.5, uniform_policy(3, 3), 10),
                    DimensionMismatch);
}

TEST_CASE("single state, single action: geometric series value") {
    FiniteMdp mdp;
    mdp.reward = Eigen::MatrixXd::Constant(1, 1, 1.0);
    mdp.trans = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
    mdp.gamma = 0.8;
    const double want = 1.0 / (1.0 - 0.8);
    CHECK(hard_vi(mdp, 300)(0, 0) == doctest::Approx(want).epsilon(1e-12));
    // single action: entropy term is exactly zero, soft equals hard
    CHECK(soft_vi(mdp, 0.7, 300)(0, 0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("soft_vi: huge temperature yields a uniform softmax policy") {
    Rng rng(7);
    FiniteMdp mdp = random_mdp(rng, 4, 3, 0.5);
    mdp.reward *= 0.25;  // keep q spreads small enough for the softmax limit
    const double tau = 1e6;
    const Eigen::MatrixXd q = soft_vi(mdp, tau, 80);
    const Eigen::MatrixXd pi = softmax_rows(q / tau);
    for (int s = 0; s < pi.rows(); ++s) {
        CHECK(pi.row(s).maxCoeff() - pi.row(s).minCoeff() <= 1e-6);
        CHECK(pi.row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("soft_vi: tiny temperature matches hard value iteration") {
    Rng rng(11);
    const FiniteMdp mdp = random_mdp(rng, 5, 3, 0.9);
    const Eigen::MatrixXd qh = hard_vi(mdp, 400);
    const Eigen::MatrixXd qs = soft_vi(mdp, 1e-6, 400);
    CHECK(max_abs(qh - qs) <= 1e-3);
}

TEST_CASE("munchausen_vi: alpha = 0 is exactly soft_vi") {
    Rng rng(13);
    const FiniteMdp mdp = random_mdp(rng, 6, 4, 0.9);
    const Eigen::MatrixXd pi0 = random_policy(rng, 6, 4);
    const ViTrace tr = munchausen_vi(mdp, 1.2, 0.0, pi0, 60);
    const Eigen::MatrixXd qs = soft_vi(mdp, 1.2, 60);
    CHECK(max_abs(tr.q.back() - qs) == 0.0);
}

TEST_CASE("entkl_vi: w_kl = 0 is exactly soft_vi at tau = w_h") {
    Rng rng(17);
    const FiniteMdp mdp = random_mdp(rng, 5, 4, 0.85);
    const Eigen::MatrixXd pi0 = random_policy(rng, 5, 4);
    const ViTrace tr = entkl_vi(mdp, 0.9, 0.0, pi0, 60);
    const Eigen::MatrixXd qs = soft_vi(mdp, 0.9, 60);
    CHECK(max_abs(tr.q.back() - qs) == 0.0);
}

TEST_CASE("munchausen_vi: uniform reference shifts soft_vi by a constant") {
    Rng rng(19);
    const int n = 5, m = 4;
    const FiniteMdp mdp = random_mdp(rng, n, m, 0.8);
    const Eigen::MatrixXd pi0 = uniform_policy(n, m);
    const double tau = 1.1, alpha = 0.6;
    const int iters = 120;
    const ViTrace mu = munchausen_vi(mdp, tau, alpha, pi0, iters);
    const ViTrace soft = munchausen_vi(mdp, tau, 0.0, pi0, iters);  // == soft_vi trace
    const double per_backup = alpha * tau * std::log(1.0 / m);
    for (int k = 0; k < iters; ++k) {
        const Eigen::MatrixXd d = mu.q[k] - soft.q[k];
        // the offset is constant across (s, a) at every iteration
        CHECK(d.maxCoeff() - d.minCoeff() <= 1e-9);
        if (k == 0) CHECK(std::fabs(d(0, 0) - per_backup) <= 1e-12);
    }
    // accumulated limit of the per-backup constant
    const double limit = per_backup / (1.0 - mdp.gamma);
    CHECK(std::fabs((mu.q.back() - soft.q.back())(2, 1) - limit) <= 1e-8);
}

TEST_CASE("entkl_vi: dominant KL weight pulls the policy onto the reference") {
    Rng rng(23);
    FiniteMdp mdp = random_mdp(rng, 4, 3, 0.5);
    mdp.reward *= 0.1;
    const Eigen::MatrixXd pi0 = random_policy(rng, 4, 3);
    const ViTrace tr = entkl_vi(mdp, 0.0, 1e3, pi0, 80);
    const Eigen::MatrixXd& pi = tr.pi.back();
    for (int s = 0; s < 4; ++s) {
        const double tv = 0.5 * (pi.row(s) - pi0.row(s)).cwiseAbs().sum();
        CHECK(tv <= 1e-3);
    }
}

TEST_CASE("shift equivalence: q tables agree to 1e-10, policies to 1e-12") {
    for (unsigned long seed = 0; seed < 10; ++seed) {
        Rng rng(seed * 31 + 5);
        const int n = 2 + static_cast<int>(rng.uniform_int(0, 8));
        const int m = 2 + static_cast<int>(rng.uniform_int(0, 3));
        const double gamma = rng.uniform(0.5, 0.95);
        const FiniteMdp mdp = random_mdp(rng, n, m, gamma);
        const Eigen::MatrixXd pi0 = random_policy(rng, n, m);
        const double tau = rng.uniform(0.5, 2.0);
        const double alpha = rng.uniform(0.0, 1.0);
        const ShiftCheck res = shift_equivalence_check(mdp, pi0, tau, alpha, 100);
        CHECK(res.max_q_gap <= 1e-10);
        CHECK(res.max_pi_gap <= 1e-12);
    }
}

TEST_CASE("improvement identity: randomized sweep stays below 1e-12") {
    Rng rng(29);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 9));
        const int m = 2 + static_cast<int>(rng.uniform_int(0, 3));
        Eigen::MatrixXd q(n, m);
        for (int i = 0; i < q.size(); ++i) q(i) = rng.normal() * 5.0;
        const Eigen::MatrixXd pi = random_policy(rng, n, m);
        const Eigen::MatrixXd pi0 = random_policy(rng, n, m);
        const double tau = rng.uniform(0.1, 3.0);
        const double alpha = rng.uniform(0.0, 1.0);
        worst = std::max(worst, improvement_identity_check(q, pi, pi0, tau, alpha));
    }
    CHECK(worst <= 1e-12);

    // pi equal to the reference: the KL term vanishes and both sides agree
    Rng r2(31);
    const Eigen::MatrixXd pi0 = random_policy(r2, 3, 3);
    Eigen::MatrixXd q(3, 3);
    for (int i = 0; i < q.size(); ++i) q(i) = r2.normal();
    CHECK(improvement_identity_check(q, pi0, pi0, 1.3, 0.5) <= 1e-12);
}

TEST_CASE("value iteration contracts with factor at most gamma") {
    Rng rng(37);
    const FiniteMdp mdp = random_mdp(rng, 6, 4, 0.9);
    for (bool soft : {false, true}) {
        std::vector<double> diffs;
        if (soft) {
            soft_vi(mdp, 0.7, 120, &diffs);
        } else {
            hard_vi(mdp, 120, &diffs);
        }
        REQUIRE(diffs.size() == 120);
        for (size_t k = diffs.size() - 20; k < diffs.size(); ++k) {
            if (diffs[k - 1] <= 1e-13) continue;  // below float resolution
            CHECK(diffs[k] <= mdp.gamma * diffs[k - 1] * (1.0 + 1e-9) + 1e-15);
        }
    }
}

TEST_CASE("policy sequences match between the implicit and explicit forms") {
    Rng rng(41);
    const FiniteMdp mdp = random_mdp(rng, 7, 4, 0.9);
    const Eigen::MatrixXd pi0 = random_policy(rng, 7, 4);
    const double tau = 1.2, alpha = 0.4;
    const ViTrace mu = munchausen_vi(mdp, tau, alpha, pi0, 100);
    const ViTrace ek = entkl_vi(mdp, (1.0 - alpha) * tau, alpha * tau, pi0, 100);
    REQUIRE(mu.pi.size() == 100);
    REQUIRE(ek.pi.size() == 100);
    // first policies come from zero-initialized tables: exactly uniform
    CHECK(max_abs(mu.pi.front() - uniform_policy(7, 4)) <= 1e-15);
    for (int k = 0; k < 100; ++k) {
        CHECK(max_abs(mu.pi[k] - ek.pi[k]) <= 1e-12);
        for (int s = 0; s < 7; ++s) {
            CHECK(mu.pi[k].row(s).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("reference floor: tiny pi0 entries are floored before logs") {
    Rng rng(43);
    const FiniteMdp mdp = random_mdp(rng, 3, 2, 0.8);
    Eigen::MatrixXd pi0(3, 2);
    pi0 << 1e-12, 1.0 - 1e-12, 0.5, 0.5, 1e-12, 1.0 - 1e-12;
    const ViTrace tr = munchausen_vi(mdp, 1.0, 1.0, pi0, 50);
    for (const auto& q : tr.q) CHECK(q.allFinite());
    // bonus for the floored entry is ln(1e-6), not ln(1e-12)
    const ViTrace base = munchausen_vi(mdp, 1.0, 0.0, pi0, 1);
    const double d = tr.q.front()(0, 0) - base.q.front()(0, 0);
    CHECK(d == doctest::Approx(std::log(1e-6)).epsilon(1e-12));
}
