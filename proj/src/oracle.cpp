#include "softctrl/oracle.hpp"

#include <cmath>

#include "softctrl/errors.hpp"

namespace softctrl::oracle {
namespace {

// x ln x with the 0 ln 0 = 0 convention.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

Eigen::MatrixXd floored_log(const Eigen::MatrixXd& pi0) {
    return pi0.array().max(kPolicyFloor).log().matrix();
}

// v(s) = tau * logsumexp(logits(s, .) / tau), stable for extreme tau. This
// is both the soft value of q (logits = q) and the optimum of the
// entropy+KL regularized objective (logits = q' + w_kl ln pi0).
Eigen::VectorXd soft_values(const Eigen::MatrixXd& logits, double tau) {
    Eigen::VectorXd v(logits.rows());
    for (int s = 0; s < logits.rows(); ++s) {
        const double mx = logits.row(s).maxCoeff();
        v(s) = mx + tau * std::log(((logits.row(s).array() - mx) / tau).exp().sum());
    }
    return v;
}

// Expected next-state value: out(s, a) = sum_s' trans[a](s, s') v(s').
Eigen::MatrixXd next_values(const FiniteMdp& mdp, const Eigen::VectorXd& v) {
    Eigen::MatrixXd out(mdp.num_states(), mdp.num_actions());
    for (int a = 0; a < mdp.num_actions(); ++a) out.col(a) = mdp.trans[a] * v;
    return out;
}

void check_policy_shape(const FiniteMdp& mdp, const Eigen::MatrixXd& pi0) {
    if (pi0.rows() != mdp.num_states() || pi0.cols() != mdp.num_actions()) {
        throw DimensionMismatch("oracle: reference policy shape mismatch");
    }
}

}  // namespace

void FiniteMdp::validate() const {
    const int n = num_states(), m = num_actions();
    if (n < 1 || m < 1) throw InvariantViolation("FiniteMdp: empty state or action set");
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw InvariantViolation("FiniteMdp: gamma must lie in [0, 1)");
    }
    if (static_cast<int>(trans.size()) != m) {
        throw InvariantViolation("FiniteMdp: one transition matrix per action required");
    }
    for (const auto& p : trans) {
        if (p.rows() != n || p.cols() != n) {
            throw InvariantViolation("FiniteMdp: transition matrix shape mismatch");
        }
        if ((p.array() < 0.0).any()) {
            throw InvariantViolation("FiniteMdp: negative transition probability");
        }
        for (int s = 0; s < n; ++s) {
            if (std::fabs(p.row(s).sum() - 1.0) > 1e-12) {
                throw InvariantViolation("FiniteMdp: transition row does not sum to 1");
            }
        }
    }
}

FiniteMdp random_mdp(Rng& rng, int n_states, int n_actions, double gamma) {
    FiniteMdp mdp;
    mdp.gamma = gamma;
    mdp.reward.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
    }
    for (int a = 0; a < n_actions; ++a) {
        Eigen::MatrixXd p(n_states, n_states);
        for (int s = 0; s < n_states; ++s) {
            double total = 0.0;
            for (int t = 0; t < n_states; ++t) {
                p(s, t) = rng.uniform(0.01, 1.0);
                total += p(s, t);
            }
            p.row(s) /= total;
        }
        mdp.trans.push_back(std::move(p));
    }
    mdp.validate();
    return mdp;
}

Eigen::MatrixXd random_policy(Rng& rng, int n_states, int n_actions) {
    Eigen::MatrixXd pi(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            pi(s, a) = rng.uniform(0.05, 1.0);
            total += pi(s, a);
        }
        pi.row(s) /= total;
    }
    return pi;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (int s = 0; s < logits.rows(); ++s) {
        const double mx = logits.row(s).maxCoeff();
        Eigen::ArrayXd e = (logits.row(s).array() - mx).exp().transpose();
        out.row(s) = (e / e.sum()).matrix().transpose();
    }
    return out;
}

Eigen::MatrixXd hard_vi(const FiniteMdp& mdp, int iters, std::vector<double>* sup_diffs) {
    mdp.validate();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_actions());
    if (sup_diffs) sup_diffs->clear();
    for (int k = 0; k < iters; ++k) {
        const Eigen::VectorXd v = q.rowwise().maxCoeff();
        Eigen::MatrixXd qn = mdp.reward + mdp.gamma * next_values(mdp, v);
        if (sup_diffs) sup_diffs->push_back((qn - q).cwiseAbs().maxCoeff());
        q = std::move(qn);
    }
    return q;
}

Eigen::MatrixXd soft_vi(const FiniteMdp& mdp, double tau, int iters,
                        std::vector<double>* sup_diffs) {
    mdp.validate();
    if (!(tau > 0.0)) throw InvariantViolation("soft_vi: tau must be positive");
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_actions());
    if (sup_diffs) sup_diffs->clear();
    for (int k = 0; k < iters; ++k) {
        Eigen::MatrixXd qn = mdp.reward + mdp.gamma * next_values(mdp, soft_values(q, tau));
        if (sup_diffs) sup_diffs->push_back((qn - q).cwiseAbs().maxCoeff());
        q = std::move(qn);
    }
    return q;
}

ViTrace munchausen_vi(const FiniteMdp& mdp, double tau, double alpha,
                      const Eigen::MatrixXd& pi0, int iters) {
    mdp.validate();
    check_policy_shape(mdp, pi0);
    if (!(tau > 0.0)) throw InvariantViolation("munchausen_vi: tau must be positive");
    if (alpha < 0.0 || alpha > 1.0) {
        throw InvariantViolation("munchausen_vi: alpha must lie in [0, 1]");
    }
    const Eigen::MatrixXd bonus = alpha * tau * floored_log(pi0);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.num_states(), mdp.num_actions());
    ViTrace trace;
    for (int k = 0; k < iters; ++k) {
        trace.pi.push_back(softmax_rows(q / tau));
        q = mdp.reward + bonus + mdp.gamma * next_values(mdp, soft_values(q, tau));
        trace.q.push_back(q);
    }
    return trace;
}

ViTrace entkl_vi(const FiniteMdp& mdp, double w_h, double w_kl,
                 const Eigen::MatrixXd& pi0, int iters) {
    mdp.validate();
    check_policy_shape(mdp, pi0);
    const double tau = w_h + w_kl;
    if (w_h < 0.0 || w_kl < 0.0) {
        throw InvariantViolation("entkl_vi: weights must be non-negative");
    }
    if (!(tau > 0.0)) throw InvariantViolation("entkl_vi: w_h + w_kl must be positive");
    const Eigen::MatrixXd kl_shift = w_kl * floored_log(pi0);
    Eigen::MatrixXd qp = -kl_shift;
    ViTrace trace;
    for (int k = 0; k < iters; ++k) {
        const Eigen::MatrixXd logits = qp + kl_shift;
        trace.pi.push_back(softmax_rows(logits / tau));
        qp = mdp.reward + mdp.gamma * next_values(mdp, soft_values(logits, tau));
        trace.q.push_back(qp);
    }
    return trace;
}

double improvement_identity_check(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi,
                                  const Eigen::MatrixXd& pi0, double tau, double alpha) {
    const Eigen::MatrixXd log_pi0 = floored_log(pi0);
    const Eigen::MatrixXd qprime = q - alpha * tau * log_pi0;
    double worst = 0.0;
    for (int s = 0; s < pi.rows(); ++s) {
        double ent = 0.0, kl = 0.0;
        for (int a = 0; a < pi.cols(); ++a) {
            ent -= xlogx(pi(s, a));
            kl += xlogx(pi(s, a)) - pi(s, a) * log_pi0(s, a);
        }
        const double lhs = pi.row(s).dot(q.row(s)) + tau * ent;
        const double rhs =
            pi.row(s).dot(qprime.row(s)) - alpha * tau * kl + (1.0 - alpha) * tau * ent;
        worst = std::max(worst, std::fabs(lhs - rhs));
    }
    return worst;
}

ShiftCheck shift_equivalence_check(const FiniteMdp& mdp, const Eigen::MatrixXd& pi0,
                                   double tau, double alpha, int iters) {
    const ViTrace mvi = munchausen_vi(mdp, tau, alpha, pi0, iters);
    const ViTrace evi = entkl_vi(mdp, (1.0 - alpha) * tau, alpha * tau, pi0, iters);
    const Eigen::MatrixXd shift = alpha * tau * floored_log(pi0);
    ShiftCheck out;
    for (int k = 0; k < iters; ++k) {
        const double qg = (mvi.q[k] - (evi.q[k] + shift)).cwiseAbs().maxCoeff();
        const double pg = (mvi.pi[k] - evi.pi[k]).cwiseAbs().maxCoeff();
        out.max_q_gap = std::max(out.max_q_gap, qg);
        out.max_pi_gap = std::max(out.max_pi_gap, pg);
    }
    return out;
}

}  // namespace softctrl::oracle
