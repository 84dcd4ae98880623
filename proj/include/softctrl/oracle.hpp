#pragma once

#include <vector>

#include <Eigen/Core>

#include "softctrl/rng.hpp"

namespace softctrl::oracle {

// Tabular MDP: reward(s, a), trans[a](s, s') row-stochastic, discount in [0, 1).
struct FiniteMdp {
    Eigen::MatrixXd reward;
    std::vector<Eigen::MatrixXd> trans;
    double gamma = 0.9;

    int num_states() const { return static_cast<int>(reward.rows()); }
    int num_actions() const { return static_cast<int>(reward.cols()); }
    void validate() const;
};

FiniteMdp random_mdp(Rng& rng, int n_states, int n_actions, double gamma);

// Strictly positive row-stochastic policy, for use as a reference.
Eigen::MatrixXd random_policy(Rng& rng, int n_states, int n_actions);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// Reference-policy probabilities are floored here before any log is taken.
inline constexpr double kPolicyFloor = 1e-6;

// Value iteration from q = 0. sup_diffs, when given, receives the
// per-iteration sup-norm change of q (one entry per iteration).
Eigen::MatrixXd hard_vi(const FiniteMdp& mdp, int iters,
                        std::vector<double>* sup_diffs = nullptr);
Eigen::MatrixXd soft_vi(const FiniteMdp& mdp, double tau, int iters,
                        std::vector<double>* sup_diffs = nullptr);

// Per-iteration record of regularized value iteration: q[k] is the table
// after backup k, pi[k] the softmax policy that backup evaluated (the
// softmax of the previous iterate, so pi[0] comes from zero-ish logits).
struct ViTrace {
    std::vector<Eigen::MatrixXd> q;
    std::vector<Eigen::MatrixXd> pi;
};

// Soft value iteration with an additive scaled log-reference bonus:
//   q_{k+1} = r + alpha*tau*ln(pi0) + gamma P [soft value of q_k at tau],
// pi_{k+1} = softmax(q_k/tau), q_0 = 0. With alpha = 0 this reduces to
// soft_vi exactly (shared value helper, zero bonus matrix).
ViTrace munchausen_vi(const FiniteMdp& mdp, double tau, double alpha,
                      const Eigen::MatrixXd& pi0, int iters);

// Explicit entropy-plus-KL regularized iteration in the shifted variables
// q' = q - alpha*tau*ln(pi0), with entropy weight w_h = (1-alpha)*tau and
// KL weight w_kl = alpha*tau; greedy step is
//   pi = softmax((q' + w_kl ln pi0) / (w_h + w_kl)).
// Starts from q' = -w_kl*ln(pi0) so the shift identity holds from
// iteration zero. w_kl = 0 reduces to soft_vi at tau = w_h exactly.
ViTrace entkl_vi(const FiniteMdp& mdp, double w_h, double w_kl,
                 const Eigen::MatrixXd& pi0, int iters);

// Max absolute gap, over states, between the two sides of the regularized
// policy-improvement identity
//   sum_a pi q + tau H(pi) = sum_a pi q' - alpha*tau KL(pi||pi0)
//                            + (1-alpha)*tau H(pi)
// with q' = q - alpha*tau*ln(pi0).
double improvement_identity_check(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi,
                                  const Eigen::MatrixXd& pi0, double tau, double alpha);

// Runs munchausen_vi and entkl_vi side by side and reports the worst
// discrepancy across all iterations after undoing the shift.
struct ShiftCheck {
    double max_q_gap = 0.0;
    double max_pi_gap = 0.0;
};
ShiftCheck shift_equivalence_check(const FiniteMdp& mdp, const Eigen::MatrixXd& pi0,
                                   double tau, double alpha, int iters);

}  // namespace softctrl::oracle
