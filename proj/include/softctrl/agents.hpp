#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "softctrl/neuralnet.hpp"
#include "softctrl/rng.hpp"
#include "softctrl/scenario.hpp"
#include "softctrl/simulator.hpp"

namespace softctrl::agents {

struct Transition {
    Eigen::VectorXd obs, next_obs;
    Eigen::VectorXd action;
    double reward = 0.0;
    bool done = false;
    double ref_logprob = 0.0;     // ln pi0(a|s), clamped, computed at insertion
    double policy_logprob = 0.0;  // ln pi(a|s) at insertion; consumed by exkl
};

// Ring buffer with FIFO eviction. Index 0 is the oldest stored transition.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity = 100000);

    void insert(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const;

    // Uniform without replacement within a batch (Floyd's algorithm).
    std::vector<std::size_t> sample_indices(Rng& rng, int batch) const;

    struct Batch {
        Eigen::MatrixXd obs, next_obs, actions;  // dim x B
        Eigen::VectorXd rewards, done, ref_logprob, policy_logprob;
    };
    Batch gather(const std::vector<std::size_t>& idx) const;

  private:
    std::vector<Transition> data_;
    std::size_t capacity_;
    std::size_t head_ = 0;  // next slot to overwrite once full
};

enum class Variant { sac, exkl, imkl };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct SacConfig {
    double gamma = 0.8;
    double polyak = 0.995;
    int batch = 256;
    double lr_start = 3e-5;
    double lr_end = 3e-6;
    Variant variant = Variant::imkl;
    double tau = 1.2;    // entropy temperature (fixed for imkl)
    double alpha = 0.4;  // KL fraction of the temperature
    double exkl_kl_coef = 0.3;
    bool auto_entropy = true;  // honored by sac/exkl; imkl keeps tau fixed
    double target_entropy = -2.0;
    double init_tau_eff = 0.2;
    bool freeze_encoders = false;
    bool share_encoders = false;  // requires freeze_encoders

    // tau = w_h + w_kl, alpha = w_kl / tau.
    void set_weights(double w_h, double w_kl);
    double w_h() const { return (1.0 - alpha) * tau; }
    double w_kl() const { return alpha * tau; }

    // Linear schedule with exact endpoints: lr(0) = lr_start, lr(total) = lr_end.
    double lr_at(long step, long total) const;

    void validate() const;
};

struct CriticPair {
    nn::QNet q1, q2, q1_target, q2_target;

    void init_targets();  // copy online parameters into the targets
    void polyak_update(double rho);
};

// Regression targets for one sampled batch. next_noise drives the fresh
// actor sample at s'; tau_eff is the live temperature for sac/exkl (imkl
// uses cfg.tau). With alpha = 0 the imkl target equals the sac target
// bit-for-bit on identical inputs and noise.
Eigen::VectorXd critic_target(const ReplayBuffer::Batch& batch, const SacConfig& cfg,
                              const CriticPair& critics, const nn::ActorNet& actor,
                              const Eigen::MatrixXd& next_noise, double tau_eff);

// Mean squared Bellman error for one critic: L = mean((q(s,a) - y)^2).
// Accumulates parameter gradients; returns the loss.
double critic_loss_and_grads(const nn::QNet& q, const Eigen::MatrixXd& obs,
                             const Eigen::MatrixXd& actions, const Eigen::VectorXd& y,
                             Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad);

// Reparameterized actor objective L = -mean(min(q1,q2)(s, a~) - tau log pi).
// Critic parameters are treated as constants (only their action gradients
// flow). Returns the loss; mean_logp receives E[log pi] when non-null.
double actor_loss_and_grads(const nn::ActorNet& actor, const nn::QNet& q1,
                            const nn::QNet& q2, const Eigen::MatrixXd& obs,
                            const Eigen::MatrixXd& noise, double tau,
                            Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad,
                            double* mean_logp = nullptr);

// Dual ascent gradient for log tau: positive when measured entropy exceeds
// the target (descent then cools the temperature).
double temperature_gradient(double mean_logp, double target_entropy);

// Copies the BC encoder into the actor/critic encoders and warm-starts the
// actor head: hidden layers copied, mean rows scaled by 1/a_max so the
// squashed output tracks the BC mean to first order, log-std rows set to
// zero weights with bias -1.5.
void init_actor_from_bc(nn::ActorNet& actor, const nn::BcNet& bc);
void init_encoder_from_bc(nn::QNet& q, const nn::BcNet& bc);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_logp = 0.0;
    double tau_eff = 0.0;
};

// One SAC-family learner: twin critics with polyak targets, squashed
// Gaussian actor, optional auto-tuned temperature.
class SacAgent {
  public:
    SacAgent(const SacConfig& cfg, int obs_dim, Eigen::VectorXd a_max, Rng& init_rng);

    void init_from_bc(const nn::BcNet& bc);

    // One gradient step: critic regression, actor ascent, temperature dual
    // (sac/exkl with auto_entropy), polyak averaging. Noise matrices are
    // act_dim x batch, drawn by the caller.
    UpdateStats update(const ReplayBuffer::Batch& batch, const Eigen::MatrixXd& next_noise,
                       const Eigen::MatrixXd& actor_noise, double lr);

    double tau_eff() const;
    const SacConfig& config() const { return cfg_; }
    const nn::ActorNet& actor() const { return actor_; }
    nn::ActorNet& actor() { return actor_; }
    const CriticPair& critics() const { return critics_; }
    CriticPair& critics() { return critics_; }

  private:
    SacConfig cfg_;
    nn::ActorNet actor_;
    CriticPair critics_;
    nn::Adam opt_actor_enc_, opt_actor_head_;
    nn::Adam opt_q1_enc_, opt_q1_head_, opt_q2_enc_, opt_q2_head_;
    nn::Adam opt_log_tau_;
    double log_tau_;
};

// Recovery label for a perturbed ego: aim at the target's position with the
// heading replaced by the displacement bearing, so a lateral offset steers
// back toward the reference line. On a kinematically consistent log the
// bearing equals the logged heading and this reduces to the expert action.
// Throws DegenerateTarget when the target is not strictly ahead.
kin::Action recovery_action(const kin::EgoState& state, const kin::Pose& target);

struct BcConfig {
    int epochs = 30;
    int batch = 256;
    double lr = 1e-3;
    double lr_end = 1e-4;  // linear decay across epochs
    double perturb_prob = 0.5;
    double lateral_sigma = 0.5;  // meters
    double heading_sigma = 0.1;  // radians
    bool shuffle = true;         // epoch-wise reshuffle; off for loss-curve checks
    sim::EnvConfig env;
};

struct BcDataset {
    Eigen::MatrixXd obs;     // obs_dim x N
    Eigen::MatrixXd labels;  // act_dim x N (raw actions, unclamped)
};

// Observation/label pairs over every scenario frame; with probability
// perturb_prob the ego pose is perturbed laterally and in heading and the
// label becomes the recovery action toward the next log pose. Degenerate
// recovery targets resample the perturbation.
BcDataset build_bc_dataset(const std::vector<scene::Scenario>& scenarios,
                           const BcConfig& cfg, Rng& rng);

struct BcResult {
    nn::ReferencePolicy policy;
    std::vector<double> epoch_losses;  // mean per-pair NLL after each epoch
};

// Gaussian NLL regression with the fixed sigma0 of the reference policy.
BcResult train_bc(const std::vector<scene::Scenario>& scenarios, const BcConfig& cfg,
                  unsigned long seed);

struct RlConfig {
    SacConfig sac;
    long total_steps = 50000;
    long eval_interval = 1000;
    long warmup_steps = 1000;  // env steps before gradient updates start
    int update_every = 3;      // env steps per gradient step
    std::size_t buffer_capacity = 100000;
    sim::EnvConfig env;
};

struct RlEvalRow {
    long step = 0;
    double mean_return = 0.0;
    int failures = 0;
    int collisions_f = 0, collisions_s = 0, collisions_r = 0;
    int d2r_events = 0;
    double discomfort_rate = 0.0;
    double lr = 0.0;
    double tau_eff = 0.0;
};

std::string rl_log_csv(const std::vector<RlEvalRow>& rows);

struct TrainRlResult {
    nn::ActorNet final_actor;
    nn::ActorNet best_actor;  // lowest failures, ties by lower discomfort
    long best_step = 0;
    int best_failures = 0;
    double best_discomfort = 0.0;
    std::vector<RlEvalRow> log_rows;
};

// Closed-loop fine-tuning from the BC reference: episodes over random
// scenario/start-frame, insertion-time reference and policy log-densities,
// per-interval evaluation rows on the eval scene list.
TrainRlResult train_rl(const std::vector<scene::Scenario>& train_scenes,
                       const std::vector<scene::Scenario>& eval_scenes,
                       const RlConfig& cfg, const nn::ReferencePolicy& ref,
                       unsigned long seed);

}  // namespace softctrl::agents
