#include "softctrl/agents.hpp"

#include <cmath>
#include <deque>
#include <unordered_set>
#include <utility>

#include "softctrl/errors.hpp"
#include "softctrl/io_util.hpp"
#include "softctrl/kinematics.hpp"

namespace softctrl::agents {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw InvariantViolation("ReplayBuffer: zero capacity");
    data_.reserve(capacity_);
}

void ReplayBuffer::insert(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= data_.size()) throw InvariantViolation("ReplayBuffer: index out of range");
    if (data_.size() < capacity_) return data_[i];
    return data_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(Rng& rng, int batch) const {
    const std::size_t n = data_.size();
    if (batch <= 0 || static_cast<std::size_t>(batch) > n) {
        throw InvariantViolation("ReplayBuffer: batch size exceeds stored transitions");
    }
    // Floyd's algorithm: k distinct indices, each draw one bounded integer.
    std::vector<std::size_t> out;
    out.reserve(batch);
    std::unordered_set<std::size_t> seen;
    for (std::size_t j = n - batch; j < n; ++j) {
        const std::size_t t = rng.uniform_int(0, static_cast<long>(j));
        if (seen.count(t)) {
            seen.insert(j);
            out.push_back(j);
        } else {
            seen.insert(t);
            out.push_back(t);
        }
    }
    return out;
}

ReplayBuffer::Batch ReplayBuffer::gather(const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw InvariantViolation("ReplayBuffer: empty index set");
    const int b = static_cast<int>(idx.size());
    const auto& first = at(idx[0]);
    Batch out;
    out.obs.resize(first.obs.size(), b);
    out.next_obs.resize(first.next_obs.size(), b);
    out.actions.resize(first.action.size(), b);
    out.rewards.resize(b);
    out.done.resize(b);
    out.ref_logprob.resize(b);
    out.policy_logprob.resize(b);
    for (int i = 0; i < b; ++i) {
        const Transition& t = at(idx[i]);
        out.obs.col(i) = t.obs;
        out.next_obs.col(i) = t.next_obs;
        out.actions.col(i) = t.action;
        out.rewards(i) = t.reward;
        out.done(i) = t.done ? 1.0 : 0.0;
        out.ref_logprob(i) = t.ref_logprob;
        out.policy_logprob(i) = t.policy_logprob;
    }
    return out;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::sac: return "sac";
        case Variant::exkl: return "exkl";
        case Variant::imkl: return "imkl";
    }
    throw InvariantViolation("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "sac") return Variant::sac;
    if (name == "exkl") return Variant::exkl;
    if (name == "imkl") return Variant::imkl;
    throw ConfigError("unknown variant '" + name + "' (expected sac, exkl or imkl)");
}

void SacConfig::set_weights(double w_h, double w_kl) {
    if (w_h < 0.0 || w_kl < 0.0 || w_h + w_kl <= 0.0) {
        throw ConfigError("SacConfig: weights must be non-negative with positive sum");
    }
    tau = w_h + w_kl;
    alpha = w_kl / tau;
}

double SacConfig::lr_at(long step, long total) const {
    if (total <= 0) throw ConfigError("SacConfig: total steps must be positive");
    if (step <= 0) return lr_start;
    if (step >= total) return lr_end;
    const double f = static_cast<double>(step) / static_cast<double>(total);
    return lr_start + f * (lr_end - lr_start);
}

void SacConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("SacConfig: gamma outside [0, 1)");
    if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("SacConfig: polyak outside [0, 1]");
    if (batch <= 0) throw ConfigError("SacConfig: batch must be positive");
    if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw ConfigError("SacConfig: lr must be positive");
    if (!(tau > 0.0)) throw ConfigError("SacConfig: tau must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("SacConfig: alpha outside [0, 1]");
    if (exkl_kl_coef < 0.0) throw ConfigError("SacConfig: exkl_kl_coef must be non-negative");
    if (!(init_tau_eff > 0.0)) throw ConfigError("SacConfig: init_tau_eff must be positive");
    if (share_encoders && !freeze_encoders) {
        throw ConfigError("SacConfig: share_encoders requires freeze_encoders");
    }
}

void CriticPair::init_targets() {
    q1_target = q1;
    q2_target = q2;
}

void CriticPair::polyak_update(double rho) {
    auto blend = [rho](nn::Mlp& target, const nn::Mlp& online) {
        target.params() =
            (rho * target.params().array() + (1.0 - rho) * online.params().array()).matrix();
    };
    blend(q1_target.enc, q1.enc);
    blend(q1_target.head, q1.head);
    blend(q2_target.enc, q2.enc);
    blend(q2_target.head, q2.head);
}

Eigen::VectorXd critic_target(const ReplayBuffer::Batch& batch, const SacConfig& cfg,
                              const CriticPair& critics, const nn::ActorNet& actor,
                              const Eigen::MatrixXd& next_noise, double tau_eff) {
    const nn::PolicyRollout next = actor.sample(batch.next_obs, next_noise);
    const Eigen::VectorXd q1v = critics.q1_target.forward(batch.next_obs, next.a);
    const Eigen::VectorXd q2v = critics.q2_target.forward(batch.next_obs, next.a);
    const Eigen::ArrayXd qmin = q1v.cwiseMin(q2v).array();

    Eigen::ArrayXd base = batch.rewards.array();
    double t = tau_eff;
    if (cfg.variant == Variant::exkl) {
        base -= cfg.exkl_kl_coef * (batch.policy_logprob - batch.ref_logprob).array();
    } else if (cfg.variant == Variant::imkl) {
        base += (cfg.alpha * cfg.tau) * batch.ref_logprob.array();
        t = cfg.tau;
    }
    const Eigen::ArrayXd cont = (1.0 - batch.done.array()) * (qmin - t * next.logp.array());
    return (base + cfg.gamma * cont).matrix();
}

double critic_loss_and_grads(const nn::QNet& q, const Eigen::MatrixXd& obs,
                             const Eigen::MatrixXd& actions, const Eigen::VectorXd& y,
                             Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad) {
    const int b = static_cast<int>(obs.cols());
    nn::QNet::Cache cache;
    const Eigen::VectorXd qv = q.forward(obs, actions, &cache);
    const Eigen::VectorXd diff = qv - y;
    const Eigen::VectorXd dq = (2.0 / b) * diff;
    q.backward(cache, dq, enc_grad, head_grad);
    return diff.squaredNorm() / b;
}

double actor_loss_and_grads(const nn::ActorNet& actor, const nn::QNet& q1,
                            const nn::QNet& q2, const Eigen::MatrixXd& obs,
                            const Eigen::MatrixXd& noise, double tau,
                            Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad,
                            double* mean_logp) {
    const int b = static_cast<int>(obs.cols());
    const nn::PolicyRollout r = actor.sample(obs, noise);
    nn::QNet::Cache c1, c2;
    const Eigen::VectorXd q1v = q1.forward(obs, r.a, &c1);
    const Eigen::VectorXd q2v = q2.forward(obs, r.a, &c2);
    const Eigen::ArrayXd take1 = (q1v.array() <= q2v.array()).cast<double>();
    const Eigen::ArrayXd qmin = q1v.array().min(q2v.array());

    const double loss = -(qmin - tau * r.logp.array()).mean();
    const Eigen::VectorXd dq1 = (-take1 / b).matrix();
    const Eigen::VectorXd dq2 = (-(1.0 - take1) / b).matrix();
    // critics contribute only through their action inputs here
    const Eigen::MatrixXd da1 = q1.backward(c1, dq1, nullptr, nullptr, /*param_grads=*/false);
    const Eigen::MatrixXd da2 = q2.backward(c2, dq2, nullptr, nullptr, /*param_grads=*/false);
    const Eigen::VectorXd dlogp = Eigen::VectorXd::Constant(b, tau / b);
    actor.backward(r, da1 + da2, dlogp, enc_grad, head_grad);
    if (mean_logp) *mean_logp = r.logp.mean();
    return loss;
}

double temperature_gradient(double mean_logp, double target_entropy) {
    return -(mean_logp + target_entropy);
}

void init_actor_from_bc(nn::ActorNet& actor, const nn::BcNet& bc) {
    if (actor.enc.widths() != bc.enc.widths()) {
        throw DimensionMismatch("init_actor_from_bc: encoder widths differ");
    }
    actor.enc.params() = bc.enc.params();

    const int layers = actor.head.num_layers();
    if (bc.head.num_layers() != layers) {
        throw DimensionMismatch("init_actor_from_bc: head depths differ");
    }
    for (int l = 0; l < layers - 1; ++l) {
        if (bc.head.weight(l).rows() != actor.head.weight(l).rows() ||
            bc.head.weight(l).cols() != actor.head.weight(l).cols()) {
            throw DimensionMismatch("init_actor_from_bc: hidden head layer shape differs");
        }
        actor.head.weight(l) = bc.head.weight(l);
        actor.head.bias(l) = bc.head.bias(l);
    }
    const int last = layers - 1;
    const int A = actor.act_dim();
    if (bc.head.out_dim() != A || actor.head.out_dim() != 2 * A) {
        throw DimensionMismatch("init_actor_from_bc: output layer shape differs");
    }
    auto w = actor.head.weight(last);
    auto bvec = actor.head.bias(last);
    w.setZero();
    bvec.setZero();
    for (int i = 0; i < A; ++i) {
        // a_max*tanh(mu/a_max) tracks the BC mean to first order
        w.row(i) = bc.head.weight(last).row(i) / actor.a_max()(i);
        bvec(i) = bc.head.bias(last)(i) / actor.a_max()(i);
        bvec(A + i) = nn::kLogSigma0;
    }
}

void init_encoder_from_bc(nn::QNet& q, const nn::BcNet& bc) {
    if (q.enc.widths() != bc.enc.widths()) {
        throw DimensionMismatch("init_encoder_from_bc: encoder widths differ");
    }
    q.enc.params() = bc.enc.params();
}

SacAgent::SacAgent(const SacConfig& cfg, int obs_dim, Eigen::VectorXd a_max, Rng& init_rng)
    : cfg_(cfg), actor_(obs_dim, std::move(a_max)) {
    cfg_.validate();
    const int A = actor_.act_dim();
    critics_.q1 = nn::QNet(obs_dim, A);
    critics_.q2 = nn::QNet(obs_dim, A);
    actor_.init(init_rng);
    critics_.q1.init(init_rng);
    critics_.q2.init(init_rng);
    critics_.init_targets();
    opt_actor_enc_ = nn::Adam(actor_.enc.param_count());
    opt_actor_head_ = nn::Adam(actor_.head.param_count());
    opt_q1_enc_ = nn::Adam(critics_.q1.enc.param_count());
    opt_q1_head_ = nn::Adam(critics_.q1.head.param_count());
    opt_q2_enc_ = nn::Adam(critics_.q2.enc.param_count());
    opt_q2_head_ = nn::Adam(critics_.q2.head.param_count());
    opt_log_tau_ = nn::Adam(1);
    log_tau_ = std::log(cfg_.init_tau_eff);
}

void SacAgent::init_from_bc(const nn::BcNet& bc) {
    init_actor_from_bc(actor_, bc);
    init_encoder_from_bc(critics_.q1, bc);
    init_encoder_from_bc(critics_.q2, bc);
    critics_.init_targets();
}

double SacAgent::tau_eff() const {
    return cfg_.variant == Variant::imkl ? cfg_.tau : std::exp(log_tau_);
}

UpdateStats SacAgent::update(const ReplayBuffer::Batch& batch,
                             const Eigen::MatrixXd& next_noise,
                             const Eigen::MatrixXd& actor_noise, double lr) {
    UpdateStats stats;
    const double t = tau_eff();
    const Eigen::VectorXd y = critic_target(batch, cfg_, critics_, actor_, next_noise, t);

    auto critic_step = [&](nn::QNet& q, nn::Adam& opt_enc, nn::Adam& opt_head) {
        Eigen::VectorXd ge = Eigen::VectorXd::Zero(q.enc.param_count());
        Eigen::VectorXd gh = Eigen::VectorXd::Zero(q.head.param_count());
        const double loss = critic_loss_and_grads(q, batch.obs, batch.actions, y, &ge, &gh);
        if (!cfg_.freeze_encoders) opt_enc.step(q.enc.params(), ge, lr);
        opt_head.step(q.head.params(), gh, lr);
        return loss;
    };
    stats.critic_loss = critic_step(critics_.q1, opt_q1_enc_, opt_q1_head_) +
                        critic_step(critics_.q2, opt_q2_enc_, opt_q2_head_);

    Eigen::VectorXd ge = Eigen::VectorXd::Zero(actor_.enc.param_count());
    Eigen::VectorXd gh = Eigen::VectorXd::Zero(actor_.head.param_count());
    stats.actor_loss = actor_loss_and_grads(actor_, critics_.q1, critics_.q2, batch.obs,
                                            actor_noise, t, &ge, &gh, &stats.mean_logp);
    if (!cfg_.freeze_encoders) opt_actor_enc_.step(actor_.enc.params(), ge, lr);
    opt_actor_head_.step(actor_.head.params(), gh, lr);

    if (cfg_.auto_entropy && cfg_.variant != Variant::imkl) {
        Eigen::VectorXd v(1), g(1);
        v << log_tau_;
        g << temperature_gradient(stats.mean_logp, cfg_.target_entropy);
        opt_log_tau_.step(v, g, lr);
        log_tau_ = v(0);
    }
    critics_.polyak_update(cfg_.polyak);
    stats.tau_eff = tau_eff();
    return stats;
}

kin::Action recovery_action(const kin::EgoState& state, const kin::Pose& target) {
    kin::LocalPose loc = kin::to_local(state.pose, target);
    loc.theta = std::atan2(loc.y, loc.x);  // |theta| >= pi/2 iff target not ahead
    return kin::inverse_action(state, loc);
}

BcDataset build_bc_dataset(const std::vector<scene::Scenario>& scenarios,
                           const BcConfig& cfg, Rng& rng) {
    if (scenarios.empty()) throw InvariantViolation("build_bc_dataset: no scenarios");
    const int obs_dim = cfg.env.obs.dim();
    std::vector<Eigen::VectorXd> obs_cols;
    std::vector<Eigen::Vector2d> labels;
    for (const auto& sc : scenarios) {
        const std::vector<kin::Action> expert = scene::expert_actions(sc);
        for (int t = 0; t + 1 < sc.num_frames; ++t) {
            kin::EgoState state = scene::log_state_at(sc, t);
            kin::Action label = expert[t];
            const bool perturb = rng.uniform() < cfg.perturb_prob;
            if (perturb) {
                for (int attempt = 0; attempt < 64; ++attempt) {
                    const double n_lat = rng.normal() * cfg.lateral_sigma;
                    const double n_head = rng.normal() * cfg.heading_sigma;
                    kin::EgoState cand = scene::log_state_at(sc, t);
                    cand.pose.x -= n_lat * std::sin(cand.pose.theta);
                    cand.pose.y += n_lat * std::cos(cand.pose.theta);
                    cand.pose.theta = kin::wrap_angle(cand.pose.theta + n_head);
                    try {
                        label = recovery_action(cand, sc.ego_log[t + 1]);
                        state = cand;
                        break;
                    } catch (const DegenerateTarget&) {
                        // resample the perturbation
                    }
                }
            }
            std::deque<kin::EgoState> hist;
            for (int f = std::max(0, t - cfg.env.obs.H + 1); f <= t; ++f) {
                hist.push_back(scene::log_state_at(sc, f));
            }
            hist.back() = state;
            obs_cols.push_back(sim::build_observation(sc, cfg.env.obs, t, hist));
            labels.push_back(Eigen::Vector2d(label.steer, label.accel));
        }
    }
    BcDataset ds;
    const int n = static_cast<int>(obs_cols.size());
    ds.obs.resize(obs_dim, n);
    ds.labels.resize(2, n);
    for (int i = 0; i < n; ++i) {
        ds.obs.col(i) = obs_cols[i];
        ds.labels.col(i) = labels[i];
    }
    return ds;
}

namespace {

// Mean per-pair Gaussian NLL at fixed sigma0.
double bc_nll(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& labels) {
    const double inv_var = std::exp(-2.0 * nn::kLogSigma0);
    const Eigen::ArrayXXd se = (mu - labels).array().square();
    const double n = static_cast<double>(labels.cols());
    return (mu.rows() * (kHalfLog2Pi + nn::kLogSigma0) +
            0.5 * inv_var * se.sum() / n);
}

}  // namespace

BcResult train_bc(const std::vector<scene::Scenario>& scenarios, const BcConfig& cfg,
                  unsigned long seed) {
    Rng rng(seed);
    const BcDataset ds = build_bc_dataset(scenarios, cfg, rng);
    const int n = static_cast<int>(ds.obs.cols());
    const int obs_dim = static_cast<int>(ds.obs.rows());

    nn::BcNet net(obs_dim, 2);
    net.init(rng);
    nn::Adam opt_enc(net.enc.param_count()), opt_head(net.head.param_count());
    const double inv_var = std::exp(-2.0 * nn::kLogSigma0);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    BcResult out;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr =
            cfg.epochs > 1
                ? cfg.lr + (cfg.lr_end - cfg.lr) * epoch / double(cfg.epochs - 1)
                : cfg.lr;
        if (cfg.shuffle) {
            for (int i = n - 1; i > 0; --i) {  // Fisher-Yates
                const int j = static_cast<int>(rng.uniform_int(0, i));
                std::swap(order[i], order[j]);
            }
        }
        for (int start = 0; start < n; start += cfg.batch) {
            const int b = std::min(cfg.batch, n - start);
            Eigen::MatrixXd xb(obs_dim, b), yb(2, b);
            for (int i = 0; i < b; ++i) {
                xb.col(i) = ds.obs.col(order[start + i]);
                yb.col(i) = ds.labels.col(order[start + i]);
            }
            nn::MlpCache ec, hc;
            const Eigen::MatrixXd mu = net.forward(xb, &ec, &hc);
            const Eigen::MatrixXd dmu = (inv_var / b) * (mu - yb);
            Eigen::VectorXd ge = Eigen::VectorXd::Zero(net.enc.param_count());
            Eigen::VectorXd gh = Eigen::VectorXd::Zero(net.head.param_count());
            net.backward(ec, hc, dmu, &ge, &gh);
            opt_enc.step(net.enc.params(), ge, lr);
            opt_head.step(net.head.params(), gh, lr);
        }
        out.epoch_losses.push_back(bc_nll(net.forward(ds.obs), ds.labels));
    }
    out.policy.net = std::move(net);
    return out;
}

std::string rl_log_csv(const std::vector<RlEvalRow>& rows) {
    std::string out =
        "step,mean_return,failures,collisions_f,collisions_s,collisions_r,"
        "d2r_events,discomfort_rate,lr,tau_eff\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step) + ',' + fmt_double(r.mean_return) + ',' +
               std::to_string(r.failures) + ',' + std::to_string(r.collisions_f) + ',' +
               std::to_string(r.collisions_s) + ',' + std::to_string(r.collisions_r) + ',' +
               std::to_string(r.d2r_events) + ',' + fmt_double(r.discomfort_rate) + ',' +
               fmt_double(r.lr) + ',' + fmt_double(r.tau_eff) + '\n';
    }
    return out;
}

}  // namespace softctrl::agents
