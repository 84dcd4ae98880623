#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "softctrl/rng.hpp"

namespace softctrl::nn {

// Activations of one forward pass, kept for the matching backward call.
// acts[0] is the input batch, acts[l] the output of layer l.
struct MlpCache {
    std::vector<Eigen::MatrixXd> acts;
};

// Dense stack: tanh hidden layers, linear output (optionally tanh-squashed
// for use as a bounded feature encoder). Parameters live in one flat vector
// so optimizers, polyak averaging and checkpoints can treat the net as a
// single array; weight()/bias() expose per-layer views into it.
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::vector<int> widths, bool tanh_output = false);

    // Glorot-uniform weights, zero biases; layer order fixes the rng stream.
    void init(Rng& rng);

    int in_dim() const { return widths_.front(); }
    int out_dim() const { return widths_.back(); }
    int num_layers() const { return static_cast<int>(widths_.size()) - 1; }
    int param_count() const { return static_cast<int>(params_.size()); }
    const std::vector<int>& widths() const { return widths_; }
    bool tanh_output() const { return tanh_output_; }

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<Eigen::VectorXd> bias(int layer);
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

    // Columns are samples. cache may be null for inference-only calls.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache* cache = nullptr) const;
    Eigen::VectorXd forward1(const Eigen::VectorXd& x) const;

    // Returns input gradients; accumulates parameter gradients into
    // param_grad (sized param_count) unless param_grads is false.
    Eigen::MatrixXd backward(const MlpCache& cache, const Eigen::MatrixXd& dout,
                             Eigen::VectorXd* param_grad, bool param_grads = true) const;

  private:
    std::vector<int> widths_;
    bool tanh_output_ = false;
    Eigen::VectorXd params_;
    std::vector<int> w_off_, b_off_;
};

class Adam {
  public:
    Adam() = default;
    explicit Adam(int n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

  private:
    Eigen::VectorXd m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

inline constexpr double kLogSigMin = -5.0;
inline constexpr double kLogSigMax = 2.0;
inline constexpr double kLogSigma0 = -1.5;   // fixed reference-policy deviation
inline constexpr double kRefLogFloor = -10.0;

// Everything produced by one reparameterized policy sample, cached for the
// exact backward pass.
struct PolicyRollout {
    MlpCache enc_cache, head_cache;
    Eigen::MatrixXd mu, logsig_raw, logsig, sig, eps, u, t, a;  // A x B
    Eigen::VectorXd logp;                                       // B
};

// Squashed diagonal-Gaussian actor: bounded feature encoder plus a head
// emitting per-action mean and log-std (log-std clamped to [-5, 2]); emitted
// actions are a_max * tanh(u) with the exact change-of-variables density.
class ActorNet {
  public:
    ActorNet() = default;
    ActorNet(int obs_dim, Eigen::VectorXd a_max,
             std::vector<int> enc_hidden = {128, 128},
             std::vector<int> head_hidden = {64, 64});

    void init(Rng& rng);
    int act_dim() const { return static_cast<int>(a_max_.size()); }
    const Eigen::VectorXd& a_max() const { return a_max_; }

    // noise is standard normal, act_dim x batch.
    PolicyRollout sample(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise) const;

    // Deterministic action a_max * tanh(mu); used for evaluation rollouts.
    Eigen::VectorXd mean_action(const Eigen::VectorXd& obs) const;

    // Chain dL/da (A x B) and dL/dlogp (B) into parameter gradients.
    void backward(const PolicyRollout& r, const Eigen::MatrixXd& da,
                  const Eigen::VectorXd& dlogp, Eigen::VectorXd* enc_grad,
                  Eigen::VectorXd* head_grad) const;

    Mlp enc, head;

  private:
    Eigen::VectorXd a_max_;
};

// Twin-critic building block: bounded feature encoder, action concatenated at
// the head input so encoders stay interchangeable with the actor/BC ones.
class QNet {
  public:
    struct Cache {
        MlpCache enc_cache, head_cache;
        Eigen::MatrixXd hin;
    };

    QNet() = default;
    QNet(int obs_dim, int act_dim, std::vector<int> enc_hidden = {128, 128},
         std::vector<int> head_hidden = {64, 64});

    void init(Rng& rng);

    Eigen::VectorXd forward(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                            Cache* cache = nullptr) const;

    // Returns dL/daction (A x B); parameter gradients optional (the actor
    // update needs only the action gradients).
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::VectorXd& dq,
                             Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad,
                             bool param_grads = true) const;

    Mlp enc, head;
    int act_dim = 0;
};

// Behavioral-cloning mean network over raw (unsquashed) actions.
class BcNet {
  public:
    BcNet() = default;
    BcNet(int obs_dim, int act_dim, std::vector<int> enc_hidden = {128, 128},
          std::vector<int> head_hidden = {64, 64});

    void init(Rng& rng);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& obs, MlpCache* enc_cache = nullptr,
                            MlpCache* head_cache = nullptr) const;
    void backward(const MlpCache& enc_cache, const MlpCache& head_cache,
                  const Eigen::MatrixXd& dmu, Eigen::VectorXd* enc_grad,
                  Eigen::VectorXd* head_grad) const;

    Mlp enc, head;
};

// Frozen BC policy as an unsquashed diagonal Gaussian with fixed sigma0 =
// exp(-1.5); log densities are floored at -10 so downstream log-policy reward
// terms stay bounded.
struct ReferencePolicy {
    BcNet net;

    Eigen::VectorXd logprob(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions,
                            bool clamp = true) const;
    double logprob1(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const;
};

// Flat named-tensor container; load(save(x)) is bit-exact.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::map<std::string, std::vector<double>> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    void put_mlp(const std::string& prefix, const Mlp& net);
    Mlp get_mlp(const std::string& prefix) const;
};

// FNV-1a 64-bit content hash, hex-encoded; stamped into checkpoint metadata.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace softctrl::nn
