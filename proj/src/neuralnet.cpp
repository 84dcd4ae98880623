#include "softctrl/neuralnet.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "softctrl/errors.hpp"

namespace softctrl::nn {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

// tanh in exp form; vectorizes where std::tanh does not, and saturates
// cleanly to +-1 for large |x|.
inline Eigen::ArrayXXd tanh_arr(const Eigen::ArrayXXd& x) {
    return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

// log(1 - tanh(u)^2) = 2*(ln 2 - |u| - ln(1 + exp(-2|u|))), cancellation-free.
inline Eigen::ArrayXXd log_one_minus_tanh2(const Eigen::ArrayXXd& u) {
    const Eigen::ArrayXXd au = u.abs();
    return 2.0 * (M_LN2 - au - ((-2.0 * au).exp() + 1.0).log());
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw ParseError("checkpoint: truncated stream");
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    if (n > (1ull << 32)) throw ParseError("checkpoint: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw ParseError("checkpoint: truncated stream");
    return s;
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, bool tanh_output)
    : widths_(std::move(widths)), tanh_output_(tanh_output) {
    if (widths_.size() < 2) throw DimensionMismatch("Mlp: need at least two widths");
    for (int w : widths_) {
        if (w <= 0) throw DimensionMismatch("Mlp: widths must be positive");
    }
    int total = 0;
    for (int l = 0; l < num_layers(); ++l) {
        w_off_.push_back(total);
        total += widths_[l] * widths_[l + 1];
        b_off_.push_back(total);
        total += widths_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(total);
}

void Mlp::init(Rng& rng) {
    for (int l = 0; l < num_layers(); ++l) {
        const double limit = std::sqrt(6.0 / (widths_[l] + widths_[l + 1]));
        auto w = weight(l);
        for (int c = 0; c < w.cols(); ++c) {
            for (int r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
        }
        bias(l).setZero();
    }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(int layer) {
    return {params_.data() + w_off_.at(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
    return {params_.data() + w_off_.at(layer), widths_[layer + 1], widths_[layer]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(int layer) {
    return {params_.data() + b_off_.at(layer), widths_[layer + 1]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
    return {params_.data() + b_off_.at(layer), widths_[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache* cache) const {
    if (x.rows() != in_dim()) {
        throw DimensionMismatch("Mlp::forward: input has " + std::to_string(x.rows()) +
                                " rows, expected " + std::to_string(in_dim()));
    }
    if (cache) {
        cache->acts.clear();
        cache->acts.push_back(x);
    }
    Eigen::MatrixXd a = x;
    for (int l = 0; l < num_layers(); ++l) {
        Eigen::MatrixXd z = (weight(l) * a).colwise() + bias(l);
        const bool squash = l + 1 < num_layers() || tanh_output_;
        if (squash) {
            a = tanh_arr(z.array()).matrix();
        } else {
            a = std::move(z);
        }
        if (cache) cache->acts.push_back(a);
    }
    return a;
}

Eigen::VectorXd Mlp::forward1(const Eigen::VectorXd& x) const { return forward(x); }

Eigen::MatrixXd Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& dout,
                              Eigen::VectorXd* param_grad, bool param_grads) const {
    if (cache.acts.size() != static_cast<size_t>(num_layers()) + 1) {
        throw NoForwardPass("Mlp::backward: cache does not match a forward pass");
    }
    if (dout.rows() != out_dim() || dout.cols() != cache.acts.back().cols()) {
        throw DimensionMismatch("Mlp::backward: dout shape mismatch");
    }
    if (param_grads && (!param_grad || param_grad->size() != params_.size())) {
        throw DimensionMismatch("Mlp::backward: param_grad not sized");
    }
    Eigen::MatrixXd dz;
    if (tanh_output_) {
        dz = (dout.array() * (1.0 - cache.acts.back().array().square())).matrix();
    } else {
        dz = dout;
    }
    for (int l = num_layers() - 1;; --l) {
        if (param_grads) {
            Eigen::Map<Eigen::MatrixXd> dw(param_grad->data() + w_off_[l], widths_[l + 1],
                                           widths_[l]);
            Eigen::Map<Eigen::VectorXd> db(param_grad->data() + b_off_[l], widths_[l + 1]);
            dw.noalias() += dz * cache.acts[l].transpose();
            db += dz.rowwise().sum();
        }
        Eigen::MatrixXd dprev = weight(l).transpose() * dz;
        if (l == 0) return dprev;
        dz = (dprev.array() * (1.0 - cache.acts[l].array().square())).matrix();
    }
}

Adam::Adam(int n, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)),
      beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw DimensionMismatch("Adam::step: size mismatch");
    }
    ++t_;
    m_ = (beta1_ * m_.array() + (1.0 - beta1_) * grad.array()).matrix();
    v_ = (beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square()).matrix();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

ActorNet::ActorNet(int obs_dim, Eigen::VectorXd a_max, std::vector<int> enc_hidden,
                   std::vector<int> head_hidden)
    : a_max_(std::move(a_max)) {
    const int A = static_cast<int>(a_max_.size());
    std::vector<int> ew{obs_dim};
    ew.insert(ew.end(), enc_hidden.begin(), enc_hidden.end());
    enc = Mlp(ew, /*tanh_output=*/true);
    std::vector<int> hw{enc.out_dim()};
    hw.insert(hw.end(), head_hidden.begin(), head_hidden.end());
    hw.push_back(2 * A);
    head = Mlp(hw, /*tanh_output=*/false);
}

void ActorNet::init(Rng& rng) {
    enc.init(rng);
    head.init(rng);
}

PolicyRollout ActorNet::sample(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise) const {
    const int A = act_dim();
    if (noise.rows() != A || noise.cols() != obs.cols()) {
        throw DimensionMismatch("ActorNet::sample: noise shape mismatch");
    }
    PolicyRollout r;
    const Eigen::MatrixXd feats = enc.forward(obs, &r.enc_cache);
    const Eigen::MatrixXd out = head.forward(feats, &r.head_cache);
    r.mu = out.topRows(A);
    r.logsig_raw = out.bottomRows(A);
    r.logsig = r.logsig_raw.array().min(kLogSigMax).max(kLogSigMin).matrix();
    r.sig = r.logsig.array().exp().matrix();
    r.eps = noise;
    r.u = r.mu + (r.sig.array() * noise.array()).matrix();
    r.t = tanh_arr(r.u.array()).matrix();
    r.a = (r.t.array().colwise() * a_max_.array()).matrix();
    Eigen::ArrayXXd lp = -kHalfLog2Pi - r.logsig.array() -
                         0.5 * noise.array().square() - log_one_minus_tanh2(r.u.array());
    lp.colwise() -= a_max_.array().log();
    r.logp = lp.colwise().sum().matrix().transpose();
    return r;
}

Eigen::VectorXd ActorNet::mean_action(const Eigen::VectorXd& obs) const {
    const Eigen::VectorXd out = head.forward1(enc.forward1(obs));
    const int A = act_dim();
    return (tanh_arr(out.head(A).array()).matrix().col(0).array() * a_max_.array()).matrix();
}

void ActorNet::backward(const PolicyRollout& r, const Eigen::MatrixXd& da,
                        const Eigen::VectorXd& dlogp, Eigen::VectorXd* enc_grad,
                        Eigen::VectorXd* head_grad) const {
    const int A = act_dim();
    const int B = static_cast<int>(r.mu.cols());
    if (da.rows() != A || da.cols() != B || dlogp.size() != B) {
        throw DimensionMismatch("ActorNet::backward: gradient shape mismatch");
    }
    // du picks up the action path (a = a_max tanh u) and the tanh density
    // correction in logp (d logp / du = 2 tanh u); the Gaussian term of logp
    // depends only on the fixed noise.
    const Eigen::ArrayXXd one_m_t2 = 1.0 - r.t.array().square();
    Eigen::ArrayXXd du = (da.array().colwise() * a_max_.array()) * one_m_t2;
    Eigen::ArrayXXd dlp_row = Eigen::ArrayXXd::Zero(1, B);
    dlp_row.row(0) = dlogp.transpose().array();
    du += 2.0 * r.t.array() * (Eigen::ArrayXXd::Ones(A, 1).matrix() * dlp_row.matrix()).array();
    // logsig: via u (du * sig * eps) plus the explicit -1 per dimension in
    // logp; gradient is cut where the clamp is active.
    const Eigen::ArrayXXd unclamped =
        (r.logsig_raw.array() > kLogSigMin && r.logsig_raw.array() < kLogSigMax)
            .cast<double>();
    Eigen::ArrayXXd dlogsig = du * r.sig.array() * r.eps.array();
    dlogsig -= (Eigen::ArrayXXd::Ones(A, 1).matrix() * dlp_row.matrix()).array();
    dlogsig *= unclamped;

    Eigen::MatrixXd dout(2 * A, B);
    dout.topRows(A) = du.matrix();
    dout.bottomRows(A) = dlogsig.matrix();
    const Eigen::MatrixXd dfeat = head.backward(r.head_cache, dout, head_grad);
    enc.backward(r.enc_cache, dfeat, enc_grad);
}

QNet::QNet(int obs_dim, int act_dim_in, std::vector<int> enc_hidden,
           std::vector<int> head_hidden)
    : act_dim(act_dim_in) {
    std::vector<int> ew{obs_dim};
    ew.insert(ew.end(), enc_hidden.begin(), enc_hidden.end());
    enc = Mlp(ew, /*tanh_output=*/true);
    std::vector<int> hw{enc.out_dim() + act_dim};
    hw.insert(hw.end(), head_hidden.begin(), head_hidden.end());
    hw.push_back(1);
    head = Mlp(hw, /*tanh_output=*/false);
}

void QNet::init(Rng& rng) {
    enc.init(rng);
    head.init(rng);
}

Eigen::VectorXd QNet::forward(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                              Cache* cache) const {
    if (act.rows() != act_dim || act.cols() != obs.cols()) {
        throw DimensionMismatch("QNet::forward: action shape mismatch");
    }
    Cache local;
    Cache* c = cache ? cache : &local;
    const Eigen::MatrixXd feats = enc.forward(obs, &c->enc_cache);
    c->hin.resize(feats.rows() + act_dim, obs.cols());
    c->hin.topRows(feats.rows()) = feats;
    c->hin.bottomRows(act_dim) = act;
    return head.forward(c->hin, &c->head_cache).transpose();
}

Eigen::MatrixXd QNet::backward(const Cache& cache, const Eigen::VectorXd& dq,
                               Eigen::VectorXd* enc_grad, Eigen::VectorXd* head_grad,
                               bool param_grads) const {
    const Eigen::MatrixXd dout = dq.transpose();
    const Eigen::MatrixXd dhin = head.backward(cache.head_cache, dout, head_grad, param_grads);
    const int feat_dim = enc.out_dim();
    enc.backward(cache.enc_cache, dhin.topRows(feat_dim), enc_grad, param_grads);
    return dhin.bottomRows(act_dim);
}

BcNet::BcNet(int obs_dim, int act_dim, std::vector<int> enc_hidden,
             std::vector<int> head_hidden) {
    std::vector<int> ew{obs_dim};
    ew.insert(ew.end(), enc_hidden.begin(), enc_hidden.end());
    enc = Mlp(ew, /*tanh_output=*/true);
    std::vector<int> hw{enc.out_dim()};
    hw.insert(hw.end(), head_hidden.begin(), head_hidden.end());
    hw.push_back(act_dim);
    head = Mlp(hw, /*tanh_output=*/false);
}

void BcNet::init(Rng& rng) {
    enc.init(rng);
    head.init(rng);
}

Eigen::MatrixXd BcNet::forward(const Eigen::MatrixXd& obs, MlpCache* enc_cache,
                               MlpCache* head_cache) const {
    MlpCache local;
    MlpCache* ec = enc_cache ? enc_cache : &local;
    return head.forward(enc.forward(obs, ec), head_cache);
}

void BcNet::backward(const MlpCache& enc_cache, const MlpCache& head_cache,
                     const Eigen::MatrixXd& dmu, Eigen::VectorXd* enc_grad,
                     Eigen::VectorXd* head_grad) const {
    const Eigen::MatrixXd dfeat = head.backward(head_cache, dmu, head_grad);
    enc.backward(enc_cache, dfeat, enc_grad);
}

Eigen::VectorXd ReferencePolicy::logprob(const Eigen::MatrixXd& obs,
                                         const Eigen::MatrixXd& actions, bool clamp) const {
    const Eigen::MatrixXd mu = net.forward(obs);
    if (actions.rows() != mu.rows() || actions.cols() != mu.cols()) {
        throw DimensionMismatch("ReferencePolicy::logprob: action shape mismatch");
    }
    const double inv_var = std::exp(-2.0 * kLogSigma0);
    const Eigen::ArrayXXd lp = -kHalfLog2Pi - kLogSigma0 -
                               0.5 * inv_var * (actions - mu).array().square();
    Eigen::VectorXd out = lp.colwise().sum().matrix().transpose();
    if (clamp) out = out.array().max(kRefLogFloor).matrix();
    return out;
}

double ReferencePolicy::logprob1(const Eigen::VectorXd& obs,
                                 const Eigen::VectorXd& action) const {
    return logprob(obs, action)(0);
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("checkpoint: cannot open " + path + " for writing");
    os.write("SCKPT001", 8);
    write_u64(os, meta.size());
    for (const auto& [k, v] : meta) {
        write_str(os, k);
        write_str(os, v);
    }
    write_u64(os, tensors.size());
    for (const auto& [k, v] : tensors) {
        write_str(os, k);
        write_u64(os, v.size());
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw ParseError("checkpoint: write to " + path + " failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "SCKPT001") {
        throw ParseError("checkpoint: bad magic in " + path);
    }
    Checkpoint c;
    const std::uint64_t n_meta = read_u64(is);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        std::string k = read_str(is);
        c.meta[k] = read_str(is);
    }
    const std::uint64_t n_tensors = read_u64(is);
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        std::string k = read_str(is);
        const std::uint64_t n = read_u64(is);
        std::vector<double> v(n);
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw ParseError("checkpoint: truncated tensor " + k);
        c.tensors[k] = std::move(v);
    }
    return c;
}

void Checkpoint::put_mlp(const std::string& prefix, const Mlp& net) {
    std::ostringstream w;
    for (size_t i = 0; i < net.widths().size(); ++i) {
        if (i) w << ',';
        w << net.widths()[i];
    }
    meta[prefix + ".widths"] = w.str();
    meta[prefix + ".tanh_output"] = net.tanh_output() ? "1" : "0";
    tensors[prefix + ".params"] =
        std::vector<double>(net.params().data(), net.params().data() + net.param_count());
}

Mlp Checkpoint::get_mlp(const std::string& prefix) const {
    const auto wi = meta.find(prefix + ".widths");
    const auto ti = meta.find(prefix + ".tanh_output");
    const auto pi = tensors.find(prefix + ".params");
    if (wi == meta.end() || ti == meta.end() || pi == tensors.end()) {
        throw ParseError("checkpoint: missing mlp entry " + prefix);
    }
    std::vector<int> widths;
    std::stringstream ss(wi->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) widths.push_back(std::stoi(tok));
    Mlp net(widths, ti->second == "1");
    if (static_cast<int>(pi->second.size()) != net.param_count()) {
        throw ParseError("checkpoint: tensor size mismatch for " + prefix);
    }
    net.params() = Eigen::Map<const Eigen::VectorXd>(
        pi->second.data(), static_cast<Eigen::Index>(pi->second.size()));
    return net;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    for (int i = 15; i >= 0; --i) os << ((h >> (4 * i)) & 0xf);
    return os.str();
}

}  // namespace softctrl::nn
