#include "softctrl/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "softctrl/errors.hpp"
#include "softctrl/evalkit.hpp"
#include "softctrl/io_util.hpp"
#include "softctrl/oracle.hpp"
#include "softctrl/rng.hpp"

namespace fs = std::filesystem;

namespace softctrl::cli {
namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open " + path + " for writing");
    os << text;
    if (!os) throw ParseError("write to " + path + " failed");
}

kin::Limits limits_from_config(const cfg::Config& c) {
    kin::Limits lim;
    lim.steer_max = c.num("env.limits.steer_max", lim.steer_max);
    lim.accel_max = c.num("env.limits.accel_max", lim.accel_max);
    lim.v_max = c.num("env.limits.v_max", lim.v_max);
    lim.validate();
    return lim;
}

scene::ScenarioKind kind_from_name(const std::string& name) {
    if (name == "red_light_lead") return scene::ScenarioKind::red_light_lead;
    if (name == "t_junction") return scene::ScenarioKind::t_junction;
    if (name == "crossing_pedestrian") return scene::ScenarioKind::crossing_pedestrian;
    throw ConfigError("gen.kind: unknown kind '" + name +
                      "' (expected red_light_lead, t_junction, crossing_pedestrian or mixed)");
}

// Resolved-config writers: one entry per knob actually in effect, defaults
// included, so the artifact alone reproduces the run.
void put_env(cfg::Config& r, const sim::EnvConfig& e) {
    r.set("env.obs.h", std::to_string(e.obs.H));
    r.set("env.obs.k", std::to_string(e.obs.K));
    r.set("env.obs.m", std::to_string(e.obs.M));
    r.set("env.obs.p", std::to_string(e.obs.P));
    r.set("env.obs.c", std::to_string(e.obs.C));
    r.set("env.obs.pos_scale", fmt_double(e.obs.pos_scale));
    r.set("env.reward.dist", fmt_double(e.reward.dist));
    r.set("env.reward.yaw", fmt_double(e.reward.yaw));
    r.set("env.reward.cf", fmt_double(e.reward.cf));
    r.set("env.reward.cs", fmt_double(e.reward.cs));
    r.set("env.reward.cr", fmt_double(e.reward.cr));
    r.set("env.limits.steer_max", fmt_double(e.limits.steer_max));
    r.set("env.limits.accel_max", fmt_double(e.limits.accel_max));
    r.set("env.limits.v_max", fmt_double(e.limits.v_max));
}

void put_sac(cfg::Config& r, const agents::SacConfig& s) {
    r.set("sac.variant", agents::variant_name(s.variant));
    r.set("sac.gamma", fmt_double(s.gamma));
    r.set("sac.polyak", fmt_double(s.polyak));
    r.set("sac.batch", std::to_string(s.batch));
    r.set("sac.lr_start", fmt_double(s.lr_start));
    r.set("sac.lr_end", fmt_double(s.lr_end));
    r.set("sac.tau", fmt_double(s.tau));
    r.set("sac.alpha", fmt_double(s.alpha));
    r.set("sac.exkl_kl_coef", fmt_double(s.exkl_kl_coef));
    r.set("sac.auto_entropy", s.auto_entropy ? "true" : "false");
    r.set("sac.target_entropy", fmt_double(s.target_entropy));
    r.set("sac.init_tau_eff", fmt_double(s.init_tau_eff));
    r.set("sac.freeze_encoders", s.freeze_encoders ? "true" : "false");
    r.set("sac.share_encoders", s.share_encoders ? "true" : "false");
}

void put_rl(cfg::Config& r, const agents::RlConfig& rl) {
    put_sac(r, rl.sac);
    put_env(r, rl.env);
    r.set("rl.total_steps", std::to_string(rl.total_steps));
    r.set("rl.eval_interval", std::to_string(rl.eval_interval));
    r.set("rl.warmup_steps", std::to_string(rl.warmup_steps));
    r.set("rl.update_every", std::to_string(rl.update_every));
    r.set("rl.buffer_capacity", std::to_string(rl.buffer_capacity));
}

void put_bc(cfg::Config& r, const agents::BcConfig& b) {
    put_env(r, b.env);
    r.set("bc.epochs", std::to_string(b.epochs));
    r.set("bc.batch", std::to_string(b.batch));
    r.set("bc.lr", fmt_double(b.lr));
    r.set("bc.lr_end", fmt_double(b.lr_end));
    r.set("bc.perturb_prob", fmt_double(b.perturb_prob));
    r.set("bc.lateral_sigma", fmt_double(b.lateral_sigma));
    r.set("bc.heading_sigma", fmt_double(b.heading_sigma));
    r.set("bc.shuffle", b.shuffle ? "true" : "false");
}

std::string tensor_bytes(const nn::Checkpoint& ckpt) {
    std::string bytes;
    for (const auto& [name, vec] : ckpt.tensors) {
        bytes += name;
        bytes += ':';
        bytes.append(reinterpret_cast<const char*>(vec.data()), vec.size() * sizeof(double));
        bytes += ';';
    }
    return bytes;
}

std::vector<int> tail(const std::vector<int>& v, int drop_back) {
    return {v.begin() + 1, v.end() - drop_back};
}

unsigned long seed_of(const cfg::Config& c) {
    const long s = c.integer("seed", 0);
    if (s < 0) throw ConfigError("seed must be non-negative");
    return static_cast<unsigned long>(s);
}

std::string out_dir(const cfg::Config& c) {
    const std::string out = c.require("out");
    fs::create_directories(out);
    return out;
}

nn::ReferencePolicy load_reference(const cfg::Config& c, int expected_obs_dim) {
    const std::string path = c.require("bc.checkpoint");
    if (!fs::exists(path)) throw ConfigError("bc checkpoint not found: " + path);
    nn::ReferencePolicy ref;
    ref.net = unpack_bc(nn::Checkpoint::load(path));
    if (ref.net.enc.in_dim() != expected_obs_dim) {
        throw ConfigError("bc checkpoint " + path + " expects obs dim " +
                          std::to_string(ref.net.enc.in_dim()) + " but env.obs gives " +
                          std::to_string(expected_obs_dim));
    }
    return ref;
}

// train_rl + evaluation of the selected (best) actor; shared by train-rl
// and each sweep point.
struct RlRun {
    agents::TrainRlResult train;
    eval::EvalReport report;
};

RlRun run_rl(const agents::RlConfig& rlc, const nn::ReferencePolicy& ref,
             const std::vector<scene::Scenario>& train_scenes,
             const std::vector<scene::Scenario>& eval_scenes, unsigned long seed) {
    RlRun run;
    run.train = agents::train_rl(train_scenes, eval_scenes, rlc, ref, seed);
    eval::PolicyAgent pa(run.train.best_actor);
    run.report = eval::evaluate(pa, eval_scenes, rlc.env, seed);
    return run;
}

void write_rl_artifacts(const std::string& dir, const RlRun& run, const std::string& resolved,
                        const agents::SacConfig& sac, unsigned long seed) {
    write_text(dir + "/resolved.cfg", resolved);
    write_text(dir + "/train_log.csv", agents::rl_log_csv(run.train.log_rows));
    write_text(dir + "/eval_report.csv", eval::report_csv(run.report));
    write_text(dir + "/eval_report.json", eval::report_json(run.report));

    nn::Checkpoint final_ck = pack_actor(run.train.final_actor);
    stamp(final_ck, agents::variant_name(sac.variant), seed, resolved);
    final_ck.save(dir + "/actor_final.ckpt");

    nn::Checkpoint best_ck = pack_actor(run.train.best_actor);
    stamp(best_ck, agents::variant_name(sac.variant), seed, resolved);
    best_ck.meta["best_step"] = std::to_string(run.train.best_step);
    best_ck.save(dir + "/actor_best.ckpt");
}

std::string sweep_row(double value, const eval::EvalReport& rep) {
    std::string row = fmt_double(value);
    row += ',' + fmt_double(rep.mu_ade);
    row += ',' + fmt_double(rep.mu_d2r);
    row += ',' + std::to_string(rep.d2r_ge_4m);
    row += ',' + fmt_double(rep.mu_cl);
    row += ',' + std::to_string(rep.cl_ge_1);
    row += ',' + fmt_double(rep.mu_cf);
    row += ',' + std::to_string(rep.cf_ge_1);
    row += ',' + fmt_double(rep.mu_cs);
    row += ',' + std::to_string(rep.cs_ge_1);
    row += ',' + fmt_double(rep.mu_cr);
    row += ',' + std::to_string(rep.cr_ge_1);
    row += ',' + fmt_double(rep.mu_acc);
    row += ',' + std::to_string(rep.acc_ge_2);
    row += ',' + std::to_string(rep.failure);
    row += '\n';
    return row;
}

}  // namespace

sim::EnvConfig env_from_config(const cfg::Config& c) {
    sim::EnvConfig e;
    e.obs.H = static_cast<int>(c.integer("env.obs.h", e.obs.H));
    e.obs.K = static_cast<int>(c.integer("env.obs.k", e.obs.K));
    e.obs.M = static_cast<int>(c.integer("env.obs.m", e.obs.M));
    e.obs.P = static_cast<int>(c.integer("env.obs.p", e.obs.P));
    e.obs.C = static_cast<int>(c.integer("env.obs.c", e.obs.C));
    e.obs.pos_scale = c.num("env.obs.pos_scale", e.obs.pos_scale);
    if (e.obs.H < 1 || e.obs.K < 0 || e.obs.M < 0 || e.obs.P < 2 || e.obs.C < 0 ||
        !(e.obs.pos_scale > 0.0)) {
        throw ConfigError("env.obs: need h >= 1, p >= 2, non-negative k/m/c, pos_scale > 0");
    }
    e.reward.dist = c.num("env.reward.dist", e.reward.dist);
    e.reward.yaw = c.num("env.reward.yaw", e.reward.yaw);
    e.reward.cf = c.num("env.reward.cf", e.reward.cf);
    e.reward.cs = c.num("env.reward.cs", e.reward.cs);
    e.reward.cr = c.num("env.reward.cr", e.reward.cr);
    e.limits = limits_from_config(c);
    return e;
}

agents::SacConfig sac_from_config(const cfg::Config& c) {
    agents::SacConfig s;
    s.variant = agents::variant_from_name(c.str("sac.variant", agents::variant_name(s.variant)));
    s.gamma = c.num("sac.gamma", s.gamma);
    s.polyak = c.num("sac.polyak", s.polyak);
    s.batch = static_cast<int>(c.integer("sac.batch", s.batch));
    s.lr_start = c.num("sac.lr_start", s.lr_start);
    s.lr_end = c.num("sac.lr_end", s.lr_end);
    s.tau = c.num("sac.tau", s.tau);
    s.alpha = c.num("sac.alpha", s.alpha);
    s.exkl_kl_coef = c.num("sac.exkl_kl_coef", s.exkl_kl_coef);
    s.auto_entropy = c.flag("sac.auto_entropy", s.auto_entropy);
    s.target_entropy = c.num("sac.target_entropy", s.target_entropy);
    s.init_tau_eff = c.num("sac.init_tau_eff", s.init_tau_eff);
    s.freeze_encoders = c.flag("sac.freeze_encoders", s.freeze_encoders);
    s.share_encoders = c.flag("sac.share_encoders", s.share_encoders);
    // The weight pair, when given, wins over tau/alpha.
    if (c.has("sac.w_h") || c.has("sac.w_kl")) {
        if (!(c.has("sac.w_h") && c.has("sac.w_kl"))) {
            throw ConfigError("sac.w_h and sac.w_kl must be given together");
        }
        s.set_weights(c.num("sac.w_h", 0.0), c.num("sac.w_kl", 0.0));
    }
    s.validate();
    return s;
}

agents::RlConfig rl_from_config(const cfg::Config& c) {
    agents::RlConfig r;
    r.sac = sac_from_config(c);
    r.env = env_from_config(c);
    r.total_steps = c.integer("rl.total_steps", r.total_steps);
    r.eval_interval = c.integer("rl.eval_interval", r.eval_interval);
    r.warmup_steps = c.integer("rl.warmup_steps", r.warmup_steps);
    r.update_every = static_cast<int>(c.integer("rl.update_every", r.update_every));
    const long cap = c.integer("rl.buffer_capacity", static_cast<long>(r.buffer_capacity));
    if (r.total_steps < 0 || r.eval_interval <= 0 || r.warmup_steps < 0 ||
        r.update_every <= 0 || cap <= 0) {
        throw ConfigError("rl: total_steps >= 0, buffer_capacity/eval_interval/update_every > 0,"
                          " warmup_steps >= 0 required");
    }
    r.buffer_capacity = static_cast<std::size_t>(cap);
    return r;
}

agents::BcConfig bc_from_config(const cfg::Config& c) {
    agents::BcConfig b;
    b.env = env_from_config(c);
    b.epochs = static_cast<int>(c.integer("bc.epochs", b.epochs));
    b.batch = static_cast<int>(c.integer("bc.batch", b.batch));
    b.lr = c.num("bc.lr", b.lr);
    b.lr_end = c.num("bc.lr_end", b.lr_end);
    b.perturb_prob = c.num("bc.perturb_prob", b.perturb_prob);
    b.lateral_sigma = c.num("bc.lateral_sigma", b.lateral_sigma);
    b.heading_sigma = c.num("bc.heading_sigma", b.heading_sigma);
    b.shuffle = c.flag("bc.shuffle", b.shuffle);
    if (b.epochs <= 0 || b.batch <= 0 || !(b.lr > 0.0) || !(b.lr_end > 0.0)) {
        throw ConfigError("bc: epochs/batch/lr/lr_end must be positive");
    }
    if (b.perturb_prob < 0.0 || b.perturb_prob > 1.0 || b.lateral_sigma < 0.0 ||
        b.heading_sigma < 0.0) {
        throw ConfigError("bc: perturb_prob in [0, 1], sigmas non-negative");
    }
    return b;
}

void reject_unknown(const cfg::Config& c) {
    const auto extra = c.unused();
    if (extra.empty()) return;
    std::string msg = "config: unknown key(s):";
    for (const auto& k : extra) msg += " '" + k + "'";
    throw ConfigError(msg);
}

std::vector<scene::Scenario> load_suite(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("scenario directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("no scenario files (*.json) in " + dir);
    std::vector<scene::Scenario> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(scene::load(p));
    return out;
}

nn::Checkpoint pack_actor(const nn::ActorNet& actor) {
    nn::Checkpoint ck;
    ck.meta["kind"] = "actor";
    ck.put_mlp("enc", actor.enc);
    ck.put_mlp("head", actor.head);
    ck.tensors["a_max"] = std::vector<double>(actor.a_max().data(),
                                              actor.a_max().data() + actor.a_max().size());
    return ck;
}

nn::ActorNet unpack_actor(const nn::Checkpoint& ckpt) {
    const auto ki = ckpt.meta.find("kind");
    if (ki == ckpt.meta.end() || ki->second != "actor") {
        throw ParseError("checkpoint: not an actor checkpoint");
    }
    const auto ai = ckpt.tensors.find("a_max");
    if (ai == ckpt.tensors.end()) throw ParseError("checkpoint: missing a_max");
    Eigen::VectorXd a_max = Eigen::Map<const Eigen::VectorXd>(
        ai->second.data(), static_cast<Eigen::Index>(ai->second.size()));
    nn::Mlp enc = ckpt.get_mlp("enc");
    nn::Mlp head = ckpt.get_mlp("head");
    nn::ActorNet actor(enc.in_dim(), a_max, tail(enc.widths(), 0), tail(head.widths(), 1));
    actor.enc = std::move(enc);
    actor.head = std::move(head);
    return actor;
}

nn::Checkpoint pack_bc(const nn::BcNet& net) {
    nn::Checkpoint ck;
    ck.meta["kind"] = "bc";
    ck.put_mlp("enc", net.enc);
    ck.put_mlp("head", net.head);
    return ck;
}

nn::BcNet unpack_bc(const nn::Checkpoint& ckpt) {
    const auto ki = ckpt.meta.find("kind");
    if (ki == ckpt.meta.end() || ki->second != "bc") {
        throw ParseError("checkpoint: not a bc checkpoint");
    }
    nn::Mlp enc = ckpt.get_mlp("enc");
    nn::Mlp head = ckpt.get_mlp("head");
    nn::BcNet net(enc.in_dim(), head.out_dim(), tail(enc.widths(), 0), tail(head.widths(), 1));
    net.enc = std::move(enc);
    net.head = std::move(head);
    return net;
}

void stamp(nn::Checkpoint& ckpt, const std::string& variant, unsigned long seed,
           const std::string& resolved_config) {
    ckpt.meta["variant"] = variant;
    ckpt.meta["seed"] = std::to_string(seed);
    ckpt.meta["config_fnv1a"] = nn::fnv1a_hex(resolved_config);
    ckpt.meta["params_fnv1a"] = nn::fnv1a_hex(tensor_bytes(ckpt));
}

int cmd_gen(const cfg::Config& c, std::ostream& os) {
    const unsigned long seed = seed_of(c);
    const std::string out = out_dir(c);
    const std::string kind = c.str("gen.kind", "mixed");
    const long count = c.integer("gen.count", 12);
    const long frames = c.integer("gen.num_frames", 250);
    if (count <= 0) throw ConfigError("gen.count must be positive");
    if (frames < 3) throw ConfigError("gen.num_frames must be at least 3");
    const kin::Limits limits = limits_from_config(c);
    if (kind != "mixed") kind_from_name(kind);  // name check up front
    reject_unknown(c);

    const scene::ScenarioKind cycle[] = {scene::ScenarioKind::red_light_lead,
                                         scene::ScenarioKind::t_junction,
                                         scene::ScenarioKind::crossing_pedestrian};
    for (long i = 0; i < count; ++i) {
        const scene::ScenarioKind k =
            kind == "mixed" ? cycle[i % 3] : kind_from_name(kind);
        const scene::Scenario s =
            scene::generate(k, seed + static_cast<unsigned long>(i), limits,
                            static_cast<int>(frames));
        std::ostringstream name;
        name << out << "/scene_" << std::setw(3) << std::setfill('0') << i << ".json";
        scene::save(s, name.str());
    }

    cfg::Config r;
    r.set("seed", std::to_string(seed));
    r.set("out", out);
    r.set("gen.kind", kind);
    r.set("gen.count", std::to_string(count));
    r.set("gen.num_frames", std::to_string(frames));
    r.set("env.limits.steer_max", fmt_double(limits.steer_max));
    r.set("env.limits.accel_max", fmt_double(limits.accel_max));
    r.set("env.limits.v_max", fmt_double(limits.v_max));
    write_text(out + "/resolved.cfg", r.serialize());

    os << "gen: wrote " << count << " scenarios to " << out << "\n";
    return 0;
}

int cmd_train_bc(const cfg::Config& c, std::ostream& os) {
    const unsigned long seed = seed_of(c);
    const std::string out = out_dir(c);
    const std::string scen_dir = c.require("scenarios.dir");
    const agents::BcConfig bcc = bc_from_config(c);
    reject_unknown(c);

    const auto suite = load_suite(scen_dir);
    const agents::BcResult res = agents::train_bc(suite, bcc, seed);

    cfg::Config r;
    r.set("seed", std::to_string(seed));
    r.set("out", out);
    r.set("scenarios.dir", scen_dir);
    put_bc(r, bcc);
    const std::string resolved = r.serialize();
    write_text(out + "/resolved.cfg", resolved);

    std::string losses = "epoch,nll\n";
    for (std::size_t i = 0; i < res.epoch_losses.size(); ++i) {
        losses += std::to_string(i + 1) + "," + fmt_double(res.epoch_losses[i]) + "\n";
    }
    write_text(out + "/bc_loss.csv", losses);

    nn::Checkpoint ck = pack_bc(res.policy.net);
    stamp(ck, "bc", seed, resolved);
    ck.save(out + "/bc.ckpt");

    os << "train-bc: " << suite.size() << " scenes, final nll "
       << fmt_double(res.epoch_losses.back()) << ", checkpoint " << out << "/bc.ckpt\n";
    return 0;
}

int cmd_train_rl(const cfg::Config& c, std::ostream& os) {
    const unsigned long seed = seed_of(c);
    const std::string out = out_dir(c);
    const std::string train_dir = c.require("scenarios.dir");
    const std::string eval_dir = c.str("scenarios.eval_dir", train_dir);
    const std::string bc_path = c.str("bc.checkpoint", "");
    const agents::RlConfig rlc = rl_from_config(c);
    const nn::ReferencePolicy ref = load_reference(c, rlc.env.obs.dim());
    reject_unknown(c);

    const auto train_scenes = load_suite(train_dir);
    const auto eval_scenes = eval_dir == train_dir ? train_scenes : load_suite(eval_dir);

    cfg::Config r;
    r.set("seed", std::to_string(seed));
    r.set("out", out);
    r.set("scenarios.dir", train_dir);
    r.set("scenarios.eval_dir", eval_dir);
    r.set("bc.checkpoint", bc_path);
    put_rl(r, rlc);

    const RlRun run = run_rl(rlc, ref, train_scenes, eval_scenes, seed);
    write_rl_artifacts(out, run, r.serialize(), rlc.sac, seed);

    os << "train-rl (" << agents::variant_name(rlc.sac.variant) << "): best step "
       << run.train.best_step << ", failures " << run.train.best_failures << "/"
       << eval_scenes.size() << ", discomfort " << fmt_double(run.train.best_discomfort)
       << ", artifacts in " << out << "\n";
    return 0;
}

int cmd_eval(const cfg::Config& c, std::ostream& os) {
    const unsigned long seed = seed_of(c);
    const std::string out = out_dir(c);
    const std::string scen_dir = c.require("scenarios.dir");
    const std::string ck_path = c.require("eval.checkpoint");
    const sim::EnvConfig env = env_from_config(c);
    reject_unknown(c);

    if (!fs::exists(ck_path)) throw ConfigError("eval checkpoint not found: " + ck_path);
    const nn::ActorNet actor = unpack_actor(nn::Checkpoint::load(ck_path));
    if (actor.enc.in_dim() != env.obs.dim()) {
        throw ConfigError("eval checkpoint " + ck_path + " expects obs dim " +
                          std::to_string(actor.enc.in_dim()) + " but env.obs gives " +
                          std::to_string(env.obs.dim()));
    }

    const auto suite = load_suite(scen_dir);
    eval::PolicyAgent pa(actor);
    const eval::EvalReport rep = eval::evaluate(pa, suite, env, seed);

    cfg::Config r;
    r.set("seed", std::to_string(seed));
    r.set("out", out);
    r.set("scenarios.dir", scen_dir);
    r.set("eval.checkpoint", ck_path);
    put_env(r, env);
    write_text(out + "/resolved.cfg", r.serialize());
    write_text(out + "/eval_report.csv", eval::report_csv(rep));
    write_text(out + "/eval_report.json", eval::report_json(rep));

    os << "eval: failures " << rep.failure << "/" << suite.size() << ", mean ade "
       << fmt_double(rep.mu_ade) << ", report in " << out << "\n";
    return 0;
}

int cmd_sweep(const cfg::Config& c, std::ostream& os) {
    const unsigned long seed = seed_of(c);
    const std::string out = out_dir(c);
    const std::string train_dir = c.require("scenarios.dir");
    const std::string eval_dir = c.str("scenarios.eval_dir", train_dir);
    const std::string bc_path = c.str("bc.checkpoint", "");
    const std::string axis = c.require("sweep.axis");
    if (axis != "w_h" && axis != "w_kl" && axis != "exkl_kl_coef") {
        throw ConfigError("sweep.axis: unknown axis '" + axis +
                          "' (expected w_h, w_kl or exkl_kl_coef)");
    }
    std::vector<double> values;
    {
        std::stringstream ss(c.require("sweep.values"));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const cfg::Config one = cfg::Config::from_string("v = " + tok, "sweep.values");
            values.push_back(one.num("v", 0.0));
        }
        if (values.empty()) throw ConfigError("sweep.values: need at least one value");
    }
    const agents::RlConfig base = rl_from_config(c);
    const nn::ReferencePolicy ref = load_reference(c, base.env.obs.dim());
    reject_unknown(c);

    const auto train_scenes = load_suite(train_dir);
    const auto eval_scenes = eval_dir == train_dir ? train_scenes : load_suite(eval_dir);

    cfg::Config rb;
    rb.set("seed", std::to_string(seed));
    rb.set("out", out);
    rb.set("scenarios.dir", train_dir);
    rb.set("scenarios.eval_dir", eval_dir);
    rb.set("bc.checkpoint", bc_path);
    rb.set("sweep.axis", axis);
    rb.set("sweep.values", c.str("sweep.values", ""));
    put_rl(rb, base);
    write_text(out + "/resolved.cfg", rb.serialize());

    std::string combined =
        "value,mu_ade,mu_d2r,d2r_ge_4m,mu_cl,cl_ge_1,mu_cf,cf_ge_1,mu_cs,cs_ge_1,"
        "mu_cr,cr_ge_1,mu_acc,acc_ge_2,failure\n";
    for (const double v : values) {
        agents::RlConfig rlc = base;
        if (axis == "w_h") {
            rlc.sac.set_weights(v, base.sac.w_kl());
        } else if (axis == "w_kl") {
            rlc.sac.set_weights(base.sac.w_h(), v);
        } else {
            rlc.sac.exkl_kl_coef = v;
            rlc.sac.validate();
        }

        const std::string dir = out + "/" + axis + "_" + fmt_double(v);
        fs::create_directories(dir);

        cfg::Config r;
        r.set("seed", std::to_string(seed));
        r.set("out", dir);
        r.set("scenarios.dir", train_dir);
        r.set("scenarios.eval_dir", eval_dir);
        r.set("bc.checkpoint", bc_path);
        put_rl(r, rlc);

        const RlRun run = run_rl(rlc, ref, train_scenes, eval_scenes, seed);
        write_rl_artifacts(dir, run, r.serialize(), rlc.sac, seed);
        combined += sweep_row(v, run.report);

        os << "sweep " << axis << "=" << fmt_double(v) << ": failures " << run.report.failure
           << "/" << eval_scenes.size() << ", discomfort " << fmt_double(run.report.mu_acc)
           << "\n";
    }
    write_text(out + "/sweep.csv", combined);
    os << "sweep: combined csv " << out << "/sweep.csv\n";
    return 0;
}

int cmd_verify(std::ostream& os) {
    bool all_pass = true;
    const auto line = [&](const std::string& name, double worst, double tol) {
        const bool pass = worst <= tol;
        all_pass = all_pass && pass;
        os << (pass ? "[PASS] " : "[FAIL] ") << name << ": max discrepancy " << fmt_double(worst)
           << " (tol " << fmt_double(tol) << ")\n";
    };

    Rng rng(0);
    // Implicit/explicit KL equivalence under the q' shift, 100 random MDPs.
    double worst_q = 0.0, worst_pi = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int ns = static_cast<int>(rng.uniform_int(2, 10));
        const int na = static_cast<int>(rng.uniform_int(2, 5));
        const oracle::FiniteMdp mdp = oracle::random_mdp(rng, ns, na, rng.uniform(0.5, 0.95));
        const Eigen::MatrixXd pi0 = oracle::random_policy(rng, ns, na);
        const double tau = rng.uniform(0.1, 2.0);
        const double alpha = rng.uniform(0.0, 1.0);
        const oracle::ShiftCheck chk = oracle::shift_equivalence_check(mdp, pi0, tau, alpha, 100);
        worst_q = std::max(worst_q, chk.max_q_gap);
        worst_pi = std::max(worst_pi, chk.max_pi_gap);
    }
    line("shift equivalence, q tables", worst_q, 1e-10);
    line("shift equivalence, softmax policies", worst_pi, 1e-12);

    // Policy-improvement identity on random (q, pi, pi0, tau, alpha).
    double worst_id = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int ns = static_cast<int>(rng.uniform_int(2, 10));
        const int na = static_cast<int>(rng.uniform_int(2, 5));
        Eigen::MatrixXd q(ns, na);
        for (int s = 0; s < ns; ++s) {
            for (int a = 0; a < na; ++a) q(s, a) = 3.0 * rng.normal();
        }
        const Eigen::MatrixXd pi = oracle::random_policy(rng, ns, na);
        const Eigen::MatrixXd pi0 = oracle::random_policy(rng, ns, na);
        const double tau = rng.uniform(0.05, 2.0);
        const double alpha = rng.uniform(0.0, 1.0);
        worst_id = std::max(worst_id, oracle::improvement_identity_check(q, pi, pi0, tau, alpha));
    }
    line("policy-improvement identity", worst_id, 1e-12);

    // alpha = 0 must reduce the augmented iteration to plain soft VI exactly.
    double worst_a0 = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int ns = static_cast<int>(rng.uniform_int(2, 10));
        const int na = static_cast<int>(rng.uniform_int(2, 5));
        const oracle::FiniteMdp mdp = oracle::random_mdp(rng, ns, na, rng.uniform(0.5, 0.95));
        const Eigen::MatrixXd pi0 = oracle::random_policy(rng, ns, na);
        const double tau = rng.uniform(0.1, 2.0);
        const oracle::ViTrace tr = oracle::munchausen_vi(mdp, tau, 0.0, pi0, 60);
        const Eigen::MatrixXd plain = oracle::soft_vi(mdp, tau, 60);
        worst_a0 = std::max(worst_a0, (tr.q.back() - plain).cwiseAbs().maxCoeff());
    }
    line("alpha = 0 reduction to soft VI", worst_a0, 0.0);

    // Vanishing temperature recovers hard value iteration.
    double worst_t0 = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int ns = static_cast<int>(rng.uniform_int(2, 10));
        const int na = static_cast<int>(rng.uniform_int(2, 5));
        const oracle::FiniteMdp mdp = oracle::random_mdp(rng, ns, na, rng.uniform(0.5, 0.95));
        const Eigen::MatrixXd soft = oracle::soft_vi(mdp, 1e-6, 200);
        const Eigen::MatrixXd hard = oracle::hard_vi(mdp, 200);
        worst_t0 = std::max(worst_t0, (soft - hard).cwiseAbs().maxCoeff());
    }
    line("tau -> 0 recovers hard VI", worst_t0, 1e-3);

    os << (all_pass ? "verify: all oracle checks passed\n"
                    : "verify: oracle tolerance exceeded\n");
    return all_pass ? 0 : 2;
}

}  // namespace softctrl::cli
