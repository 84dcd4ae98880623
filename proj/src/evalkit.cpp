#include "softctrl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <json.hpp>

#include "softctrl/errors.hpp"
#include "softctrl/io_util.hpp"

namespace softctrl::eval {

double ade(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& ref) {
    if (pred.size() != ref.size()) {
        throw LengthMismatch("ade: trajectory lengths differ (" + std::to_string(pred.size()) +
                             " vs " + std::to_string(ref.size()) + ")");
    }
    if (pred.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - ref[i]).norm();
    return sum / static_cast<double>(pred.size());
}

double d2r(const Eigen::Vector2d& point, const std::vector<Eigen::Vector2d>& polyline) {
    if (polyline.size() < 2) throw InvariantViolation("d2r: polyline needs >= 2 points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        const Eigen::Vector2d& a = polyline[i];
        const Eigen::Vector2d d = polyline[i + 1] - a;
        const double len2 = d.squaredNorm();
        double t = 0.0;
        if (len2 > 0.0) t = std::clamp((point - a).dot(d) / len2, 0.0, 1.0);
        best = std::min(best, (point - (a + t * d)).norm());
    }
    return best;
}

double discomfort(const std::vector<double>& accel_mps2) {
    if (accel_mps2.empty()) return 0.0;
    long hits = 0;
    for (double a : accel_mps2) {
        if (std::abs(a) >= kDiscomfortMps2) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(accel_mps2.size());
}

kin::Action ExpertAgent::act(const Eigen::VectorXd&, const sim::Environment& env, Rng&) {
    if (cached_ != &env.scenario()) {
        cached_ = &env.scenario();
        actions_ = scene::expert_actions(*cached_);
    }
    return actions_.at(static_cast<std::size_t>(env.frame()));
}

kin::Action PolicyAgent::act(const Eigen::VectorXd& obs, const sim::Environment&, Rng&) {
    const Eigen::VectorXd a = actor_->mean_action(obs);
    return {a(0), a(1)};
}

SceneResult evaluate_scene(Agent& agent, const scene::Scenario& s, const sim::EnvConfig& cfg,
                           Rng& rng, double* return_sum) {
    sim::Environment env(s, cfg);
    Eigen::VectorXd obs = env.reset(0);

    std::vector<Eigen::Vector2d> pred, ref;
    pred.reserve(s.num_frames);
    ref.reserve(s.num_frames);
    pred.emplace_back(env.ego().pose.x, env.ego().pose.y);
    for (const auto& p : s.ego_log) ref.emplace_back(p.x, p.y);

    std::vector<double> accels;
    accels.reserve(s.num_frames);
    SceneResult r;
    r.id = s.id;
    double total_reward = 0.0;
    while (!env.done()) {
        const kin::Action action = agent.act(obs, env, rng);
        accels.push_back(action.accel * kAccelToMps2);  // commanded, pre-clamp
        const sim::StepOutcome out = env.step(action);
        obs = out.observation;
        total_reward += out.reward;
        pred.emplace_back(out.ego.pose.x, out.ego.pose.y);
        if (out.collision) {
            ++r.cl_frames;
            switch (out.collision->cls) {
                case sim::CollisionClass::front: ++r.cf_frames; break;
                case sim::CollisionClass::side: ++r.cs_frames; break;
                case sim::CollisionClass::rear: ++r.cr_frames; break;
            }
        }
    }

    r.ade = ade(pred, ref);
    for (const auto& p : pred) r.d2r_max = std::max(r.d2r_max, d2r(p, ref));
    r.d2r_event = r.d2r_max > kD2rEventMeters;
    r.discomfort_rate = discomfort(accels);
    r.acc_event = r.discomfort_rate > 0.0;
    r.cl_event = r.cl_frames >= 1;
    r.cf_event = r.cf_frames >= 1;
    r.cs_event = r.cs_frames >= 1;
    r.cr_event = r.cr_frames >= 1;
    r.failure = r.d2r_event || r.cl_event;
    if (return_sum) *return_sum = total_reward;
    return r;
}

EvalReport aggregate(std::vector<SceneResult> scenes) {
    EvalReport rep;
    rep.scenes = std::move(scenes);
    const double n = static_cast<double>(rep.scenes.size());
    if (rep.scenes.empty()) return rep;
    for (const auto& s : rep.scenes) {
        rep.mu_ade += s.ade;
        rep.mu_d2r += s.d2r_max;
        rep.mu_cl += static_cast<double>(s.cl_frames);
        rep.mu_cf += static_cast<double>(s.cf_frames);
        rep.mu_cs += static_cast<double>(s.cs_frames);
        rep.mu_cr += static_cast<double>(s.cr_frames);
        rep.mu_acc += s.discomfort_rate;
        rep.d2r_ge_4m += s.d2r_event;
        rep.cl_ge_1 += s.cl_event;
        rep.cf_ge_1 += s.cf_event;
        rep.cs_ge_1 += s.cs_event;
        rep.cr_ge_1 += s.cr_event;
        rep.acc_ge_2 += s.acc_event;
        rep.failure += s.failure;
    }
    rep.mu_ade /= n;
    rep.mu_d2r /= n;
    rep.mu_cl /= n;
    rep.mu_cf /= n;
    rep.mu_cs /= n;
    rep.mu_cr /= n;
    rep.mu_acc /= n;
    return rep;
}

EvalReport evaluate(Agent& agent, const std::vector<scene::Scenario>& scenarios,
                    const sim::EnvConfig& cfg, unsigned long seed) {
    Rng rng(seed);
    std::vector<SceneResult> rows;
    rows.reserve(scenarios.size());
    for (const auto& s : scenarios) rows.push_back(evaluate_scene(agent, s, cfg, rng));
    return aggregate(std::move(rows));
}

std::string report_csv(const EvalReport& rep) {
    std::string out =
        "scene,ade,d2r_max,d2r_event,cl_frames,cf_frames,cs_frames,cr_frames,"
        "discomfort_rate,acc_event,failure\n";
    for (const auto& s : rep.scenes) {
        out += s.id + ',' + fmt_double(s.ade) + ',' + fmt_double(s.d2r_max) + ',' +
               std::to_string(int(s.d2r_event)) + ',' + std::to_string(s.cl_frames) + ',' +
               std::to_string(s.cf_frames) + ',' + std::to_string(s.cs_frames) + ',' +
               std::to_string(s.cr_frames) + ',' + fmt_double(s.discomfort_rate) + ',' +
               std::to_string(int(s.acc_event)) + ',' + std::to_string(int(s.failure)) + '\n';
    }
    out += "aggregate," + fmt_double(rep.mu_ade) + ',' + fmt_double(rep.mu_d2r) + ',' +
           std::to_string(rep.d2r_ge_4m) + ',' + fmt_double(rep.mu_cl) + ',' +
           fmt_double(rep.mu_cf) + ',' + fmt_double(rep.mu_cs) + ',' + fmt_double(rep.mu_cr) +
           ',' + fmt_double(rep.mu_acc) + ',' + std::to_string(rep.acc_ge_2) + ',' +
           std::to_string(rep.failure) + '\n';
    return out;
}

std::string report_json(const EvalReport& rep) {
    nlohmann::json j;
    j["mu_ade"] = rep.mu_ade;
    j["mu_d2r"] = rep.mu_d2r;
    j["d2r_ge_4m"] = rep.d2r_ge_4m;
    j["mu_cl"] = rep.mu_cl;
    j["cl_ge_1"] = rep.cl_ge_1;
    j["mu_acc"] = rep.mu_acc;
    j["acc_ge_2"] = rep.acc_ge_2;
    j["failure"] = rep.failure;
    j["mu_cf"] = rep.mu_cf;
    j["mu_cr"] = rep.mu_cr;
    j["mu_cs"] = rep.mu_cs;
    j["cf_ge_1"] = rep.cf_ge_1;
    j["cr_ge_1"] = rep.cr_ge_1;
    j["cs_ge_1"] = rep.cs_ge_1;
    return j.dump(2) + "\n";
}

}  // namespace softctrl::eval
