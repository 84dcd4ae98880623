#include <memory>
#include <utility>

#include "softctrl/agents.hpp"
#include "softctrl/errors.hpp"
#include "softctrl/evalkit.hpp"

namespace softctrl::agents {
namespace {

// Deterministic closed-loop evaluation of the current mean policy. Uses its
// own rng stream so training randomness is untouched by evaluation cadence.
RlEvalRow eval_actor(const nn::ActorNet& actor, const std::vector<scene::Scenario>& scenes,
                     const sim::EnvConfig& env_cfg, long step, double lr, double tau_eff,
                     unsigned long seed) {
    eval::PolicyAgent pa(actor);
    Rng rng(seed);
    std::vector<eval::SceneResult> rows;
    rows.reserve(scenes.size());
    double sum_return = 0.0;
    for (const auto& s : scenes) {
        double ret = 0.0;
        rows.push_back(eval::evaluate_scene(pa, s, env_cfg, rng, &ret));
        sum_return += ret;
    }
    const eval::EvalReport rep = eval::aggregate(std::move(rows));
    RlEvalRow r;
    r.step = step;
    r.mean_return = sum_return / static_cast<double>(scenes.size());
    r.failures = static_cast<int>(rep.failure);
    r.collisions_f = static_cast<int>(rep.cf_ge_1);
    r.collisions_s = static_cast<int>(rep.cs_ge_1);
    r.collisions_r = static_cast<int>(rep.cr_ge_1);
    r.d2r_events = static_cast<int>(rep.d2r_ge_4m);
    r.discomfort_rate = rep.mu_acc;
    r.lr = lr;
    r.tau_eff = tau_eff;
    return r;
}

}  // namespace

TrainRlResult train_rl(const std::vector<scene::Scenario>& train_scenes,
                       const std::vector<scene::Scenario>& eval_scenes,
                       const RlConfig& cfg, const nn::ReferencePolicy& ref,
                       unsigned long seed) {
    if (train_scenes.empty() || eval_scenes.empty()) {
        throw InvariantViolation("train_rl: need non-empty train and eval scene lists");
    }
    cfg.sac.validate();
    if (cfg.total_steps < 0 || cfg.eval_interval <= 0 || cfg.update_every <= 0) {
        throw ConfigError("train_rl: steps/eval_interval/update_every must be positive");
    }

    Rng rng(seed);
    const int obs_dim = cfg.env.obs.dim();
    Eigen::VectorXd a_max(2);
    a_max << cfg.env.limits.steer_max, cfg.env.limits.accel_max;
    SacAgent agent(cfg.sac, obs_dim, a_max, rng);
    agent.init_from_bc(ref.net);
    ReplayBuffer buffer(cfg.buffer_capacity);

    std::unique_ptr<sim::Environment> env;
    Eigen::VectorXd obs;
    auto start_episode = [&] {
        const long si = rng.uniform_int(0, static_cast<long>(train_scenes.size()) - 1);
        const scene::Scenario& sc = train_scenes[static_cast<std::size_t>(si)];
        const long start = rng.uniform_int(0, sc.num_frames - 2);
        env = std::make_unique<sim::Environment>(sc, cfg.env);
        obs = env->reset(static_cast<int>(start));
    };

    TrainRlResult out;
    auto record_eval = [&](long step) {
        const double lr =
            cfg.total_steps > 0 ? cfg.sac.lr_at(step, cfg.total_steps) : cfg.sac.lr_start;
        const RlEvalRow row =
            eval_actor(agent.actor(), eval_scenes, cfg.env, step, lr, agent.tau_eff(), seed);
        const bool better =
            out.log_rows.empty() || row.failures < out.best_failures ||
            (row.failures == out.best_failures && row.discomfort_rate < out.best_discomfort);
        out.log_rows.push_back(row);
        if (better) {
            out.best_actor = agent.actor();
            out.best_step = step;
            out.best_failures = row.failures;
            out.best_discomfort = row.discomfort_rate;
        }
    };
    record_eval(0);
    start_episode();

    const long min_fill = std::max<long>(cfg.sac.batch, cfg.warmup_steps);
    Eigen::MatrixXd act_noise(2, 1);
    Eigen::MatrixXd next_noise(2, cfg.sac.batch), actor_noise(2, cfg.sac.batch);
    for (long step = 0; step < cfg.total_steps; ++step) {
        if (env->done()) start_episode();

        act_noise(0, 0) = rng.normal();
        act_noise(1, 0) = rng.normal();
        const nn::PolicyRollout roll = agent.actor().sample(obs, act_noise);
        const Eigen::VectorXd a = roll.a.col(0);

        Transition tr;
        tr.obs = obs;
        tr.action = a;
        tr.policy_logprob = roll.logp(0);
        tr.ref_logprob = ref.logprob1(obs, a);
        const sim::StepOutcome outc = env->step({a(0), a(1)});
        tr.reward = outc.reward;
        tr.done = outc.done;
        tr.next_obs = outc.observation;
        buffer.insert(std::move(tr));
        obs = outc.observation;

        if (static_cast<long>(buffer.size()) >= min_fill && (step + 1) % cfg.update_every == 0) {
            const double lr = cfg.sac.lr_at(step + 1, cfg.total_steps);
            const auto idx = buffer.sample_indices(rng, cfg.sac.batch);
            const ReplayBuffer::Batch batch = buffer.gather(idx);
            for (int j = 0; j < cfg.sac.batch; ++j) {
                next_noise(0, j) = rng.normal();
                next_noise(1, j) = rng.normal();
            }
            for (int j = 0; j < cfg.sac.batch; ++j) {
                actor_noise(0, j) = rng.normal();
                actor_noise(1, j) = rng.normal();
            }
            agent.update(batch, next_noise, actor_noise, lr);
        }
        if ((step + 1) % cfg.eval_interval == 0) record_eval(step + 1);
    }
    out.final_actor = agent.actor();
    return out;
}

}  // namespace softctrl::agents
