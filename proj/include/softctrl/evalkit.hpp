#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "softctrl/kinematics.hpp"
#include "softctrl/neuralnet.hpp"
#include "softctrl/rng.hpp"
#include "softctrl/scenario.hpp"
#include "softctrl/simulator.hpp"

namespace softctrl::eval {

inline constexpr double kFrameSeconds = 0.1;
// Exact 1/dt^2 so 0.02 m/frame^2 converts to exactly 2 m/s^2.
inline constexpr double kAccelToMps2 = 100.0;
// Off-road event fires strictly above this distance to the reference line.
inline constexpr double kD2rEventMeters = 4.0;
// Discomfort counts frames at or above this commanded |accel|.
inline constexpr double kDiscomfortMps2 = 2.0;

// Mean per-frame L2 distance between two equal-length position sequences.
// Throws LengthMismatch.
double ade(const std::vector<Eigen::Vector2d>& pred, const std::vector<Eigen::Vector2d>& ref);

// Minimum distance from a point to the nearest segment of a polyline
// (>= 2 points; zero-length segments degrade to point distances).
double d2r(const Eigen::Vector2d& point, const std::vector<Eigen::Vector2d>& polyline);

// Fraction of entries with |a| >= kDiscomfortMps2. Input in m/s^2; empty -> 0.
double discomfort(const std::vector<double>& accel_mps2);

// A closed-loop controller under evaluation. The rng is threaded through for
// stochastic agents; the bundled agents are deterministic and ignore it.
struct Agent {
    virtual ~Agent() = default;
    virtual kin::Action act(const Eigen::VectorXd& obs, const sim::Environment& env,
                            Rng& rng) = 0;
};

// Replays the logged expert action for the environment's current frame.
class ExpertAgent : public Agent {
  public:
    kin::Action act(const Eigen::VectorXd& obs, const sim::Environment& env,
                    Rng& rng) override;

  private:
    const scene::Scenario* cached_ = nullptr;
    std::vector<kin::Action> actions_;
};

// Drives with the actor's deterministic mean action.
class PolicyAgent : public Agent {
  public:
    explicit PolicyAgent(const nn::ActorNet& actor) : actor_(&actor) {}
    kin::Action act(const Eigen::VectorXd& obs, const sim::Environment& env,
                    Rng& rng) override;

  private:
    const nn::ActorNet* actor_;
};

struct SceneResult {
    std::string id;
    double ade = 0.0;
    double d2r_max = 0.0;
    bool d2r_event = false;
    long cl_frames = 0;  // frames with any contact; == cf + cs + cr
    long cf_frames = 0;
    long cs_frames = 0;
    long cr_frames = 0;
    bool cl_event = false;
    bool cf_event = false;
    bool cs_event = false;
    bool cr_event = false;
    double discomfort_rate = 0.0;
    bool acc_event = false;
    bool failure = false;  // d2r_event || cl_event
};

struct EvalReport {
    std::vector<SceneResult> scenes;
    // per-scene totals divided by the number of scenes
    double mu_ade = 0.0;
    double mu_d2r = 0.0;
    double mu_cl = 0.0;
    double mu_cf = 0.0;
    double mu_cs = 0.0;
    double mu_cr = 0.0;
    double mu_acc = 0.0;
    // scene counts per event flag
    long d2r_ge_4m = 0;
    long cl_ge_1 = 0;
    long cf_ge_1 = 0;
    long cs_ge_1 = 0;
    long cr_ge_1 = 0;
    long acc_ge_2 = 0;
    long failure = 0;
};

// Full-segment rollout from frame 0, no intervention on failures.
// return_sum, when given, receives the undiscounted reward total.
SceneResult evaluate_scene(Agent& agent, const scene::Scenario& s, const sim::EnvConfig& cfg,
                           Rng& rng, double* return_sum = nullptr);

EvalReport aggregate(std::vector<SceneResult> scenes);

EvalReport evaluate(Agent& agent, const std::vector<scene::Scenario>& scenarios,
                    const sim::EnvConfig& cfg, unsigned long seed);

// One row per scene plus a trailing aggregate row.
std::string report_csv(const EvalReport& report);

// Summary object keyed by the report column names.
std::string report_json(const EvalReport& report);

}  // namespace softctrl::eval
