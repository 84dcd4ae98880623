#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "softctrl/kinematics.hpp"
#include "softctrl/scenario.hpp"

namespace softctrl::sim {

using scene::AgentTrack;
using scene::MapElement;
using scene::Scenario;
using scene::Signal;

// Vectorized observation layout. All positions are expressed in the current
// ego frame and multiplied by pos_scale so the tanh nets downstream see O(1)
// inputs. Slot order inside the flat vector:
//   ego history  H x [x, y, dtheta, speed, present]          newest first
//   agents       K x [x, y, cos dth, sin dth, speed, length, width, present]
//   lanes        M x (P x [x, y, present] + signal one-hot [none, green, red])
//   crosswalks   C x P x [x, y, present]
// Absent slots are zero-filled with presence 0.
struct ObsLayout {
    int H = 5;  // ego history depth
    int K = 8;  // nearest agents
    int M = 6;  // nearest lanes
    int P = 5;  // polyline points per map element
    int C = 2;  // nearest crosswalks
    double pos_scale = 0.1;

    int dim() const { return H * 5 + K * 8 + M * (P * 3 + 3) + C * P * 3; }
};

enum class CollisionClass { front, side, rear };

const char* collision_name(CollisionClass c);

struct CollisionEvent {
    int frame = 0;
    CollisionClass cls = CollisionClass::front;
    std::string other_agent;
};

struct RewardWeights {
    double dist = 1.0;
    double yaw = 1.0;
    double cf = 20.0;
    double cs = 20.0;
    double cr = 20.0;
};

struct RewardTerms {
    double dist = 0.0;  // -min(||p - p_gt||, 20)
    double yaw = 0.0;   // -|wrapped heading error|
    double cf = 0.0;    // -1 on frontal contact
    double cs = 0.0;
    double cr = 0.0;
};

struct StepOutcome {
    Eigen::VectorXd observation;
    double reward = 0.0;
    RewardTerms terms;
    std::optional<CollisionEvent> collision;
    bool done = false;
    kin::EgoState ego;
};

// Oriented bounding box in the plane.
struct Obb {
    double cx = 0.0, cy = 0.0;  // center
    double c = 1.0, s = 0.0;    // heading cosine/sine
    double hl = 0.0, hw = 0.0;  // half extents along/acrosss heading
};

Obb make_obb(const kin::Pose& pose, double length, double width);

// Separating-axis overlap test; touching boxes count as overlapping.
bool obb_overlap(const Obb& a, const Obb& b);

// First overlapping agent (scenario order) classified by the bearing of its
// center in the ego frame: |bearing| <= 45deg front, >= 135deg rear, else
// side; boundaries resolve toward front/rear.
std::optional<CollisionEvent> detect_collision(const Scenario& s, const kin::EgoState& ego,
                                               int frame);

std::pair<double, RewardTerms> compute_reward(const kin::EgoState& ego, const kin::Pose& gt,
                                              std::optional<CollisionClass> collision,
                                              const RewardWeights& w = RewardWeights{});

struct EnvConfig {
    ObsLayout obs;
    RewardWeights reward;
    kin::Limits limits;
    int min_horizon = 2;  // smallest number of frames left after reset
};

// Per-step trace row for CSV export.
struct TraceRow {
    int frame = 0;
    kin::EgoState ego;
    kin::Action action;
    RewardTerms terms;
    std::optional<CollisionClass> collision;
};

// Closed-loop environment over an immutable scenario. Agents replay their
// logs; the ego integrates the unicycle model; the episode always runs to the
// final frame regardless of collisions.
class Environment {
  public:
    explicit Environment(const Scenario& s, EnvConfig cfg = EnvConfig{});

    Eigen::VectorXd reset(int start_frame = 0);
    StepOutcome step(const kin::Action& action);

    bool done() const { return frame_ >= scenario_->num_frames - 1; }
    int frame() const { return frame_; }
    int start_frame() const { return start_; }
    const kin::EgoState& ego() const { return ego_; }
    const Scenario& scenario() const { return *scenario_; }
    const EnvConfig& config() const { return cfg_; }
    const std::vector<TraceRow>& trace() const { return trace_; }

    Eigen::VectorXd observe() const;

  private:
    const Scenario* scenario_;
    EnvConfig cfg_;
    int frame_ = 0;
    int start_ = 0;
    bool live_ = false;
    kin::EgoState ego_;
    std::deque<kin::EgoState> history_;  // most recent last, size <= H
    std::vector<TraceRow> trace_;
};

// Observation for an arbitrary ego state against a scenario frame. `history`
// holds past ego states, most recent last (the current state included).
Eigen::VectorXd build_observation(const Scenario& s, const ObsLayout& layout, int frame,
                                  const std::deque<kin::EgoState>& history);

std::string trace_to_csv(const std::vector<TraceRow>& trace);
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace softctrl::sim
