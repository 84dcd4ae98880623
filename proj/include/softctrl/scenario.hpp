#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "softctrl/kinematics.hpp"

namespace softctrl::scene {

enum class AgentClass { vehicle, pedestrian, cyclist };
enum class Signal { none = 0, green = 1, red = 2 };

struct AgentFrame {
    kin::Pose pose;
    bool present = false;
};

struct AgentTrack {
    std::string id;
    AgentClass cls = AgentClass::vehicle;
    double length = 0.0;  // m, box extent along heading
    double width = 0.0;   // m
    std::vector<AgentFrame> frames;  // one entry per scenario frame
};

struct MapElement {
    enum class Kind { lane, crosswalk };
    Kind kind = Kind::lane;
    std::vector<std::array<double, 2>> points;  // >= 2, consecutive distinct
    std::vector<Signal> signal;                 // lanes only; empty or per-frame
};

// A log-playback scene: static map, replayed agent tracks, and the recorded
// ego trajectory that serves as the imitation reference.
struct Scenario {
    std::string id;
    int num_frames = 250;
    double ego_length = 4.5;
    double ego_width = 1.9;
    std::vector<kin::Pose> ego_log;
    std::vector<AgentTrack> agents;
    std::vector<MapElement> map;

    // Throws InvariantViolation naming the first failed invariant.
    void validate() const;
};

Scenario load(const std::string& path);
void save(const Scenario& s, const std::string& path);

std::string to_json_string(const Scenario& s);
Scenario from_json_string(const std::string& text, const std::string& origin = "<string>");

enum class ScenarioKind { red_light_lead, t_junction, crossing_pedestrian };

const char* kind_name(ScenarioKind k);

// Deterministic synthetic scene for the given archetype and seed. The ego log
// is rolled through the forward model, so every consecutive pose pair is
// invertible to an in-bound action.
Scenario generate(ScenarioKind kind, std::uint64_t seed,
                  const kin::Limits& limits = kin::Limits{}, int num_frames = 250);

// Signed speed carried into `frame`, recovered from the log displacement.
// Frame 0 uses the 0->1 displacement as its surrogate.
double log_speed_at(const Scenario& s, int frame);

kin::EgoState log_state_at(const Scenario& s, int frame);

// Recovers the per-frame actions that transport the ego along its log.
// Replaying them through step_forward from frame 0 reproduces ego_log.
std::vector<kin::Action> expert_actions(const Scenario& s);

}  // namespace softctrl::scene
