#include <algorithm>
#include <cmath>

#include "softctrl/errors.hpp"
#include "softctrl/rng.hpp"
#include "softctrl/scenario.hpp"

namespace softctrl::scene {

namespace {

// ---------------------------------------------------------------------------
// Small planning helpers. Everything here rolls trajectories forward with
// bounded, comfortable accelerations so that generated logs are feasible and
// discomfort-free by construction.
// ---------------------------------------------------------------------------

constexpr double kComfortAccel = 0.018;   // m/frame^2, under the 0.02 discomfort line
constexpr double kBrakeLatch = 0.011;     // decel envelope that triggers braking

// One step of a latching stop controller: cruise until the deceleration
// required to stop within `remain` reaches kBrakeLatch, then track that
// required deceleration down to an exact standstill. Returns the accel to
// apply this frame; `braking` carries the latch between frames.
double stop_accel(double v, double remain, double cap, bool& braking) {
    if (v <= 0.0) return 0.0;
    if (remain <= v) {
        braking = true;
        return -std::min(v, cap);
    }
    // discrete-time stopping distance v'^2/(2a) - v'/2 inverted for a
    const double need = v * v / (2.0 * remain + v);
    if (!braking && need < kBrakeLatch) return 0.0;
    braking = true;
    return -std::min(cap, need);
}

// Rolls the ego through the real forward model so the produced log is
// invertible to in-bound actions by construction.
struct EgoRoller {
    kin::EgoState st;
    std::vector<kin::Pose> log;
    kin::Limits lim;
    double cap = kComfortAccel;
    bool braking = false;

    EgoRoller(const kin::Pose& start, double v0, const kin::Limits& limits)
        : st{start, v0}, lim(limits) {
        log.push_back(start);
    }

    void push(double steer, double accel) {
        st = kin::step_forward(st, lim.clamp({steer, accel}), lim);
        log.push_back(st.pose);
    }

    double cruise_accel(double v_target) const {
        return std::clamp(v_target - st.speed, -cap, cap);
    }

    // Cruise at v_cruise until `dist` ahead demands braking, then stop there.
    double approach_accel(double dist, double v_cruise) {
        const double a = stop_accel(st.speed, dist, cap, braking);
        if (!braking) return cruise_accel(v_cruise);
        return a;
    }
};

// Straight-line log-playback agent with an optional stop point. Pose at
// frame t is recorded before integrating to t+1; before `appear` the track
// holds its start pose with present=false.
AgentTrack roll_straight(std::string id, AgentClass cls, double len, double wid, double x0,
                         double y0, double theta, double v0, int appear, int frames,
                         double stop_after = -1.0, double cap = 0.014) {
    AgentTrack a;
    a.id = std::move(id);
    a.cls = cls;
    a.length = len;
    a.width = wid;
    double x = x0, y = y0, v = v0, traveled = 0.0;
    bool braking = false;
    const double cth = std::cos(theta), sth = std::sin(theta);
    for (int t = 0; t < frames; ++t) {
        a.frames.push_back({{x, y, theta}, t >= appear});
        if (t < appear) continue;
        double acc = 0.0;
        if (stop_after >= 0.0) acc = stop_accel(v, stop_after - traveled, cap, braking);
        v = std::max(0.0, v + acc);
        x += v * cth;
        y += v * sth;
        traveled += v;
    }
    return a;
}

double clamp01(double t) { return std::clamp(t, 0.0, 1.0); }

// Minimum distance between segments AB and CD (Ericson, Real-Time Collision
// Detection, 5.1.9 adapted to 2-D).
double seg_seg_dist(double ax, double ay, double bx, double by, double cx, double cy, double dx,
                    double dy) {
    const double d1x = bx - ax, d1y = by - ay;
    const double d2x = dx - cx, d2y = dy - cy;
    const double rx = ax - cx, ry = ay - cy;
    const double A = d1x * d1x + d1y * d1y;
    const double E = d2x * d2x + d2y * d2y;
    const double F = d2x * rx + d2y * ry;
    double s = 0.0, t = 0.0;
    if (A <= 1e-12 && E <= 1e-12) {
        // both degenerate: point-point
    } else if (A <= 1e-12) {
        t = clamp01(F / E);
    } else {
        const double C = d1x * rx + d1y * ry;
        if (E <= 1e-12) {
            s = clamp01(-C / A);
        } else {
            const double B = d1x * d2x + d1y * d2y;
            const double denom = A * E - B * B;
            s = denom > 1e-12 ? clamp01((B * F - C * E) / denom) : 0.0;
            t = clamp01((B * s + F) / E);
            s = clamp01((B * t - C) / A);
        }
    }
    const double px = ax + d1x * s - (cx + d2x * t);
    const double py = ay + d1y * s - (cy + d2y * t);
    return std::sqrt(px * px + py * py);
}

// Conservative capsule cover of an oriented box: segment of length len-wid
// along the heading, radius wid/sqrt(2) (covers the corners exactly).
struct Capsule {
    double ax, ay, bx, by, r;
};

Capsule box_capsule(const kin::Pose& p, double len, double wid) {
    const double half = std::max(0.0, (len - wid) / 2.0);
    const double cx = std::cos(p.theta), sy = std::sin(p.theta);
    return {p.x - half * cx, p.y - half * sy, p.x + half * cx, p.y + half * sy,
            wid / std::sqrt(2.0)};
}

// Smallest ego-to-agent capsule clearance over all frames where the agent is
// present. Used only as a generation-time safety gate; the simulator owns the
// exact collision predicate.
double min_clearance(const Scenario& s) {
    double best = 1e9;
    for (int t = 0; t < s.num_frames; ++t) {
        const Capsule e = box_capsule(s.ego_log[t], s.ego_length, s.ego_width);
        for (const auto& a : s.agents) {
            if (!a.frames[t].present) continue;
            const Capsule c = box_capsule(a.frames[t].pose, a.length, a.width);
            const double d =
                seg_seg_dist(e.ax, e.ay, e.bx, e.by, c.ax, c.ay, c.bx, c.by) - e.r - c.r;
            best = std::min(best, d);
        }
    }
    return best;
}

MapElement lane_x(double y, double x_from, double x_to, std::vector<Signal> signal = {}) {
    MapElement m;
    m.kind = MapElement::Kind::lane;
    const double step = x_to > x_from ? 10.0 : -10.0;
    for (double x = x_from; (x_to - x) * step > 0.0; x += step) m.points.push_back({x, y});
    m.points.push_back({x_to, y});
    m.signal = std::move(signal);
    return m;
}

MapElement lane_y(double x, double y_from, double y_to, std::vector<Signal> signal = {}) {
    MapElement m;
    m.kind = MapElement::Kind::lane;
    const double step = y_to > y_from ? 10.0 : -10.0;
    for (double y = y_from; (y_to - y) * step > 0.0; y += step) m.points.push_back({x, y});
    m.points.push_back({x, y_to});
    m.signal = std::move(signal);
    return m;
}

MapElement crosswalk_at(double x, double half_span) {
    MapElement m;
    m.kind = MapElement::Kind::crosswalk;
    m.points = {{x, -half_span}, {x, 0.0}, {x, half_span}};
    return m;
}

// ---------------------------------------------------------------------------
// Archetypes
// ---------------------------------------------------------------------------

// Ego follows a braking lead vehicle up to a red signal and queues behind it.
Scenario gen_red_light(Rng& rng, int frames, const kin::Limits& lim) {
    Scenario s;
    s.num_frames = frames;

    const double v0 = rng.uniform(0.95, 1.30);
    const double stop_line = rng.uniform(55.0, 75.0);
    const double lead_len = rng.uniform(4.3, 4.9);
    const double lead_wid = rng.uniform(1.8, 2.0);
    const double lead_x0 = rng.uniform(16.0, 24.0);
    const double lead_v0 = v0 + rng.uniform(-0.05, 0.10);
    const double gap_final = rng.uniform(2.2, 3.6);

    const double lead_stop_c = stop_line - 1.0 - lead_len / 2.0;
    const double ego_stop_c = lead_stop_c - lead_len / 2.0 - gap_final - s.ego_length / 2.0;

    s.agents.push_back(roll_straight("lead", AgentClass::vehicle, lead_len, lead_wid, lead_x0,
                                     0.0, 0.0, lead_v0, 0, frames, lead_stop_c - lead_x0));

    EgoRoller r({0.0, 0.0, 0.0}, v0, lim);
    for (int t = 0; t + 1 < frames; ++t)
        r.push(0.0, r.approach_accel(ego_stop_c - r.st.pose.x, v0));
    s.ego_log = r.log;

    // follower queues behind the ego
    const double fol_gap = rng.uniform(2.8, 4.5);
    const double fol_x0 = -rng.uniform(9.0, 13.0);
    const double fol_stop = ego_stop_c - s.ego_length / 2.0 - fol_gap - 4.5 / 2.0;
    s.agents.push_back(roll_straight("follower", AgentClass::vehicle, 4.5, 1.85, fol_x0, 0.0,
                                     0.0, v0, 0, frames, fol_stop - fol_x0));

    // opposing traffic, one car entering mid-segment
    s.agents.push_back(roll_straight("oncoming-1", AgentClass::vehicle, rng.uniform(4.2, 4.8),
                                     1.9, stop_line + rng.uniform(25.0, 45.0), 3.8, kin::kPi,
                                     rng.uniform(1.0, 1.4), 0, frames));
    s.agents.push_back(roll_straight("oncoming-2", AgentClass::vehicle, rng.uniform(4.2, 4.8),
                                     1.9, stop_line + rng.uniform(55.0, 75.0), 3.8, kin::kPi,
                                     rng.uniform(1.0, 1.4),
                                     static_cast<int>(rng.uniform_int(30, 70)), frames));

    // cross traffic on its green
    s.agents.push_back(roll_straight("cross-1", AgentClass::vehicle, 4.6, 1.9, stop_line + 4.0,
                                     -rng.uniform(30.0, 40.0), kin::kPi / 2.0,
                                     rng.uniform(0.9, 1.2), 0, frames));

    const int n_parked = static_cast<int>(rng.uniform_int(2, 4));
    double px = rng.uniform(8.0, 14.0);
    for (int k = 0; k < n_parked; ++k) {
        s.agents.push_back(roll_straight("parked-" + std::to_string(k + 1),
                                         AgentClass::vehicle, rng.uniform(4.2, 4.8), 1.85, px,
                                         -3.8, 0.0, 0.0, 0, frames));
        px += rng.uniform(9.0, 15.0);
    }

    s.map.push_back(lane_x(0.0, -10.0, stop_line,
                           std::vector<Signal>(frames, Signal::red)));
    s.map.push_back(lane_x(0.0, stop_line + 8.0, stop_line + 68.0));
    s.map.push_back(lane_x(3.8, stop_line + 60.0, -10.0));
    s.map.push_back(lane_y(stop_line + 4.0, -40.0, 40.0,
                           std::vector<Signal>(frames, Signal::green)));
    s.map.push_back(crosswalk_at(stop_line + 1.5, 4.0));
    return s;
}

// Ego slows and takes an exact +pi/2 left turn at a junction with through,
// left and right continuations; cross traffic clears the box early.
Scenario gen_t_junction(Rng& rng, int frames, const kin::Limits& lim) {
    Scenario s;
    s.num_frames = frames;

    const double v_cruise = rng.uniform(0.85, 1.10);
    const double v_turn = rng.uniform(0.55, 0.75);
    const double rate = rng.uniform(0.055, 0.085);
    const double x_turn = rng.uniform(38.0, 55.0);

    const double slow_len =
        (v_cruise * v_cruise - v_turn * v_turn) / (2.0 * 0.012) + 5.0;

    EgoRoller r({0.0, 0.0, 0.0}, v_cruise, lim);
    double turned = 0.0;
    for (int t = 0; t + 1 < frames; ++t) {
        if (turned >= kin::kPi / 2.0 - 1e-12) {
            r.push(0.0, r.cruise_accel(v_cruise));  // northbound exit
        } else if (r.st.pose.theta > 0.0 || r.st.pose.x >= x_turn) {
            const double steer = std::min(rate, kin::kPi / 2.0 - turned);
            turned += steer;
            r.push(steer, r.cruise_accel(v_turn));
        } else {
            const double v_tgt = r.st.pose.x >= x_turn - slow_len ? v_turn : v_cruise;
            r.push(0.0, r.cruise_accel(v_tgt));
        }
    }
    s.ego_log = r.log;

    // abscissa of the northbound exit, read off the rolled log so the map
    // matches the discrete arc (falls back to the continuous estimate when
    // the segment is too short to finish the turn)
    double branch_x = x_turn + v_turn / rate;
    if (std::abs(kin::wrap_angle(r.log.back().theta - kin::kPi / 2.0)) < 1e-9)
        branch_x = r.log.back().x;

    // oncoming car clears the junction long before the ego arrives
    s.agents.push_back(roll_straight("oncoming-1", AgentClass::vehicle, rng.uniform(4.2, 4.8),
                                     1.9, branch_x + rng.uniform(18.0, 30.0), 3.8, kin::kPi,
                                     rng.uniform(1.15, 1.40), 0, frames));
    // southbound cross car: crosses the ego's straight continuation early
    s.agents.push_back(roll_straight("crosser", AgentClass::vehicle, 4.4, 1.85,
                                     branch_x - 3.8, rng.uniform(22.0, 32.0), -kin::kPi / 2.0,
                                     rng.uniform(1.0, 1.25), 0, frames));
    // northbound car waiting at the junction mouth
    const double yield_y0 = -rng.uniform(14.0, 20.0);
    s.agents.push_back(roll_straight("yield", AgentClass::vehicle, 4.4, 1.85, branch_x,
                                     yield_y0, kin::kPi / 2.0, rng.uniform(0.5, 0.7), 0, frames,
                                     -4.5 - yield_y0));
    // queue behind the ego on the approach
    s.agents.push_back(roll_straight("follower", AgentClass::vehicle, 4.5, 1.85,
                                     -rng.uniform(10.0, 14.0), 0.0, 0.0, v_cruise, 0, frames,
                                     x_turn - rng.uniform(6.0, 10.0)));
    s.agents.push_back(roll_straight("cyclist", AgentClass::cyclist, 1.8, 0.6,
                                     -rng.uniform(4.0, 8.0), -2.9, 0.0,
                                     rng.uniform(0.35, 0.50), 0, frames));

    const int n_parked = static_cast<int>(rng.uniform_int(2, 3));
    double px = rng.uniform(6.0, 12.0);
    for (int k = 0; k < n_parked; ++k) {
        s.agents.push_back(roll_straight("parked-" + std::to_string(k + 1),
                                         AgentClass::vehicle, rng.uniform(4.2, 4.8), 1.85, px,
                                         -4.6, 0.0, 0.0, 0, frames));
        px += rng.uniform(10.0, 16.0);
    }

    s.map.push_back(lane_x(0.0, -10.0, x_turn));                    // approach
    s.map.push_back(lane_x(0.0, branch_x + 5.7, branch_x + 60.0));  // through
    s.map.push_back(lane_y(branch_x, -40.0, 60.0));                 // left turn target
    s.map.push_back(lane_y(branch_x - 3.8, 60.0, -40.0));           // right turn target
    s.map.push_back(lane_x(3.8, branch_x + 50.0, -10.0));           // opposing
    s.map.push_back(crosswalk_at(x_turn - 3.0, 4.0));
    return s;
}

// Pedestrian crosses over the ego reference line; ego brakes short of the
// crosswalk until the walker clears, then resumes.
Scenario gen_crossing(Rng& rng, int frames, const kin::Limits& lim) {
    Scenario s;
    s.num_frames = frames;

    const double v0 = rng.uniform(0.95, 1.25);
    // place the crosswalk beyond the comfortable braking distance
    const double x_cw = v0 * v0 / 0.030 + 6.0 + rng.uniform(2.0, 12.0);
    const double ped_y0 = -rng.uniform(6.5, 8.0);
    const double v_ped = rng.uniform(0.10, 0.14);
    const int appear = static_cast<int>(rng.uniform_int(12, 45));
    const double ped_x = x_cw + rng.uniform(-0.6, 0.6);
    const double stop_c = x_cw - rng.uniform(4.5, 6.0);

    const int t_clear =
        appear + static_cast<int>(std::ceil((4.2 - ped_y0) / v_ped));

    EgoRoller r({0.0, 0.0, 0.0}, v0, lim);
    for (int t = 0; t + 1 < frames; ++t) {
        if (t < t_clear) {
            r.push(0.0, r.approach_accel(stop_c - r.st.pose.x, v0));
        } else {
            r.braking = false;
            r.push(0.0, r.cruise_accel(v0));
        }
    }
    s.ego_log = r.log;

    s.agents.push_back(roll_straight("ped", AgentClass::pedestrian, 0.5, 0.5, ped_x, ped_y0,
                                     kin::kPi / 2.0, v_ped, appear, frames));
    s.agents.push_back(roll_straight("oncoming-1", AgentClass::vehicle, rng.uniform(4.2, 4.8),
                                     1.9, x_cw + rng.uniform(15.0, 30.0), 3.8, kin::kPi, 1.2, 0,
                                     frames));
    s.agents.push_back(roll_straight("oncoming-2", AgentClass::vehicle, rng.uniform(4.2, 4.8),
                                     1.9, x_cw + rng.uniform(30.0, 45.0), 3.8, kin::kPi, 1.3,
                                     static_cast<int>(rng.uniform_int(20, 40)), frames));

    const int n_parked = static_cast<int>(rng.uniform_int(2, 4));
    double px = rng.uniform(6.0, 12.0);
    for (int k = 0; k < n_parked; ++k) {
        s.agents.push_back(roll_straight("parked-" + std::to_string(k + 1),
                                         AgentClass::vehicle, rng.uniform(4.2, 4.8), 1.85, px,
                                         -3.8, 0.0, 0.0, 0, frames));
        px += rng.uniform(9.0, 15.0);
    }

    s.map.push_back(lane_x(0.0, -10.0, x_cw + 70.0));
    s.map.push_back(lane_x(3.8, x_cw + 70.0, -10.0));
    s.map.push_back(crosswalk_at(x_cw, 5.0));
    return s;
}

}  // namespace

Scenario generate(ScenarioKind kind, std::uint64_t seed, const kin::Limits& limits,
                  int num_frames) {
    limits.validate();
    for (int attempt = 0; attempt < 32; ++attempt) {
        Rng rng(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(kind) * 0x9e3779b9ULL +
                static_cast<std::uint64_t>(attempt));
        Scenario s;
        switch (kind) {
            case ScenarioKind::red_light_lead: s = gen_red_light(rng, num_frames, limits); break;
            case ScenarioKind::t_junction: s = gen_t_junction(rng, num_frames, limits); break;
            case ScenarioKind::crossing_pedestrian: s = gen_crossing(rng, num_frames, limits); break;
        }
        if (min_clearance(s) < 0.55) continue;
        s.id = std::string(kind_name(kind)) + "-s" + std::to_string(seed);
        s.validate();
        return s;
    }
    throw InvariantViolation("generate: no clearance-safe layout found for " +
                             std::string(kind_name(kind)) + " seed " + std::to_string(seed));
}

}  // namespace softctrl::scene
