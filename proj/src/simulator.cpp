#include "softctrl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "softctrl/errors.hpp"
#include "softctrl/io_util.hpp"

namespace softctrl::sim {

const char* collision_name(CollisionClass c) {
    switch (c) {
        case CollisionClass::front: return "front";
        case CollisionClass::side: return "side";
        case CollisionClass::rear: return "rear";
    }
    return "front";
}

Obb make_obb(const kin::Pose& pose, double length, double width) {
    return {pose.x, pose.y, std::cos(pose.theta), std::sin(pose.theta), length / 2.0,
            width / 2.0};
}

namespace {

// Signed SAT margin: smallest projected overlap across the four candidate
// axes. Negative means a separating axis exists.
double obb_margin(const Obb& a, const Obb& b) {
    const double dx = b.cx - a.cx;
    const double dy = b.cy - a.cy;
    const double axes[4][2] = {{a.c, a.s}, {-a.s, a.c}, {b.c, b.s}, {-b.s, b.c}};
    double margin = 1e300;
    for (const auto& u : axes) {
        const double ra =
            a.hl * std::abs(u[0] * a.c + u[1] * a.s) + a.hw * std::abs(-u[0] * a.s + u[1] * a.c);
        const double rb =
            b.hl * std::abs(u[0] * b.c + u[1] * b.s) + b.hw * std::abs(-u[0] * b.s + u[1] * b.c);
        margin = std::min(margin, ra + rb - std::abs(dx * u[0] + dy * u[1]));
    }
    return margin;
}

}  // namespace

bool obb_overlap(const Obb& a, const Obb& b) { return obb_margin(a, b) >= 0.0; }

std::optional<CollisionEvent> detect_collision(const Scenario& s, const kin::EgoState& ego,
                                               int frame) {
    const Obb ego_box = make_obb(ego.pose, s.ego_length, s.ego_width);
    for (const auto& a : s.agents) {
        if (!a.frames[frame].present) continue;
        const Obb box = make_obb(a.frames[frame].pose, a.length, a.width);
        if (!obb_overlap(ego_box, box)) continue;
        const kin::LocalPose rel = kin::to_local(ego.pose, a.frames[frame].pose);
        const double bearing = std::abs(std::atan2(rel.y, rel.x));
        CollisionClass cls = CollisionClass::side;
        if (bearing <= kin::kPi / 4.0) cls = CollisionClass::front;
        else if (bearing >= 3.0 * kin::kPi / 4.0) cls = CollisionClass::rear;
        return CollisionEvent{frame, cls, a.id};
    }
    return std::nullopt;
}

std::pair<double, RewardTerms> compute_reward(const kin::EgoState& ego, const kin::Pose& gt,
                                              std::optional<CollisionClass> collision,
                                              const RewardWeights& w) {
    RewardTerms t;
    const double dx = ego.pose.x - gt.x;
    const double dy = ego.pose.y - gt.y;
    t.dist = -std::min(std::sqrt(dx * dx + dy * dy), 20.0);
    t.yaw = -std::abs(kin::wrap_angle(ego.pose.theta - gt.theta));
    if (collision) {
        if (*collision == CollisionClass::front) t.cf = -1.0;
        else if (*collision == CollisionClass::side) t.cs = -1.0;
        else t.cr = -1.0;
    }
    const double total =
        w.dist * t.dist + w.yaw * t.yaw + w.cf * t.cf + w.cs * t.cs + w.cr * t.cr;
    return {total, t};
}

// ---------------------------------------------------------------------------
// Observation construction
// ---------------------------------------------------------------------------

Eigen::VectorXd build_observation(const Scenario& s, const ObsLayout& layout, int frame,
                                  const std::deque<kin::EgoState>& history) {
    if (history.empty()) throw InvariantViolation("build_observation: empty ego history");
    const kin::EgoState& cur = history.back();
    const double ps = layout.pos_scale;
    Eigen::VectorXd obs = Eigen::VectorXd::Zero(layout.dim());
    int at = 0;

    // ego history, newest first
    for (int i = 0; i < layout.H; ++i) {
        const int idx = static_cast<int>(history.size()) - 1 - i;
        if (idx >= 0) {
            const kin::EgoState& st = history[idx];
            const kin::LocalPose rel = kin::to_local(cur.pose, st.pose);
            obs[at + 0] = rel.x * ps;
            obs[at + 1] = rel.y * ps;
            obs[at + 2] = rel.theta;
            obs[at + 3] = st.speed;
            obs[at + 4] = 1.0;
        }
        at += 5;
    }

    // K nearest present agents
    struct Near {
        double d2;
        std::size_t idx;
    };
    std::vector<Near> near;
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        if (!s.agents[i].frames[frame].present) continue;
        const kin::LocalPose rel = kin::to_local(cur.pose, s.agents[i].frames[frame].pose);
        near.push_back({rel.x * rel.x + rel.y * rel.y, i});
    }
    std::stable_sort(near.begin(), near.end(),
                     [](const Near& a, const Near& b) { return a.d2 < b.d2; });
    for (int k = 0; k < layout.K && k < static_cast<int>(near.size()); ++k) {
        const AgentTrack& a = s.agents[near[k].idx];
        const kin::LocalPose rel = kin::to_local(cur.pose, a.frames[frame].pose);
        double speed = 0.0;
        if (frame > 0 && a.frames[frame - 1].present) {
            const double mx = a.frames[frame].pose.x - a.frames[frame - 1].pose.x;
            const double my = a.frames[frame].pose.y - a.frames[frame - 1].pose.y;
            speed = std::sqrt(mx * mx + my * my);
        }
        const int base = at + k * 8;
        obs[base + 0] = rel.x * ps;
        obs[base + 1] = rel.y * ps;
        obs[base + 2] = std::cos(rel.theta);
        obs[base + 3] = std::sin(rel.theta);
        obs[base + 4] = speed;
        obs[base + 5] = a.length;
        obs[base + 6] = a.width;
        obs[base + 7] = 1.0;
    }
    at += layout.K * 8;

    // nearest map elements: window of P consecutive points around the closest
    struct NearEl {
        double d2;
        std::size_t idx;
        int window;
    };
    auto pick = [&](MapElement::Kind kind) {
        std::vector<NearEl> out;
        for (std::size_t i = 0; i < s.map.size(); ++i) {
            if (s.map[i].kind != kind) continue;
            const auto& pts = s.map[i].points;
            double best = 1e300;
            int best_j = 0;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                const double dx = pts[j][0] - cur.pose.x;
                const double dy = pts[j][1] - cur.pose.y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    best_j = static_cast<int>(j);
                }
            }
            const int n = static_cast<int>(pts.size());
            const int start = std::clamp(best_j - layout.P / 2, 0, std::max(0, n - layout.P));
            out.push_back({best, i, start});
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const NearEl& a, const NearEl& b) { return a.d2 < b.d2; });
        return out;
    };

    const auto lanes = pick(MapElement::Kind::lane);
    for (int m = 0; m < layout.M; ++m) {
        const int base = at + m * (layout.P * 3 + 3);
        if (m >= static_cast<int>(lanes.size())) continue;
        const MapElement& el = s.map[lanes[m].idx];
        const int n = static_cast<int>(el.points.size());
        for (int p = 0; p < layout.P; ++p) {
            const int j = lanes[m].window + p;
            if (j >= n) break;
            const kin::LocalPose rel =
                kin::to_local(cur.pose, {el.points[j][0], el.points[j][1], 0.0});
            obs[base + p * 3 + 0] = rel.x * ps;
            obs[base + p * 3 + 1] = rel.y * ps;
            obs[base + p * 3 + 2] = 1.0;
        }
        const Signal sig = el.signal.empty() ? Signal::none : el.signal[frame];
        obs[base + layout.P * 3 + static_cast<int>(sig)] = 1.0;
    }
    at += layout.M * (layout.P * 3 + 3);

    const auto walks = pick(MapElement::Kind::crosswalk);
    for (int c = 0; c < layout.C; ++c) {
        const int base = at + c * layout.P * 3;
        if (c >= static_cast<int>(walks.size())) continue;
        const MapElement& el = s.map[walks[c].idx];
        const int n = static_cast<int>(el.points.size());
        for (int p = 0; p < layout.P; ++p) {
            const int j = walks[c].window + p;
            if (j >= n) break;
            const kin::LocalPose rel =
                kin::to_local(cur.pose, {el.points[j][0], el.points[j][1], 0.0});
            obs[base + p * 3 + 0] = rel.x * ps;
            obs[base + p * 3 + 1] = rel.y * ps;
            obs[base + p * 3 + 2] = 1.0;
        }
    }

    return obs;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

Environment::Environment(const Scenario& s, EnvConfig cfg) : scenario_(&s), cfg_(cfg) {
    cfg_.limits.validate();
    s.validate();
}

Eigen::VectorXd Environment::reset(int start_frame) {
    if (start_frame < 0 || start_frame + cfg_.min_horizon > scenario_->num_frames)
        throw OutOfRange("reset: start_frame " + std::to_string(start_frame) +
                         " leaves no horizon in " + std::to_string(scenario_->num_frames) +
                         " frames");
    frame_ = start_frame;
    start_ = start_frame;
    ego_ = scene::log_state_at(*scenario_, start_frame);
    history_.clear();
    for (int f = std::max(0, start_frame - cfg_.obs.H + 1); f <= start_frame; ++f)
        history_.push_back(scene::log_state_at(*scenario_, f));
    trace_.clear();
    live_ = true;
    return observe();
}

Eigen::VectorXd Environment::observe() const {
    return build_observation(*scenario_, cfg_.obs, frame_, history_);
}

StepOutcome Environment::step(const kin::Action& action) {
    if (!live_) throw SteppedAfterDone("step: environment was never reset");
    if (done()) throw SteppedAfterDone("step: episode already finished");

    const kin::Action applied = cfg_.limits.clamp(action);
    ego_ = kin::step_forward(ego_, applied, cfg_.limits);
    ++frame_;
    history_.push_back(ego_);
    while (static_cast<int>(history_.size()) > cfg_.obs.H) history_.pop_front();

    StepOutcome out;
    out.collision = detect_collision(*scenario_, ego_, frame_);
    std::optional<CollisionClass> cls;
    if (out.collision) cls = out.collision->cls;
    const auto [reward, terms] =
        compute_reward(ego_, scenario_->ego_log[frame_], cls, cfg_.reward);
    out.reward = reward;
    out.terms = terms;
    out.done = done();
    out.ego = ego_;
    out.observation = observe();

    trace_.push_back({frame_, ego_, applied, terms, cls});
    return out;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::string out = "frame,x,y,theta,speed,steer,accel,r_dist,r_yaw,collision_class\n";
    for (const auto& r : trace) {
        out += std::to_string(r.frame);
        out += ',';
        out += fmt_double(r.ego.pose.x);
        out += ',';
        out += fmt_double(r.ego.pose.y);
        out += ',';
        out += fmt_double(r.ego.pose.theta);
        out += ',';
        out += fmt_double(r.ego.speed);
        out += ',';
        out += fmt_double(r.action.steer);
        out += ',';
        out += fmt_double(r.action.accel);
        out += ',';
        out += fmt_double(r.terms.dist);
        out += ',';
        out += fmt_double(r.terms.yaw);
        out += ',';
        out += r.collision ? collision_name(*r.collision) : "none";
        out += '\n';
    }
    return out;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(path + ": cannot open file for writing");
    f << trace_to_csv(trace);
}

}  // namespace softctrl::sim
