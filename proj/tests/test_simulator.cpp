#include <doctest.h>

#include <cmath>
#include <deque>
#include <vector>

#include "softctrl/errors.hpp"
#include "softctrl/rng.hpp"
#include "softctrl/scenario.hpp"
#include "softctrl/simulator.hpp"

using namespace softctrl;
using namespace softctrl::scene;
using namespace softctrl::sim;

namespace {

Scenario stationary_scene(int frames, kin::Pose pose) {
    Scenario s;
    s.id = "still";
    s.num_frames = frames;
    s.ego_log.assign(frames, pose);
    return s;
}

// Rigid transform of the whole scene: rotate by dth about the origin, then
// translate by (dx, dy).
Scenario transform_scene(const Scenario& src, double dx, double dy, double dth) {
    const double c = std::cos(dth), sn = std::sin(dth);
    auto map_pose = [&](const kin::Pose& p) {
        return kin::Pose{c * p.x - sn * p.y + dx, sn * p.x + c * p.y + dy,
                         kin::wrap_angle(p.theta + dth)};
    };
    Scenario s = src;
    for (auto& p : s.ego_log) p = map_pose(p);
    for (auto& a : s.agents)
        for (auto& f : a.frames) f.pose = map_pose(f.pose);
    for (auto& m : s.map)
        for (auto& pt : m.points) {
            const double x = c * pt[0] - sn * pt[1] + dx;
            const double y = sn * pt[0] + c * pt[1] + dy;
            pt = {x, y};
        }
    return s;
}

bool point_in_obb(double x, double y, const Obb& b) {
    const double dx = x - b.cx, dy = y - b.cy;
    const double u = dx * b.c + dy * b.s;
    const double v = -dx * b.s + dy * b.c;
    return std::abs(u) <= b.hl && std::abs(v) <= b.hw;
}

// Dense point-sampling containment oracle for box overlap.
bool sampled_overlap(const Obb& a, const Obb& b) {
    const int n = 80;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const double u = -a.hl + 2.0 * a.hl * i / n;
            const double v = -a.hw + 2.0 * a.hw * j / n;
            if (point_in_obb(a.cx + u * a.c - v * a.s, a.cy + u * a.s + v * a.c, b)) return true;
            const double p = -b.hl + 2.0 * b.hl * i / n;
            const double q = -b.hw + 2.0 * b.hw * j / n;
            if (point_in_obb(b.cx + p * b.c - q * b.s, b.cy + p * b.s + q * b.c, a)) return true;
        }
    return false;
}

double sat_margin(const Obb& a, const Obb& b) {
    const double dx = b.cx - a.cx, dy = b.cy - a.cy;
    const double axes[4][2] = {{a.c, a.s}, {-a.s, a.c}, {b.c, b.s}, {-b.s, b.c}};
    double m = 1e300;
    for (const auto& u : axes) {
        const double ra =
            a.hl * std::abs(u[0] * a.c + u[1] * a.s) + a.hw * std::abs(-u[0] * a.s + u[1] * a.c);
        const double rb =
            b.hl * std::abs(u[0] * b.c + u[1] * b.s) + b.hw * std::abs(-u[0] * b.s + u[1] * b.c);
        m = std::min(m, ra + rb - std::abs(dx * u[0] + dy * u[1]));
    }
    return m;
}

Obb random_obb(Rng& rng) {
    const kin::Pose p{rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0),
                      rng.uniform(-kin::kPi, kin::kPi)};
    return make_obb(p, rng.uniform(1.0, 5.0), rng.uniform(0.5, 2.5));
}

}  // namespace

TEST_CASE("obb_overlap agrees with a dense point-sampling oracle") {
    Rng rng(31415);
    int checked = 0, overlaps = 0;
    for (int i = 0; i < 10000; ++i) {
        const Obb a = random_obb(rng);
        const Obb b = random_obb(rng);
        if (std::abs(sat_margin(a, b)) < 0.1) continue;  // below sampling resolution
        const bool sat = obb_overlap(a, b);
        const bool oracle = sampled_overlap(a, b);
        CHECK(sat == oracle);
        ++checked;
        overlaps += sat ? 1 : 0;
    }
    CHECK(checked > 9000);      // the margin filter must stay a corner case
    CHECK(overlaps > 500);      // both outcomes well represented
    CHECK(overlaps < checked - 500);
}

TEST_CASE("obb_overlap: touching boxes count as contact") {
    const Obb a = make_obb({0, 0, 0}, 4.0, 2.0);
    const Obb b = make_obb({4.0, 0, 0}, 4.0, 2.0);   // faces exactly meet
    const Obb c = make_obb({4.01, 0, 0}, 4.0, 2.0);  // 1 cm apart
    CHECK(obb_overlap(a, b));
    CHECK_FALSE(obb_overlap(a, c));
}

TEST_CASE("detect_collision: bearing taxonomy") {
    Scenario s = stationary_scene(2, {0, 0, 0});
    AgentTrack a;
    a.id = "other";
    a.length = 4.0;
    a.width = 2.0;
    a.frames.assign(2, {{0, 0, 0}, true});
    s.agents.push_back(a);
    const kin::EgoState ego{{0, 0, 0}, 0.0};
    auto at = [&](double x, double y) {
        s.agents[0].frames[0].pose = {x, y, 0.0};
        return detect_collision(s, ego, 0);
    };

    SUBCASE("dead ahead is front") {
        auto ev = at(3.0, 0.0);
        REQUIRE(ev.has_value());
        CHECK(ev->cls == CollisionClass::front);
        CHECK(ev->other_agent == "other");
        CHECK(ev->frame == 0);
    }
    SUBCASE("dead behind is rear") {
        auto ev = at(-3.0, 0.0);
        REQUIRE(ev.has_value());
        CHECK(ev->cls == CollisionClass::rear);
    }
    SUBCASE("abeam is side") {
        auto ev = at(0.0, 1.8);
        REQUIRE(ev.has_value());
        CHECK(ev->cls == CollisionClass::side);
    }
    SUBCASE("exact 45 degree bearing resolves to front") {
        auto ev = at(1.9, 1.9);
        REQUIRE(ev.has_value());
        CHECK(ev->cls == CollisionClass::front);
    }
    SUBCASE("exact 135 degree bearing resolves to rear") {
        auto ev = at(-1.9, 1.9);
        REQUIRE(ev.has_value());
        CHECK(ev->cls == CollisionClass::rear);
    }
    SUBCASE("three ego lengths ahead is no contact") {
        CHECK_FALSE(at(13.5, 0.0).has_value());
    }
}

TEST_CASE("compute_reward: weighted term arithmetic") {
    const kin::Pose gt{10.0, -4.0, 0.3};

    SUBCASE("on the log, matched heading, clean") {
        auto [r, t] = compute_reward({gt, 0.5}, gt, std::nullopt);
        CHECK(r == 0.0);
        CHECK(t.dist == 0.0);
        CHECK(t.yaw == 0.0);
    }
    SUBCASE("3 m displacement with frontal contact scores -23") {
        auto [r, t] = compute_reward({{gt.x + 3.0, gt.y, gt.theta}, 0.5}, gt,
                                     CollisionClass::front);
        CHECK(r == doctest::Approx(-23.0).epsilon(1e-12));
        CHECK(t.dist == doctest::Approx(-3.0));
        CHECK(t.cf == -1.0);
        CHECK(t.cs == 0.0);
    }
    SUBCASE("50 m displacement clips r_dist at -20") {
        auto [r, t] = compute_reward({{gt.x + 50.0, gt.y, gt.theta}, 0.5}, gt, std::nullopt);
        CHECK(t.dist == -20.0);
        CHECK(r == doctest::Approx(-20.0));
    }
    SUBCASE("pure 0.5 rad heading error scores -0.5") {
        auto [r, t] = compute_reward({{gt.x, gt.y, gt.theta + 0.5}, 0.5}, gt, std::nullopt);
        CHECK(r == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(t.yaw == doctest::Approx(-0.5));
    }
    SUBCASE("yaw error wraps") {
        auto [r, t] =
            compute_reward({{gt.x, gt.y, gt.theta + 2.0 * kin::kPi - 0.25}, 0.5}, gt,
                           std::nullopt);
        CHECK(t.yaw == doctest::Approx(-0.25).epsilon(1e-9));
        (void)r;
    }
}

TEST_CASE("compute_reward: decomposition and bounds hold on random inputs") {
    Rng rng(99);
    const RewardWeights w;
    for (int i = 0; i < 2000; ++i) {
        const kin::Pose gt{rng.uniform(-30, 30), rng.uniform(-30, 30),
                           rng.uniform(-kin::kPi, kin::kPi)};
        const kin::EgoState ego{{rng.uniform(-60, 60), rng.uniform(-60, 60),
                                 rng.uniform(-kin::kPi, kin::kPi)},
                                0.0};
        std::optional<CollisionClass> cls;
        const auto roll = rng.uniform_int(0, 3);
        if (roll == 1) cls = CollisionClass::front;
        if (roll == 2) cls = CollisionClass::side;
        if (roll == 3) cls = CollisionClass::rear;
        auto [r, t] = compute_reward(ego, gt, cls, w);
        CHECK(r == w.dist * t.dist + w.yaw * t.yaw + w.cf * t.cf + w.cs * t.cs + w.cr * t.cr);
        CHECK(t.dist >= -20.0);
        CHECK(t.dist <= 0.0);
        CHECK(t.yaw >= -kin::kPi);
        CHECK(t.yaw <= 0.0);
        for (double term : {t.cf, t.cs, t.cr}) CHECK((term == 0.0 || term == -1.0));
    }
}

TEST_CASE("observation: default layout dimension") {
    const ObsLayout layout;
    CHECK(layout.dim() == 227);
}

TEST_CASE("observation: reset at frame 0 of a stationary scene") {
    Scenario s = stationary_scene(5, {3.0, -2.0, 0.7});
    Environment env(s);
    const Eigen::VectorXd obs = env.reset(0);
    REQUIRE(obs.size() == 227);
    // history slot 0 is the current frame: zeros plus presence
    for (int i = 0; i < 4; ++i) CHECK(obs[i] == 0.0);
    CHECK(obs[4] == 1.0);
    // deeper history does not exist yet
    for (int i = 5; i < 25; ++i) CHECK(obs[i] == 0.0);
    // no agents, no map: everything else is zero
    for (int i = 25; i < 227; ++i) CHECK(obs[i] == 0.0);
}

TEST_CASE("observation: reset is deterministic") {
    Scenario s = generate(ScenarioKind::red_light_lead, 5);
    Environment env(s);
    const Eigen::VectorXd a = env.reset(40);
    const Eigen::VectorXd b = env.reset(40);
    REQUIRE(a.size() == b.size());
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("observation: nearest-agent ordering matches a brute-force sort") {
    Rng rng(7);
    Scenario s = stationary_scene(3, {0, 0, 0});
    for (int i = 0; i < 14; ++i) {
        AgentTrack a;
        a.id = "a" + std::to_string(i);
        a.length = rng.uniform(3.5, 5.0);
        a.width = rng.uniform(1.6, 2.0);
        const kin::Pose p{rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0),
                          rng.uniform(-kin::kPi, kin::kPi)};
        a.frames.assign(3, {p, true});
        s.agents.push_back(a);
    }
    Environment env(s);
    const Eigen::VectorXd obs = env.reset(0);

    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < 14; ++i) {
        const auto& p = s.agents[i].frames[0].pose;
        order.push_back({p.x * p.x + p.y * p.y, i});
    }
    std::stable_sort(order.begin(), order.end());
    const ObsLayout layout;
    for (int k = 0; k < layout.K; ++k) {
        const auto& p = s.agents[order[k].second].frames[0].pose;
        const int base = 25 + k * 8;
        CHECK(obs[base + 0] == doctest::Approx(p.x * layout.pos_scale).epsilon(1e-12));
        CHECK(obs[base + 1] == doctest::Approx(p.y * layout.pos_scale).epsilon(1e-12));
        CHECK(obs[base + 5] == s.agents[order[k].second].length);
        CHECK(obs[base + 7] == 1.0);
    }
}

TEST_CASE("environment: expert replay is reward-null on generated scenes") {
    for (ScenarioKind k : {ScenarioKind::red_light_lead, ScenarioKind::t_junction,
                           ScenarioKind::crossing_pedestrian}) {
        CAPTURE(kind_name(k));
        Scenario s = generate(k, 13);
        Environment env(s);
        env.reset(0);
        const auto acts = expert_actions(s);
        int steps = 0;
        for (const auto& a : acts) {
            const StepOutcome out = env.step(a);
            ++steps;
            CHECK(std::abs(out.reward) <= 1e-6);
            CHECK_FALSE(out.collision.has_value());
        }
        CHECK(steps == s.num_frames - 1);
        CHECK(env.done());
        CHECK_THROWS_AS(env.step({0, 0}), SteppedAfterDone);
    }
}

TEST_CASE("environment: episode length follows the start frame") {
    Scenario s = generate(ScenarioKind::crossing_pedestrian, 3);
    Environment env(s);
    env.reset(100);
    int steps = 0;
    while (!env.done()) {
        env.step({0.0, 0.0});
        ++steps;
    }
    CHECK(steps == s.num_frames - 100 - 1);
}

TEST_CASE("environment: reset range checks") {
    Scenario s = stationary_scene(10, {0, 0, 0});
    Environment env(s);
    CHECK_THROWS_AS(env.reset(-1), OutOfRange);
    CHECK_THROWS_AS(env.reset(9), OutOfRange);
    CHECK_THROWS_AS(env.reset(100), OutOfRange);
    CHECK_NOTHROW(env.reset(8));  // exactly one step left
    env.step({0, 0});
    CHECK(env.done());
    Environment fresh(s);
    CHECK_THROWS_AS(fresh.step({0, 0}), SteppedAfterDone);
}

TEST_CASE("environment: observations are invariant to rigid scene motion") {
    const Scenario s = generate(ScenarioKind::t_junction, 21);
    const Scenario moved = transform_scene(s, 137.0, -48.0, 2.1);
    Environment a(s), b(moved);
    Eigen::VectorXd oa = a.reset(0);
    Eigen::VectorXd ob = b.reset(0);
    CHECK((oa - ob).cwiseAbs().maxCoeff() <= 1e-9);
    const auto acts = expert_actions(s);
    for (int t = 0; t < 120; ++t) {
        oa = a.step(acts[t]).observation;
        ob = b.step(acts[t]).observation;
        CAPTURE(t);
        CHECK((oa - ob).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("environment: collision terms feed the reward") {
    // ego driven straight into a parked car dead ahead
    Scenario s = stationary_scene(40, {0, 0, 0});
    AgentTrack block;
    block.id = "wall";
    block.length = 4.0;
    block.width = 2.0;
    block.frames.assign(40, {{8.0, 0.0, 0.0}, true});
    s.agents.push_back(block);
    Environment env(s);
    env.reset(0);
    bool hit = false;
    for (int t = 0; t < 39; ++t) {
        const StepOutcome out = env.step({0.0, 0.06});
        if (out.collision) {
            hit = true;
            CHECK(out.collision->cls == CollisionClass::front);
            CHECK(out.terms.cf == -1.0);
            // -20*cf plus the displacement error accrued so far
            CHECK(out.reward ==
                  doctest::Approx(out.terms.dist + out.terms.yaw - 20.0).epsilon(1e-12));
            break;
        }
    }
    CHECK(hit);
}

TEST_CASE("trace export: header, rows, and determinism") {
    Scenario s = generate(ScenarioKind::red_light_lead, 2);
    const auto acts = expert_actions(s);
    auto run = [&]() {
        Environment env(s);
        env.reset(0);
        for (int t = 0; t < 25; ++t) env.step(acts[t]);
        return trace_to_csv(env.trace());
    };
    const std::string csv = run();
    CHECK(csv.substr(0, csv.find('\n')) ==
          "frame,x,y,theta,speed,steer,accel,r_dist,r_yaw,collision_class");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 26);
    CHECK(csv == run());
    CHECK(csv.find(",none") != std::string::npos);
}
