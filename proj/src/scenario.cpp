#include "softctrl/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "softctrl/errors.hpp"

namespace softctrl::scene {

using nlohmann::json;

namespace {

const char* kFormatTag = "softctrl-scene-v1";

std::string class_name(AgentClass c) {
    switch (c) {
        case AgentClass::vehicle: return "vehicle";
        case AgentClass::pedestrian: return "pedestrian";
        case AgentClass::cyclist: return "cyclist";
    }
    return "vehicle";
}

AgentClass class_from_name(const std::string& name, const std::string& ctx) {
    if (name == "vehicle") return AgentClass::vehicle;
    if (name == "pedestrian") return AgentClass::pedestrian;
    if (name == "cyclist") return AgentClass::cyclist;
    throw ParseError(ctx + ": unknown agent class '" + name + "'");
}

}  // namespace

void Scenario::validate() const {
    if (num_frames < 2) throw InvariantViolation("scenario " + id + ": num_frames < 2");
    if (!(ego_length > 0.0 && ego_width > 0.0))
        throw InvariantViolation("scenario " + id + ": ego extent must be positive");
    if (static_cast<int>(ego_log.size()) != num_frames)
        throw InvariantViolation("scenario " + id + ": ego_log length " +
                                 std::to_string(ego_log.size()) + " != num_frames " +
                                 std::to_string(num_frames));
    for (int t = 0; t + 1 < num_frames; ++t) {
        const double dth = kin::wrap_angle(ego_log[t + 1].theta - ego_log[t].theta);
        if (!(std::abs(dth) < kin::kPi / 2.0))
            throw InvariantViolation("scenario " + id + ": ego heading jump >= pi/2 at frame " +
                                     std::to_string(t));
    }
    for (const auto& a : agents) {
        if (static_cast<int>(a.frames.size()) != num_frames)
            throw InvariantViolation("scenario " + id + ": agent " + a.id + " track length " +
                                     std::to_string(a.frames.size()) + " != num_frames " +
                                     std::to_string(num_frames));
        for (std::size_t t = 0; t < a.frames.size(); ++t) {
            if (a.frames[t].present && !(a.length > 0.0 && a.width > 0.0))
                throw InvariantViolation("scenario " + id + ": agent " + a.id +
                                         " present with non-positive extent at frame " +
                                         std::to_string(t));
        }
    }
    for (std::size_t i = 0; i < map.size(); ++i) {
        const auto& m = map[i];
        const std::string ctx = "scenario " + id + ": map element " + std::to_string(i);
        if (m.points.size() < 2) throw InvariantViolation(ctx + " has fewer than 2 points");
        for (std::size_t p = 0; p + 1 < m.points.size(); ++p) {
            if (m.points[p] == m.points[p + 1])
                throw InvariantViolation(ctx + " has duplicate consecutive points at " +
                                         std::to_string(p));
        }
        if (!m.signal.empty()) {
            if (m.kind != MapElement::Kind::lane)
                throw InvariantViolation(ctx + ": signal on a non-lane element");
            if (static_cast<int>(m.signal.size()) != num_frames)
                throw InvariantViolation(ctx + ": signal length != num_frames");
        }
    }
}

std::string to_json_string(const Scenario& s) {
    json doc;
    doc["format"] = kFormatTag;
    doc["id"] = s.id;
    doc["num_frames"] = s.num_frames;
    doc["ego_extent"] = {s.ego_length, s.ego_width};
    json log = json::array();
    for (const auto& p : s.ego_log) log.push_back({p.x, p.y, p.theta});
    doc["ego_log"] = std::move(log);
    json agents = json::array();
    for (const auto& a : s.agents) {
        json frames = json::array();
        for (const auto& f : a.frames)
            frames.push_back({f.pose.x, f.pose.y, f.pose.theta, f.present ? 1 : 0});
        agents.push_back({{"id", a.id},
                          {"class", class_name(a.cls)},
                          {"extent", {a.length, a.width}},
                          {"frames", std::move(frames)}});
    }
    doc["agents"] = std::move(agents);
    json map = json::array();
    for (const auto& m : s.map) {
        json el;
        el["kind"] = m.kind == MapElement::Kind::lane ? "lane" : "crosswalk";
        json pts = json::array();
        for (const auto& p : m.points) pts.push_back({p[0], p[1]});
        el["points"] = std::move(pts);
        if (!m.signal.empty()) {
            json sig = json::array();
            for (Signal v : m.signal) sig.push_back(static_cast<int>(v));
            el["signal"] = std::move(sig);
        }
        map.push_back(std::move(el));
    }
    doc["map"] = std::move(map);
    return doc.dump(2) + "\n";
}

Scenario from_json_string(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    Scenario s;
    try {
        if (doc.at("format").get<std::string>() != kFormatTag)
            throw ParseError(origin + ": unsupported format '" +
                             doc.at("format").get<std::string>() + "'");
        s.id = doc.at("id").get<std::string>();
        s.num_frames = doc.at("num_frames").get<int>();
        const auto& ext = doc.at("ego_extent");
        s.ego_length = ext.at(0).get<double>();
        s.ego_width = ext.at(1).get<double>();
        for (const auto& row : doc.at("ego_log"))
            s.ego_log.push_back({row.at(0).get<double>(), row.at(1).get<double>(),
                                 row.at(2).get<double>()});
        for (const auto& ja : doc.at("agents")) {
            AgentTrack a;
            a.id = ja.at("id").get<std::string>();
            a.cls = class_from_name(ja.at("class").get<std::string>(), origin);
            a.length = ja.at("extent").at(0).get<double>();
            a.width = ja.at("extent").at(1).get<double>();
            for (const auto& row : ja.at("frames")) {
                AgentFrame f;
                f.pose = {row.at(0).get<double>(), row.at(1).get<double>(),
                          row.at(2).get<double>()};
                f.present = row.at(3).get<int>() != 0;
                a.frames.push_back(f);
            }
            s.agents.push_back(std::move(a));
        }
        for (const auto& jm : doc.at("map")) {
            MapElement m;
            const auto kind = jm.at("kind").get<std::string>();
            if (kind == "lane")
                m.kind = MapElement::Kind::lane;
            else if (kind == "crosswalk")
                m.kind = MapElement::Kind::crosswalk;
            else
                throw ParseError(origin + ": unknown map kind '" + kind + "'");
            for (const auto& p : jm.at("points"))
                m.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            if (jm.contains("signal"))
                for (const auto& v : jm.at("signal"))
                    m.signal.push_back(static_cast<Signal>(v.get<int>()));
            s.map.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    s.validate();
    return s;
}

Scenario load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str(), path);
}

void save(const Scenario& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path + ": cannot open file for writing");
    out << to_json_string(s);
}

double log_speed_at(const Scenario& s, int frame) {
    const int a = frame == 0 ? 0 : frame - 1;
    const int b = a + 1;
    const kin::LocalPose d = kin::to_local(s.ego_log[a], s.ego_log[b]);
    const double dist = std::sqrt(d.x * d.x + d.y * d.y);
    const double eta = (d.x * std::cos(d.theta) > 0.0) ? 1.0 : -1.0;
    return eta * dist;
}

kin::EgoState log_state_at(const Scenario& s, int frame) {
    return {s.ego_log[frame], log_speed_at(s, frame)};
}

std::vector<kin::Action> expert_actions(const Scenario& s) {
    std::vector<kin::Action> actions;
    actions.reserve(s.num_frames - 1);
    kin::EgoState state = log_state_at(s, 0);
    for (int t = 0; t + 1 < s.num_frames; ++t) {
        const kin::Action a =
            kin::inverse_action(state, kin::to_local(state.pose, s.ego_log[t + 1]));
        actions.push_back(a);
        state = kin::step_forward(state, a);
    }
    return actions;
}

const char* kind_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::red_light_lead: return "red_light_lead";
        case ScenarioKind::t_junction: return "t_junction";
        case ScenarioKind::crossing_pedestrian: return "crossing_pedestrian";
    }
    return "red_light_lead";
}

}  // namespace softctrl::scene
