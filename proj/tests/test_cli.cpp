#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "softctrl/commands.hpp"
#include "softctrl/config.hpp"
#include "softctrl/errors.hpp"
#include "softctrl/rng.hpp"

using namespace softctrl;
using namespace softctrl::cli;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(bool(is));
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

const std::string& work_root() {
    static const std::string root = [] {
        const std::string dir = (fs::temp_directory_path() / "softctrl_test_cli").string();
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return root;
}

// Narrow observation so the tiny runs stay around a second.
const char* kObsKeys =
    "env.obs.h = 2\n"
    "env.obs.k = 2\n"
    "env.obs.m = 2\n"
    "env.obs.p = 2\n"
    "env.obs.c = 1\n";

// One shared 3-scene suite plus a BC checkpoint trained on it.
const std::string& scenes_dir() {
    static const std::string dir = [] {
        const std::string d = work_root() + "/scenes";
        cfg::Config c = cfg::Config::from_string(
            "seed = 0\ngen.kind = mixed\ngen.count = 3\ngen.num_frames = 40\n");
        c.set("out", d);
        std::ostringstream sink;
        REQUIRE(cmd_gen(c, sink) == 0);
        return d;
    }();
    return dir;
}

const std::string& bc_ckpt() {
    static const std::string path = [] {
        const std::string out = work_root() + "/bc";
        cfg::Config c = cfg::Config::from_string(std::string("seed = 0\n") + kObsKeys +
                                                 "bc.epochs = 2\nbc.batch = 128\n");
        c.set("out", out);
        c.set("scenarios.dir", scenes_dir());
        std::ostringstream sink;
        REQUIRE(cmd_train_bc(c, sink) == 0);
        return out + "/bc.ckpt";
    }();
    return path;
}

std::string rl_keys(long steps, long interval) {
    return std::string(kObsKeys) + "seed = 0\nsac.variant = imkl\nsac.batch = 16\n" +
           "rl.total_steps = " + std::to_string(steps) +
           "\nrl.eval_interval = " + std::to_string(interval) +
           "\nrl.warmup_steps = 10\nrl.update_every = 3\nrl.buffer_capacity = 256\n";
}

}  // namespace

TEST_CASE("config: parsing, getters and errors") {
    const cfg::Config c = cfg::Config::from_string(
        "# comment\n"
        "\n"
        "seed = 7\n"
        "sac.tau=1.5\n"
        "  rl.total_steps   =  40  \n"
        "name = hello world\n"
        "flag_on = true\n"
        "flag_off = 0\n",
        "inline");
    CHECK(c.integer("seed", 0) == 7);
    CHECK(c.num("sac.tau", 0.0) == 1.5);
    CHECK(c.integer("rl.total_steps", 0) == 40);
    CHECK(c.str("name", "") == "hello world");
    CHECK(c.flag("flag_on", false));
    CHECK_FALSE(c.flag("flag_off", true));
    CHECK(c.num("absent", 2.5) == 2.5);
    CHECK_FALSE(c.has("absent"));
    CHECK_THROWS_WITH_AS(std::ignore = c.require("bc.checkpoint"),
                         doctest::Contains("bc.checkpoint"), ConfigError);
    CHECK_THROWS_WITH_AS(std::ignore = c.num("name", 0.0), doctest::Contains("name"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(std::ignore = c.integer("sac.tau", 0), doctest::Contains("1.5"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(std::ignore = c.flag("seed", false), doctest::Contains("boolean"),
                         ConfigError);

    CHECK_THROWS_WITH_AS(cfg::Config::from_string("just words\n", "f.cfg"),
                         doctest::Contains("f.cfg:1"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg::Config::from_string("a = 1\na = 2\n"),
                         doctest::Contains("duplicate key 'a'"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg::Config::from_string("= 3\n"), doctest::Contains("empty key"),
                         ConfigError);
}

TEST_CASE("config: unused tracking, overrides and canonical serialization") {
    cfg::Config c = cfg::Config::from_string("zeta = 1\nalpha = 2\nmid = 3\n");
    std::ignore = c.integer("alpha", 0);
    const auto extra = c.unused();
    REQUIRE(extra.size() == 2);
    CHECK(extra[0] == "mid");
    CHECK(extra[1] == "zeta");
    CHECK_THROWS_WITH_AS(reject_unknown(c), doctest::Contains("'zeta'"), ConfigError);

    c.set("alpha", "9");
    CHECK(c.integer("alpha", 0) == 9);
    CHECK(c.serialize() == "alpha = 9\nmid = 3\nzeta = 1\n");
    const cfg::Config round = cfg::Config::from_string(c.serialize());
    CHECK(round.serialize() == c.serialize());
}

TEST_CASE("builders: defaults, weight re-parametrization and range checks") {
    const cfg::Config empty;
    const agents::SacConfig def = sac_from_config(empty);
    CHECK(def.tau == 1.2);
    CHECK(def.alpha == 0.4);
    CHECK(def.variant == agents::Variant::imkl);
    const agents::RlConfig rdef = rl_from_config(empty);
    CHECK(rdef.total_steps == 50000);
    CHECK(rdef.eval_interval == 1000);
    CHECK(rdef.update_every == 3);
    CHECK(rdef.env.obs.dim() == 227);

    // (w_h, w_kl) -> tau = w_h + w_kl, alpha = w_kl / tau.
    const cfg::Config w = cfg::Config::from_string("sac.w_h = 0.72\nsac.w_kl = 0.48\n");
    const agents::SacConfig sw = sac_from_config(w);
    CHECK(sw.tau == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(sw.alpha == doctest::Approx(0.4).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(sac_from_config(cfg::Config::from_string("sac.w_h = 0.5\n")),
                         doctest::Contains("together"), ConfigError);

    CHECK_THROWS_AS(sac_from_config(cfg::Config::from_string("sac.gamma = 1\n")), ConfigError);
    CHECK_THROWS_AS(sac_from_config(cfg::Config::from_string("sac.variant = ppo\n")),
                    ConfigError);
    CHECK_THROWS_AS(rl_from_config(cfg::Config::from_string("rl.update_every = 0\n")),
                    ConfigError);
    CHECK_THROWS_AS(rl_from_config(cfg::Config::from_string("rl.buffer_capacity = -5\n")),
                    ConfigError);
    CHECK_THROWS_AS(bc_from_config(cfg::Config::from_string("bc.epochs = 0\n")), ConfigError);
    CHECK_THROWS_AS(bc_from_config(cfg::Config::from_string("bc.perturb_prob = 1.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(env_from_config(cfg::Config::from_string("env.obs.p = 1\n")), ConfigError);
    CHECK_THROWS_AS(env_from_config(cfg::Config::from_string("env.limits.steer_max = 2\n")),
                    ConfigError);
}

TEST_CASE("checkpoints: actor and bc round trips are bit-exact") {
    Rng rng(11);
    Eigen::VectorXd a_max(2);
    a_max << 0.3, 0.06;
    nn::ActorNet actor(9, a_max, {12, 7}, {6});
    actor.init(rng);

    nn::Checkpoint ck = pack_actor(actor);
    stamp(ck, "imkl", 42, "seed = 42\n");
    const std::string path = work_root() + "/actor_rt.ckpt";
    ck.save(path);
    const nn::Checkpoint back = nn::Checkpoint::load(path);
    CHECK(back.meta.at("variant") == "imkl");
    CHECK(back.meta.at("seed") == "42");
    CHECK(back.meta.at("config_fnv1a") == nn::fnv1a_hex("seed = 42\n"));
    CHECK(back.meta.at("params_fnv1a").size() == 16);

    const nn::ActorNet re = unpack_actor(back);
    CHECK((re.enc.params().array() == actor.enc.params().array()).all());
    CHECK((re.head.params().array() == actor.head.params().array()).all());
    CHECK((re.a_max().array() == actor.a_max().array()).all());
    Eigen::VectorXd obs(9);
    for (int i = 0; i < 9; ++i) obs(i) = rng.normal();
    CHECK((re.mean_action(obs).array() == actor.mean_action(obs).array()).all());

    // Content hash covers the tensors: nudging one parameter changes it.
    nn::Checkpoint ck2 = pack_actor(actor);
    ck2.tensors.at("head.params")[0] += 1e-9;
    stamp(ck2, "imkl", 42, "seed = 42\n");
    CHECK(ck2.meta.at("params_fnv1a") != ck.meta.at("params_fnv1a"));
    CHECK(ck2.meta.at("config_fnv1a") == ck.meta.at("config_fnv1a"));

    nn::BcNet bc(9, 2, {10}, {5});
    bc.init(rng);
    const nn::BcNet bcr = unpack_bc(pack_bc(bc));
    CHECK((bcr.enc.params().array() == bc.enc.params().array()).all());
    CHECK((bcr.head.params().array() == bc.head.params().array()).all());

    CHECK_THROWS_AS(std::ignore = unpack_actor(pack_bc(bc)), ParseError);
    CHECK_THROWS_AS(std::ignore = unpack_bc(pack_actor(actor)), ParseError);
}

TEST_CASE("cmd_gen: deterministic files that pass scenario validation") {
    const std::string d1 = work_root() + "/gen_a";
    const std::string d2 = work_root() + "/gen_b";
    cfg::Config c = cfg::Config::from_string(
        "seed = 5\ngen.kind = mixed\ngen.count = 12\ngen.num_frames = 40\n");
    std::ostringstream sink;
    c.set("out", d1);
    REQUIRE(cmd_gen(c, sink) == 0);
    c.set("out", d2);
    REQUIRE(cmd_gen(c, sink) == 0);

    const auto suite = load_suite(d1);  // scene::load validates every file
    REQUIRE(suite.size() == 12);
    for (int i = 0; i < 12; ++i) {
        const std::string f = "/scene_" + std::string(i < 10 ? "00" : "0") + std::to_string(i) +
                              ".json";
        CHECK(read_file(d1 + f) == read_file(d2 + f));
    }
    // Mixed cycling gives three distinct archetypes.
    CHECK(suite[0].id != suite[1].id);
    CHECK(suite[1].id != suite[2].id);

    const cfg::Config r = cfg::Config::from_file(d1 + "/resolved.cfg");
    CHECK(r.integer("gen.count", 0) == 12);
    CHECK(r.str("gen.kind", "") == "mixed");

    c.set("gen.count", "0");
    CHECK_THROWS_AS(cmd_gen(c, sink), ConfigError);
    c.set("gen.count", "2");
    c.set("gen.kind", "roundabout");
    CHECK_THROWS_WITH_AS(cmd_gen(c, sink), doctest::Contains("roundabout"), ConfigError);
}

TEST_CASE("cmd_train_bc: loss curve, checkpoint metadata and determinism") {
    std::ignore = bc_ckpt();  // built once by the fixture
    const std::string out = work_root() + "/bc";
    const std::string losses = read_file(out + "/bc_loss.csv");
    CHECK(losses.substr(0, 10) == "epoch,nll\n");
    CHECK(std::count(losses.begin(), losses.end(), '\n') == 3);  // header + 2 epochs

    const nn::Checkpoint ck = nn::Checkpoint::load(out + "/bc.ckpt");
    CHECK(ck.meta.at("variant") == "bc");
    CHECK(ck.meta.at("seed") == "0");
    const nn::BcNet net = unpack_bc(ck);
    CHECK(net.enc.in_dim() == 50);  // h2 k2 m2 p2 c1 layout

    // Same config into a fresh directory: checkpoint tensors are identical.
    const std::string out2 = work_root() + "/bc_again";
    cfg::Config c = cfg::Config::from_string(std::string("seed = 0\n") + kObsKeys +
                                             "bc.epochs = 2\nbc.batch = 128\n");
    c.set("out", out2);
    c.set("scenarios.dir", scenes_dir());
    std::ostringstream sink;
    REQUIRE(cmd_train_bc(c, sink) == 0);
    const nn::Checkpoint ck2 = nn::Checkpoint::load(out2 + "/bc.ckpt");
    CHECK(ck2.meta.at("params_fnv1a") == ck.meta.at("params_fnv1a"));
    CHECK(read_file(out2 + "/bc_loss.csv") == losses);
}

TEST_CASE("cmd_train_rl: missing checkpoint error names the path") {
    cfg::Config c = cfg::Config::from_string(rl_keys(30, 30));
    c.set("out", work_root() + "/rl_missing");
    c.set("scenarios.dir", scenes_dir());
    c.set("bc.checkpoint", "/nowhere/bc.ckpt");
    std::ostringstream sink;
    CHECK_THROWS_WITH_AS(cmd_train_rl(c, sink), doctest::Contains("/nowhere/bc.ckpt"),
                         ConfigError);
}

TEST_CASE("cmd_train_rl: zero-step run checkpoints the BC-initialized actor") {
    const std::string out = work_root() + "/rl_zero";
    cfg::Config c = cfg::Config::from_string(rl_keys(0, 30));
    c.set("out", out);
    c.set("scenarios.dir", scenes_dir());
    c.set("bc.checkpoint", bc_ckpt());
    std::ostringstream sink;
    REQUIRE(cmd_train_rl(c, sink) == 0);

    const std::string log = read_file(out + "/train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 2);  // header + step 0

    const nn::ActorNet got = unpack_actor(nn::Checkpoint::load(out + "/actor_final.ckpt"));
    Rng rng(0);
    Eigen::VectorXd a_max(2);
    a_max << 0.3, 0.06;
    const agents::RlConfig rlc = rl_from_config(cfg::Config::from_string(rl_keys(0, 30)));
    agents::SacAgent mirror(rlc.sac, rlc.env.obs.dim(), a_max, rng);
    mirror.init_from_bc(unpack_bc(nn::Checkpoint::load(bc_ckpt())));
    CHECK((got.enc.params().array() == mirror.actor().enc.params().array()).all());
    CHECK((got.head.params().array() == mirror.actor().head.params().array()).all());
}

TEST_CASE("cmd_train_rl: log shape and byte-identical reruns") {
    const std::string out1 = work_root() + "/rl_a";
    const std::string out2 = work_root() + "/rl_b";
    cfg::Config c = cfg::Config::from_string(rl_keys(60, 20));
    c.set("scenarios.dir", scenes_dir());
    c.set("bc.checkpoint", bc_ckpt());
    std::ostringstream sink;
    c.set("out", out1);
    REQUIRE(cmd_train_rl(c, sink) == 0);
    c.set("out", out2);
    REQUIRE(cmd_train_rl(c, sink) == 0);

    const std::string log = read_file(out1 + "/train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 5);  // header + 60/20 + 1 rows
    CHECK(log == read_file(out2 + "/train_log.csv"));
    CHECK(read_file(out1 + "/eval_report.json") == read_file(out2 + "/eval_report.json"));
    CHECK(nn::Checkpoint::load(out1 + "/actor_final.ckpt").meta.at("params_fnv1a") ==
          nn::Checkpoint::load(out2 + "/actor_final.ckpt").meta.at("params_fnv1a"));

    const cfg::Config r = cfg::Config::from_file(out1 + "/resolved.cfg");
    CHECK(r.integer("rl.total_steps", 0) == 60);
    CHECK(r.str("sac.variant", "") == "imkl");
    CHECK(r.num("sac.tau", 0.0) == 1.2);
}

TEST_CASE("cmd_eval: report files and obs-dim guard") {
    const std::string out = work_root() + "/ev";
    cfg::Config c = cfg::Config::from_string(std::string("seed = 0\n") + kObsKeys);
    c.set("out", out);
    c.set("scenarios.dir", scenes_dir());
    c.set("eval.checkpoint", work_root() + "/rl_a/actor_best.ckpt");
    std::ostringstream sink;
    REQUIRE(cmd_eval(c, sink) == 0);

    const auto j = nlohmann::json::parse(read_file(out + "/eval_report.json"));
    CHECK(j.size() == 14);
    CHECK(j.contains("mu_ade"));
    CHECK(j.contains("failure"));
    const std::string csv = read_file(out + "/eval_report.csv");
    CHECK(csv.substr(0, 6) == "scene,");
    CHECK(csv.find("\naggregate,") != std::string::npos);

    cfg::Config bad = cfg::Config::from_string("seed = 0\n");  // default 227-dim obs
    bad.set("out", work_root() + "/ev_bad");
    bad.set("scenarios.dir", scenes_dir());
    bad.set("eval.checkpoint", work_root() + "/rl_a/actor_best.ckpt");
    CHECK_THROWS_WITH_AS(cmd_eval(bad, sink), doctest::Contains("obs dim"), ConfigError);
}

TEST_CASE("cmd_sweep: one value reproduces a single train-rl run") {
    const std::string out = work_root() + "/sw";
    cfg::Config c = cfg::Config::from_string(rl_keys(30, 30) +
                                             "sweep.axis = w_kl\nsweep.values = 0.48\n");
    c.set("out", out);
    c.set("scenarios.dir", scenes_dir());
    c.set("bc.checkpoint", bc_ckpt());
    std::ostringstream sink;
    REQUIRE(cmd_sweep(c, sink) == 0);

    const std::string combined = read_file(out + "/sweep.csv");
    CHECK(std::count(combined.begin(), combined.end(), '\n') == 2);
    CHECK(combined.substr(0, 6) == "value,");
    CHECK(combined.find("0.48,") != std::string::npos);

    // Direct run with the same effective config (w_kl = 0.48 of tau 1.2 is the
    // default split, so plain keys reproduce it).
    const std::string direct = work_root() + "/sw_direct";
    cfg::Config d = cfg::Config::from_string(rl_keys(30, 30));
    d.set("out", direct);
    d.set("scenarios.dir", scenes_dir());
    d.set("bc.checkpoint", bc_ckpt());
    REQUIRE(cmd_train_rl(d, sink) == 0);

    const std::string sub = out + "/w_kl_0.48";
    CHECK(read_file(sub + "/train_log.csv") == read_file(direct + "/train_log.csv"));
    CHECK(read_file(sub + "/eval_report.json") == read_file(direct + "/eval_report.json"));
    CHECK(nn::Checkpoint::load(sub + "/actor_best.ckpt").meta.at("params_fnv1a") ==
          nn::Checkpoint::load(direct + "/actor_best.ckpt").meta.at("params_fnv1a"));

    cfg::Config badaxis = cfg::Config::from_string(rl_keys(30, 30) +
                                                   "sweep.axis = lr\nsweep.values = 1\n");
    badaxis.set("out", out);
    badaxis.set("scenarios.dir", scenes_dir());
    badaxis.set("bc.checkpoint", bc_ckpt());
    CHECK_THROWS_WITH_AS(cmd_sweep(badaxis, sink), doctest::Contains("lr"), ConfigError);
}

TEST_CASE("cmd_verify: all oracle lines pass") {
    std::ostringstream os;
    CHECK(cmd_verify(os) == 0);
    const std::string text = os.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
    std::size_t passes = 0, pos = 0;
    while ((pos = text.find("[PASS]", pos)) != std::string::npos) {
        ++passes;
        pos += 6;
    }
    CHECK(passes == 5);
    CHECK(text.find("[FAIL]") == std::string::npos);
}
