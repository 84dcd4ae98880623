#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "softctrl/commands.hpp"
#include "softctrl/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"softctrl: closed-loop driving RL laboratory"};
    app.require_subcommand(1);

    std::string config_path, out, scenarios, kind, checkpoint;
    std::optional<long> seed, count, frames;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (key = value lines)");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out, "override the output directory");
        sub->add_option("--scenarios", scenarios, "override scenarios.dir");
        return sub;
    };

    CLI::App* gen = add_common(app.add_subcommand("gen", "write a deterministic scenario suite"));
    gen->add_option("--kind", kind, "red_light_lead, t_junction, crossing_pedestrian or mixed");
    gen->add_option("--count", count, "number of scenarios");
    gen->add_option("--frames", frames, "frames per scenario");
    CLI::App* tbc = add_common(app.add_subcommand("train-bc", "train the BC reference policy"));
    CLI::App* trl = add_common(app.add_subcommand("train-rl", "fine-tune an agent from a BC checkpoint"));
    CLI::App* evl = add_common(app.add_subcommand("eval", "evaluate an actor checkpoint"));
    evl->add_option("--checkpoint", checkpoint, "override eval.checkpoint");
    CLI::App* swp = add_common(app.add_subcommand("sweep", "train+eval across a parameter axis"));
    CLI::App* ver = app.add_subcommand("verify", "run the tabular oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // --help exits cleanly; usage errors are config errors
    }

    try {
        if (ver->parsed()) return softctrl::cli::cmd_verify(std::cout);

        softctrl::cfg::Config c;
        if (!config_path.empty()) c = softctrl::cfg::Config::from_file(config_path);
        if (seed) c.set("seed", std::to_string(*seed));
        if (!out.empty()) c.set("out", out);
        if (!scenarios.empty()) c.set("scenarios.dir", scenarios);
        if (!kind.empty()) c.set("gen.kind", kind);
        if (count) c.set("gen.count", std::to_string(*count));
        if (frames) c.set("gen.num_frames", std::to_string(*frames));
        if (!checkpoint.empty()) c.set("eval.checkpoint", checkpoint);

        if (gen->parsed()) return softctrl::cli::cmd_gen(c, std::cout);
        if (tbc->parsed()) return softctrl::cli::cmd_train_bc(c, std::cout);
        if (trl->parsed()) return softctrl::cli::cmd_train_rl(c, std::cout);
        if (evl->parsed()) return softctrl::cli::cmd_eval(c, std::cout);
        if (swp->parsed()) return softctrl::cli::cmd_sweep(c, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
