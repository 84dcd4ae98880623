#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "softctrl/agents.hpp"
#include "softctrl/config.hpp"
#include "softctrl/neuralnet.hpp"
#include "softctrl/scenario.hpp"
#include "softctrl/simulator.hpp"

namespace softctrl::cli {

// Config -> settings builders, shared by the commands and the test suites.
// Builders validate and throw ConfigError on out-of-range values; every key
// they understand is marked as used, so commands can reject leftovers.
sim::EnvConfig env_from_config(const cfg::Config& c);
agents::SacConfig sac_from_config(const cfg::Config& c);
agents::RlConfig rl_from_config(const cfg::Config& c);
agents::BcConfig bc_from_config(const cfg::Config& c);

// Throws ConfigError listing keys no builder or command consumed.
void reject_unknown(const cfg::Config& c);

// Scenario suite = every *.json file directly under dir, in filename order.
std::vector<scene::Scenario> load_suite(const std::string& dir);

// Checkpoint packing; unpack(pack(x)) reproduces the network bit for bit.
nn::Checkpoint pack_actor(const nn::ActorNet& actor);
nn::ActorNet unpack_actor(const nn::Checkpoint& ckpt);
nn::Checkpoint pack_bc(const nn::BcNet& net);
nn::BcNet unpack_bc(const nn::Checkpoint& ckpt);

// Metadata record carried inside the checkpoint: variant, seed, a hash of the
// resolved config, and a content hash over the serialized tensors.
void stamp(nn::Checkpoint& ckpt, const std::string& variant, unsigned long seed,
           const std::string& resolved_config);

// Subcommand bodies. Progress lines go to os; artifacts land in the `out`
// directory from the config. All return 0 on success and throw on invalid
// input; cmd_verify returns 2 when an oracle tolerance is exceeded.
int cmd_gen(const cfg::Config& c, std::ostream& os);
int cmd_train_bc(const cfg::Config& c, std::ostream& os);
int cmd_train_rl(const cfg::Config& c, std::ostream& os);
int cmd_eval(const cfg::Config& c, std::ostream& os);
int cmd_sweep(const cfg::Config& c, std::ostream& os);
int cmd_verify(std::ostream& os);

}  // namespace softctrl::cli
