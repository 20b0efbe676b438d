#pragma once

// Command-line front end: synth, train, infer, eval, params, gradcheck.
//
// Results go to `out`, progress and diagnostics to `err`. Exit codes: 0 on
// success, 1 for usage errors (bad flags or configuration values), 2 for
// runtime failures, including a failed gradient check.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "moire/network.hpp"
#include "moire/trainer.hpp"

namespace moire::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kRuntime = 2;

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

struct RunConfig {
  net::NetworkConfig network;
  train::TrainConfig training;
};

// Splits a JSON object holding NetworkConfig and TrainConfig keys. "seed"
// seeds both the weight initialization and the shuffle. Throws BadConfig on
// unknown keys and invalid values.
RunConfig parse_run_config(const nlohmann::json& j);

}  // namespace moire::cli
