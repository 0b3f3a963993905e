#pragma once

/// Shared runtime configuration. Every field maps to a CLI flag, a
/// RANGER_-prefixed environment variable, and a key in the optional
/// ranger.toml config file; flags override the environment, which overrides
/// the file.

#include <string>

#include "ranger/analytics.hpp"
#include "ranger/restore.hpp"

namespace ranger {

struct Config {
    std::string snapshot;
    int max_depth = 10;
    std::string halflife_mode = "absolute"; // absolute | relative
    int min_affected = 0;                   // report-time filter
    bool open_upper = false;
    bool allow_holes = false;
    std::string validate_cmd; // template with {version}
    int validate_timeout_ms = 60000;
    int parallelism = 1;

    HalfLifeMode halflife() const {
        return halflife_mode == "relative" ? HalfLifeMode::Relative : HalfLifeMode::Absolute;
    }

    RestoreOptions restore_options() const {
        RestoreOptions opts;
        opts.open_upper = open_upper;
        opts.allow_holes = allow_holes;
        opts.max_depth = max_depth;
        opts.parallelism = parallelism;
        return opts;
    }
};

} // namespace ranger
