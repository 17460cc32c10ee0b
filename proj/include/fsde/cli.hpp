#pragma once
// Experiment driver: parses subcommand flags or a flat key=value config file,
// dispatches the computation, and writes reproducible CSV artifacts plus a
// key=value summary per run.

#include <cstdint>
#include <string>
#include <vector>

#include "fsde/analysis.hpp"
#include "fsde/constants.hpp"

namespace fsde::cli {

// Resolved settings for one run. List-valued flags arrive comma-joined
// (e.g. --n 8,16,32). The echo produced by config_echo() feeds back through
// --config and reproduces the run bit-exactly on the same platform.
struct ExperimentConfig {
    std::string subcommand;
    std::string model = "bilinear_scalar";
    std::vector<double> alpha = {0.75};
    std::vector<int> n;
    int paths = 0;
    std::uint64_t seed = 42;
    std::vector<int> refine;  // y-limit pairs entries with n; else one entry
    std::string scheme = "mle";
    std::vector<double> t = {1.0};
    std::vector<double> z;  // ml-eval abscissas
    double beta = 1.0;      // ml-eval second parameter
    constants::QuadConfig quad;
    std::string out_dir = ".";
    int workers = 0;  // 0 = decide at runtime; FSDE_MLE_WORKERS overrides
};

// Per-subcommand defaults; throws ConfigInvalid for an unknown subcommand.
ExperimentConfig default_config(const std::string& subcommand);

// Keys a subcommand accepts, in echo order (same names in config files).
const std::vector<std::string>& config_keys(const std::string& subcommand);

// Canonical serialization of one field / assignment from a config token.
// set_key throws ConfigInvalid naming the key when the value does not parse.
std::string get_key(const ExperimentConfig& config, const std::string& key);
void set_key(ExperimentConfig& config, const std::string& key,
             const std::string& value);

// Canonical key=value echo restricted to the subcommand's keys.
std::vector<std::string> config_echo(const ExperimentConfig& config);

// Cross-field checks (list lengths, grid-aligned times, scheme names).
void validate_config(const ExperimentConfig& config);

struct RunResult {
    analysis::ExperimentReport report;
    bool thresholds_ok = true;
    std::vector<std::string> notes;      // failed-threshold descriptions
    std::vector<std::string> artifacts;  // files written, in order
    // summary file payload (also printed to stdout), minus the notes
    std::vector<std::pair<std::string, std::string>> summary;
};

// Dispatch a validated config: runs the experiment, writes <subcommand>.csv
// and <subcommand>_summary.txt under out_dir, returns the in-memory report.
RunResult run_experiment(const ExperimentConfig& config);

// Full command-line entry point. Returns 0 on success, 2 when a documented
// acceptance threshold fails, 1 on any error (unknown flag, bad config,
// numeric failure).
int run(int argc, const char* const* argv);

}  // namespace fsde::cli
