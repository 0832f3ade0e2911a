#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbsim/model.hpp"
#include "cbsim/sim.hpp"

namespace cbsim {

// Fully resolved batch description: instance, algorithm, horizon, seeds,
// output locations and trace granularity.
struct ExperimentConfig {
    BanditInstance instance;
    std::string algorithm = "cexp2";
    long horizon = 0;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "out";
    int workers = 1;
    bool full_events = false;
    bool full_trace = false;  // per-round trace rows instead of checkpoint rows
};

// Parses and validates a JSON config document. The first violation is
// reported with its field path (std::invalid_argument).
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& base_dir = "");

BanditInstance parse_instance_json(const std::string& json_text);
std::string instance_to_json(const BanditInstance& instance);
BanditInstance load_instance_file(const std::string& path);

// Random instance with column-stochastic weights and a minimum mixed-mean
// gap of at least `gap_floor` (rejection sampling, capped at 10^4 attempts).
BanditInstance generate_instance(int arms, int agents, double gap_floor, std::uint64_t seed,
                                 double sigma = 1.0);

struct BatchResult {
    std::vector<RunTrace> traces;
    SummaryStats stats;
    bool any_aborted = false;
};

// Runs all seeds (optionally across workers); traces are seed-ordered and
// independent of the worker count.
BatchResult run_batch(const ExperimentConfig& config);

std::string summary_to_json(const ExperimentConfig& config, const BatchResult& result);

// Writes trace_<seed>.csv per run plus summary.json; returns 0 iff no run
// aborted.
int write_outputs(const ExperimentConfig& config, const BatchResult& result);

}  // namespace cbsim
