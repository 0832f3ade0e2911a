// Command-line front end: batch experiment runner plus direct access to the
// allocation oracle and the lower-bound complexity terms.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbsim/experiment.hpp"
#include "cbsim/model.hpp"
#include "cbsim/oracle.hpp"

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << text;
}

json matrix_json(const cbsim::Matrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json oracle_result_json(const cbsim::oracle::OracleResult& res) {
    json j;
    j["objective"] = res.objective_value;
    j["allocation"] = matrix_json(res.allocation);
    j["kkt_residual"] = res.kkt_residual;
    j["iterations"] = res.iterations;
    if (res.has_excluded_entries) j["excluded_entries"] = true;
    return j;
}

int cmd_run(const std::string& config_path, const std::string& instance_path,
            std::string algorithm, long horizon, const std::string& seeds_csv, long seed_base,
            long runs, std::string out_dir, int workers, bool full_events,
            std::string granularity) {
    json doc = json::object();
    if (!config_path.empty()) {
        doc = json::parse(read_file(config_path));
        if (!doc.is_object()) throw std::invalid_argument("config: expected an object");
    }
    if (!instance_path.empty()) doc["instance"] = instance_path;
    if (!algorithm.empty()) doc["algorithm"] = algorithm;
    if (horizon > 0) doc["horizon"] = horizon;
    if (!seeds_csv.empty()) {
        json seeds = json::array();
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
        doc["seeds"] = seeds;
        doc.erase("seed_base");
        doc.erase("runs");
    }
    if (seed_base >= 0) {
        doc["seed_base"] = seed_base;
        doc.erase("seeds");
    }
    if (runs > 0) doc["runs"] = runs;
    if (!out_dir.empty()) doc["out_dir"] = out_dir;
    if (workers > 0) doc["workers"] = workers;
    if (full_events) doc["full_events"] = true;
    if (!granularity.empty()) doc["trace"] = granularity;

    std::string base_dir;
    if (!config_path.empty()) {
        const auto parent = std::filesystem::path(config_path).parent_path();
        base_dir = parent.string();
    }
    cbsim::ExperimentConfig cfg = cbsim::parse_config(doc.dump(), base_dir);
    if (const char* env_out = std::getenv("CBSIM_OUT"); env_out && *env_out)
        cfg.out_dir = env_out;

    const cbsim::BatchResult result = cbsim::run_batch(cfg);
    const int status = cbsim::write_outputs(cfg, result);
    std::cout << "wrote " << result.traces.size() << " trace file(s) and summary.json to "
              << cfg.out_dir << "\n";
    if (status != 0) std::cerr << "warning: at least one run aborted (see summary.json)\n";
    return status;
}

int cmd_oracle(const std::string& instance_path, const std::string& program_path,
               const std::string& out_path) {
    json result;
    if (!program_path.empty()) {
        const json doc = json::parse(read_file(program_path));
        for (const char* field : {"weights", "delta"})
            if (!doc.contains(field))
                throw std::invalid_argument(std::string(field) + ": missing field");
        std::vector<std::vector<double>> wrows, drows;
        for (const auto& row : doc["weights"]) wrows.push_back(row.get<std::vector<double>>());
        for (const auto& row : doc["delta"]) drows.push_back(row.get<std::vector<double>>());
        const cbsim::WeightMatrix weights{cbsim::Matrix::from_rows(wrows)};
        const cbsim::Matrix delta = cbsim::Matrix::from_rows(drows);
        result = oracle_result_json(cbsim::oracle::solve_relaxed(delta, weights));
    } else {
        const cbsim::BanditInstance inst = cbsim::load_instance_file(instance_path);
        const cbsim::GapSummary gaps = cbsim::gap_summary(inst);
        result = oracle_result_json(cbsim::oracle::solve_relaxed(gaps.tilde_delta, inst.weights));
        result["gaps"] = matrix_json(gaps.tilde_delta);
    }
    emit(result.dump(2) + "\n", out_path);
    return 0;
}

int cmd_lower_bounds(const std::string& instance_path, const std::string& out_path) {
    const cbsim::BanditInstance inst = cbsim::load_instance_file(instance_path);
    const cbsim::GapSummary gaps = cbsim::gap_summary(inst);
    const auto relaxed = cbsim::oracle::solve_relaxed(gaps.tilde_delta, inst.weights);
    const auto lower = cbsim::oracle::solve_lower_bound(gaps, inst.weights);
    const auto sample = cbsim::oracle::solve_sample_complexity(gaps, inst.weights);

    json j;
    j["c_star"] = lower.objective_value;
    j["c_tilde_star"] = relaxed.objective_value;
    j["s_star"] = sample.objective_value;
    j["delta_min"] = gaps.delta_min;
    const double slack = 1e-9;
    j["sandwich_ok"] =
        lower.objective_value <= relaxed.objective_value * (1.0 + slack) &&
        relaxed.objective_value <= 4.0 * lower.objective_value * (1.0 + slack);
    j["sample_bound"] = 4.0 * lower.objective_value / gaps.delta_min;
    j["sample_bound_ok"] =
        sample.objective_value <= 4.0 * lower.objective_value / gaps.delta_min * (1.0 + slack);
    j["allocations"] = {{"relaxed", matrix_json(relaxed.allocation)},
                        {"lower_bound", matrix_json(lower.allocation)},
                        {"sample", matrix_json(sample.allocation)}};
    emit(j.dump(2) + "\n", out_path);
    return 0;
}

int cmd_generate(int arms, int agents, double gap_floor, std::uint64_t seed, double sigma,
                 const std::string& out_path) {
    const cbsim::BanditInstance inst =
        cbsim::generate_instance(arms, agents, gap_floor, seed, sigma);
    emit(cbsim::instance_to_json(inst), out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative multi-agent bandit simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a batch of seeded experiments");
    std::string config_path, instance_path, algorithm, seeds_csv, out_dir, granularity;
    long horizon = 0, seed_base = -1, runs = 0;
    int workers = 0;
    bool full_events = false;
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--instance", instance_path, "instance JSON file (overrides config)");
    run->add_option("--algorithm", algorithm, "cexp2 or wcpe-reg");
    run->add_option("--horizon", horizon, "number of rounds T");
    run->add_option("--seeds", seeds_csv, "comma-separated seed list");
    run->add_option("--seed-base", seed_base, "first seed of a contiguous block");
    run->add_option("--runs", runs, "number of seeds starting at --seed-base");
    run->add_option("--out", out_dir, "output directory (env CBSIM_OUT overrides)");
    run->add_option("--workers", workers, "parallel workers (default 1)");
    run->add_flag("--full-events", full_events, "evaluate diagnostic events every round");
    run->add_option("--trace", granularity, "trace granularity: summary or full");

    // oracle
    auto* orc = app.add_subcommand("oracle", "Solve the relaxed allocation program");
    std::string orc_instance, orc_program, orc_out;
    orc->add_option("--instance", orc_instance, "instance JSON file (uses its tilde gaps)");
    orc->add_option("--program", orc_program, "JSON file with weights + delta matrices");
    orc->add_option("--out", orc_out, "output file (default stdout)");

    // lower-bounds
    auto* lb = app.add_subcommand("lower-bounds",
                                  "Complexity terms c*, c~*, s* and their relations");
    std::string lb_instance, lb_out;
    lb->add_option("--instance", lb_instance, "instance JSON file")->required();
    lb->add_option("--out", lb_out, "output file (default stdout)");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a random instance");
    int gen_arms = 0, gen_agents = 0;
    double gen_floor = 0.0, gen_sigma = 1.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--arms", gen_arms, "arm count K")->required();
    gen->add_option("--agents", gen_agents, "agent count M")->required();
    gen->add_option("--gap-floor", gen_floor, "minimum mixed-mean gap")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--sigma", gen_sigma, "noise scale (default 1)");
    std::string gen_out;
    gen->add_option("--out", gen_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, instance_path, algorithm, horizon, seeds_csv, seed_base,
                           runs, out_dir, workers, full_events, granularity);
        if (orc->parsed()) {
            if (orc_instance.empty() == orc_program.empty())
                throw std::invalid_argument("oracle: provide exactly one of --instance, --program");
            return cmd_oracle(orc_instance, orc_program, orc_out);
        }
        if (lb->parsed()) return cmd_lower_bounds(lb_instance, lb_out);
        if (gen->parsed())
            return cmd_generate(gen_arms, gen_agents, gen_floor, gen_seed, gen_sigma, gen_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
