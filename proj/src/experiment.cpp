#include "cbsim/experiment.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cbsim/rng.hpp"

namespace cbsim {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw std::invalid_argument(path + ": expected a nonempty array of rows");
    std::vector<std::vector<double>> rows;
    for (const auto& row : j) {
        if (!row.is_array()) throw std::invalid_argument(path + ": expected rows of numbers");
        std::vector<double> r;
        for (const auto& v : row) {
            if (!v.is_number()) throw std::invalid_argument(path + ": expected numbers");
            r.push_back(v.get<double>());
        }
        rows.push_back(std::move(r));
    }
    for (const auto& r : rows)
        if (r.size() != rows[0].size())
            throw std::invalid_argument(path + ": rows have inconsistent lengths");
    return Matrix::from_rows(rows);
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

BanditInstance instance_from_json(const json& j, const std::string& prefix) {
    if (!j.is_object()) throw std::invalid_argument(prefix + ": expected an object");
    for (const char* field : {"K", "M", "sigma", "weights", "mu"})
        if (!j.contains(field))
            throw std::invalid_argument(prefix + "." + field + ": missing field");
    BanditInstance inst;
    if (!j["K"].is_number_integer())
        throw std::invalid_argument(prefix + ".K: expected an integer");
    if (!j["M"].is_number_integer())
        throw std::invalid_argument(prefix + ".M: expected an integer");
    inst.arms = j["K"].get<int>();
    inst.agents = j["M"].get<int>();
    if (!j["sigma"].is_number())
        throw std::invalid_argument(prefix + ".sigma: expected a number");
    inst.sigma = j["sigma"].get<double>();
    const Matrix w = matrix_from_json(j["weights"], prefix + ".weights");
    if (w.rows() != inst.agents || w.cols() != inst.agents)
        throw std::invalid_argument(prefix + ".weights: expected " + std::to_string(inst.agents) +
                                    " rows of " + std::to_string(inst.agents) + " reals");
    try {
        inst.weights = WeightMatrix(w);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(prefix + "." + e.what());
    }
    inst.mu = matrix_from_json(j["mu"], prefix + ".mu");
    if (inst.mu.rows() != inst.arms || inst.mu.cols() != inst.agents)
        throw std::invalid_argument(prefix + ".mu: expected " + std::to_string(inst.arms) +
                                    " rows of " + std::to_string(inst.agents) + " reals");
    try {
        validate_instance(inst);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(prefix + ": " + e.what());
    }
    return inst;
}

json parse_document(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument(what + ": malformed JSON");
    return j;
}

}  // namespace

BanditInstance parse_instance_json(const std::string& json_text) {
    return instance_from_json(parse_document(json_text, "instance"), "instance");
}

std::string instance_to_json(const BanditInstance& instance) {
    json j;
    j["K"] = instance.arms;
    j["M"] = instance.agents;
    j["sigma"] = instance.sigma;
    j["weights"] = matrix_to_json(instance.weights.entries());
    j["mu"] = matrix_to_json(instance.mu);
    return j.dump(2) + "\n";
}

BanditInstance load_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open instance file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_instance_json(buf.str());
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
    const json j = parse_document(json_text, "config");
    if (!j.is_object()) throw std::invalid_argument("config: expected an object");
    ExperimentConfig cfg;

    if (!j.contains("instance")) throw std::invalid_argument("instance: missing field");
    if (j["instance"].is_string()) {
        std::filesystem::path p = j["instance"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        cfg.instance = load_instance_file(p.string());
    } else {
        cfg.instance = instance_from_json(j["instance"], "instance");
    }

    if (!j.contains("horizon") || !j["horizon"].is_number_integer())
        throw std::invalid_argument("horizon: missing or not an integer");
    cfg.horizon = j["horizon"].get<long>();
    if (cfg.horizon < 16)
        throw std::invalid_argument("horizon: must be >= 16, got " +
                                    std::to_string(cfg.horizon));

    cfg.algorithm = j.value("algorithm", std::string("cexp2"));
    if (cfg.algorithm != "cexp2" && cfg.algorithm != "wcpe-reg")
        throw std::invalid_argument("algorithm: expected cexp2 or wcpe-reg, got " +
                                    cfg.algorithm);

    if (j.contains("seeds")) {
        if (!j["seeds"].is_array() || j["seeds"].empty())
            throw std::invalid_argument("seeds: expected a nonempty array");
        for (const auto& s : j["seeds"]) {
            if (!s.is_number_integer()) throw std::invalid_argument("seeds: expected integers");
            cfg.seeds.push_back(s.get<std::uint64_t>());
        }
    } else if (j.contains("seed_base") && j.contains("runs")) {
        const std::uint64_t base = j["seed_base"].get<std::uint64_t>();
        const long runs = j["runs"].get<long>();
        if (runs < 1) throw std::invalid_argument("runs: must be >= 1");
        for (long i = 0; i < runs; ++i) cfg.seeds.push_back(base + static_cast<std::uint64_t>(i));
    } else {
        throw std::invalid_argument("seeds: provide seeds or seed_base + runs");
    }

    cfg.out_dir = j.value("out_dir", std::string("out"));
    cfg.workers = j.value("workers", 1);
    if (cfg.workers < 1) throw std::invalid_argument("workers: must be >= 1");
    cfg.full_events = j.value("full_events", false);
    const std::string granularity = j.value("trace", std::string("summary"));
    if (granularity != "summary" && granularity != "full")
        throw std::invalid_argument("trace: expected summary or full, got " + granularity);
    cfg.full_trace = granularity == "full";
    return cfg;
}

BanditInstance generate_instance(int arms, int agents, double gap_floor, std::uint64_t seed,
                                 double sigma) {
    if (arms < 2 || agents < 1) throw std::invalid_argument("generate: need K >= 2, M >= 1");
    if (!(gap_floor > 0.0)) throw std::invalid_argument("generate: gap floor must be positive");
    UniformStream stream(seed);
    const int attempt_cap = 10000;
    for (int attempt = 0; attempt < attempt_cap; ++attempt) {
        Matrix w(agents, agents);
        for (int col = 0; col < agents; ++col) {
            double sum = 0.0;
            for (int row = 0; row < agents; ++row) {
                w(row, col) = stream.next_uniform(0.05, 1.0);
                sum += w(row, col);
            }
            for (int row = 0; row < agents; ++row) w(row, col) /= sum;
        }
        BanditInstance inst;
        inst.arms = arms;
        inst.agents = agents;
        inst.sigma = sigma;
        inst.weights = WeightMatrix(w);
        inst.mu = Matrix(arms, agents);
        for (int k = 0; k < arms; ++k)
            for (int m = 0; m < agents; ++m) inst.mu(k, m) = stream.next_uniform();
        try {
            const GapSummary gaps = gap_summary(inst);
            if (gaps.delta_min >= gap_floor) return inst;
        } catch (const std::invalid_argument&) {
            // tie: resample
        }
    }
    throw std::runtime_error("generate: no instance with gap floor " +
                             std::to_string(gap_floor) + " found in " +
                             std::to_string(attempt_cap) + " attempts");
}

BatchResult run_batch(const ExperimentConfig& config) {
    validate_instance(config.instance);
    BatchResult result;
    result.traces.resize(config.seeds.size());
    RunOptions opts;
    opts.full_events = config.full_events;
    opts.record_rounds = config.full_trace;

    auto run_one = [&](std::size_t i) {
        const Environment env{config.instance, config.seeds[i]};
        try {
            result.traces[i] = run_experiment(env, config.algorithm, config.horizon, opts);
        } catch (const std::exception& e) {
            // Setup failures (policy construction, invalid horizon) become an
            // aborted trace rather than escaping a worker thread.
            RunTrace& tr = result.traces[i];
            tr.algorithm = config.algorithm;
            tr.seed = config.seeds[i];
            tr.horizon = config.horizon;
            tr.aborted = true;
            tr.abort_reason = e.what();
        }
    };

    const int workers =
        std::min<std::size_t>(config.workers, std::max<std::size_t>(config.seeds.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < config.seeds.size();
                     i = next.fetch_add(1))
                    run_one(i);
            });
        for (auto& th : pool) th.join();
    }
    std::vector<RunTrace> completed;
    for (const RunTrace& tr : result.traces) {
        result.any_aborted |= tr.aborted;
        if (!tr.aborted) completed.push_back(tr);
    }
    if (!completed.empty()) result.stats = aggregate(completed);
    return result;
}

std::string summary_to_json(const ExperimentConfig& config, const BatchResult& result) {
    const SummaryStats& s = result.stats;
    json j;
    j["algorithm"] = config.algorithm;
    j["K"] = config.instance.arms;
    j["M"] = config.instance.agents;
    j["sigma"] = config.instance.sigma;
    j["horizon"] = config.horizon;
    j["runs"] = s.runs;
    j["seeds"] = config.seeds;
    j["regret"] = {{"mean", s.regret_mean}, {"stderr", s.regret_stderr}};
    json rounds = json::array(), means = json::array(), errs = json::array();
    for (std::size_t i = 0; i < s.checkpoint_rounds.size(); ++i) {
        rounds.push_back(s.checkpoint_rounds[i]);
        means.push_back(s.checkpoint_mean[i]);
        errs.push_back(s.checkpoint_stderr[i]);
    }
    j["regret"]["checkpoints"] = {{"rounds", rounds}, {"mean", means}, {"stderr", errs}};
    j["fallback"] = {{"frequency", s.fallback_frequency}, {"stderr", s.fallback_stderr}};
    json hist = json::object();
    for (const auto& [count, runs] : s.comm_histogram) hist[std::to_string(count)] = runs;
    j["communication"] = {{"mean", s.comm_mean}, {"stderr", s.comm_stderr},
                          {"histogram", hist}};
    j["best_arm"] = {{"all_correct", s.success_count}, {"rate", s.success_rate}};
    json per_run = json::array();
    for (const RunTrace& tr : result.traces) {
        json r;
        r["seed"] = tr.seed;
        r["regret"] = tr.final_regret;
        r["comm_rounds"] = tr.communication_rounds();
        r["fallback"] = tr.entered_fallback;
        r["exploit"] = tr.entered_exploit;
        json arms = json::array();
        for (int a : tr.final_arms) arms.push_back(a + 1);  // 1-based in outputs
        r["final_arms"] = arms;
        r["phases"] = tr.fallback_phases;
        r["events"] = {{"E", tr.event_e}, {"B", tr.event_b}, {"F", tr.event_f}};
        if (tr.cond_c_evaluated) r["condition"] = tr.cond_c;
        if (tr.exhausted_mid_phase) r["exhausted"] = true;
        if (tr.aborted) {
            r["aborted"] = true;
            r["abort_reason"] = tr.abort_reason;
        }
        per_run.push_back(std::move(r));
    }
    j["per_run"] = per_run;
    return j.dump(2) + "\n";
}

int write_outputs(const ExperimentConfig& config, const BatchResult& result) {
    std::filesystem::create_directories(config.out_dir);
    for (const RunTrace& tr : result.traces) {
        const std::string path =
            (std::filesystem::path(config.out_dir) / ("trace_" + std::to_string(tr.seed) + ".csv"))
                .string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        write_trace_csv(out, tr);
    }
    const std::string spath =
        (std::filesystem::path(config.out_dir) / "summary.json").string();
    std::ofstream out(spath, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + spath);
    out << summary_to_json(config, result);
    return result.any_aborted ? 1 : 0;
}

}  // namespace cbsim
