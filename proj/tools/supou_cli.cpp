// supou: calibrate, bound, simulate and summarize supOU discharge models.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "supou/pipeline.hpp"

namespace fs = std::filesystem;
using namespace supou;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> resolution;
    bool allow_gaps = false;
};

RunConfig resolve(const Globals& g) {
    RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.seed) c.sim.seed = *g.seed;
    if (g.out) c.output_dir = *g.out;
    if (g.resolution) c.solver.resolution = *g.resolution;
    c.validate();
    return c;
}

void emit(const fs::path& dir, const std::string& name, const Table& t) {
    write_table(dir / name, t);
    std::cout << "wrote " << (dir / name).string() << " (" << t.rows.size() << " rows)\n";
}

/// Either a discharge record (timestamp,discharge_m3s) or a simulated path (timestamp_hours,discharge_m3s).
std::vector<double> load_series(const std::string& path, bool allow_gaps) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string head;
    std::getline(is, head);
    is.seekg(0);
    if (detail::trim(head) == kDischargeHeader) return parse_discharge_csv(is, allow_gaps).values;
    const auto t = parse_table(is);
    if (t.columns.size() != 2 || t.columns[1] != "discharge_m3s")
        throw std::runtime_error(path + ": expected a discharge record or a simulated path");
    std::vector<double> x;
    x.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        if (auto* d = std::get_if<double>(&r[1])) x.push_back(*d);
        else if (auto* i = std::get_if<long long>(&r[1])) x.push_back(static_cast<double>(*i));
        else throw std::runtime_error(path + ": non-numeric discharge value");
    }
    return x;
}

SamplePath simulate(const RunConfig& c, PreparedComponents* keep = nullptr) {
    auto prep = prepare_components(c);
    if (prep.solution)
        std::cout << "KL " << to_string(prep.solution->direction) << " eps=" << format_number(c.distortion_eps)
                  << " tau=" << format_number(prep.solution->tau) << " bound=" << format_number(prep.solution->bound)
                  << "\n";
    auto path = simulate_path(prep.set, c.sim);
    if (keep) *keep = std::move(prep);
    return path;
}

std::vector<SweepRow> sweep_all(const RunConfig& c) {
    // directions are independent jobs; each eps sweep stays sequential for its warm starts
    std::vector<std::future<std::vector<SweepRow>>> jobs;
    for (auto d : c.directions)
        jobs.push_back(std::async(std::launch::async, [&c, d] { return run_sweep(make_problem(c, d, c.eps.front()), c.eps, c.solver); }));
    std::vector<SweepRow> rows;
    for (auto& j : jobs) {
        auto part = j.get();
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

int report_rows(const std::vector<SweepRow>& rows) {
    int bad = 0;
    for (const auto& r : rows)
        if (r.status != "converged") {
            ++bad;
            std::cerr << "warning: " << to_string(r.direction) << " eps=" << format_number(r.epsilon) << " "
                      << r.status << ": " << r.note << "\n";
        } else if (!r.note.empty()) {
            std::cerr << "note: " << to_string(r.direction) << " eps=" << format_number(r.epsilon) << ": " << r.note
                      << "\n";
        }
    return bad ? 2 : 0;
}

int cmd_fit(const Globals& g) {
    const auto c = resolve(g);
    if (c.data_path.empty()) throw std::runtime_error("fit needs a discharge file: set [model] data");
    const auto series = read_discharge_csv(c.data_path, g.allow_gaps);
    const auto s = summarize_series(series.values, c.fit_max_lag);
    std::cout << "records " << series.size() << ", missing " << series.missing_count() << ", inserted "
              << series.inserted << "\n";
    CalibrationTarget target{s.cumulants, s.acf};
    const auto r = calibrate(target);
    std::cout << "calibrated: residual " << format_number(r.residual) << ", " << r.converged_starts
              << " converged starts\n";
    emit(c.output_dir, "parameters.csv", parameter_table(r.model, s.cumulants));
    return 0;
}

int cmd_bounds(const Globals& g) {
    const auto c = resolve(g);
    const auto rows = sweep_all(c);
    const double bench = benchmark_cumulant(c.model, c.k);
    emit(c.output_dir, "bounds.csv", bounds_table(rows, bench));
    return report_rows(rows);
}

int cmd_simulate(const Globals& g) {
    const auto c = resolve(g);
    PreparedComponents prep;
    const auto path = simulate(c, &prep);
    const auto s = cumulant_stats(path.value);
    std::cout << "samples " << path.value.size() << ", mean " << format_number(s.mean) << " (components "
              << format_number(prep.set.stationary_mean()) << "), variance " << format_number(s.variance) << "\n";
    emit(c.output_dir, "components.csv", component_table(prep.set));
    emit(c.output_dir, "path.csv", path_table(path));
    return 0;
}

int cmd_stats(const Globals& g, const std::string& input) {
    const auto c = resolve(g);
    std::vector<double> x;
    double sampling = 1.0;
    if (input.empty()) {
        x = simulate(c).value;
        sampling = c.sim.sampling;
    } else {
        x = load_series(input, g.allow_gaps);
    }
    std::size_t missing = 0;
    for (double v : x) missing += is_missing(v) ? 1 : 0;
    emit(c.output_dir, "cumulants.csv", cumulant_table(cumulant_stats(x), x.size(), missing));
    emit(c.output_dir, "acf.csv", acf_table(x, c.acf_max_lag, c.model));
    emit(c.output_dir, "durations.csv", duration_table(x, sampling, c.thresholds));
    emit(c.output_dir, "histogram.csv", histogram_table(x, c.bins));
    return 0;
}

int cmd_plotdata(const Globals& g) {
    const auto c = resolve(g);
    const auto rows = sweep_all(c);
    emit(c.output_dir, "phi_field.csv", field_table(rows, make_problem(c, Direction::Upper, c.eps.front()), c.field_points));
    const auto path = simulate(c);
    emit(c.output_dir, "pdf.csv", histogram_table(path.value, c.bins));
    return report_rows(rows);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"supOU streamflow model: calibration, worst-case cumulant bounds, simulation, duration statistics"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "simulation seed (overrides the config)");
    app.add_option("--out", g.out, "output directory (overrides the config)");
    app.add_option("--resolution", g.resolution, "quantization resolution M (overrides the config)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--allow-gaps", g.allow_gaps, "fill missing hours in discharge files instead of failing");
    app.fallthrough();

    auto* fit = app.add_subcommand("fit", "calibrate model parameters from a discharge record");
    auto* bounds = app.add_subcommand("bounds", "worst-case cumulant bounds over the eps schedule");
    auto* sim = app.add_subcommand("simulate", "simulate a benchmark or KL-distorted discharge path");
    auto* stats = app.add_subcommand("stats", "cumulants, ACF, threshold durations and histogram of a series");
    std::string input;
    stats->add_option("input", input, "discharge record or simulated path; simulates from the config if absent")
        ->check(CLI::ExistingFile);
    auto* plot = app.add_subcommand("plotdata", "worst-case distortion grids and path density tables");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*fit) return cmd_fit(g);
        if (*bounds) return cmd_bounds(g);
        if (*sim) return cmd_simulate(g);
        if (*stats) return cmd_stats(g, input);
        if (*plot) return cmd_plotdata(g);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
