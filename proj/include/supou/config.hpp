#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "supou/dual_optimizer.hpp"
#include "supou/io.hpp"
#include "supou/pathstats.hpp"
#include "supou/simulation.hpp"

namespace supou {

enum class DistortionChoice { None, KlUpper, KlLower };

/// Everything a pipeline run needs; defaults are the reference river model.
struct RunConfig {
    // [model]
    BenchmarkModel model = BenchmarkModel::kazarashi();
    std::string data_path;          ///< discharge CSV for `fit` and `stats --data`
    // [fit]
    int fit_max_lag = 500;
    // [divergence]
    AlphaFamily alpha = AlphaConstant{2.5};
    WeightFamily weight = WeightRegularizedInverseRate{10.0};
    // [problem]
    int k = 2;
    int m = 1;
    std::vector<Direction> directions{Direction::Upper, Direction::Lower};
    std::vector<double> eps = default_eps_schedule(2.0, 11);
    // [solver]
    SolverOptions solver;
    // [simulation]
    int components = 64;
    SimulationConfig sim;
    DistortionChoice distortion = DistortionChoice::None;
    double distortion_eps = 0.631;
    int distortion_resolution = 128;
    // [stats]
    std::vector<double> thresholds{10.0, 20.0, 40.0, 80.0, 160.0};
    int acf_max_lag = 100;
    BinSpec bins{0.1, 3000.0, 60, true};
    // [plotdata]
    int field_points = 41;
    // [output]
    std::string output_dir = "out";

    void validate() const {
        model.validate();
        if (!(k > m) || m < 0) throw std::invalid_argument("problem needs k > m >= 0");
        if (eps.empty()) throw std::invalid_argument("eps schedule is empty");
        for (double e : eps)
            if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("eps schedule must be strictly positive");
        if (directions.empty()) throw std::invalid_argument("no directions requested");
        solver.validate();
        sim.validate();
        if (components < 1) throw std::invalid_argument("component count must be positive");
        if (!(distortion_eps > 0.0)) throw std::invalid_argument("distortion eps must be positive");
        if (fit_max_lag < 10 || acf_max_lag < 1) throw std::invalid_argument("ACF lag counts too small");
        if (field_points < 2) throw std::invalid_argument("field grid needs at least 2 points per axis");
        if (!data_path.empty() && !std::filesystem::exists(data_path))
            throw std::invalid_argument("data file not found: " + data_path);
    }
};

namespace detail {

inline std::vector<double> number_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        if (t.empty()) continue;
        double v = 0.0;
        if (!parse_double(t, v)) throw std::invalid_argument("not a number: '" + std::string(t) + "'");
        out.push_back(v);
    }
    return out;
}

inline std::vector<Direction> direction_list(const std::string& s) {
    std::vector<Direction> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        if (t == "upper") out.push_back(Direction::Upper);
        else if (t == "lower") out.push_back(Direction::Lower);
        else if (!t.empty()) throw std::invalid_argument("direction must be upper or lower, got '" + std::string(t) + "'");
    }
    return out;
}

}  // namespace detail

/// INI sections: model, fit, divergence, problem, solver, simulation, stats, plotdata, output.
/// Unknown keys are rejected so typos do not silently fall back to defaults.
[[nodiscard]] inline RunConfig parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.message(), e.line());
    }
    static const std::map<std::string, std::vector<std::string>> known{
        {"model", {"A", "B", "c_nu", "p", "q", "data"}},
        {"fit", {"max_lag"}},
        {"divergence", {"alpha", "alpha0", "alpha1", "weight", "W", "c"}},
        {"problem", {"k", "m", "directions", "eps", "eps_top", "eps_count"}},
        {"solver", {"omega", "delta", "tau0", "mu0", "eta_scale", "kappa_scale", "max_iterations", "resolution",
                    "series_cache"}},
        {"simulation", {"components", "dt", "sampling", "horizon_years", "burn_in_years", "seed", "exact_decay",
                        "distortion", "distortion_eps", "distortion_resolution"}},
        {"stats", {"thresholds", "acf_max_lag", "bins", "bin_lo", "bin_hi", "log_bins"}},
        {"plotdata", {"field_points"}},
        {"output", {"dir"}},
    };
    for (const auto& [section, body] : tree) {
        const auto it = known.find(section);
        if (it == known.end()) throw std::invalid_argument("unknown config section [" + section + "]");
        for (const auto& [key, _] : body)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw std::invalid_argument("unknown key '" + key + "' in [" + section + "]");
    }

    RunConfig c;
    auto get = [&](const char* path, auto fallback) { return tree.get<decltype(fallback)>(path, fallback); };

    c.model.reversion.A = get("model.A", c.model.reversion.A);
    c.model.reversion.B = get("model.B", c.model.reversion.B);
    c.model.levy.c_nu = get("model.c_nu", c.model.levy.c_nu);
    c.model.levy.p = get("model.p", c.model.levy.p);
    c.model.levy.q = get("model.q", c.model.levy.q);
    c.data_path = get("model.data", std::string());
    c.fit_max_lag = get("fit.max_lag", c.fit_max_lag);

    const auto alpha = get("divergence.alpha", std::string("2.5"));
    if (alpha == "increasing" || alpha == "decreasing") {
        const bool inc = alpha == "increasing";
        c.alpha = AlphaPiecewiseLinearInR{get("divergence.alpha0", inc ? 2.5 : 5.0), get("divergence.alpha1", inc ? 5.0 : 2.5)};
    } else {
        const auto v = detail::number_list(alpha);
        if (v.size() != 1) throw std::invalid_argument("divergence.alpha must be a number, increasing or decreasing");
        c.alpha = AlphaConstant{v[0]};
    }
    const auto weight = get("divergence.weight", std::string("regularized"));
    if (weight == "regularized") c.weight = WeightRegularizedInverseRate{get("divergence.W", 10.0)};
    else if (weight == "constant") c.weight = WeightConstant{get("divergence.c", 1.0)};
    else throw std::invalid_argument("divergence.weight must be regularized or constant");

    c.k = get("problem.k", c.k);
    c.m = get("problem.m", c.m);
    if (auto d = tree.get_optional<std::string>("problem.directions")) c.directions = detail::direction_list(*d);
    if (auto e = tree.get_optional<std::string>("problem.eps")) {
        c.eps = detail::number_list(*e);
    } else {
        c.eps = default_eps_schedule(get("problem.eps_top", 2.0), get("problem.eps_count", 11));
    }

    auto& s = c.solver;
    s.omega = get("solver.omega", s.omega);
    s.delta = get("solver.delta", s.delta);
    s.tau0 = get("solver.tau0", s.tau0);
    s.mu0 = get("solver.mu0", s.mu0);
    s.eta_scale = get("solver.eta_scale", s.eta_scale);
    s.kappa_scale = get("solver.kappa_scale", s.kappa_scale);
    s.max_iterations = get("solver.max_iterations", s.max_iterations);
    s.resolution = get("solver.resolution", s.resolution);
    s.series_cache = get("solver.series_cache", s.series_cache);

    c.components = get("simulation.components", c.components);
    c.sim.dt = get("simulation.dt", c.sim.dt);
    c.sim.sampling = get("simulation.sampling", c.sim.sampling);
    c.sim.horizon = get("simulation.horizon_years", c.sim.horizon / kHoursPerYear) * kHoursPerYear;
    c.sim.burn_in = get("simulation.burn_in_years", c.sim.burn_in / kHoursPerYear) * kHoursPerYear;
    c.sim.seed = get("simulation.seed", c.sim.seed);
    c.sim.exact_decay = get("simulation.exact_decay", c.sim.exact_decay);
    const auto dist = get("simulation.distortion", std::string("none"));
    if (dist == "none") c.distortion = DistortionChoice::None;
    else if (dist == "kl-upper") c.distortion = DistortionChoice::KlUpper;
    else if (dist == "kl-lower") c.distortion = DistortionChoice::KlLower;
    else throw std::invalid_argument("simulation.distortion must be none, kl-upper or kl-lower");
    c.distortion_eps = get("simulation.distortion_eps", c.distortion_eps);
    c.distortion_resolution = get("simulation.distortion_resolution", c.distortion_resolution);

    if (auto t = tree.get_optional<std::string>("stats.thresholds")) c.thresholds = detail::number_list(*t);
    c.acf_max_lag = get("stats.acf_max_lag", c.acf_max_lag);
    c.bins.count = get("stats.bins", c.bins.count);
    c.bins.lo = get("stats.bin_lo", c.bins.lo);
    c.bins.hi = get("stats.bin_hi", c.bins.hi);
    c.bins.log_scale = get("stats.log_bins", c.bins.log_scale);
    c.field_points = get("plotdata.field_points", c.field_points);
    c.output_dir = get("output.dir", c.output_dir);
    return c;
}

[[nodiscard]] inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config " + path.string());
    auto c = parse_config(is);
    // relative data paths are taken from the config's directory
    if (!c.data_path.empty() && std::filesystem::path(c.data_path).is_relative())
        c.data_path = (path.parent_path() / c.data_path).string();
    return c;
}

}  // namespace supou
