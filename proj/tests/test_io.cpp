#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "supou/pipeline.hpp"

using namespace supou;

namespace {

std::string render(const Table& t) {
    std::ostringstream os;
    write_table(os, t);
    return os.str();
}

RunConfig config_from(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

}  // namespace

// ---- tables ------------------------------------------------------------------------

TEST(Format, FiveDigitExponent) {
    EXPECT_EQ(format_number(17.70771), "1.77077e+01");
    EXPECT_EQ(format_number(-0.0), "-0.00000e+00");
    EXPECT_EQ(format_number(std::nan("")), "NaN");
    EXPECT_EQ(format_number(-INFINITY), "-inf");
}

TEST(Table, RoundTripIsIdentical) {
    Table t;
    t.columns = {"name", "n", "x"};
    t.add({std::string("a"), 3LL, 1.5});
    t.add({std::string("b"), -7LL, std::nan("")});
    t.add({std::string("c"), 0LL, 1.23456789e-300});
    const auto text = render(t);
    EXPECT_EQ(text.substr(0, text.find('\n')), "name,n,x");
    std::istringstream is(text);
    EXPECT_EQ(render(parse_table(is)), text);
}

TEST(Table, RaggedRowNamesLine) {
    std::istringstream is("a,b\n1,2\n3\n");
    try {
        (void)parse_table(is);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 3u);
    }
    Table t;
    t.columns = {"a"};
    EXPECT_THROW(t.add({1LL, 2LL}), std::invalid_argument);
}

// ---- discharge records ---------------------------------------------------------------

TEST(Discharge, BlankValueIsMissing) {
    std::istringstream is(
        "timestamp,discharge_m3s\n2016-04-01T00:00,12.5\n2016-04-01T01:00,\n2016-04-01 02:00:00Z,NaN\n");
    const auto s = parse_discharge_csv(is);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.missing_count(), 2u);
    EXPECT_EQ(s.values[0], 12.5);
    EXPECT_EQ(s.inserted, 0u);
}

TEST(Discharge, TextValueNamesLine) {
    std::istringstream is("timestamp,discharge_m3s\n2016-04-01T00:00,1\n2016-04-01T01:00,high\n");
    try {
        (void)parse_discharge_csv(is);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("high"), std::string::npos);
    }
}

TEST(Discharge, RejectsMalformedRecords) {
    for (const char* body : {"time,q\n2016-04-01T00:00,1\n",                                   // header
                             "timestamp,discharge_m3s\n2016-04-01T00:00,1,2\n",                // width
                             "timestamp,discharge_m3s\n2016-13-01T00:00,1\n",                  // month
                             "timestamp,discharge_m3s\n2016-04-01T00:00,-1\n",                 // negative
                             "timestamp,discharge_m3s\n2016-04-01T00:00,inf\n",                // infinite
                             "timestamp,discharge_m3s\n2016-04-01T01:00,1\n2016-04-01T00:00,1\n",  // order
                             "timestamp,discharge_m3s\n2016-04-01T00:00,1\n2016-04-01T00:30,1\n",  // spacing
                             "timestamp,discharge_m3s\n"}) {                                   // empty
        std::istringstream is(body);
        EXPECT_THROW((void)parse_discharge_csv(is, true), ParseError) << body;
    }
}

TEST(Discharge, GapsNeedOptIn) {
    const std::string body =
        "timestamp,discharge_m3s\n2016-02-28T23:00,1\n2016-02-29T00:00,2\n2016-02-29T03:00,3\n";
    {
        std::istringstream is(body);
        EXPECT_THROW((void)parse_discharge_csv(is, false), ParseError);
    }
    std::istringstream is(body);
    const auto s = parse_discharge_csv(is, true);
    ASSERT_EQ(s.size(), 5u);
    EXPECT_EQ(s.inserted, 2u);
    EXPECT_EQ(s.missing_count(), 2u);
    EXPECT_EQ(s.timestamps[2], "2016-02-29T01:00:00");
    EXPECT_EQ(s.values[4], 3.0);
}

TEST(Discharge, TimestampRoundTrip) {
    for (long long t : {0LL, 951782400LL + 3600 * 23, 4102444800LL - 3600}) {
        long long back = -1;
        ASSERT_TRUE(detail::parse_timestamp(detail::format_timestamp(t), back));
        EXPECT_EQ(back, t);
    }
}

// ---- configuration ------------------------------------------------------------------

TEST(Config, DefaultsValidate) {
    const auto c = config_from("");
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.k, 2);
    EXPECT_EQ(c.eps.size(), 11u);
    EXPECT_DOUBLE_EQ(c.eps.front(), 100.0);
}

TEST(Config, SectionsAndFamilies) {
    const auto c = config_from(
        "[model]\nA = 1.6\n[divergence]\nalpha = increasing\nweight = constant\nc = 2\n"
        "[problem]\nk = 1\nm = 0\ndirections = lower\neps = 1, 0.1\n"
        "[simulation]\nhorizon_years = 2\ndistortion = kl-lower\nseed = 9\n[stats]\nthresholds = 5, 50\n");
    EXPECT_EQ(c.model.reversion.A, 1.6);
    ASSERT_TRUE(std::holds_alternative<AlphaPiecewiseLinearInR>(c.alpha));
    EXPECT_TRUE(std::holds_alternative<WeightConstant>(c.weight));
    EXPECT_EQ(c.directions, std::vector<Direction>{Direction::Lower});
    EXPECT_EQ(c.eps, (std::vector<double>{1.0, 0.1}));
    EXPECT_DOUBLE_EQ(c.sim.horizon, 2.0 * kHoursPerYear);
    EXPECT_EQ(c.distortion, DistortionChoice::KlLower);
    EXPECT_EQ(c.sim.seed, 9u);
    EXPECT_EQ(c.thresholds, (std::vector<double>{5.0, 50.0}));
}

TEST(Config, EpsSchedule) {
    const auto c = config_from("[problem]\neps_top = 1\neps_count = 3\n");
    ASSERT_EQ(c.eps.size(), 3u);
    EXPECT_NEAR(c.eps[2], std::pow(10.0, -0.2), 1e-15);
}

TEST(Config, RejectsUnknownAndInvalid) {
    EXPECT_THROW(config_from("[solverr]\nomega = 0.9\n"), std::invalid_argument);
    EXPECT_THROW(config_from("[solver]\nomgea = 0.9\n"), std::invalid_argument);
    EXPECT_THROW(config_from("[divergence]\nalpha = big\n"), std::invalid_argument);
    EXPECT_THROW(config_from("[problem]\ndirections = up\n"), std::invalid_argument);
    EXPECT_THROW(config_from("[simulation]\ndistortion = tilt\n"), std::invalid_argument);
    EXPECT_THROW(config_from("[model\nA = 1\n"), ParseError);
    EXPECT_THROW(config_from("[problem]\nk = 1\nm = 1\n").validate(), std::invalid_argument);
    EXPECT_THROW(config_from("[problem]\neps = 1, -1\n").validate(), std::invalid_argument);
}

TEST(Config, DataPathRelativeToConfig) {
    const auto dir = std::filesystem::temp_directory_path() / "supou_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "run.ini") << "[model]\ndata = flow.csv\n";
        std::ofstream(dir / "flow.csv") << "timestamp,discharge_m3s\n2016-04-01T00:00,1\n";
    }
    const auto c = load_config(dir / "run.ini");
    EXPECT_EQ(std::filesystem::path(c.data_path), dir / "flow.csv");
    EXPECT_NO_THROW(c.validate());
    std::filesystem::remove_all(dir);
}

// ---- pipeline -----------------------------------------------------------------------

TEST(Pipeline, SimulationIsByteReproducible) {
    RunConfig c;
    c.sim.horizon = c.sim.burn_in = 200.0;
    const auto a = render(path_table(simulate_path(prepare_components(c).set, c.sim)));
    const auto b = render(path_table(simulate_path(prepare_components(c).set, c.sim)));
    EXPECT_EQ(a, b);
    c.sim.seed = 2;
    EXPECT_NE(a, render(path_table(simulate_path(prepare_components(c).set, c.sim))));
}

TEST(Pipeline, SweepRecordsSaturationWithoutStopping) {
    RunConfig c;
    c.solver.resolution = 8;
    const auto rows = run_sweep(make_problem(c, Direction::Upper, 1.0), {1e4, 1.0}, c.solver);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].status, "saturated");
    EXPECT_FALSE(rows[0].solution);
    EXPECT_EQ(rows[1].status, "converged");
    const auto t = bounds_table(rows, benchmark_cumulant(c.model, 2));
    EXPECT_EQ(t.rows.size(), 2u);
    EXPECT_GT(std::get<double>(t.rows[1][3]), 0.0);
}

TEST(Pipeline, VanishingBudgetReturnsBenchmark) {
    RunConfig c;
    c.solver.resolution = 128;
    for (auto d : {Direction::Upper, Direction::Lower}) {
        const auto rows = run_sweep(make_problem(c, d, 1.0), {1e-2, 1e-4, 1e-6}, c.solver);
        ASSERT_EQ(rows.back().status, "converged");
        EXPECT_NEAR(rows.back().bound / benchmark_cumulant(c.model, 2), 1.0, 0.005);
    }
}

TEST(Pipeline, DurationTableLayout) {
    std::vector<double> x;
    for (int i = 0; i < 100; ++i) x.push_back(i % 10 < 3 ? 30.0 : 5.0);
    const auto t = duration_table(x, 1.0, {20.0});
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(std::get<std::string>(t.rows[0][1]), "high");
    EXPECT_DOUBLE_EQ(std::get<double>(t.rows[0][3]), 3.0);
    EXPECT_DOUBLE_EQ(std::get<double>(t.rows[1][3]), 7.0);
    EXPECT_NEAR(std::get<double>(t.rows[0][6]) + std::get<double>(t.rows[1][6]), 1.0, 1e-15);
}

TEST(Pipeline, ParameterTableRelativeErrors) {
    const auto m = BenchmarkModel::kazarashi();
    const auto t = parameter_table(m, CumulantSummary{17.57, 1478.0, 4.977, 45.18});
    ASSERT_EQ(t.rows.size(), 9u);
    EXPECT_EQ(std::get<std::string>(t.rows[5][0]), "mean");
    EXPECT_NEAR(std::get<double>(t.rows[5][3]), std::abs(17.57 - 17.7077) / 17.7077, 1e-4);
    EXPECT_TRUE(std::isnan(std::get<double>(t.rows[0][2])));
}

TEST(Pipeline, FitFromDischargeRecord) {
    // hourly record written from a benchmark path, then parsed and calibrated
    RunConfig c;
    c.sim.horizon = 200.0 * kHoursPerYear;
    const auto path = simulate_path(prepare_components(c).set, c.sim);
    std::ostringstream os;
    os << kDischargeHeader << "\n";
    for (std::size_t i = 0; i < path.value.size(); ++i)
        os << detail::format_timestamp(1420070400LL + 3600LL * static_cast<long long>(i)) << ","
           << format_number(path.value[i]) << "\n";
    std::istringstream is(os.str());
    const auto series = parse_discharge_csv(is);
    EXPECT_EQ(series.size(), path.value.size());
    const auto s = summarize_series(series.values, 500);
    EXPECT_EQ(s.acf.size(), 500u);
    const auto r = calibrate({s.cumulants, s.acf});
    EXPECT_NEAR(r.fitted.mean / s.cumulants.mean, 1.0, 0.02);
    EXPECT_NEAR(r.fitted.variance / s.cumulants.variance, 1.0, 0.05);
    EXPECT_GT(r.model.reversion.A, 1.0);
}
