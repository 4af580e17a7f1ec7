#pragma once

// pcdtest command line. Exit codes: 0 success, 1 rejection under --signal,
// 2 usage or runtime error.
//
//   test        one bootstrap-calibrated statistic on a CSV
//   components  component p-values j = 1..M from one set of resamples
//   learn-test  split, rank components on the learning part, test on the rest
//   simulate    JSON experiment config -> size/power CSV
//   replay      rerun the config echo stored in a report

#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcdtest/io.hpp"
#include "pcdtest/report.hpp"
#include "pcdtest/simulation.hpp"

namespace pcdtest {

namespace detail {

struct CliFlags {
    std::string data;
    std::string response;
    std::vector<std::string> covariates;
    std::string model = "linear-gaussian";
    std::string weighting = "characteristic";
    int directions = 50;
    std::optional<std::uint64_t> direction_seed;
    int B = 200;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string output;
    bool signal = false;
    bool table = false;

    std::string statistic = "cvm";
    std::vector<int> components;
    std::vector<double> weights;

    int candidates = 10;
    int select_m = 5;
    std::optional<double> learn_fraction;
    std::optional<Eigen::Index> learn_count;
    std::optional<std::uint64_t> shuffle_seed;

    std::string config;
    std::string report;
};

inline void add_data_flags(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--data", f.data, "CSV file with a header row")->required();
    cmd->add_option("--response", f.response, "response column name")->required();
    cmd->add_option("--covariates", f.covariates, "covariate column names (default: all others)")->delimiter(',');
    cmd->add_option("--model", f.model, "null family")->check(CLI::IsMember({"linear-gaussian", "probit"}));
    cmd->add_option("--bootstrap-B", f.B, "bootstrap replications")->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", f.alpha, "test level")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", f.seed, "top-level seed");
    cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    cmd->add_option("--output", f.output, "write the JSON report here instead of stdout");
    cmd->add_flag("--signal", f.signal, "exit with status 1 when H0 is rejected");
}

inline void add_weighting_flags(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--weighting", f.weighting, "weighting family")
        ->check(CLI::IsMember({"indicator", "projection", "characteristic"}));
    cmd->add_option("--directions", f.directions, "projection directions")->check(CLI::PositiveNumber);
    cmd->add_option("--direction-seed", f.direction_seed, "projection direction seed (default: derived from --seed)");
}

inline WeightingScheme weighting_of(const CliFlags& f) {
    const WeightingKind kind = parse_weighting_kind(f.weighting);
    if (kind != WeightingKind::Projection) return {kind, 0, 0};
    return WeightingScheme::projection(f.directions,
                                       f.direction_seed.value_or(derive_seed(f.seed, StreamTag::Directions, 0)));
}

inline Analysis analysis_of(const CliFlags& f, AnalysisKind kind) {
    Analysis a;
    a.kind = kind;
    a.data = {f.data, f.response, f.covariates};
    a.model = parse_model_kind(f.model);
    a.B = f.B;
    a.alpha = f.alpha;
    a.seed = f.seed;
    a.threads = f.threads;
    const WeightingScheme w = weighting_of(f);
    switch (kind) {
        case AnalysisKind::Test: {
            const std::string& s = f.statistic;
            const int j = f.components.empty() ? 1 : f.components.front();
            if ((s == "component" || s == "ks") && f.components.size() > 1)
                throw InvalidParameter("--statistic " + s + " takes a single --components index");
            std::vector<int> idx = f.components;
            if (idx.empty()) idx = first_components(5, w).indices;
            if (s == "ck") a.statistic = CkSpec{};
            else if (s == "cvm") a.statistic = OmnibusCvmSpec{w};
            else if (s == "component") a.statistic = ComponentCvmSpec{j, w};
            else if (s == "ks") a.statistic = ComponentKsSpec{j, w};
            else if (s == "smooth-mean") a.statistic = SmoothMeanSpec{idx, w};
            else {
                std::vector<double> weights = f.weights.empty() ? std::vector<double>(idx.size(), 1.0) : f.weights;
                a.statistic = SmoothProcessCvmSpec{idx, weights, w};
            }
            validate(a.statistic);
            break;
        }
        case AnalysisKind::Components:
            a.candidates = f.candidates;
            a.weighting = w;
            break;
        case AnalysisKind::LearnTest: {
            LearnTestConfig c;
            if (f.learn_count) c.plan = SplitPlan::first(*f.learn_count);
            else c.plan = SplitPlan::fraction(f.learn_fraction.value_or(0.5));
            c.plan.shuffle_seed = f.shuffle_seed;
            c.candidates = f.candidates;
            c.keep = f.select_m;
            c.weighting = w;
            c.alpha = f.alpha;
            a.learn_test = c;
            break;
        }
    }
    return a;
}

inline void emit(const std::string& path, std::ostream& out, const std::string& text) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(path);
    if (!file) throw InputError("cannot write '" + path + "'");
    file << text;
}

// Components: rejects when the smallest p-value is below alpha / M (Bonferroni).
inline bool rejected(const AnalysisOutcome& o, AnalysisKind kind) {
    if (kind != AnalysisKind::Components) return o.report.reject;
    for (const auto& r : o.components)
        if (r.p_value < o.report.alpha / static_cast<double>(o.components.size())) return true;
    return false;
}

inline int run_and_report(const Analysis& a, const CliFlags& f, std::ostream& out) {
    const AnalysisOutcome outcome = run_analysis(a);
    std::string text;
    if (a.kind == AnalysisKind::Components && f.table) {
        std::ostringstream os;
        os << "j,observed,p_value\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (const auto& r : outcome.components) os << r.j << ',' << r.observed << ',' << r.p_value << '\n';
        text = os.str();
    } else {
        text = to_json(outcome, a.kind).dump(2) + "\n";
    }
    emit(f.output, out, text);
    return f.signal && rejected(outcome, a.kind) ? 1 : 0;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    detail::CliFlags f;
    CLI::App app{"Conditional distribution specification tests by principal component decomposition", "pcdtest"};
    app.require_subcommand(1, 1);

    auto* test = app.add_subcommand("test", "one bootstrap-calibrated statistic on a CSV");
    detail::add_data_flags(test, f);
    detail::add_weighting_flags(test, f);
    test->add_option("--statistic", f.statistic, "statistic")
        ->check(CLI::IsMember({"ck", "cvm", "component", "ks", "smooth", "smooth-mean", "smooth-process"}));
    test->add_option("--components", f.components, "component index (component, ks) or indices (smooth)")
        ->delimiter(',');
    test->add_option("--weights", f.weights, "smooth-process weights")->delimiter(',');

    auto* components = app.add_subcommand("components", "component p-values j = 1..M");
    detail::add_data_flags(components, f);
    detail::add_weighting_flags(components, f);
    components->add_option("--candidates-M", f.candidates, "number of components M")->check(CLI::PositiveNumber);
    components->add_flag("--table", f.table, "print a CSV table instead of JSON");

    auto* learn = app.add_subcommand("learn-test", "learn-then-test with data-driven component selection");
    detail::add_data_flags(learn, f);
    detail::add_weighting_flags(learn, f);
    learn->add_option("--candidates-M", f.candidates, "candidate components M")->check(CLI::PositiveNumber);
    learn->add_option("--select-m", f.select_m, "selected components m")->check(CLI::PositiveNumber);
    auto* fraction = learn->add_option("--learn-fraction", f.learn_fraction, "learning share of the rows")
                         ->check(CLI::Range(0.0, 1.0));
    auto* count = learn->add_option("--learn-count", f.learn_count, "learning row count");
    fraction->excludes(count);
    learn->add_option("--shuffle-seed", f.shuffle_seed, "permute rows before splitting");

    auto* simulate = app.add_subcommand("simulate", "size/power experiment from a JSON config");
    simulate->add_option("--config", f.config, "experiment config (JSON)")->required();
    simulate->add_option("--output", f.output, "write the CSV table here instead of stdout");
    auto* sim_threads = simulate->add_option("--threads", f.threads, "worker threads (0 = all cores)");

    auto* replay = app.add_subcommand("replay", "rerun the config echo of a report");
    replay->add_option("--report", f.report, "report JSON")->required();
    replay->add_option("--output", f.output, "write the JSON report here instead of stdout");
    replay->add_flag("--signal", f.signal, "exit with status 1 when H0 is rejected");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (test->parsed()) return detail::run_and_report(detail::analysis_of(f, AnalysisKind::Test), f, out);
        if (components->parsed())
            return detail::run_and_report(detail::analysis_of(f, AnalysisKind::Components), f, out);
        if (learn->parsed()) return detail::run_and_report(detail::analysis_of(f, AnalysisKind::LearnTest), f, out);
        if (simulate->parsed()) {
            ExperimentConfig config = experiment_from_json(detail::read_json_file(f.config));
            if (sim_threads->count() > 0) config.threads = f.threads;
            std::ostringstream os;
            write_csv(os, run_experiment(config));
            detail::emit(f.output, out, os.str());
            return 0;
        }
        const json report = detail::read_json_file(f.report);
        if (!report.contains("config")) throw InputError("'" + f.report + "' has no config echo");
        return detail::run_and_report(analysis_from_json(report.at("config")), f, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace pcdtest
