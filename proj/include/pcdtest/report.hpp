#pragma once

// JSON reports for single analyses. Every report carries a config echo from
// which run_analysis reproduces the observed statistic and p-value exactly.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcdtest/bootstrap.hpp"
#include "pcdtest/io.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/selection.hpp"
#include "pcdtest/statistics.hpp"

namespace pcdtest {

struct TestReport {
    std::string statistic;
    double observed = 0.0;
    double p_value = 1.0;
    int B = 0;
    double alpha = 0.05;
    bool reject = false;
    /// Learn-then-test only.
    std::vector<int> selected;
    json config;
    double seconds = 0.0;
};

inline json to_json(const TestReport& r) {
    json j{{"statistic", r.statistic}, {"observed", r.observed}, {"p_value", r.p_value}, {"B", r.B},
           {"alpha", r.alpha},         {"reject", r.reject},     {"config", r.config},   {"seconds", r.seconds}};
    if (!r.selected.empty()) j["selected"] = r.selected;
    return j;
}

inline TestReport report_from_json(const json& j) {
    TestReport r;
    r.statistic = j.at("statistic").get<std::string>();
    r.observed = j.at("observed").get<double>();
    r.p_value = j.at("p_value").get<double>();
    r.B = j.at("B").get<int>();
    r.alpha = j.at("alpha").get<double>();
    r.reject = j.at("reject").get<bool>();
    if (j.contains("selected")) r.selected = j.at("selected").get<std::vector<int>>();
    r.config = j.at("config");
    r.seconds = j.value("seconds", 0.0);
    return r;
}

struct DataSource {
    std::string path;
    std::string response;
    std::vector<std::string> covariates;
};

enum class AnalysisKind { Test, Components, LearnTest };

/// Everything that determines a run's numbers. `threads` is echoed but does
/// not affect results.
struct Analysis {
    AnalysisKind kind = AnalysisKind::Test;
    DataSource data;
    ModelKind model = ModelKind::LinearGaussian;
    StatisticSpec statistic = OmnibusCvmSpec{WeightingScheme::characteristic()};
    int candidates = 10;
    WeightingScheme weighting = WeightingScheme::characteristic();
    LearnTestConfig learn_test;
    int B = 200;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

inline std::string to_string(AnalysisKind k) {
    switch (k) {
        case AnalysisKind::Test: return "test";
        case AnalysisKind::Components: return "components";
        case AnalysisKind::LearnTest: return "learn-test";
    }
    return "?";
}

inline json to_json(const Analysis& a) {
    json j{{"command", to_string(a.kind)},
           {"data", {{"path", a.data.path}, {"response", a.data.response}, {"covariates", a.data.covariates}}},
           {"model", to_string(a.model)},
           {"B", a.B},
           {"alpha", a.alpha},
           {"seed", a.seed},
           {"threads", a.threads}};
    switch (a.kind) {
        case AnalysisKind::Test: j["statistic"] = to_json(a.statistic); break;
        case AnalysisKind::Components:
            j["candidates"] = a.candidates;
            j["weighting"] = to_json(a.weighting);
            break;
        case AnalysisKind::LearnTest: j["learn_test"] = to_json(a.learn_test); break;
    }
    return j;
}

inline Analysis analysis_from_json(const json& j) {
    Analysis a;
    try {
        const std::string command = j.at("command").get<std::string>();
        if (command == "test") a.kind = AnalysisKind::Test;
        else if (command == "components") a.kind = AnalysisKind::Components;
        else if (command == "learn-test") a.kind = AnalysisKind::LearnTest;
        else throw InputError("unknown command '" + command + "' in config echo");
        const json& d = j.at("data");
        a.data = {d.at("path").get<std::string>(), d.at("response").get<std::string>(),
                  d.value("covariates", std::vector<std::string>{})};
        a.model = parse_model_kind(j.at("model").get<std::string>());
        a.B = j.at("B").get<int>();
        a.alpha = j.at("alpha").get<double>();
        a.seed = j.at("seed").get<std::uint64_t>();
        a.threads = j.value("threads", 1u);
        if (a.kind == AnalysisKind::Test) a.statistic = statistic_from_json(j.at("statistic"));
        if (a.kind == AnalysisKind::Components) {
            a.candidates = j.at("candidates").get<int>();
            a.weighting = weighting_from_json(j.at("weighting"));
        }
        if (a.kind == AnalysisKind::LearnTest) a.learn_test = learn_test_from_json(j.at("learn_test"));
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid config echo: ") + e.what());
    }
    return a;
}

struct ComponentRow {
    int j = 0;
    double observed = 0.0;
    double p_value = 1.0;
};

struct AnalysisOutcome {
    /// Test and LearnTest.
    TestReport report;
    /// Components: one row per candidate j = 1..M.
    std::vector<ComponentRow> components;
    int failures = 0;
};

inline json to_json(const AnalysisOutcome& o, AnalysisKind kind) {
    if (kind != AnalysisKind::Components) return to_json(o.report);
    json rows = json::array();
    for (const auto& r : o.components) rows.push_back({{"j", r.j}, {"observed", r.observed}, {"p_value", r.p_value}});
    return json{{"components", rows}, {"B", o.report.B}, {"alpha", o.report.alpha}, {"failures", o.failures},
                {"config", o.report.config}, {"seconds", o.report.seconds}};
}

inline AnalysisOutcome run_analysis(const Analysis& a) {
    const auto start = std::chrono::steady_clock::now();
    const Dataset data = ingest_csv(a.data.path, a.data.response, a.data.covariates);
    const ModelFamily family{a.model, static_cast<int>(data.d())};
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
    BootstrapOptions opts;
    opts.B = a.B;
    opts.seed = a.seed;
    opts.threads = a.threads;

    AnalysisOutcome out;
    TestReport& r = out.report;
    r.B = a.B;
    r.alpha = a.alpha;
    r.config = to_json(a);
    switch (a.kind) {
        case AnalysisKind::Test: {
            const BootstrapResult res = parametric_bootstrap(a.statistic, data, family, opts);
            r.statistic = name(a.statistic);
            r.observed = res.observed;
            r.p_value = res.p_value;
            out.failures = res.failures;
            break;
        }
        case AnalysisKind::Components: {
            if (a.candidates < 1) throw InvalidParameter("candidates must be >= 1");
            std::vector<StatisticSpec> specs;
            for (int j = 1; j <= a.candidates; ++j) specs.emplace_back(ComponentCvmSpec{j, a.weighting});
            const auto res = parametric_bootstrap(specs, data, family, opts);
            for (int j = 1; j <= a.candidates; ++j) {
                const auto& q = res[static_cast<std::size_t>(j - 1)];
                out.components.push_back({j, q.observed, q.p_value});
            }
            out.failures = res.front().failures;
            break;
        }
        case AnalysisKind::LearnTest: {
            LearnTestConfig cfg = a.learn_test;
            cfg.alpha = a.alpha;
            const LearnTestResult res = learn_then_test(data, family, cfg, opts);
            r.statistic = default_name(LearnTestProcedure{cfg});
            r.observed = res.test.observed;
            r.p_value = res.test.p_value;
            r.selected = res.used;
            out.failures = res.test.failures + res.selection.failures;
            break;
        }
    }
    r.reject = r.p_value < r.alpha;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace pcdtest
