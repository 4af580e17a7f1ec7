#pragma once

// CSV ingestion/emission and JSON forms of the configuration types.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/selection.hpp"
#include "pcdtest/simulation.hpp"
#include "pcdtest/statistics.hpp"
#include "pcdtest/weighting.hpp"

namespace pcdtest {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cell += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

}  // namespace detail

/// Reads a headed numeric CSV. Empty `covariate_columns` selects every column
/// other than the response. Rows are numbered from 1 after the header.
inline Dataset ingest_csv(const std::string& path, const std::string& response_column,
                          const std::vector<std::string>& covariate_columns = {}) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError("'" + path + "' is empty (no header row)");
    const std::vector<std::string> header = detail::split_csv_line(line);

    auto locate = [&](const std::string& name) -> std::size_t {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw InputError("'" + path + "': no column named '" + name + "'");
    };
    const std::size_t response = locate(response_column);
    std::vector<std::size_t> covariates;
    if (covariate_columns.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != response) covariates.push_back(c);
    } else {
        for (const auto& name : covariate_columns) covariates.push_back(locate(name));
    }
    if (covariates.empty()) throw InputError("'" + path + "': no covariate columns");

    std::vector<double> yv;
    std::vector<double> xv;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw InputError("'" + path + "' row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " cells, found " + std::to_string(cells.size()));
        auto cell = [&](std::size_t c) {
            const std::string& s = cells[c];
            const std::string where =
                "'" + path + "' row " + std::to_string(row) + ", column " + std::to_string(c + 1) + " ('" + header[c] + "')";
            if (s.empty()) throw InputError(where + ": missing value");
            const auto v = detail::parse_double(s);
            if (!v) throw InputError(where + ": '" + s + "' is not numeric (encode categorical columns first)");
            if (!std::isfinite(*v)) throw InputError(where + ": non-finite value '" + s + "'");
            return *v;
        };
        yv.push_back(cell(response));
        for (std::size_t c : covariates) xv.push_back(cell(c));
    }
    if (row == 0) throw InputError("'" + path + "' has a header but no data rows (empty dataset)");

    const auto n = static_cast<Eigen::Index>(row);
    const auto d = static_cast<Eigen::Index>(covariates.size());
    RowMatrix x = Eigen::Map<const RowMatrix>(xv.data(), n, d);
    Vector y = Eigen::Map<const Vector>(yv.data(), n);
    return Dataset(std::move(x), std::move(y));
}

/// 17 significant digits: parsing the output reproduces every finite double.
inline void write_csv(std::ostream& out, const Dataset& data, const std::string& response_column,
                      const std::vector<std::string>& covariate_columns) {
    if (static_cast<Eigen::Index>(covariate_columns.size()) != data.d())
        throw DimensionMismatch("write_csv: covariate name count differs from d");
    out << response_column;
    for (const auto& c : covariate_columns) out << ',' << c;
    out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << data.y()(i);
        for (Eigen::Index c = 0; c < data.d(); ++c) out << ',' << data.x()(i, c);
        out << '\n';
    }
}

inline void write_csv(std::ostream& out, const SizePowerTable& table) {
    out << "statistic,dgp,n,B,replications,alpha,reject_rate,mc_stderr,failures,seconds\n"
        << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : table.rows) {
        const bool quote = r.statistic.find(',') != std::string::npos;
        out << (quote ? "\"" : "") << r.statistic << (quote ? "\"" : "") << ',' << r.dgp << ',' << r.n << ',' << r.B
            << ',' << r.replications << ',' << r.alpha << ',' << r.reject_rate << ',' << r.mc_stderr << ','
            << r.failures << ',' << r.seconds << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const WeightingScheme& w) {
    json j{{"kind", to_string(w.kind)}};
    if (w.kind == WeightingKind::Projection) {
        j["directions"] = w.n_directions;
        j["direction_seed"] = w.direction_seed;
    }
    return j;
}

inline WeightingScheme weighting_from_json(const json& j) {
    if (j.is_string()) {
        const WeightingKind kind = parse_weighting_kind(j.get<std::string>());
        if (kind == WeightingKind::Projection) return WeightingScheme::projection();
        return {kind, 0, 0};
    }
    const WeightingKind kind = parse_weighting_kind(j.at("kind").get<std::string>());
    if (kind != WeightingKind::Projection) return {kind, 0, 0};
    return WeightingScheme::projection(j.value("directions", 50), j.value("direction_seed", std::uint64_t{0}));
}

inline json to_json(const StatisticSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CkSpec>) return json{{"type", "ck"}};
            else if constexpr (std::is_same_v<T, OmnibusCvmSpec>)
                return json{{"type", "cvm"}, {"weighting", to_json(s.weighting)}};
            else if constexpr (std::is_same_v<T, ComponentCvmSpec>)
                return json{{"type", "component"}, {"j", s.j}, {"weighting", to_json(s.weighting)}};
            else if constexpr (std::is_same_v<T, ComponentKsSpec>)
                return json{{"type", "ks"}, {"j", s.j}, {"weighting", to_json(s.weighting)}};
            else if constexpr (std::is_same_v<T, SmoothProcessCvmSpec>)
                return json{{"type", "smooth-process"},
                            {"indices", s.indices},
                            {"weights", s.weights},
                            {"weighting", to_json(s.weighting)}};
            else return json{{"type", "smooth-mean"}, {"indices", s.indices}, {"weighting", to_json(s.weighting)}};
        },
        spec);
}

namespace detail {

inline std::vector<int> indices_from_json(const json& j) {
    if (j.contains("indices")) return j.at("indices").get<std::vector<int>>();
    if (j.contains("m")) return first_components(j.at("m").get<int>(), {}).indices;
    throw InputError("smooth statistic needs 'indices' or 'm'");
}

}  // namespace detail

/// Accepts the output of to_json; a smooth statistic may give "m" instead of
/// "indices" for components 1..m. "smooth" is the unit-weight smooth-process
/// test unless "weights" are given. Missing weighting means characteristic.
inline StatisticSpec statistic_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    const WeightingScheme w =
        j.contains("weighting") ? weighting_from_json(j.at("weighting")) : WeightingScheme::characteristic();
    StatisticSpec spec;
    if (type == "ck") spec = CkSpec{};
    else if (type == "cvm") spec = OmnibusCvmSpec{w};
    else if (type == "component") spec = ComponentCvmSpec{j.at("j").get<int>(), w};
    else if (type == "ks") spec = ComponentKsSpec{j.at("j").get<int>(), w};
    else if (type == "smooth-process" || type == "smooth") {
        const auto idx = detail::indices_from_json(j);
        std::vector<double> weights = j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                                                            : std::vector<double>(idx.size(), 1.0);
        spec = SmoothProcessCvmSpec{idx, weights, w};
    } else if (type == "smooth-mean") spec = SmoothMeanSpec{detail::indices_from_json(j), w};
    else throw InputError("unknown statistic type '" + type + "'");
    validate(spec);
    return spec;
}

inline json to_json(const SplitPlan& plan) {
    json j = json::object();
    if (plan.learn_size) j["learn_count"] = *plan.learn_size;
    if (plan.learn_fraction) j["learn_fraction"] = *plan.learn_fraction;
    if (plan.shuffle_seed) j["shuffle_seed"] = *plan.shuffle_seed;
    return j;
}

inline SplitPlan split_plan_from_json(const json& j) {
    SplitPlan plan;
    if (j.contains("learn_count")) plan.learn_size = j.at("learn_count").get<Eigen::Index>();
    if (j.contains("learn_fraction")) plan.learn_fraction = j.at("learn_fraction").get<double>();
    if (j.contains("shuffle_seed")) plan.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    if (plan.learn_size.has_value() == plan.learn_fraction.has_value())
        throw InputError("split plan needs exactly one of learn_count / learn_fraction");
    return plan;
}

inline json to_json(const LearnTestConfig& c) {
    return json{{"split", to_json(c.plan)},
                {"candidates", c.candidates},
                {"keep", c.keep},
                {"weighting", to_json(c.weighting)},
                {"alpha", c.alpha},
                {"bagging", c.bagging}};
}

inline LearnTestConfig learn_test_from_json(const json& j) {
    LearnTestConfig c;
    if (j.contains("split")) c.plan = split_plan_from_json(j.at("split"));
    c.candidates = j.value("candidates", c.candidates);
    c.keep = j.value("keep", c.keep);
    if (j.contains("weighting")) c.weighting = weighting_from_json(j.at("weighting"));
    c.alpha = j.value("alpha", c.alpha);
    c.bagging = j.value("bagging", c.bagging);
    if (c.bagging < 0) throw InputError("bagging rounds must be >= 0");
    return c;
}

inline std::string default_name(const Procedure& p) {
    if (const auto* s = std::get_if<StatisticSpec>(&p)) return name(*s);
    const auto& c = std::get<LearnTestProcedure>(p).config;
    return "Smooth_Learn_" + std::to_string(c.keep) + "(" + detail::weighting_tag(c.weighting) + ")";
}

inline json to_json(const NamedProcedure& p) {
    json j;
    if (const auto* s = std::get_if<StatisticSpec>(&p.procedure)) {
        j = to_json(*s);
    } else {
        j = to_json(std::get<LearnTestProcedure>(p.procedure).config);
        j["type"] = "learn-test";
    }
    j["name"] = p.name;
    return j;
}

inline NamedProcedure procedure_from_json(const json& j) {
    NamedProcedure p;
    if (j.at("type").get<std::string>() == "learn-test") p.procedure = LearnTestProcedure{learn_test_from_json(j)};
    else p.procedure = statistic_from_json(j);
    p.name = j.contains("name") ? j.at("name").get<std::string>() : default_name(p.procedure);
    return p;
}

inline json to_json(const DgpSpec& s) {
    return json{{"id", to_string(s.id)}, {"d", s.d}, {"gamma3", s.gamma3}, {"gamma4", s.gamma4}, {"k", s.k}};
}

/// A bare name selects the standard parameters for that process; fields in
/// an object override them.
inline DgpSpec dgp_from_json(const json& j) {
    if (j.is_string()) return DgpSpec::standard(parse_dgp_id(j.get<std::string>()));
    DgpSpec s = DgpSpec::standard(parse_dgp_id(j.at("id").get<std::string>()));
    s.d = j.value("d", s.d);
    s.gamma3 = j.value("gamma3", s.gamma3);
    s.gamma4 = j.value("gamma4", s.gamma4);
    s.k = j.value("k", s.k);
    if (s.d < 1) throw InputError("dgp.d must be >= 1");
    if (!std::isfinite(s.gamma3) || !std::isfinite(s.gamma4)) throw InputError("dgp gamma values must be finite");
    return s;
}

inline json to_json(const ExperimentConfig& c) {
    json stats = json::array();
    for (const auto& p : c.statistics) stats.push_back(to_json(p));
    return json{{"dgp", to_json(c.dgp)},
                {"n", c.n},
                {"replications", c.replications},
                {"B", c.B},
                {"alpha", c.alpha},
                {"seed", c.seed},
                {"null_family", to_string(c.null_family)},
                {"threads", c.threads},
                {"statistics", stats}};
}

inline ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    try {
        c.dgp = dgp_from_json(j.at("dgp"));
        c.n = j.value("n", c.n);
        c.replications = j.value("replications", c.replications);
        c.B = j.value("B", c.B);
        c.alpha = j.value("alpha", c.alpha);
        c.seed = j.value("seed", c.seed);
        if (j.contains("null_family")) c.null_family = parse_model_kind(j.at("null_family").get<std::string>());
        c.threads = j.value("threads", c.threads);
        for (const auto& s : j.at("statistics")) c.statistics.push_back(procedure_from_json(s));
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid experiment config: ") + e.what());
    }
    if (c.replications < 1) throw InputError("replications must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (c.n < 1) throw InputError("n must be >= 1");
    if (c.B < 1) throw InputError("B must be >= 1");
    if (c.statistics.empty()) throw InputError("experiment lists no statistics");
    return c;
}

}  // namespace pcdtest
