#pragma once

// Parametric bootstrap with covariates held fixed: Y*_i ~ F(. | X_i, theta_hat),
// refit theta*_b, recompute the statistic with theta*_b. Replication b draws
// from make_rng(seed, Bootstrap, b) and writes slot b, so results do not
// depend on the thread count.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/parallel.hpp"
#include "pcdtest/random.hpp"
#include "pcdtest/statistics.hpp"

namespace pcdtest {

/// Fraction of draws >= observed (ties count toward the tail).
inline double p_value(double observed, std::span<const double> draws) {
    if (draws.empty()) throw InvalidParameter("p-value needs at least one bootstrap draw");
    if (std::isnan(observed)) throw DomainError("observed statistic is NaN");
    std::size_t tail = 0;
    for (double d : draws) tail += d >= observed ? 1 : 0;
    return static_cast<double>(tail) / static_cast<double>(draws.size());
}

struct BootstrapOptions {
    int B = 200;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Abort when more than this fraction of replications fail to refit.
    double max_failure_fraction = 0.05;
    ProbitOptions probit{};
};

struct BootstrapResult {
    double observed = 0.0;
    /// Length B; failed replications hold NaN.
    std::vector<double> draws;
    double p_value = 1.0;
    std::uint64_t seed = 0;
    int B = 0;
    int failures = 0;
};

/// Bootstrap draws for every statistic of `evaluator`, from one shared set of
/// B resamples. draws[b][k] is statistic k on resample b (NaN if the refit failed).
inline std::vector<std::vector<double>> bootstrap_draws(const StatisticEvaluator& evaluator, const ParamVector& theta_hat,
                                                        const BootstrapOptions& options, int& failures) {
    if (options.B < 1) throw InvalidParameter("bootstrap size B must be >= 1");
    const ModelFamily& family = evaluator.family();
    const std::size_t stats = evaluator.specs().size();
    std::vector<std::vector<double>> draws(static_cast<std::size_t>(options.B));
    std::vector<char> failed(static_cast<std::size_t>(options.B), 0);
    parallel_for(static_cast<std::size_t>(options.B), options.threads, [&](std::size_t b) {
        Rng rng = make_rng(options.seed, StreamTag::Bootstrap, b);
        Vector y_star = sample_responses(family, theta_hat, evaluator.x(), rng);
        try {
            const Dataset resample(evaluator.x(), y_star);
            const ParamVector theta_star = fit(family, resample, options.probit);
            draws[b] = evaluator.evaluate(resample.y(), theta_star);
        } catch (const Error&) {
            draws[b].assign(stats, std::numeric_limits<double>::quiet_NaN());
            failed[b] = 1;
        }
    });
    failures = 0;
    for (char f : failed) failures += f;
    if (failures > options.max_failure_fraction * options.B)
        throw BootstrapFailure(std::to_string(failures) + " of " + std::to_string(options.B) +
                               " bootstrap refits failed (limit " +
                               std::to_string(static_cast<int>(options.max_failure_fraction * 100)) + "%)");
    return draws;
}

namespace detail {

inline BootstrapResult summarize(double observed, const std::vector<std::vector<double>>& draws, std::size_t k,
                                 const BootstrapOptions& options, int failures) {
    BootstrapResult r;
    r.observed = observed;
    r.seed = options.seed;
    r.B = options.B;
    r.failures = failures;
    r.draws.reserve(draws.size());
    std::vector<double> finite;
    finite.reserve(draws.size());
    for (const auto& row : draws) {
        r.draws.push_back(row[k]);
        if (!std::isnan(row[k])) finite.push_back(row[k]);
    }
    r.p_value = p_value(observed, finite);
    return r;
}

}  // namespace detail

/// Fits theta_hat on `data`, evaluates every statistic, and calibrates each
/// against the same B resamples.
inline std::vector<BootstrapResult> parametric_bootstrap(const std::vector<StatisticSpec>& specs, const Dataset& data,
                                                         const ModelFamily& family, const BootstrapOptions& options,
                                                         ParamVector* fitted = nullptr) {
    const ParamVector theta_hat = fit(family, data, options.probit);
    if (fitted) *fitted = theta_hat;
    const StatisticEvaluator evaluator(family, data.x(), specs);
    const std::vector<double> observed = evaluator.evaluate(data.y(), theta_hat);
    for (double v : observed)
        if (!std::isfinite(v)) throw DomainError("observed statistic is not finite");
    int failures = 0;
    const auto draws = bootstrap_draws(evaluator, theta_hat, options, failures);
    std::vector<BootstrapResult> out;
    out.reserve(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k) out.push_back(detail::summarize(observed[k], draws, k, options, failures));
    return out;
}

inline BootstrapResult parametric_bootstrap(const StatisticSpec& spec, const Dataset& data, const ModelFamily& family,
                                            const BootstrapOptions& options) {
    return parametric_bootstrap(std::vector<StatisticSpec>{spec}, data, family, options).front();
}

}  // namespace pcdtest
