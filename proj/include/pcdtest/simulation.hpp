#pragma once

// Data-generating processes and the size/power harness.
//
// X ~ U(0,1)^d, s = beta'X with beta = (1, .., 1). Second Gaussian argument is
// a variance.
//   DGP0      N(1 + s, 1)
//   DGP1      N(1 + s, (2 beta'(X - 0.5))^2)
//   DGP2      Exp(rate = 1 + s)
//   DGP3-5    N(1 + s + 5 cos(k s), 3.5)             k = 3, 4, 5
//   DGP6-8    N(1 + 5 cos(k s), (2 beta'(X - 0.5))^2) k = 5, 6, 7
//   MeanShift N(1 + s + 5 cos(2 s), 1)
//   Hetero    N(1 + s, 6 (s - 0.5)^2 + 0.5)
//   SkewShift / KurtShift
//             F(y | s) = G(Phi(y - 1 - s)),
//             G(t) = t + gamma3 sin(3 pi t) + gamma4 sin(4 pi t),
//             sampled through the generalized inverse inf{y : F(y) >= u}.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "pcdtest/bootstrap.hpp"
#include "pcdtest/eigensystem.hpp"
#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/parallel.hpp"
#include "pcdtest/random.hpp"
#include "pcdtest/selection.hpp"
#include "pcdtest/statistics.hpp"

namespace pcdtest {

enum class DgpId { DGP0, DGP1, DGP2, DGP3, DGP4, DGP5, DGP6, DGP7, DGP8, MeanShift, Hetero, SkewShift, KurtShift };

struct DgpSpec {
    DgpId id = DgpId::DGP0;
    int d = 15;
    double gamma3 = 0.1;
    double gamma4 = 0.1;
    int k = 0;

    /// Defaults for each process: d = 15 for DGP0-8, d = 1 for the moment
    /// deviations; frequency k per DGP; perturbation sizes per deviation.
    static DgpSpec standard(DgpId id) {
        DgpSpec s;
        s.id = id;
        switch (id) {
            case DgpId::DGP3: s.k = 3; break;
            case DgpId::DGP4: s.k = 4; break;
            case DgpId::DGP5: s.k = 5; break;
            case DgpId::DGP6: s.k = 5; break;
            case DgpId::DGP7: s.k = 6; break;
            case DgpId::DGP8: s.k = 7; break;
            default: break;
        }
        if (id >= DgpId::MeanShift) s.d = 1;
        if (id == DgpId::SkewShift) s.gamma4 = 0.0;
        if (id == DgpId::KurtShift) s.gamma3 = 0.0;
        return s;
    }
};

inline std::string to_string(DgpId id) {
    static const char* names[] = {"DGP0", "DGP1", "DGP2", "DGP3", "DGP4", "DGP5", "DGP6",
                                  "DGP7", "DGP8", "mean-shift", "hetero", "skew-shift", "kurt-shift"};
    return names[static_cast<int>(id)];
}

inline DgpId parse_dgp_id(const std::string& name) {
    for (int k = 0; k <= static_cast<int>(DgpId::KurtShift); ++k)
        if (to_string(static_cast<DgpId>(k)) == name) return static_cast<DgpId>(k);
    throw InputError("unknown DGP '" + name + "'");
}

/// G(Phi(y - 1 - x)).
inline double perturbed_cdf(double y, double x, double gamma3, double gamma4) {
    const double t = normal_cdf(y - 1.0 - x);
    return t + gamma3 * sin_pi(3.0 * t) + gamma4 * sin_pi(4.0 * t);
}

namespace detail {

inline double perturbation_map(double t, double g3, double g4) { return t + g3 * sin_pi(3.0 * t) + g4 * sin_pi(4.0 * t); }

inline double perturbation_slope(double t, double g3, double g4) {
    return 1.0 + 3.0 * std::numbers::pi * g3 * cos_pi(3.0 * t) + 4.0 * std::numbers::pi * g4 * cos_pi(4.0 * t);
}

// Breakpoints 0 = c_0 < c_1 < .. < c_K = 1 such that G is monotone on each piece.
inline std::vector<double> monotone_pieces(double g3, double g4) {
    std::vector<double> cuts{0.0};
    const double bound = 3.0 * std::numbers::pi * std::abs(g3) + 4.0 * std::numbers::pi * std::abs(g4);
    if (bound >= 1.0) {
        constexpr int grid = 4096;
        double prev_t = 0.0;
        double prev_v = perturbation_slope(0.0, g3, g4);
        for (int k = 1; k <= grid; ++k) {
            const double t = static_cast<double>(k) / grid;
            const double v = perturbation_slope(t, g3, g4);
            if ((prev_v > 0.0) != (v > 0.0)) {
                double lo = prev_t, hi = t;
                const bool lo_pos = prev_v > 0.0;
                for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if ((perturbation_slope(mid, g3, g4) > 0.0) == lo_pos) lo = mid;
                    else hi = mid;
                }
                cuts.push_back(0.5 * (lo + hi));
            }
            prev_t = t;
            prev_v = v;
        }
    }
    cuts.push_back(1.0);
    return cuts;
}

constexpr double kTailZ = 40.0;

// z with Phi(z) = t by bisection; t in (0,1).
inline double normal_quantile_bisect(double t) {
    double lo = -kTailZ, hi = kTailZ;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) >= t) hi = mid;
        else lo = mid;
    }
    return hi;
}

}  // namespace detail

/// inf{y : F(y | x, gamma3, gamma4) >= u} to absolute tolerance 1e-10 in y.
/// Where F is locally decreasing, the running maximum of F is inverted.
inline double perturbed_inverse(double u, double x, double gamma3, double gamma4) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("perturbed_inverse: u must lie in (0,1)");
    const std::vector<double> cuts = detail::monotone_pieces(gamma3, gamma4);
    double a = 0.0, b = 1.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k], hi = cuts[k + 1];
        if (detail::perturbation_slope(0.5 * (lo + hi), gamma3, gamma4) <= 0.0) continue;
        if (detail::perturbation_map(hi, gamma3, gamma4) >= u) {
            a = lo;
            b = hi;
            break;
        }
    }
    const double shift = 1.0 + x;
    double y_lo = shift + (a <= 0.0 ? -detail::kTailZ : detail::normal_quantile_bisect(a));
    double y_hi = shift + (b >= 1.0 ? detail::kTailZ : detail::normal_quantile_bisect(b));
    // Quantile bisection lands within 1e-14 of the breakpoint; widen slightly
    // while staying on the same monotone piece.
    while (y_lo > shift - detail::kTailZ && perturbed_cdf(y_lo, x, gamma3, gamma4) >= u) y_lo -= 1e-12;
    while (y_hi - y_lo > 1e-10) {
        const double mid = 0.5 * (y_lo + y_hi);
        if (perturbed_cdf(mid, x, gamma3, gamma4) >= u) y_hi = mid;
        else y_lo = mid;
    }
    return y_hi;
}

inline Dataset dgp_sample(const DgpSpec& spec, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InvalidParameter("dgp_sample: n must be >= 1");
    if (spec.d < 1) throw InvalidParameter("dgp_sample: d must be >= 1");
    if (!std::isfinite(spec.gamma3) || !std::isfinite(spec.gamma4)) throw InvalidParameter("dgp_sample: non-finite gamma");
    Rng rng = make_rng(seed, StreamTag::Data, 0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    RowMatrix x(n, spec.d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < spec.d; ++c) x(i, c) = uniform(rng);

    const double half = 0.5 * spec.d;
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = x.row(i).sum();
        switch (spec.id) {
            case DgpId::DGP0: y(i) = 1.0 + s + normal(rng); break;
            case DgpId::DGP1: y(i) = 1.0 + s + std::abs(2.0 * (s - half)) * normal(rng); break;
            case DgpId::DGP2: y(i) = std::exponential_distribution<double>(1.0 + s)(rng); break;
            case DgpId::DGP3:
            case DgpId::DGP4:
            case DgpId::DGP5: y(i) = 1.0 + s + 5.0 * std::cos(spec.k * s) + std::sqrt(3.5) * normal(rng); break;
            case DgpId::DGP6:
            case DgpId::DGP7:
            case DgpId::DGP8: y(i) = 1.0 + 5.0 * std::cos(spec.k * s) + std::abs(2.0 * (s - half)) * normal(rng); break;
            case DgpId::MeanShift: y(i) = 1.0 + s + 5.0 * std::cos(2.0 * s) + normal(rng); break;
            case DgpId::Hetero: y(i) = 1.0 + s + std::sqrt(6.0 * (s - 0.5) * (s - 0.5) + 0.5) * normal(rng); break;
            case DgpId::SkewShift:
            case DgpId::KurtShift: {
                double u = 0.0;
                while (u <= 0.0) u = uniform(rng);
                y(i) = perturbed_inverse(u, s, spec.gamma3, spec.gamma4);
                break;
            }
        }
    }
    return Dataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------

struct LearnTestProcedure {
    LearnTestConfig config;
};

/// A row of the experiment: a bootstrap-calibrated statistic or a learn-then-test run.
using Procedure = std::variant<StatisticSpec, LearnTestProcedure>;

struct NamedProcedure {
    std::string name;
    Procedure procedure;
};

struct ExperimentConfig {
    DgpSpec dgp;
    Eigen::Index n = 200;
    int replications = 500;
    int B = 200;
    double alpha = 0.05;
    std::vector<NamedProcedure> statistics;
    std::uint64_t seed = 0;
    ModelKind null_family = ModelKind::LinearGaussian;
    unsigned threads = 1;
};

struct SizePowerRow {
    std::string statistic;
    std::string dgp;
    Eigen::Index n = 0;
    int B = 0;
    int replications = 0;
    double alpha = 0.05;
    double reject_rate = 0.0;
    double mc_stderr = 0.0;
    int failures = 0;
    double seconds = 0.0;
};

struct SizePowerTable {
    std::vector<SizePowerRow> rows;

    const SizePowerRow& row(const std::string& statistic) const {
        for (const auto& r : rows)
            if (r.statistic == statistic) return r;
        throw InvalidParameter("no row named '" + statistic + "'");
    }
};

namespace detail {

// Learn-test procedures sharing (plan, M, weighting) reuse one learning stage.
struct LearnGroup {
    LearnTestConfig config;
    std::vector<std::size_t> rows;
    std::vector<int> keeps;
};

inline bool same_learning(const LearnTestConfig& a, const LearnTestConfig& b) {
    return a.plan.learn_size == b.plan.learn_size && a.plan.learn_fraction == b.plan.learn_fraction &&
           a.plan.shuffle_seed == b.plan.shuffle_seed && a.candidates == b.candidates && a.weighting == b.weighting &&
           a.bagging == b.bagging;
}

}  // namespace detail

/// Replication r draws data from derive_seed(seed, Data, r) and bootstraps
/// with derive_seed(seed, Bootstrap, r) (plain statistics, one shared set of
/// resamples) or derive_seed(seed, Replication, r) (learn-then-test).
/// Rejection frequencies are identical for any thread count.
inline SizePowerTable run_experiment(const ExperimentConfig& config) {
    if (config.replications < 1) throw InvalidParameter("replications must be >= 1");
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
    if (config.statistics.empty()) throw InvalidParameter("experiment has no statistics");
    const ModelFamily family{config.null_family, config.dgp.d};

    std::vector<StatisticSpec> plain;
    std::vector<std::size_t> plain_rows;
    std::vector<detail::LearnGroup> groups;
    for (std::size_t k = 0; k < config.statistics.size(); ++k) {
        const auto& proc = config.statistics[k].procedure;
        if (const auto* spec = std::get_if<StatisticSpec>(&proc)) {
            validate(*spec);
            plain.push_back(*spec);
            plain_rows.push_back(k);
        } else {
            const auto& lt = std::get<LearnTestProcedure>(proc).config;
            auto it = std::find_if(groups.begin(), groups.end(),
                                   [&](const detail::LearnGroup& g) { return detail::same_learning(g.config, lt); });
            if (it == groups.end()) {
                groups.push_back({lt, {}, {}});
                it = groups.end() - 1;
            }
            it->rows.push_back(k);
            it->keeps.push_back(lt.keep);
        }
    }

    const std::size_t n_rows = config.statistics.size();
    const std::size_t n_groups = groups.size() + 1;
    // outcome[r][k]: 1 reject, 0 accept, -1 failed replication
    std::vector<std::vector<int>> outcome(static_cast<std::size_t>(config.replications), std::vector<int>(n_rows, -1));
    std::vector<std::vector<double>> timing(static_cast<std::size_t>(config.replications), std::vector<double>(n_groups, 0.0));

    parallel_for(static_cast<std::size_t>(config.replications), config.threads, [&](std::size_t r) {
        using clock = std::chrono::steady_clock;
        const Dataset data = dgp_sample(config.dgp, config.n, derive_seed(config.seed, StreamTag::Data, r));
        if (!plain.empty()) {
            const auto start = clock::now();
            BootstrapOptions opts;
            opts.B = config.B;
            opts.seed = derive_seed(config.seed, StreamTag::Bootstrap, r);
            try {
                const auto results = parametric_bootstrap(plain, data, family, opts);
                for (std::size_t q = 0; q < plain.size(); ++q)
                    outcome[r][plain_rows[q]] = results[q].p_value < config.alpha ? 1 : 0;
            } catch (const Error&) {
            }
            timing[r][0] = std::chrono::duration<double>(clock::now() - start).count();
        }
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto start = clock::now();
            BootstrapOptions opts;
            opts.B = config.B;
            opts.seed = derive_seed(derive_seed(config.seed, StreamTag::Replication, r), StreamTag::Replication, g);
            LearnTestConfig lt = groups[g].config;
            lt.alpha = config.alpha;
            try {
                const auto results = learn_then_test_many(data, family, lt, groups[g].keeps, opts);
                for (std::size_t q = 0; q < results.size(); ++q) outcome[r][groups[g].rows[q]] = results[q].reject ? 1 : 0;
            } catch (const Error&) {
            }
            timing[r][g + 1] = std::chrono::duration<double>(clock::now() - start).count();
        }
    });

    std::vector<std::size_t> group_of(n_rows, 0);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t k : groups[g].rows) group_of[k] = g + 1;

    SizePowerTable table;
    for (std::size_t k = 0; k < n_rows; ++k) {
        SizePowerRow row;
        row.statistic = config.statistics[k].name;
        row.dgp = to_string(config.dgp.id);
        row.n = config.n;
        row.B = config.B;
        row.replications = config.replications;
        row.alpha = config.alpha;
        int rejections = 0;
        for (std::size_t r = 0; r < outcome.size(); ++r) {
            if (outcome[r][k] < 0) ++row.failures;
            else rejections += outcome[r][k];
            row.seconds += timing[r][group_of[k]];
        }
        const int valid = config.replications - row.failures;
        if (valid > 0) {
            row.reject_rate = static_cast<double>(rejections) / valid;
            row.mc_stderr = std::sqrt(row.reject_rate * (1.0 - row.reject_rate) / valid);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace pcdtest
