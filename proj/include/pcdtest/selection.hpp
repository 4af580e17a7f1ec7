#pragma once

// Learn-then-test component selection.
//
// Learning: fit on the learning part, bootstrap the component CvM statistics
// j = 1..M from one shared set of resamples, rank by p-value (ascending, ties
// to the smaller j) and keep the first m.
// Testing: on the disjoint testing part, c_bar = mean of the selected
// component statistics, calibrated by bootstrapping c_bar itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcdtest/bootstrap.hpp"
#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/random.hpp"
#include "pcdtest/statistics.hpp"

namespace pcdtest {

struct SplitPlan {
    /// Exactly one of learn_size / learn_fraction is set.
    std::optional<Eigen::Index> learn_size;
    std::optional<double> learn_fraction;
    /// Unset: the first rows form the learning part. Set: rows are permuted first.
    std::optional<std::uint64_t> shuffle_seed;

    static SplitPlan first(Eigen::Index count) { return {count, std::nullopt, std::nullopt}; }
    static SplitPlan fraction(double f, std::optional<std::uint64_t> seed = std::nullopt) {
        return {std::nullopt, f, seed};
    }

    Eigen::Index resolve(Eigen::Index n) const {
        if (learn_size.has_value() == learn_fraction.has_value())
            throw InvalidParameter("split plan needs exactly one of learn_size / learn_fraction");
        Eigen::Index k = 0;
        if (learn_size) {
            k = *learn_size;
        } else {
            if (!(*learn_fraction > 0.0 && *learn_fraction < 1.0))
                throw InvalidParameter("learn fraction must lie in (0, 1)");
            k = static_cast<Eigen::Index>(std::floor(*learn_fraction * static_cast<double>(n)));
        }
        if (k <= 0 || k >= n)
            throw InvalidParameter("learning part must have between 1 and n-1 rows (got " + std::to_string(k) +
                                   " of " + std::to_string(n) + ")");
        return k;
    }
};

struct SplitIndices {
    std::vector<Eigen::Index> learn;
    std::vector<Eigen::Index> test;
};

inline SplitIndices split_indices(Eigen::Index n, const SplitPlan& plan) {
    const Eigen::Index k = plan.resolve(n);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    if (plan.shuffle_seed) {
        Rng rng = make_rng(*plan.shuffle_seed, StreamTag::Shuffle, 0);
        for (std::size_t i = rows.size() - 1; i > 0; --i)
            std::swap(rows[i], rows[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    SplitIndices out;
    out.learn.assign(rows.begin(), rows.begin() + k);
    out.test.assign(rows.begin() + k, rows.end());
    return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& data, const SplitPlan& plan) {
    const SplitIndices idx = split_indices(data.n(), plan);
    return {data.subset(idx.learn), data.subset(idx.test)};
}

struct SelectionResult {
    /// p-value of component j at position j-1.
    std::vector<double> candidate_pvalues;
    std::vector<double> candidate_statistics;
    /// Component indices in selection order.
    std::vector<int> selected;
    int failures = 0;
};

/// Ascending p-value order, ties to the smaller index; returns 1-based indices.
inline std::vector<int> rank_components(const std::vector<double>& pvalues) {
    std::vector<int> order(pvalues.size());
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pvalues[static_cast<std::size_t>(a - 1)] < pvalues[static_cast<std::size_t>(b - 1)]; });
    return order;
}

inline SelectionResult learn_component_ranking(const Dataset& learn, const ModelFamily& family, int candidates,
                                               int keep, const WeightingScheme& weighting,
                                               const BootstrapOptions& options) {
    if (candidates < 1) throw InvalidParameter("number of candidate components must be >= 1");
    if (keep < 1 || keep > candidates) throw InvalidParameter("selected count must lie in [1, M]");
    std::vector<StatisticSpec> specs;
    for (int j = 1; j <= candidates; ++j) specs.emplace_back(ComponentCvmSpec{j, weighting});
    const auto results = parametric_bootstrap(specs, learn, family, options);

    SelectionResult sel;
    for (const auto& r : results) {
        sel.candidate_pvalues.push_back(r.p_value);
        sel.candidate_statistics.push_back(r.observed);
    }
    sel.failures = results.front().failures;
    sel.selected = rank_components(sel.candidate_pvalues);
    sel.selected.resize(static_cast<std::size_t>(keep));
    return sel;
}

/// Candidate p-values averaged over `rounds` row resamples (with replacement)
/// of the learning set; round r draws rows from make_rng(seed, Learn, r) and
/// bootstraps with derive_seed(seed, Learn, r).
inline SelectionResult bagged_component_ranking(const Dataset& learn, const ModelFamily& family, int candidates,
                                                int keep, const WeightingScheme& weighting,
                                                const BootstrapOptions& options, int rounds) {
    if (rounds < 1) throw InvalidParameter("bagging needs at least one round");
    SelectionResult sel;
    sel.candidate_pvalues.assign(static_cast<std::size_t>(candidates), 0.0);
    sel.candidate_statistics.assign(static_cast<std::size_t>(candidates), 0.0);
    for (int r = 0; r < rounds; ++r) {
        Rng rng = make_rng(options.seed, StreamTag::Learn, static_cast<std::uint64_t>(r));
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(learn.n()));
        for (auto& row : rows) row = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(learn.n()));
        BootstrapOptions opts = options;
        opts.seed = derive_seed(options.seed, StreamTag::Learn, static_cast<std::uint64_t>(r));
        const SelectionResult round =
            learn_component_ranking(learn.subset(rows), family, candidates, keep, weighting, opts);
        for (std::size_t j = 0; j < sel.candidate_pvalues.size(); ++j) {
            sel.candidate_pvalues[j] += round.candidate_pvalues[j] / rounds;
            sel.candidate_statistics[j] += round.candidate_statistics[j] / rounds;
        }
        sel.failures += round.failures;
    }
    sel.selected = rank_components(sel.candidate_pvalues);
    sel.selected.resize(static_cast<std::size_t>(keep));
    return sel;
}

struct LearnTestConfig {
    SplitPlan plan = SplitPlan::first(50);
    int candidates = 10;  // M
    int keep = 5;         // m
    WeightingScheme weighting = WeightingScheme::characteristic();
    double alpha = 0.05;
    /// Bagging rounds for the learning stage; 0 ranks on the learning set once.
    int bagging = 0;
};

struct LearnTestResult {
    SelectionResult selection;
    BootstrapResult test;
    /// Components that entered c_bar.
    std::vector<int> used;
    double alpha = 0.05;
    bool reject = false;
    Eigen::Index learn_n = 0;
    Eigen::Index test_n = 0;
};

/// Learn once with M candidates, then test with each requested m (sharing
/// the learning stage and the testing-stage resamples).
inline std::vector<LearnTestResult> learn_then_test_many(const Dataset& data, const ModelFamily& family,
                                                         const LearnTestConfig& config, const std::vector<int>& keeps,
                                                         const BootstrapOptions& options) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw InvalidParameter("alpha must lie in (0, 1)");
    if (keeps.empty()) throw InvalidParameter("no selection size requested");
    const int max_keep = *std::max_element(keeps.begin(), keeps.end());
    const auto [learn, test] = split(data, config.plan);

    BootstrapOptions learn_opts = options;
    learn_opts.seed = derive_seed(options.seed, StreamTag::Learn, 0);
    const SelectionResult selection =
        config.bagging > 0 ? bagged_component_ranking(learn, family, config.candidates, max_keep, config.weighting,
                                                      learn_opts, config.bagging)
                           : learn_component_ranking(learn, family, config.candidates, max_keep, config.weighting,
                                                     learn_opts);

    std::vector<StatisticSpec> specs;
    for (int m : keeps) {
        if (m < 1 || m > config.candidates) throw InvalidParameter("selected count must lie in [1, M]");
        std::vector<int> idx(selection.selected.begin(), selection.selected.begin() + m);
        std::sort(idx.begin(), idx.end());
        specs.emplace_back(SmoothMeanSpec{idx, config.weighting});
    }
    BootstrapOptions test_opts = options;
    test_opts.seed = derive_seed(options.seed, StreamTag::Test, 0);
    const auto tested = parametric_bootstrap(specs, test, family, test_opts);

    std::vector<LearnTestResult> out;
    for (std::size_t k = 0; k < keeps.size(); ++k) {
        LearnTestResult r;
        r.selection = selection;
        r.selection.selected.resize(static_cast<std::size_t>(keeps[k]));
        r.used = r.selection.selected;
        r.test = tested[k];
        r.alpha = config.alpha;
        r.reject = r.test.p_value < config.alpha;
        r.learn_n = learn.n();
        r.test_n = test.n();
        out.push_back(std::move(r));
    }
    return out;
}

inline LearnTestResult learn_then_test(const Dataset& data, const ModelFamily& family, const LearnTestConfig& config,
                                       const BootstrapOptions& options) {
    return learn_then_test_many(data, family, config, {config.keep}, options).front();
}

}  // namespace pcdtest
