#pragma once

// Test statistics on the sample grid.
//
//   CK                   sup_{l,m} | n^{-1/2} sum_i 1{X_i <= X_m} M(i, l) |
//   OmnibusCvM(h)        cvm_h(M)
//   ComponentCvM(j, h)   cvm_h(C_j)
//   ComponentKS(j, h)    sup_h(C_j)
//   SmoothProcessCvM     cvm_h(sum_k w_k C_{j_k})              (squared combined process)
//   SmoothMean           mean_k cvm_h(C_{j_k})                 (mean of component statistics)
//
// cvm_h / sup_h are WeightOperator::cvm / ::sup for weighting h.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pcdtest/empirical_process.hpp"
#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/weighting.hpp"

namespace pcdtest {

struct CkSpec {};
struct OmnibusCvmSpec {
    WeightingScheme weighting;
};
struct ComponentCvmSpec {
    int j = 1;
    WeightingScheme weighting;
};
struct ComponentKsSpec {
    int j = 1;
    WeightingScheme weighting;
};
struct SmoothProcessCvmSpec {
    std::vector<int> indices;
    std::vector<double> weights;
    WeightingScheme weighting;
};
struct SmoothMeanSpec {
    std::vector<int> indices;
    WeightingScheme weighting;
};

using StatisticSpec =
    std::variant<CkSpec, OmnibusCvmSpec, ComponentCvmSpec, ComponentKsSpec, SmoothProcessCvmSpec, SmoothMeanSpec>;

/// Equal-weight mean over components 1..m.
inline SmoothMeanSpec first_components(int m, const WeightingScheme& weighting) {
    SmoothMeanSpec spec{{}, weighting};
    for (int j = 1; j <= m; ++j) spec.indices.push_back(j);
    return spec;
}

/// Neyman-type smooth test over components 1..m: the process form with unit weights.
inline SmoothProcessCvmSpec smooth_test(int m, const WeightingScheme& weighting) {
    SmoothProcessCvmSpec spec{{}, std::vector<double>(static_cast<std::size_t>(std::max(m, 0)), 1.0), weighting};
    for (int j = 1; j <= m; ++j) spec.indices.push_back(j);
    return spec;
}

namespace detail {

inline void check_indices(const std::vector<int>& indices) {
    if (indices.empty()) throw InvalidParameter("component set is empty");
    std::set<int> seen;
    for (int j : indices) {
        if (j < 1) throw InvalidIndex("component index must be >= 1, got " + std::to_string(j));
        if (!seen.insert(j).second) throw InvalidParameter("duplicate component index " + std::to_string(j));
    }
}

inline std::string weighting_tag(const WeightingScheme& w) {
    switch (w.kind) {
        case WeightingKind::Indicator: return "ind";
        case WeightingKind::Projection: return "es";
        case WeightingKind::Characteristic: return "ch";
    }
    return "?";
}

inline std::string join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "," : "") << v[k];
    return os.str();
}

}  // namespace detail

inline void validate(const StatisticSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ComponentCvmSpec> || std::is_same_v<T, ComponentKsSpec>) {
                (void)ComponentIndex(s.j);
            } else if constexpr (std::is_same_v<T, SmoothProcessCvmSpec>) {
                detail::check_indices(s.indices);
                if (s.weights.size() != s.indices.size())
                    throw InvalidParameter("smooth statistic: weights and indices differ in length");
                for (double w : s.weights)
                    if (!std::isfinite(w)) throw InvalidParameter("smooth statistic: non-finite weight");
            } else if constexpr (std::is_same_v<T, SmoothMeanSpec>) {
                detail::check_indices(s.indices);
            }
            if constexpr (!std::is_same_v<T, CkSpec>) {
                if (s.weighting.kind == WeightingKind::Projection && s.weighting.n_directions < 1)
                    throw InvalidParameter("projection weighting needs at least one direction");
            }
        },
        spec);
}

/// Short display name, e.g. "CK", "CvM_ch", "CvM_3(ind)", "Smooth[1,2,3](ch)".
inline std::string name(const StatisticSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CkSpec>) return "CK";
            else if constexpr (std::is_same_v<T, OmnibusCvmSpec>) return "CvM_" + detail::weighting_tag(s.weighting);
            else if constexpr (std::is_same_v<T, ComponentCvmSpec>)
                return "CvM_" + std::to_string(s.j) + "(" + detail::weighting_tag(s.weighting) + ")";
            else if constexpr (std::is_same_v<T, ComponentKsSpec>)
                return "KS_" + std::to_string(s.j) + "(" + detail::weighting_tag(s.weighting) + ")";
            else if constexpr (std::is_same_v<T, SmoothProcessCvmSpec>)
                return "SmoothProcess[" + detail::join(s.indices) + "](" + detail::weighting_tag(s.weighting) + ")";
            else return "Smooth[" + detail::join(s.indices) + "](" + detail::weighting_tag(s.weighting) + ")";
        },
        spec);
}

// ---------------------------------------------------------------------------
// Direct forms. Each builds what it needs from scratch.

inline double ck_statistic(const Dataset& data, const ParamVector& theta, const ModelFamily& family) {
    return WeightOperator::indicator(data.x()).sup(residual_matrix(data, theta, family).matrix());
}

inline double cvm_characteristic(const Dataset& data, const Matrix& marks) {
    return WeightOperator::characteristic(data.x()).cvm(marks);
}
inline double cvm_characteristic(const Dataset& data, const ResidualMatrix& marks) {
    return cvm_characteristic(data, marks.matrix());
}
inline double cvm_characteristic(const Dataset& data, const ComponentMarkMatrix& marks) {
    return cvm_characteristic(data, marks.matrix());
}

inline double cvm_projection(const Dataset& data, const Matrix& marks, int n_directions, std::uint64_t direction_seed) {
    return WeightOperator::build(data.x(), WeightingScheme::projection(n_directions, direction_seed)).cvm(marks);
}
inline double cvm_projection(const Dataset& data, const ResidualMatrix& marks, int n_directions,
                             std::uint64_t direction_seed) {
    return cvm_projection(data, marks.matrix(), n_directions, direction_seed);
}
inline double cvm_projection(const Dataset& data, const ComponentMarkMatrix& marks, int n_directions,
                             std::uint64_t direction_seed) {
    return cvm_projection(data, marks.matrix(), n_directions, direction_seed);
}

inline double cvm_indicator(const Dataset& data, const Matrix& marks) {
    return WeightOperator::indicator(data.x()).cvm(marks);
}

inline double omnibus_cvm(const Dataset& data, const ParamVector& theta, const ModelFamily& family,
                          const WeightingScheme& weighting) {
    return WeightOperator::build(data.x(), weighting).cvm(residual_matrix(data, theta, family).matrix());
}

inline double component_cvm(const Dataset& data, const ParamVector& theta, const ModelFamily& family, ComponentIndex j,
                            const WeightingScheme& weighting) {
    return WeightOperator::build(data.x(), weighting).cvm(component_marks(data, theta, family, j).matrix());
}

inline double component_ks(const Dataset& data, const ParamVector& theta, const ModelFamily& family, ComponentIndex j,
                           const WeightingScheme& weighting) {
    return WeightOperator::build(data.x(), weighting).sup(component_marks(data, theta, family, j).matrix());
}

inline double smooth_process_cvm(const Dataset& data, const ParamVector& theta, const ModelFamily& family,
                                 const std::vector<int>& indices, const std::vector<double>& weights,
                                 const WeightingScheme& weighting) {
    validate(StatisticSpec{SmoothProcessCvmSpec{indices, weights, weighting}});
    const TransformGrid grid = TransformGrid::evaluate(data, theta, family);
    Matrix combined = Matrix::Zero(data.n(), data.n());
    for (std::size_t k = 0; k < indices.size(); ++k)
        combined += weights[k] * component_marks(grid, ComponentIndex(indices[k]));
    return WeightOperator::build(data.x(), weighting).cvm(combined);
}

inline double smooth_mean(std::span<const double> component_values) {
    if (component_values.empty()) throw InvalidParameter("smooth mean of an empty set");
    double total = 0.0;
    for (double v : component_values) total += v;
    return total / static_cast<double>(component_values.size());
}

// ---------------------------------------------------------------------------

/// Evaluates a fixed list of statistics for one covariate matrix, sharing the
/// transform grid, mark matrices and weight operators between them. Weight
/// operators depend only on X (and projection directions), so the evaluator is
/// built once per analysis and reused for every bootstrap resample; it is
/// immutable after construction and safe to share across threads.
class StatisticEvaluator {
public:
    StatisticEvaluator(ModelFamily family, const RowMatrix& x, std::vector<StatisticSpec> specs)
        : family_(family), x_(x), specs_(std::move(specs)) {
        for (const auto& s : specs_) validate(s);
        plan_.resize(specs_.size());
        for (std::size_t k = 0; k < specs_.size(); ++k) {
            std::visit(
                [&](const auto& s) {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, CkSpec>) {
                        plan_[k].op = operator_for(WeightingScheme::indicator());
                        need_residual_ = true;
                    } else {
                        plan_[k].op = operator_for(s.weighting);
                        if constexpr (std::is_same_v<T, OmnibusCvmSpec>) need_residual_ = true;
                        else if constexpr (std::is_same_v<T, ComponentCvmSpec> || std::is_same_v<T, ComponentKsSpec>)
                            max_component_ = std::max(max_component_, s.j);
                        else
                            for (int j : s.indices) max_component_ = std::max(max_component_, j);
                        if constexpr (std::is_same_v<T, ComponentCvmSpec>) cvm_components_[plan_[k].op].insert(s.j);
                        if constexpr (std::is_same_v<T, SmoothMeanSpec>)
                            cvm_components_[plan_[k].op].insert(s.indices.begin(), s.indices.end());
                    }
                },
                specs_[k]);
        }
    }

    const std::vector<StatisticSpec>& specs() const noexcept { return specs_; }
    const ModelFamily& family() const noexcept { return family_; }
    const RowMatrix& x() const noexcept { return x_; }
    Eigen::Index n() const noexcept { return x_.rows(); }

    std::vector<double> evaluate(const Vector& y, const ParamVector& theta) const {
        if (y.size() != x_.rows()) throw DimensionMismatch("response length differs from the evaluator's covariates");
        const Dataset data(x_, y);
        const TransformGrid grid = TransformGrid::evaluate(data, theta, family_);
        Matrix residual;
        if (need_residual_) residual = residual_marks(data, grid);
        const Matrix comps = stacked_component_marks(grid, max_component_);
        const Eigen::Index n = grid.n();
        auto comp = [&](int j) { return MatrixView(comps.data() + (j - 1) * n * n, n, n); };

        std::vector<double> out(specs_.size(), 0.0);
        // CvM inputs per operator. Components come first in ascending j, so a
        // run of consecutive indices is one in-place block of `comps`.
        std::vector<std::vector<MatrixView>> cvm_inputs(operators_.size());
        std::vector<std::map<int, std::size_t>> comp_slot(operators_.size());
        for (std::size_t op = 0; op < operators_.size(); ++op) {
            for (int j : cvm_components_[op]) {
                comp_slot[op].emplace(j, cvm_inputs[op].size());
                cvm_inputs[op].push_back(comp(j));
            }
        }
        std::vector<Matrix> combined(specs_.size());
        auto request = [&](std::size_t op, const Matrix& m) {
            cvm_inputs[op].emplace_back(m.data(), m.rows(), m.cols());
            return cvm_inputs[op].size() - 1;
        };

        std::vector<std::vector<std::size_t>> slots(specs_.size());
        for (std::size_t k = 0; k < specs_.size(); ++k) {
            const std::size_t op = plan_[k].op;
            std::visit(
                [&](const auto& s) {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, CkSpec>) out[k] = operators_[op].sup(residual);
                    else if constexpr (std::is_same_v<T, ComponentKsSpec>) out[k] = operators_[op].sup(comp(s.j));
                    else if constexpr (std::is_same_v<T, OmnibusCvmSpec>) slots[k].push_back(request(op, residual));
                    else if constexpr (std::is_same_v<T, ComponentCvmSpec>) slots[k].push_back(comp_slot[op].at(s.j));
                    else if constexpr (std::is_same_v<T, SmoothMeanSpec>)
                        for (int j : s.indices) slots[k].push_back(comp_slot[op].at(j));
                    else {
                        combined[k] = Matrix::Zero(n, n);
                        for (std::size_t q = 0; q < s.indices.size(); ++q) combined[k] += s.weights[q] * comp(s.indices[q]);
                        slots[k].push_back(request(op, combined[k]));
                    }
                },
                specs_[k]);
        }

        std::vector<std::vector<double>> cvm_values(operators_.size());
        for (std::size_t op = 0; op < operators_.size(); ++op)
            if (!cvm_inputs[op].empty()) cvm_values[op] = operators_[op].cvm_many(cvm_inputs[op]);

        for (std::size_t k = 0; k < specs_.size(); ++k) {
            if (slots[k].empty()) continue;
            const auto& vals = cvm_values[plan_[k].op];
            double total = 0.0;
            for (std::size_t slot : slots[k]) total += vals[slot];
            out[k] = total / static_cast<double>(slots[k].size());
        }
        return out;
    }

private:
    struct Plan {
        std::size_t op = 0;
    };

    std::size_t operator_for(const WeightingScheme& w) {
        for (std::size_t k = 0; k < schemes_.size(); ++k)
            if (schemes_[k] == w) return k;
        schemes_.push_back(w);
        operators_.push_back(WeightOperator::build(x_, w));
        cvm_components_.emplace_back();
        return operators_.size() - 1;
    }

    ModelFamily family_;
    RowMatrix x_;
    std::vector<StatisticSpec> specs_;
    std::vector<Plan> plan_;
    std::vector<WeightingScheme> schemes_;
    std::vector<WeightOperator> operators_;
    std::vector<std::set<int>> cvm_components_;  // per operator: j with a CvM request
    bool need_residual_ = false;
    int max_component_ = 0;
};

/// Convenience: one statistic on one dataset.
inline double evaluate(const StatisticSpec& spec, const Dataset& data, const ParamVector& theta,
                       const ModelFamily& family) {
    return StatisticEvaluator(family, data.x(), {spec}).evaluate(data.y(), theta).front();
}

}  // namespace pcdtest
