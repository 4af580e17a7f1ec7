#pragma once

// Sample-grid evaluation of the residual-marked process and its components.
// Every process is evaluated at y in {Y_l}; rows index observations i,
// columns index grid points l.
//
//   residual marks   M(i, l) = 1{Y_i <= Y_l} - F(Y_l | X_i, theta)
//   component marks  C_j(i, l) = f_j(Y_l, X_i) g_j(Y_i, X_i)

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "pcdtest/eigensystem.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/weighting.hpp"

namespace pcdtest {

class ResidualMatrix {
public:
    explicit ResidualMatrix(Matrix m) : m_(std::move(m)) {}
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index l) const { return m_(i, l); }

private:
    Matrix m_;
};

class ComponentMarkMatrix {
public:
    ComponentMarkMatrix(ComponentIndex j, Matrix c) : j_(j), c_(std::move(c)) {}
    ComponentIndex component() const noexcept { return j_; }
    const Matrix& matrix() const noexcept { return c_; }
    double operator()(Eigen::Index i, Eigen::Index l) const { return c_(i, l); }

private:
    ComponentIndex j_;
    Matrix c_;
};

/// The conditional transform on the sample grid: t(i, l) = T(Y_l, X_i) and
/// its diagonal u(i) = T(Y_i, X_i).
struct TransformGrid {
    Matrix t;
    Vector u;

    static TransformGrid evaluate(const Dataset& data, const ParamVector& theta, const ModelFamily& family) {
        TransformGrid g;
        g.t = cdf_grid(family, theta, data.x(), data.y());
        g.u = g.t.diagonal();
        return g;
    }

    Eigen::Index n() const noexcept { return t.rows(); }
};

/// 1{Y_i <= Y_l}: the weak inequality is kept for ties.
inline Matrix indicator_grid(const Vector& y) {
    const Eigen::Index n = y.size();
    Matrix ind(n, n);
    for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index i = 0; i < n; ++i) ind(i, l) = y(i) <= y(l) ? 1.0 : 0.0;
    return ind;
}

inline Matrix residual_marks(const Dataset& data, const TransformGrid& grid) {
    return indicator_grid(data.y()) - grid.t;
}

inline ResidualMatrix residual_matrix(const Dataset& data, const ParamVector& theta, const ModelFamily& family) {
    return ResidualMatrix(residual_marks(data, TransformGrid::evaluate(data, theta, family)));
}

/// C_1 .. C_count side by side: columns [(j-1) n, j n) hold C_j.
inline Matrix stacked_component_marks(const TransformGrid& grid, int count) {
    const Eigen::Index n = grid.n();
    Matrix out(n, n * count);
    if (count <= 0) return out;
    const std::vector<Vector> g = cosine_harmonics(grid.u, count);
    if (count > detail::kRecurrenceLimit) {
        for (int j = 1; j <= count; ++j) out.middleCols((j - 1) * n, n) = g[static_cast<std::size_t>(j - 1)].asDiagonal() * sine_harmonic(grid.t, j);
        return out;
    }
    const Eigen::Index block = n * n;
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s1, c1;
            detail::sincos_pi(grid.t(i, l), s1, c1);
            double s = s1, c = c1;
            double* dst = out.data() + l * n + i;
            dst[0] = std::numbers::sqrt2 * s * g[0](i);
            for (int j = 1; j < count; ++j) {
                const double sn = s * c1 + c * s1;
                c = c * c1 - s * s1;
                s = sn;
                dst[j * block] = std::numbers::sqrt2 * s * g[static_cast<std::size_t>(j)](i);
            }
        }
    }
    return out;
}

/// C_1 .. C_count from one transform grid.
inline std::vector<Matrix> component_mark_series(const TransformGrid& grid, int count) {
    const Matrix stacked = stacked_component_marks(grid, count);
    std::vector<Matrix> out;
    for (int j = 0; j < count; ++j) out.push_back(stacked.middleCols(j * grid.n(), grid.n()));
    return out;
}

inline Matrix component_marks(const TransformGrid& grid, ComponentIndex j) {
    const int jj = j.value();
    Matrix c(grid.n(), grid.n());
    for (Eigen::Index i = 0; i < grid.n(); ++i) {
        const double g = std::numbers::sqrt2 * cos_pi(jj * grid.u(i));
        for (Eigen::Index l = 0; l < grid.n(); ++l) c(i, l) = g * std::numbers::sqrt2 * sin_pi(jj * grid.t(i, l));
    }
    return c;
}

inline ComponentMarkMatrix component_marks(const Dataset& data, const ParamVector& theta, const ModelFamily& family,
                                           ComponentIndex j) {
    return {j, component_marks(TransformGrid::evaluate(data, theta, family), j)};
}

/// L2 norm, under the weighting's empirical measure, of the residual process.
inline double process_norm(const Dataset& data, const ParamVector& theta, const ModelFamily& family,
                           const WeightingScheme& weighting) {
    const auto op = WeightOperator::build(data.x(), weighting);
    return std::sqrt(op.cvm(residual_matrix(data, theta, family).matrix()));
}

/// L2 norm of R_n - sum_{j <= terms} mu_j^{1/2} c_{n,j} under the weighting's
/// empirical measure. Both sides use the same theta.
inline double reconstruction_error(const Dataset& data, const ParamVector& theta, const ModelFamily& family,
                                   int terms, const WeightingScheme& weighting) {
    if (terms < 1) throw InvalidParameter("reconstruction needs at least one term");
    const TransformGrid grid = TransformGrid::evaluate(data, theta, family);
    Matrix diff = residual_marks(data, grid);
    for (int j = 1; j <= terms; ++j)
        diff -= std::sqrt(eigenvalue(ComponentIndex(j))) * component_marks(grid, ComponentIndex(j));
    const auto op = WeightOperator::build(data.x(), weighting);
    return std::sqrt(op.cvm(diff));
}

}  // namespace pcdtest
