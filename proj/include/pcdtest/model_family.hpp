#pragma once

// Parametric conditional-distribution families F(y | x, theta).
//
// Layouts:
//   LinearGaussian  theta = (intercept, slope_1..slope_d, variance),  p = d + 2
//   Probit          theta = (intercept, slope_1..slope_d),            p = d + 1
//
// The Probit response is {0,1}; its conditional CDF is the step function
// 0 (y < 0), 1 - Phi(eta) (0 <= y < 1), 1 (y >= 1) with eta = theta . (1, x).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcdtest/error.hpp"
#include "pcdtest/random.hpp"

namespace pcdtest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

/// 1 - Phi(z) without cancellation in the upper tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) * (std::numbers::inv_sqrtpi * kInvSqrt2);
}

/// n observations of a real response and a d-dimensional covariate row.
class Dataset {
public:
    Dataset() = default;

    Dataset(RowMatrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.rows() != y_.size())
            throw DimensionMismatch("dataset: covariate rows (" + std::to_string(x_.rows()) +
                                    ") != response length (" + std::to_string(y_.size()) + ")");
        if (y_.size() < 1) throw InputError("dataset: no observations");
        if (x_.cols() < 1) throw InputError("dataset: no covariates");
        if (!x_.allFinite() || !y_.allFinite()) throw InputError("dataset: non-finite entry");
    }

    Eigen::Index n() const noexcept { return y_.size(); }
    Eigen::Index d() const noexcept { return x_.cols(); }
    const RowMatrix& x() const noexcept { return x_; }
    const Vector& y() const noexcept { return y_; }

    std::span<const double> row(Eigen::Index i) const {
        return {x_.data() + i * x_.cols(), static_cast<std::size_t>(x_.cols())};
    }

    /// Same covariates, new response (bootstrap resamples keep X fixed).
    Dataset with_response(Vector y) const { return Dataset(x_, std::move(y)); }

    Dataset subset(std::span<const Eigen::Index> rows) const {
        RowMatrix x(static_cast<Eigen::Index>(rows.size()), d());
        Vector y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            x.row(static_cast<Eigen::Index>(k)) = x_.row(rows[k]);
            y(static_cast<Eigen::Index>(k)) = y_(rows[k]);
        }
        return Dataset(std::move(x), std::move(y));
    }

private:
    RowMatrix x_;
    Vector y_;
};

/// A parameter value theta for some family; layout documented at the top of this header.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Vector values) : values_(std::move(values)) {}
    ParamVector(std::initializer_list<double> values) : values_(static_cast<Eigen::Index>(values.size())) {
        Eigen::Index k = 0;
        for (double v : values) values_(k++) = v;
    }

    const Vector& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double operator[](Eigen::Index k) const { return values_(k); }

    friend bool operator==(const ParamVector& a, const ParamVector& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    Vector values_;
};

enum class ModelKind { LinearGaussian, Probit };

struct ModelFamily {
    ModelKind kind = ModelKind::LinearGaussian;
    int d = 1;

    static ModelFamily linear_gaussian(int d) { return {ModelKind::LinearGaussian, d}; }
    static ModelFamily probit(int d) { return {ModelKind::Probit, d}; }

    Eigen::Index parameter_count() const noexcept { return kind == ModelKind::LinearGaussian ? d + 2 : d + 1; }

    friend bool operator==(const ModelFamily&, const ModelFamily&) = default;
};

inline std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::LinearGaussian ? "linear-gaussian" : "probit";
}

inline ModelKind parse_model_kind(std::string_view name) {
    if (name == "linear-gaussian") return ModelKind::LinearGaussian;
    if (name == "probit") return ModelKind::Probit;
    throw InputError("unknown model family '" + std::string(name) + "'");
}

inline void validate(const ModelFamily& family, const ParamVector& theta) {
    if (family.d < 1) throw InvalidParameter("model family: dimension must be >= 1");
    if (theta.size() != family.parameter_count())
        throw DimensionMismatch("parameter vector has " + std::to_string(theta.size()) + " entries, " +
                                std::string(to_string(family.kind)) + " with d=" + std::to_string(family.d) +
                                " needs " + std::to_string(family.parameter_count()));
    if (!theta.values().allFinite()) throw InvalidParameter("parameter vector has non-finite entries");
    if (family.kind == ModelKind::LinearGaussian && !(theta[family.d + 1] > 0.0))
        throw InvalidParameter("variance must be positive");
}

namespace detail {

inline double linear_index(const ParamVector& theta, std::span<const double> x) {
    double eta = theta[0];
    for (std::size_t k = 0; k < x.size(); ++k) eta += theta[static_cast<Eigen::Index>(k) + 1] * x[k];
    return eta;
}

inline void check_dimension(const ModelFamily& family, std::size_t x_size) {
    if (x_size != static_cast<std::size_t>(family.d))
        throw DimensionMismatch("covariate vector has " + std::to_string(x_size) + " entries, model expects " +
                                std::to_string(family.d));
}

inline double probit_step_cdf(double eta, double y) {
    if (y < 0.0) return 0.0;
    if (y < 1.0) return normal_sf(eta);
    return 1.0;
}

}  // namespace detail

/// F(y | x, theta).
inline double cdf(const ModelFamily& family, const ParamVector& theta, std::span<const double> x, double y) {
    validate(family, theta);
    detail::check_dimension(family, x.size());
    const double eta = detail::linear_index(theta, x);
    if (family.kind == ModelKind::LinearGaussian) {
        const double sd = std::sqrt(theta[family.d + 1]);
        return normal_cdf((y - eta) / sd);
    }
    return detail::probit_step_cdf(eta, y);
}

/// theta . (1, x_i) for every row.
inline Vector linear_predictor(const ModelFamily& family, const ParamVector& theta, const RowMatrix& x) {
    validate(family, theta);
    if (x.cols() != family.d) detail::check_dimension(family, static_cast<std::size_t>(x.cols()));
    Vector eta = x * theta.values().segment(1, family.d);
    eta.array() += theta[0];
    return eta;
}

/// grid(i, l) = F(y_grid[l] | x_i, theta). This is the conditional
/// probability-integral transform evaluated on a response grid.
inline Matrix cdf_grid(const ModelFamily& family, const ParamVector& theta, const RowMatrix& x,
                       const Vector& y_grid) {
    const Vector eta = linear_predictor(family, theta, x);
    const Eigen::Index n = x.rows();
    const Eigen::Index m = y_grid.size();
    Matrix out(n, m);
    if (family.kind == ModelKind::LinearGaussian) {
        const double inv_sd = 1.0 / std::sqrt(theta[family.d + 1]);
        for (Eigen::Index l = 0; l < m; ++l)
            for (Eigen::Index i = 0; i < n; ++i) out(i, l) = normal_cdf((y_grid(l) - eta(i)) * inv_sd);
    } else {
        for (Eigen::Index l = 0; l < m; ++l)
            for (Eigen::Index i = 0; i < n; ++i) out(i, l) = detail::probit_step_cdf(eta(i), y_grid(l));
    }
    return out;
}

/// One draw from F(. | x, theta).
inline double sample_response(const ModelFamily& family, const ParamVector& theta, std::span<const double> x,
                              Rng& rng) {
    validate(family, theta);
    detail::check_dimension(family, x.size());
    const double eta = detail::linear_index(theta, x);
    if (family.kind == ModelKind::LinearGaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        return eta + std::sqrt(theta[family.d + 1]) * normal(rng);
    }
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    return uniform(rng) < normal_cdf(eta) ? 1.0 : 0.0;
}

/// Draws one response per covariate row, in row order, from a single stream.
inline Vector sample_responses(const ModelFamily& family, const ParamVector& theta, const RowMatrix& x, Rng& rng) {
    const Vector eta = linear_predictor(family, theta, x);
    Vector y(x.rows());
    if (family.kind == ModelKind::LinearGaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        const double sd = std::sqrt(theta[family.d + 1]);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = eta(i) + sd * normal(rng);
    } else {
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = uniform(rng) < normal_cdf(eta(i)) ? 1.0 : 0.0;
    }
    return y;
}

struct ProbitOptions {
    double gradient_tolerance = 1e-8;
    int max_iterations = 100;
};

namespace detail {

inline Matrix design_matrix(const RowMatrix& x) {
    Matrix design(x.rows(), x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    return design;
}

inline ParamVector fit_linear_gaussian(const Dataset& data) {
    const Matrix design = design_matrix(data.x());
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < design.cols())
        throw RankDeficient("design matrix has rank " + std::to_string(qr.rank()) + " < " +
                            std::to_string(design.cols()));
    const Vector beta = qr.solve(data.y());
    const Vector resid = data.y() - design * beta;
    const double n = static_cast<double>(data.n());
    const double variance = resid.squaredNorm() / n;
    const double scale = std::sqrt(data.y().squaredNorm() / n);
    if (!(std::sqrt(variance) > 1e-10 * scale))
        throw DegenerateFit("residual variance is zero (response is an exact linear function of X)");

    Vector theta(design.cols() + 1);
    theta.head(design.cols()) = beta;
    theta(design.cols()) = variance;
    return ParamVector(std::move(theta));
}

struct ProbitTerms {
    double log_likelihood = 0.0;
    Vector gradient;
    Matrix information;
};

// Clamped so that Phi, 1 - Phi and phi stay representable.
constexpr double kProbitIndexClamp = 35.0;
constexpr double kSeparationLogLik = 1e-6;

inline ProbitTerms probit_terms(const Matrix& design, const Vector& y, const Vector& beta, bool with_derivatives) {
    const Vector eta = design * beta;
    ProbitTerms t;
    Vector score_weight(eta.size());
    Vector info_weight(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double e = std::clamp(eta(i), -kProbitIndexClamp, kProbitIndexClamp);
        const double p1 = normal_cdf(e);
        const double p0 = normal_sf(e);
        const double dens = normal_pdf(e);
        t.log_likelihood += y(i) > 0.5 ? std::log(p1) : std::log(p0);
        score_weight(i) = y(i) > 0.5 ? dens / p1 : -dens / p0;
        info_weight(i) = dens * dens / (p1 * p0);
    }
    if (with_derivatives) {
        t.gradient = design.transpose() * score_weight;
        t.information = design.transpose() * info_weight.asDiagonal() * design;
    }
    return t;
}

inline ParamVector fit_probit(const Dataset& data, const ProbitOptions& options) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double v = data.y()(i);
        if (v == 0.0) has0 = true;
        else if (v == 1.0) has1 = true;
        else throw InputError("probit response must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
    if (!has0 || !has1) throw ConvergenceError("probit: response has a single class", 0);

    const Matrix design = design_matrix(data.x());
    Vector beta = Vector::Zero(design.cols());
    const double n = static_cast<double>(data.n());
    ProbitTerms current = probit_terms(design, data.y(), beta, true);
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        if (!current.gradient.allFinite())
            throw ConvergenceError("probit: non-finite score (separated data?)", iter);
        if (current.gradient.norm() / n <= options.gradient_tolerance) {
            // A vanishing score with a near-perfect fit means the MLE sits at infinity.
            if (current.log_likelihood > -kSeparationLogLik)
                throw ConvergenceError("probit: perfect separation of the response", iter);
            return ParamVector(beta);
        }

        Eigen::LDLT<Matrix> ldlt(current.information);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw ConvergenceError("probit: singular information matrix (separated data?)", iter);
        const Vector step = ldlt.solve(current.gradient);
        if (!step.allFinite()) throw ConvergenceError("probit: non-finite Fisher-scoring step", iter);

        // Fisher scoring with step halving on the (concave) log-likelihood.
        double scale = 1.0;
        ProbitTerms trial;
        Vector candidate;
        for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
            candidate = beta + scale * step;
            trial = probit_terms(design, data.y(), candidate, false);
            if (trial.log_likelihood >= current.log_likelihood - 1e-12 * std::abs(current.log_likelihood)) break;
        }
        beta = candidate;
        current = probit_terms(design, data.y(), beta, true);
        if (beta.cwiseAbs().maxCoeff() > 1e6) throw ConvergenceError("probit: coefficients diverge (separation)", iter);
    }
    if (current.gradient.allFinite() && current.gradient.norm() / n <= options.gradient_tolerance &&
        current.log_likelihood <= -kSeparationLogLik)
        return ParamVector(beta);
    throw ConvergenceError("probit: gradient tolerance not reached", options.max_iterations);
}

}  // namespace detail

/// Maximum-likelihood fit. LinearGaussian: OLS coefficients and variance
/// RSS / n. Probit: Fisher-scoring IRLS until the norm of the average score
/// is at most options.gradient_tolerance.
inline ParamVector fit(const ModelFamily& family, const Dataset& data, const ProbitOptions& options = {}) {
    if (data.d() != family.d)
        throw DimensionMismatch("dataset has d=" + std::to_string(data.d()) + ", model expects d=" +
                                std::to_string(family.d));
    if (data.n() <= family.parameter_count())
        throw InputError("need more observations (" + std::to_string(data.n()) + ") than parameters (" +
                         std::to_string(family.parameter_count()) + ")");
    if (family.kind == ModelKind::LinearGaussian) return detail::fit_linear_gaussian(data);
    return detail::fit_probit(data, options);
}

}  // namespace pcdtest
