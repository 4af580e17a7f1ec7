#pragma once

// Weighting functions h(v, x) and their integration measures.
//
// For a mark matrix A (rows = observations i, columns = response grid points
// y_l) the weighted process is  c(y_l, v) = n^{-1/2} sum_i h(v, X_i) A(i, l).
// A WeightOperator evaluates, for fixed covariates,
//
//   cvm(A) = mean over l of  integral |c(y_l, v)|^2  dmeasure(v)
//   sup(A) = max over l and the v-grid of  |c(y_l, v)|
//
//   Indicator       h = 1{X <= v},         v over {X_m}      (empirical F_X)
//   Projection      h = 1{b'X <= z},       z over {b_s'X_r}, b_s seeded on the sphere
//   Characteristic  h = exp(i v'X),        v ~ N(0, I_d); the v-integral is
//                   exp(-|X_i - X_k|^2 / 2), exact. The sup runs over v in {X_m}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pcdtest/error.hpp"
#include "pcdtest/model_family.hpp"
#include "pcdtest/random.hpp"

namespace pcdtest {

enum class WeightingKind { Indicator, Projection, Characteristic };

struct WeightingScheme {
    WeightingKind kind = WeightingKind::Characteristic;
    int n_directions = 50;
    std::uint64_t direction_seed = 0;

    static WeightingScheme indicator() { return {WeightingKind::Indicator, 0, 0}; }
    static WeightingScheme characteristic() { return {WeightingKind::Characteristic, 0, 0}; }
    static WeightingScheme projection(int n_directions = 50, std::uint64_t seed = 0) {
        if (n_directions < 1) throw InvalidParameter("projection weighting needs at least one direction");
        return {WeightingKind::Projection, n_directions, seed};
    }

    friend bool operator==(const WeightingScheme& a, const WeightingScheme& b) {
        if (a.kind != b.kind) return false;
        if (a.kind != WeightingKind::Projection) return true;
        return a.n_directions == b.n_directions && a.direction_seed == b.direction_seed;
    }
};

inline std::string to_string(WeightingKind kind) {
    switch (kind) {
        case WeightingKind::Indicator: return "indicator";
        case WeightingKind::Projection: return "projection";
        case WeightingKind::Characteristic: return "characteristic";
    }
    return "?";
}

inline WeightingKind parse_weighting_kind(const std::string& name) {
    if (name == "indicator") return WeightingKind::Indicator;
    if (name == "projection") return WeightingKind::Projection;
    if (name == "characteristic") return WeightingKind::Characteristic;
    throw InputError("unknown weighting '" + name + "'");
}

/// `count` directions uniform on the unit sphere in R^d (normalized Gaussian
/// vectors). Drawn sequentially from one stream, so the first k directions of
/// a larger set equal the k-direction set for the same seed.
inline RowMatrix projection_directions(int d, int count, std::uint64_t seed) {
    if (d < 1 || count < 1) throw InvalidParameter("projection directions: need d >= 1 and count >= 1");
    Rng rng = make_rng(seed, StreamTag::Directions, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    RowMatrix dirs(count, d);
    for (int s = 0; s < count; ++s) {
        double norm2 = 0.0;
        do {
            for (int k = 0; k < d; ++k) dirs(s, k) = normal(rng);
            norm2 = dirs.row(s).squaredNorm();
        } while (norm2 == 0.0);
        dirs.row(s) /= std::sqrt(norm2);
    }
    return dirs;
}

/// Read-only view of a column-major block, e.g. one component of a stacked series.
using MatrixView = Eigen::Map<const Matrix>;

class WeightOperator {
public:
    static WeightOperator build(const RowMatrix& x, const WeightingScheme& scheme) {
        switch (scheme.kind) {
            case WeightingKind::Indicator: return indicator(x);
            case WeightingKind::Projection:
                return projection(x, projection_directions(static_cast<int>(x.cols()), scheme.n_directions,
                                                           scheme.direction_seed));
            case WeightingKind::Characteristic: return characteristic(x);
        }
        throw InvalidParameter("unknown weighting kind");
    }

    static WeightOperator indicator(const RowMatrix& x) {
        WeightOperator op;
        op.n_ = x.rows();
        if (x.cols() == 1) {
            op.mode_ = Mode::Orderings;
            op.orderings_.push_back(make_ordering(x.col(0)));
            return op;
        }
        op.mode_ = Mode::Factor;
        const Eigen::Index n = x.rows();
        op.factor_ = Matrix::Zero(n, n);
        for (Eigen::Index m = 0; m < n; ++m)
            for (Eigen::Index i = 0; i < n; ++i)
                op.factor_(i, m) = ((x.row(i).array() <= x.row(m).array()).all()) ? 1.0 : 0.0;
        return op;
    }

    static WeightOperator projection(const RowMatrix& x, const RowMatrix& directions) {
        if (directions.cols() != x.cols())
            throw DimensionMismatch("projection directions have wrong dimension");
        WeightOperator op;
        op.mode_ = Mode::Orderings;
        op.n_ = x.rows();
        const Matrix z = x * directions.transpose();  // n x S
        for (Eigen::Index s = 0; s < z.cols(); ++s) op.orderings_.push_back(make_ordering(z.col(s)));
        return op;
    }

    static WeightOperator characteristic(const RowMatrix& x) {
        WeightOperator op;
        op.mode_ = Mode::Dense;
        op.n_ = x.rows();
        const Eigen::Index n = x.rows();
        op.gram_.resize(n, n);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index i = 0; i < n; ++i)
                op.gram_(i, k) = std::exp(-0.5 * (x.row(i) - x.row(k)).squaredNorm());
        const Matrix phase = x * x.transpose();  // phase(i, m) = X_m . X_i
        op.cos_ = phase.array().cos().matrix();
        op.sin_ = phase.array().sin().matrix();
        return op;
    }

    Eigen::Index n() const noexcept { return n_; }

    double cvm(const Eigen::Ref<const Matrix>& marks) const {
        check(marks);
        const double grid = static_cast<double>(marks.cols());
        const double n = static_cast<double>(n_);
        switch (mode_) {
            case Mode::Dense: return (gram_ * marks).cwiseProduct(marks).sum() / (n * grid);
            case Mode::Factor: return (factor_.transpose() * marks).squaredNorm() / (n * n * grid);
            case Mode::Orderings: {
                double total = 0.0;
                for (const auto& ord : orderings_) total += ordering_sum_squares(ord, marks);
                return total / (static_cast<double>(orderings_.size()) * n * n * grid);
            }
        }
        return 0.0;
    }

    /// cvm() of several mark matrices. In dense mode this is one product;
    /// views that lie back to back in memory are multiplied in place.
    std::vector<double> cvm_many(const std::vector<MatrixView>& marks) const {
        std::vector<double> out(marks.size());
        if (mode_ != Mode::Dense || marks.size() <= 1) {
            for (std::size_t k = 0; k < marks.size(); ++k) out[k] = cvm(marks[k]);
            return out;
        }
        Eigen::Index total_cols = 0;
        bool contiguous = true;
        for (std::size_t k = 0; k < marks.size(); ++k) {
            check(marks[k]);
            total_cols += marks[k].cols();
            if (k > 0 && marks[k].data() != marks[k - 1].data() + marks[k - 1].size()) contiguous = false;
        }
        Matrix copy;
        if (!contiguous) {
            copy.resize(n_, total_cols);
            Eigen::Index offset = 0;
            for (const auto& m : marks) {
                copy.middleCols(offset, m.cols()) = m;
                offset += m.cols();
            }
        }
        const MatrixView stacked(contiguous ? marks.front().data() : copy.data(), n_, total_cols);
        const Matrix product = gram_ * stacked;
        Eigen::Index offset = 0;
        for (std::size_t k = 0; k < marks.size(); ++k) {
            const Eigen::Index c = marks[k].cols();
            out[k] = product.middleCols(offset, c).cwiseProduct(stacked.middleCols(offset, c)).sum() /
                     (static_cast<double>(n_) * static_cast<double>(c));
            offset += c;
        }
        return out;
    }

    std::vector<double> cvm_many(const std::vector<const Matrix*>& marks) const {
        std::vector<MatrixView> views;
        for (const Matrix* m : marks) views.emplace_back(m->data(), m->rows(), m->cols());
        return cvm_many(views);
    }

    double sup(const Eigen::Ref<const Matrix>& marks) const {
        check(marks);
        const double root_n = std::sqrt(static_cast<double>(n_));
        switch (mode_) {
            case Mode::Dense: {
                const Matrix re = cos_.transpose() * marks;
                const Matrix im = sin_.transpose() * marks;
                return std::sqrt((re.array().square() + im.array().square()).maxCoeff()) / root_n;
            }
            case Mode::Factor: return (factor_.transpose() * marks).cwiseAbs().maxCoeff() / root_n;
            case Mode::Orderings: {
                double best = 0.0;
                for (const auto& ord : orderings_) best = std::max(best, ordering_max_abs(ord, marks));
                return best / root_n;
            }
        }
        return 0.0;
    }

    /// Dense G with cvm(A) = (n * grid)^{-1} sum_l A_l' G A_l. O(n^2) memory; for tests and diagnostics.
    Matrix gram() const {
        const double n = static_cast<double>(n_);
        switch (mode_) {
            case Mode::Dense: return gram_;
            case Mode::Factor: return factor_ * factor_.transpose() / n;
            case Mode::Orderings: {
                Matrix g = Matrix::Zero(n_, n_);
                for (const auto& ord : orderings_) {
                    Matrix p = Matrix::Zero(n_, n_);  // p(i, r) = 1{z_i <= z_r}
                    Eigen::Index start = 0;
                    for (Eigen::Index end : ord.group_end) {
                        for (Eigen::Index a = 0; a < end; ++a)
                            for (Eigen::Index b = start; b < end; ++b) p(ord.order[a], ord.order[b]) = 1.0;
                        start = end;
                    }
                    g += p * p.transpose();
                }
                return g / (static_cast<double>(orderings_.size()) * n);
            }
        }
        return {};
    }

private:
    enum class Mode { Dense, Factor, Orderings };

    struct Ordering {
        std::vector<Eigen::Index> order;      // indices sorted by ascending projection
        std::vector<Eigen::Index> group_end;  // exclusive ends of tie groups within `order`
    };

    template <class Col>
    static Ordering make_ordering(const Col& z) {
        Ordering ord;
        ord.order.resize(static_cast<std::size_t>(z.size()));
        std::iota(ord.order.begin(), ord.order.end(), Eigen::Index{0});
        std::stable_sort(ord.order.begin(), ord.order.end(), [&](Eigen::Index a, Eigen::Index b) { return z(a) < z(b); });
        for (std::size_t k = 1; k <= ord.order.size(); ++k)
            if (k == ord.order.size() || z(ord.order[k]) != z(ord.order[k - 1]))
                ord.group_end.push_back(static_cast<Eigen::Index>(k));
        return ord;
    }

    // sum over grid points r and columns l of (sum_{i: z_i <= z_r} A(i, l))^2
    static double ordering_sum_squares(const Ordering& ord, const Eigen::Ref<const Matrix>& marks) {
        double total = 0.0;
        for (Eigen::Index l = 0; l < marks.cols(); ++l) {
            const double* col = marks.col(l).data();
            double running = 0.0;
            Eigen::Index start = 0;
            for (Eigen::Index end : ord.group_end) {
                for (Eigen::Index k = start; k < end; ++k) running += col[ord.order[static_cast<std::size_t>(k)]];
                total += static_cast<double>(end - start) * running * running;
                start = end;
            }
        }
        return total;
    }

    static double ordering_max_abs(const Ordering& ord, const Eigen::Ref<const Matrix>& marks) {
        double best = 0.0;
        for (Eigen::Index l = 0; l < marks.cols(); ++l) {
            const double* col = marks.col(l).data();
            double running = 0.0;
            Eigen::Index start = 0;
            for (Eigen::Index end : ord.group_end) {
                for (Eigen::Index k = start; k < end; ++k) running += col[ord.order[static_cast<std::size_t>(k)]];
                best = std::max(best, std::abs(running));
                start = end;
            }
        }
        return best;
    }

    void check(const Eigen::Ref<const Matrix>& marks) const {
        if (marks.rows() != n_)
            throw DimensionMismatch("mark matrix has " + std::to_string(marks.rows()) + " rows, weighting built for " +
                                    std::to_string(n_));
        if (marks.cols() < 1) throw DimensionMismatch("mark matrix has no grid columns");
    }

    Mode mode_ = Mode::Dense;
    Eigen::Index n_ = 0;
    Matrix gram_;
    Matrix cos_;
    Matrix sin_;
    Matrix factor_;
    std::vector<Ordering> orderings_;
};

}  // namespace pcdtest
