#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pcdtest/simulation.hpp"

using namespace pcdtest;

namespace {

Vector row_sums(const Dataset& data) { return data.x().rowwise().sum(); }

// mean and second moment of z over the sample
std::pair<double, double> moments(const Vector& z) {
    return {z.mean(), z.squaredNorm() / static_cast<double>(z.size())};
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.dgp = DgpSpec::standard(DgpId::DGP3);
    cfg.dgp.d = 3;
    cfg.n = 40;
    cfg.replications = 8;
    cfg.B = 19;
    cfg.seed = 31;
    LearnTestConfig lt;
    lt.plan = SplitPlan::first(15);
    lt.candidates = 4;
    lt.keep = 2;
    cfg.statistics = {{"CK", CkSpec{}},
                      {"CvM_ch", OmnibusCvmSpec{WeightingScheme::characteristic()}},
                      {"Smooth_3", smooth_test(3, WeightingScheme::characteristic())},
                      {"Smooth_Learn_2", LearnTestProcedure{lt}}};
    return cfg;
}

}  // namespace

TEST(DgpSample, ShapeAndCovariateRange) {
    const Dataset data = dgp_sample(DgpSpec::standard(DgpId::DGP1), 500, 4);
    EXPECT_EQ(data.n(), 500);
    EXPECT_EQ(data.d(), 15);
    EXPECT_GE(data.x().minCoeff(), 0.0);
    EXPECT_LT(data.x().maxCoeff(), 1.0);
    EXPECT_EQ(dgp_sample(DgpSpec::standard(DgpId::SkewShift), 10, 4).d(), 1);
    EXPECT_THROW(dgp_sample(DgpSpec::standard(DgpId::DGP0), 0, 4), InvalidParameter);
    DgpSpec bad = DgpSpec::standard(DgpId::DGP0);
    bad.d = 0;
    EXPECT_THROW(dgp_sample(bad, 10, 4), InvalidParameter);
    bad = DgpSpec::standard(DgpId::KurtShift);
    bad.gamma4 = std::numeric_limits<double>::infinity();
    EXPECT_THROW(dgp_sample(bad, 10, 4), InvalidParameter);
}

TEST(DgpSample, DeterministicInSeed) {
    for (DgpId id : {DgpId::DGP0, DgpId::DGP2, DgpId::DGP7, DgpId::KurtShift}) {
        const Dataset a = dgp_sample(DgpSpec::standard(id), 30, 12);
        const Dataset b = dgp_sample(DgpSpec::standard(id), 30, 12);
        EXPECT_EQ(a.x(), b.x());
        EXPECT_EQ(a.y(), b.y());
        EXPECT_NE(dgp_sample(DgpSpec::standard(id), 30, 13).y(), a.y());
    }
}

TEST(DgpSample, StandardParameters) {
    EXPECT_EQ(DgpSpec::standard(DgpId::DGP3).k, 3);
    EXPECT_EQ(DgpSpec::standard(DgpId::DGP5).k, 5);
    EXPECT_EQ(DgpSpec::standard(DgpId::DGP6).k, 5);
    EXPECT_EQ(DgpSpec::standard(DgpId::DGP8).k, 7);
    EXPECT_EQ(DgpSpec::standard(DgpId::SkewShift).gamma4, 0.0);
    EXPECT_EQ(DgpSpec::standard(DgpId::SkewShift).gamma3, 0.1);
    EXPECT_EQ(DgpSpec::standard(DgpId::KurtShift).gamma3, 0.0);
    for (int k = 0; k <= static_cast<int>(DgpId::KurtShift); ++k) {
        const auto id = static_cast<DgpId>(k);
        EXPECT_EQ(parse_dgp_id(to_string(id)), id);
    }
    EXPECT_THROW(parse_dgp_id("DGP9"), InputError);
}

TEST(DgpSample, Dgp0LeastSquaresRecoversCoefficients) {
    const Dataset data = dgp_sample(DgpSpec::standard(DgpId::DGP0), 1000000, 2);
    const ParamVector th = fit(ModelFamily::linear_gaussian(15), data);
    for (Eigen::Index k = 0; k < 16; ++k) EXPECT_NEAR(th[k], 1.0, 0.01) << k;
    EXPECT_NEAR(th[16], 1.0, 0.01);
}

TEST(DgpSample, Dgp2RateParametrization) {
    // (1 + s) Y is Exp(1) given X: mean 1, second moment 2
    const Dataset data = dgp_sample(DgpSpec::standard(DgpId::DGP2), 1000000, 3);
    const Vector z = data.y().cwiseProduct((row_sums(data).array() + 1.0).matrix());
    const auto [m1, m2] = moments(z);
    EXPECT_NEAR(m1, 1.0, 0.005);
    EXPECT_NEAR(m2, 2.0, 0.03);
    EXPECT_GT(data.y().minCoeff(), 0.0);
}

TEST(DgpSample, GaussianDesignsStandardize) {
    struct Case {
        DgpId id;
        double (*mean)(double, int);
        double (*sd)(double, double);
    };
    const Case cases[] = {
        {DgpId::DGP0, [](double s, int) { return 1.0 + s; }, [](double, double) { return 1.0; }},
        {DgpId::DGP1, [](double s, int) { return 1.0 + s; }, [](double s, double half) { return std::abs(2.0 * (s - half)); }},
        {DgpId::DGP4, [](double s, int k) { return 1.0 + s + 5.0 * std::cos(k * s); }, [](double, double) { return std::sqrt(3.5); }},
        {DgpId::DGP7, [](double s, int k) { return 1.0 + 5.0 * std::cos(k * s); }, [](double s, double half) { return std::abs(2.0 * (s - half)); }},
        {DgpId::MeanShift, [](double s, int) { return 1.0 + s + 5.0 * std::cos(2.0 * s); }, [](double, double) { return 1.0; }},
        {DgpId::Hetero, [](double s, int) { return 1.0 + s; }, [](double s, double) { return std::sqrt(6.0 * (s - 0.5) * (s - 0.5) + 0.5); }},
    };
    for (const auto& c : cases) {
        const DgpSpec spec = DgpSpec::standard(c.id);
        const Dataset data = dgp_sample(spec, 200000, 5);
        const Vector s = row_sums(data);
        Vector z(data.n());
        for (Eigen::Index i = 0; i < data.n(); ++i)
            z(i) = (data.y()(i) - c.mean(s(i), spec.k)) / c.sd(s(i), 0.5 * spec.d);
        const auto [m1, m2] = moments(z);
        EXPECT_NEAR(m1, 0.0, 0.012) << to_string(c.id);
        EXPECT_NEAR(m2, 1.0, 0.02) << to_string(c.id);
    }
}

TEST(DgpSample, SkewShiftWithoutPerturbationIsNormal) {
    DgpSpec spec = DgpSpec::standard(DgpId::SkewShift);
    spec.gamma3 = 0.0;
    spec.gamma4 = 0.0;
    const Dataset data = dgp_sample(spec, 100000, 6);
    std::vector<double> u(static_cast<std::size_t>(data.n()));
    for (Eigen::Index i = 0; i < data.n(); ++i) u[static_cast<std::size_t>(i)] = normal_cdf(data.y()(i) - 1.0 - data.x()(i, 0));
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    const double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        ks = std::max({ks, (i + 1) / n - u[i], u[i] - i / n});
    EXPECT_LE(ks, 0.01);
}

TEST(PerturbedInverse, UnperturbedMedian) {
    for (double x : {0.0, 0.3, 1.7}) EXPECT_NEAR(perturbed_inverse(0.5, x, 0.0, 0.0), 1.0 + x, 1e-10);
    EXPECT_NEAR(perturbed_inverse(normal_cdf(1.3), 0.2, 0.0, 0.0), 2.5, 1e-9);
}

TEST(PerturbedInverse, RoundTripInMonotoneCase) {
    Rng rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        double u = 0.0;
        while (u <= 0.0) u = unif(rng);
        const double y = perturbed_inverse(u, 0.0, 0.1, 0.0);
        const double f = perturbed_cdf(y, 0.0, 0.1, 0.0);
        EXPECT_GE(f, u - 1e-12);
        worst = std::max(worst, std::abs(f - u));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(PerturbedInverse, GeneralizedInverseInNonMonotoneCase) {
    // 4 pi 0.1 > 1: F has flat-then-falling stretches
    Rng rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double prev_u = 0.0, prev_y = -std::numeric_limits<double>::infinity();
    std::vector<double> us;
    for (int k = 0; k < 2000; ++k) us.push_back(0.0005 + 0.999 * unif(rng));
    std::sort(us.begin(), us.end());
    for (double u : us) {
        const double y = perturbed_inverse(u, 0.4, 0.0, 0.1);
        EXPECT_GE(perturbed_cdf(y, 0.4, 0.0, 0.1), u - 1e-12);
        // nothing noticeably to the left reaches u
        for (double step : {1e-6, 1e-3, 0.05, 0.5}) EXPECT_LT(perturbed_cdf(y - step, 0.4, 0.0, 0.1), u) << u << ' ' << step;
        if (u > prev_u) {
            EXPECT_GE(y, prev_y);
        }
        prev_u = u;
        prev_y = y;
    }
    EXPECT_THROW(perturbed_inverse(0.0, 0.0, 0.1, 0.0), DomainError);
    EXPECT_THROW(perturbed_inverse(1.0, 0.0, 0.1, 0.0), DomainError);
}

TEST(PerturbedCdf, EndpointsAreExact) {
    const double inf = std::numeric_limits<double>::infinity();
    for (double g3 : {0.0, 0.1, -0.07})
        for (double g4 : {0.0, 0.1}) {
            EXPECT_EQ(perturbed_cdf(-inf, 0.5, g3, g4), 0.0);
            EXPECT_EQ(perturbed_cdf(inf, 0.5, g3, g4), 1.0);
        }
}

TEST(RunExperiment, TableShapeAndErrorFormula) {
    const ExperimentConfig cfg = small_config();
    const SizePowerTable table = run_experiment(cfg);
    ASSERT_EQ(table.rows.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& row = table.rows[k];
        EXPECT_EQ(row.statistic, cfg.statistics[k].name);
        EXPECT_EQ(row.dgp, "DGP3");
        EXPECT_EQ(row.n, 40);
        EXPECT_EQ(row.B, 19);
        EXPECT_EQ(row.replications, 8);
        EXPECT_EQ(row.alpha, 0.05);
        EXPECT_GE(row.reject_rate, 0.0);
        EXPECT_LE(row.reject_rate, 1.0);
        const int valid = row.replications - row.failures;
        const double k_rej = row.reject_rate * valid;
        EXPECT_NEAR(k_rej, std::round(k_rej), 1e-9);
        EXPECT_DOUBLE_EQ(row.mc_stderr, std::sqrt(row.reject_rate * (1.0 - row.reject_rate) / valid));
        EXPECT_GE(row.seconds, 0.0);
    }
    EXPECT_EQ(&table.row("CvM_ch"), &table.rows[1]);
    EXPECT_THROW(table.row("nope"), InvalidParameter);
}

TEST(RunExperiment, DeterministicAndThreadInvariant) {
    ExperimentConfig cfg = small_config();
    const SizePowerTable a = run_experiment(cfg);
    const SizePowerTable b = run_experiment(cfg);
    cfg.threads = 3;
    const SizePowerTable c = run_experiment(cfg);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].reject_rate, b.rows[k].reject_rate);
        EXPECT_EQ(a.rows[k].reject_rate, c.rows[k].reject_rate);
        EXPECT_EQ(a.rows[k].mc_stderr, c.rows[k].mc_stderr);
        EXPECT_EQ(a.rows[k].failures, c.rows[k].failures);
    }
}

TEST(RunExperiment, ReplicationUsesDerivedStreams) {
    ExperimentConfig cfg = small_config();
    cfg.replications = 3;
    cfg.statistics = {{"CK", CkSpec{}}};
    cfg.alpha = 0.5;
    const SizePowerTable table = run_experiment(cfg);
    const auto fam = ModelFamily::linear_gaussian(cfg.dgp.d);
    int reject = 0;
    for (std::uint64_t r = 0; r < 3; ++r) {
        const Dataset data = dgp_sample(cfg.dgp, cfg.n, derive_seed(cfg.seed, StreamTag::Data, r));
        BootstrapOptions opts;
        opts.B = cfg.B;
        opts.seed = derive_seed(cfg.seed, StreamTag::Bootstrap, r);
        reject += parametric_bootstrap(CkSpec{}, data, fam, opts).p_value < 0.5 ? 1 : 0;
    }
    EXPECT_EQ(table.rows.front().reject_rate, reject / 3.0);
}

TEST(RunExperiment, FailedReplicationsAreExcluded) {
    // a probit null cannot be fitted to a continuous response
    ExperimentConfig cfg = small_config();
    cfg.replications = 4;
    cfg.null_family = ModelKind::Probit;
    cfg.statistics = {{"CK", CkSpec{}}};
    const SizePowerTable table = run_experiment(cfg);
    EXPECT_EQ(table.rows.front().failures, 4);
    EXPECT_EQ(table.rows.front().reject_rate, 0.0);
    EXPECT_EQ(table.rows.front().mc_stderr, 0.0);
}

TEST(RunExperiment, InvalidConfig) {
    ExperimentConfig cfg = small_config();
    cfg.replications = 0;
    EXPECT_THROW(run_experiment(cfg), InvalidParameter);
    cfg = small_config();
    cfg.alpha = 1.0;
    EXPECT_THROW(run_experiment(cfg), InvalidParameter);
    cfg = small_config();
    cfg.statistics.clear();
    EXPECT_THROW(run_experiment(cfg), InvalidParameter);
    cfg = small_config();
    cfg.statistics = {{"bad", ComponentCvmSpec{0, WeightingScheme::characteristic()}}};
    EXPECT_THROW(run_experiment(cfg), InvalidIndex);
}

TEST(RunExperiment, HeteroskedasticPowerAtTwoHundred) {
    ExperimentConfig cfg;
    cfg.dgp = DgpSpec::standard(DgpId::DGP1);
    cfg.n = 200;
    cfg.replications = 100;
    cfg.B = 99;
    cfg.seed = 11;
    cfg.statistics = {{"CvM_ch", OmnibusCvmSpec{WeightingScheme::characteristic()}}};
    EXPECT_GE(run_experiment(cfg).rows.front().reject_rate, 0.95);
}

// Literal ordering on the frequency-3 mean deviation.
TEST(RunExperiment, Dgp3SmoothBeatsCharacteristicOmnibus) {
    ExperimentConfig cfg;
    cfg.dgp = DgpSpec::standard(DgpId::DGP3);
    cfg.n = 200;
    cfg.replications = 200;
    cfg.B = 99;
    cfg.seed = 12;
    cfg.statistics = {{"Smooth_5", smooth_test(5, WeightingScheme::characteristic())},
                      {"CvM_ch", OmnibusCvmSpec{WeightingScheme::characteristic()}}};
    const auto table = run_experiment(cfg);
    EXPECT_GT(table.row("Smooth_5").reject_rate, table.row("CvM_ch").reject_rate)
        << table.row("Smooth_5").reject_rate << " vs " << table.row("CvM_ch").reject_rate;
}

// Scaled-down moment/component correspondence (full size in the acceptance suite).
TEST(RunExperiment, MomentDeviationsPickTheirComponent) {
    const std::pair<DgpId, int> cases[] = {
        {DgpId::MeanShift, 1}, {DgpId::Hetero, 2}, {DgpId::SkewShift, 3}, {DgpId::KurtShift, 4}};
    for (const auto& [id, expected] : cases) {
        ExperimentConfig cfg;
        cfg.dgp = DgpSpec::standard(id);
        cfg.n = 200;
        cfg.replications = 100;
        cfg.B = 99;
        cfg.seed = 13;
        for (int j = 1; j <= 4; ++j)
            cfg.statistics.push_back({"CvM_" + std::to_string(j), ComponentCvmSpec{j, WeightingScheme::indicator()}});
        const auto table = run_experiment(cfg);
        int best = 1;
        for (int j = 2; j <= 4; ++j)
            if (table.rows[static_cast<std::size_t>(j - 1)].reject_rate > table.rows[static_cast<std::size_t>(best - 1)].reject_rate)
                best = j;
        EXPECT_EQ(best, expected) << to_string(id);
    }
}
