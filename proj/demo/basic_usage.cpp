// Fit a linear Gaussian null to simulated data and run three tests.

#include <iostream>

#include "pcdtest.hpp"

int main() {
    using namespace pcdtest;

    DgpSpec dgp = DgpSpec::standard(DgpId::DGP3);
    dgp.d = 3;
    const Dataset data = dgp_sample(dgp, 150, 7);
    const ModelFamily null = ModelFamily::linear_gaussian(data.d());

    BootstrapOptions opts;
    opts.B = 99;
    opts.seed = 11;

    const auto ch = WeightingScheme::characteristic();
    const std::vector<StatisticSpec> specs{OmnibusCvmSpec{ch}, smooth_test(5, ch), CkSpec{}};
    const auto results = parametric_bootstrap(specs, data, null, opts);
    for (std::size_t k = 0; k < specs.size(); ++k)
        std::cout << name(specs[k]) << ": statistic " << results[k].observed << ", p = " << results[k].p_value << '\n';

    LearnTestConfig lt;
    lt.plan = SplitPlan::fraction(0.4, 3);
    const LearnTestResult r = learn_then_test(data, null, lt, opts);
    std::cout << "learn-then-test picked";
    for (int j : r.used) std::cout << ' ' << j;
    std::cout << ", p = " << r.test.p_value << (r.reject ? " (reject)" : "") << '\n';
}
