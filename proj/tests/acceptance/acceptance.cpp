// One PASS/FAIL line per acceptance criterion. Exit status 0 iff every
// requested criterion passes.
//
//   acceptance [--criterion N]... [--smoke] [--threads T]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "pcdtest/cli.hpp"
#include "pcdtest/empirical_process.hpp"
#include "pcdtest/simulation.hpp"

using namespace pcdtest;

namespace {

struct Options {
    bool smoke = false;
    unsigned threads = 1;
};

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [fails: " << what << "]";
        }
    }
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

const WeightingScheme kCh = WeightingScheme::characteristic();

LearnTestProcedure learn_first_50(int keep) {
    LearnTestConfig c;
    c.plan = SplitPlan::first(50);
    c.candidates = 10;
    c.keep = keep;
    c.weighting = kCh;
    return {c};
}

Dataset probit_null_sample(Eigen::Index n, std::uint64_t seed) {
    Rng rng = make_rng(seed, StreamTag::Data, 0);
    std::normal_distribution<double> z;
    RowMatrix x(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) << z(rng), z(rng);
    return Dataset(x, sample_responses(ModelFamily::probit(2), {0.2, 0.8, -0.5}, x, rng));
}

// ---------------------------------------------------------------------------

void size_control(const Options& opt, Outcome& out) {
    ExperimentConfig cfg;
    cfg.dgp = DgpSpec::standard(DgpId::DGP0);
    cfg.n = opt.smoke ? 100 : 200;
    cfg.replications = opt.smoke ? 200 : 500;
    cfg.B = 200;
    cfg.seed = 1001;
    cfg.threads = opt.threads;
    cfg.statistics = {{"CK", CkSpec{}},
                      {"CvM_ch", OmnibusCvmSpec{kCh}},
                      {"Smooth_5", smooth_test(5, kCh)},
                      {"Smooth_10", smooth_test(10, kCh)},
                      {"Smooth_Learn_5", learn_first_50(5)}};
    const double lo = opt.smoke ? 0.01 : 0.02, hi = opt.smoke ? 0.11 : 0.09;
    const SizePowerTable table = run_experiment(cfg);
    out.detail << "DGP0 n=" << cfg.n << " reps=" << cfg.replications << " band [" << lo << ", " << hi << "]:";
    for (const auto& row : table.rows) {
        out.detail << ' ' << row.statistic << '=' << fmt(row.reject_rate);
        out.check(row.reject_rate >= lo && row.reject_rate <= hi, row.statistic);
        out.check(row.failures == 0, row.statistic + " failures");
    }

    // probit analogue: components j = 1..10 through the CLI on probit null data
    const int runs = opt.smoke ? 50 : 200;
    const auto dir = std::filesystem::temp_directory_path() / "pcdtest_acceptance_probit";
    std::filesystem::create_directories(dir);
    const std::string csv = (dir / "p.csv").string();
    int clean = 0;
    for (int r = 0; r < runs; ++r) {
        {
            std::ofstream f(csv);
            write_csv(f, probit_null_sample(200, 5000 + static_cast<std::uint64_t>(r)), "y", {"x1", "x2"});
        }
        const std::string seed = std::to_string(r);
        const std::string threads = std::to_string(opt.threads);
        const char* argv[] = {"pcdtest", "components", "--data", csv.c_str(), "--response", "y", "--model", "probit",
                              "--candidates-M", "10", "--bootstrap-B", "200", "--seed", seed.c_str(), "--threads",
                              threads.c_str()};
        std::ostringstream os, err;
        if (run_cli(static_cast<int>(std::size(argv)), argv, os, err) != 0) {
            out.check(false, "probit components run: " + err.str());
            break;
        }
        double smallest = 1.0;
        for (const auto& row : json::parse(os.str()).at("components"))
            smallest = std::min(smallest, row.at("p_value").get<double>());
        clean += smallest >= 0.01 ? 1 : 0;
    }
    std::filesystem::remove_all(dir);
    const double share = clean / static_cast<double>(runs);
    out.detail << "; probit components M=10 B=200: no p<0.01 in " << clean << '/' << runs;
    out.check(share >= 0.95, "probit components share " + fmt(share));
}

void moment_correspondence(const Options& opt, Outcome& out) {
    const std::pair<DgpId, int> cases[] = {
        {DgpId::MeanShift, 1}, {DgpId::Hetero, 2}, {DgpId::SkewShift, 3}, {DgpId::KurtShift, 4}};
    out.detail << "n=200 indicator reps=200:";
    for (const auto& [id, expected] : cases) {
        ExperimentConfig cfg;
        cfg.dgp = DgpSpec::standard(id);
        cfg.n = 200;
        cfg.replications = 200;
        cfg.B = 200;
        cfg.seed = 2002;
        cfg.threads = opt.threads;
        for (int j = 1; j <= 4; ++j)
            cfg.statistics.push_back({"CvM_" + std::to_string(j), ComponentCvmSpec{j, WeightingScheme::indicator()}});
        const SizePowerTable table = run_experiment(cfg);
        int best = 1;
        out.detail << ' ' << to_string(id) << '(';
        for (int j = 1; j <= 4; ++j) {
            const double p = table.rows[static_cast<std::size_t>(j - 1)].reject_rate;
            out.detail << (j > 1 ? "," : "") << fmt(p);
            if (p > table.rows[static_cast<std::size_t>(best - 1)].reject_rate) best = j;
        }
        out.detail << ")";
        out.check(best == expected, to_string(id) + " argmax " + std::to_string(best));
        if (id == DgpId::SkewShift) out.check(table.rows[2].reject_rate >= 0.9, "skewness CvM_3 < 0.9");
        if (id == DgpId::KurtShift) out.check(table.rows[3].reject_rate >= 0.15, "kurtosis CvM_4 < 0.15");
    }
}

void high_frequency(const Options& opt, Outcome& out) {
    out.detail << "n=200 reps=200:";
    for (DgpId id : {DgpId::DGP3, DgpId::DGP4, DgpId::DGP5}) {
        ExperimentConfig cfg;
        cfg.dgp = DgpSpec::standard(id);
        cfg.n = 200;
        cfg.replications = 200;
        cfg.B = 200;
        cfg.seed = 3003;
        cfg.threads = opt.threads;
        cfg.statistics = {{"Smooth_5", smooth_test(5, kCh)}, {"CvM_ch", OmnibusCvmSpec{kCh}}};
        const SizePowerTable table = run_experiment(cfg);
        const double smooth = table.row("Smooth_5").reject_rate, cvm = table.row("CvM_ch").reject_rate;
        out.detail << ' ' << to_string(id) << "(Smooth_5=" << fmt(smooth) << ",CvM_ch=" << fmt(cvm) << ')';
        out.check(smooth - cvm >= 0.08, to_string(id) + " gap " + fmt(smooth - cvm));
        out.check(cvm <= 0.15, to_string(id) + " CvM_ch " + fmt(cvm));
    }
}

void learning_gain(const Options& opt, Outcome& out) {
    out.detail << "n=300 reps=200:";
    for (DgpId id : {DgpId::DGP6, DgpId::DGP7, DgpId::DGP8}) {
        ExperimentConfig cfg;
        cfg.dgp = DgpSpec::standard(id);
        cfg.n = 300;
        cfg.replications = 200;
        cfg.B = 200;
        cfg.seed = 4004;
        cfg.threads = opt.threads;
        cfg.statistics = {{"CvM_2", ComponentCvmSpec{2, kCh}},
                          {"Smooth_Learn_2", learn_first_50(2)},
                          {"Smooth_Learn_5", learn_first_50(5)},
                          {"Smooth_10", smooth_test(10, kCh)}};
        const SizePowerTable table = run_experiment(cfg);
        out.detail << ' ' << to_string(id) << '(';
        for (std::size_t k = 0; k < table.rows.size(); ++k)
            out.detail << (k ? " > " : "") << table.rows[k].statistic << '=' << fmt(table.rows[k].reject_rate);
        out.detail << ')';
        for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
            const auto& a = table.rows[k];
            const auto& b = table.rows[k + 1];
            const double se = std::hypot(a.mc_stderr, b.mc_stderr);
            out.check(a.reject_rate >= b.reject_rate - se, to_string(id) + " " + a.statistic + " vs " + b.statistic);
        }
    }
}

void oracle_equivalence(const Options&, Outcome& out) {
    double worst = 0.0;
    int cases = 0;
    auto compare = [&](double got, double want) {
        worst = std::max(worst, std::abs(got - want));
        ++cases;
    };
    const std::pair<std::vector<double>, std::vector<double>> toys[] = {
        {{0.1, 0.9, -0.4}, {0.6, 2.1, -0.3}},
        {{0.0, 1.0, -0.5}, {0.3, 2.5, -1.0}},
        {{0.2, 0.2, 0.7}, {1.0, 0.4, 1.9}},
    };
    for (const auto& [xs, ys] : toys) {
        RowMatrix x(3, 1);
        Vector y(3);
        for (int i = 0; i < 3; ++i) {
            x(i, 0) = xs[static_cast<std::size_t>(i)];
            y(i) = ys[static_cast<std::size_t>(i)];
        }
        const Dataset data(x, y);
        const auto fam = ModelFamily::linear_gaussian(1);
        const ParamVector th{0.2, 1.1, 0.8};
        const Matrix r = oracle::residual(data, th, fam);
        RowMatrix signs(2, 1);
        signs << 1.0, -1.0;

        compare(ck_statistic(data, th, fam), oracle::ck(data, th, fam));
        compare(omnibus_cvm(data, th, fam, kCh), oracle::cvm_characteristic(x, r));
        compare(omnibus_cvm(data, th, fam, WeightingScheme::indicator()), oracle::cvm_indicator(x, r));
        compare(WeightOperator::projection(x, signs).cvm(r), oracle::cvm_projection(x, r, signs));
        compare(WeightOperator::projection(x, signs).sup(r), oracle::ks_projection(x, r, signs));
        std::vector<double> comps;
        for (int j = 1; j <= 6; ++j) {
            const Matrix c = oracle::component(data, th, fam, j);
            const double cvm_j = oracle::cvm_characteristic(x, c);
            comps.push_back(cvm_j);
            compare(component_cvm(data, th, fam, ComponentIndex(j), kCh), cvm_j);
            compare(component_cvm(data, th, fam, ComponentIndex(j), WeightingScheme::indicator()), oracle::cvm_indicator(x, c));
            compare(component_ks(data, th, fam, ComponentIndex(j), kCh), oracle::ks_characteristic(x, c));
            compare(component_ks(data, th, fam, ComponentIndex(j), WeightingScheme::indicator()), oracle::ks_indicator(x, c));
            compare(WeightOperator::projection(x, signs).cvm(component_marks(data, th, fam, ComponentIndex(j)).matrix()),
                    oracle::cvm_projection(x, c, signs));
        }
        Matrix sum = Matrix::Zero(3, 3);
        for (int j = 1; j <= 5; ++j) sum += oracle::component(data, th, fam, j);
        compare(evaluate(smooth_test(5, kCh), data, th, fam), oracle::cvm_characteristic(x, sum));
        double mean = 0.0;
        for (int j = 0; j < 5; ++j) mean += comps[static_cast<std::size_t>(j)] / 5.0;
        compare(evaluate(first_components(5, kCh), data, th, fam), mean);
    }
    out.detail << cases << " statistic values on n=3 datasets, max |diff| = " << std::scientific << std::setprecision(2)
               << worst;
    out.check(worst <= 1e-10, "max diff");
}

void kernel_closed_form(const Options&, Outcome& out) {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    int pairs = 0, outside = 0;
    double worst = 0.0;
    for (int d : {1, 5, 15}) {
        const int count = d == 1 ? 34 : 33;
        for (int p = 0; p < count; ++p) {
            Vector a(d), b(d);
            for (int c = 0; c < d; ++c) {
                a(c) = u(rng);
                b(c) = u(rng);
            }
            // closed form through the library's weight operator on a two-row design
            RowMatrix x(2, d);
            x.row(0) = a.transpose();
            x.row(1) = b.transpose();
            const double kernel = WeightOperator::characteristic(x).gram()(0, 1);
            const Vector delta = a - b;
            const int draws = 1000000;
            double sum = 0.0, sum2 = 0.0;
            for (int k = 0; k < draws; ++k) {
                double phase = 0.0;
                for (int c = 0; c < d; ++c) phase += z(rng) * delta(c);
                const double v = std::cos(phase);
                sum += v;
                sum2 += v * v;
            }
            const double mean = sum / draws;
            const double se = std::sqrt((sum2 / draws - mean * mean) / draws);
            const double zscore = std::abs(mean - kernel) / se;
            worst = std::max(worst, zscore);
            outside += zscore > 3.0 ? 1 : 0;
            ++pairs;
        }
    }
    out.detail << pairs << " pairs, d in {1,5,15}, 1e6 draws each: " << outside << " beyond 3 SE, max |z| = " << fmt(worst, 2);
    out.check(outside == 0, "pairs beyond 3 SE");
}

void structural_identities(const Options&, Outcome& out) {
    const Dataset data = dgp_sample(DgpSpec::standard(DgpId::DGP0), 50, 707);
    const auto fam = ModelFamily::linear_gaussian(data.d());
    const ParamVector th = fit(fam, data);
    double prev = std::numeric_limits<double>::infinity();
    out.detail << "reconstruction J=10,50,100,500:";
    for (int J : {10, 50, 100, 500}) {
        const double e = reconstruction_error(data, th, fam, J, kCh);
        out.detail << ' ' << fmt(e, 4);
        out.check(e < prev, "reconstruction not decreasing at J=" + std::to_string(J));
        prev = e;
    }

    double mercer = 0.0;
    for (int j = 1; j <= 2000; ++j)
        mercer += eigenvalue(ComponentIndex(j)) * basis_pair(ComponentIndex(j), 0.3).f * basis_pair(ComponentIndex(j), 0.7).f;
    const double mercer_err = std::abs(mercer - 0.09);
    out.detail << "; Mercer(0.3,0.7) J=2000 err " << std::scientific << std::setprecision(1) << mercer_err << std::fixed;
    out.check(mercer_err <= 1e-3, "Mercer");

    const DgpSpec spec = DgpSpec::standard(DgpId::DGP0);
    const Dataset big = dgp_sample(spec, 100000, 708);
    const auto fam15 = ModelFamily::linear_gaussian(spec.d);
    Vector truth = Vector::Ones(spec.d + 2);
    const ParamVector th0(truth);
    constexpr int J = 5;
    double mean[J] = {}, cross[J][J] = {};
    for (Eigen::Index i = 0; i < big.n(); ++i) {
        const double t = cdf(fam15, th0, big.row(i), big.y()(i));
        double g[J];
        for (int j = 0; j < J; ++j) g[j] = basis_pair(ComponentIndex(j + 1), t).g;
        for (int j = 0; j < J; ++j) {
            mean[j] += g[j];
            for (int h = 0; h < J; ++h) cross[j][h] += g[j] * g[h];
        }
    }
    double dev = 0.0;
    const double n = static_cast<double>(big.n());
    for (int j = 0; j < J; ++j) {
        dev = std::max(dev, std::abs(mean[j] / n));
        for (int h = 0; h < J; ++h) dev = std::max(dev, std::abs(cross[j][h] / n - (j == h ? 1.0 : 0.0)));
    }
    out.detail << "; orthogonality max dev " << fmt(dev, 4);
    out.check(dev <= 0.02, "orthogonality");
}

std::string without_seconds(const std::string& text, bool csv) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (csv) line = line.substr(0, line.rfind(','));
        else if (line.find("\"seconds\"") != std::string::npos) continue;
        out << line << '\n';
    }
    return out.str();
}

void determinism(const Options&, Outcome& out) {
    const auto dir = std::filesystem::temp_directory_path() / "pcdtest_acceptance_determinism";
    std::filesystem::create_directories(dir);
    const std::string config = (dir / "sim.json").string(), csv = (dir / "d.csv").string();
    std::ofstream(config) << R"({"dgp": "DGP6", "n": 120, "replications": 24, "B": 49, "seed": 8,
        "statistics": [{"type": "ck"}, {"type": "cvm"}, {"type": "cvm", "weighting": {"kind": "projection", "directions": 20, "direction_seed": 3}},
                       {"type": "smooth", "m": 5}, {"type": "smooth-mean", "m": 3}, {"type": "component", "j": 2},
                       {"type": "learn-test", "split": {"learn_count": 50}, "candidates": 10, "keep": 2},
                       {"type": "learn-test", "split": {"learn_count": 50}, "candidates": 10, "keep": 5}]})";
    {
        std::ofstream f(csv);
        write_csv(f, dgp_sample(DgpSpec::standard(DgpId::DGP7), 150, 9), "y",
                  [] {
                      std::vector<std::string> names;
                      for (int c = 1; c <= 15; ++c) names.push_back("x" + std::to_string(c));
                      return names;
                  }());
    }
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "pcdtest");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream os, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), os, err);
        return code == 0 ? os.str() : "error " + err.str();
    };
    int identical = 0, total = 0;
    std::string reference;
    for (const char* t : {"1", "1", "2", "4"}) {
        const std::string table = without_seconds(run({"simulate", "--config", config, "--threads", t}), true);
        if (reference.empty()) reference = table;
        identical += table == reference ? 1 : 0;
        ++total;
    }
    out.check(reference.rfind("statistic,", 0) == 0, "simulate output");
    std::string learn_reference;
    for (const char* t : {"1", "1", "2", "4"}) {
        const std::string raw = run({"learn-test", "--data", csv, "--response", "y", "--learn-fraction", "0.4",
                                     "--shuffle-seed", "11", "--bootstrap-B", "49", "--seed", "12", "--threads", t});
        // the config echo records the thread count; compare the results
        std::string report = raw;
        if (raw.rfind("error", 0) != 0) {
            json j = json::parse(raw);
            j.erase("seconds");
            j["config"].erase("threads");
            report = j.dump();
        }
        if (learn_reference.empty()) learn_reference = report;
        identical += report == learn_reference ? 1 : 0;
        ++total;
    }
    out.check(learn_reference.rfind("error", 0) != 0, "learn-test output");
    std::filesystem::remove_all(dir);
    out.detail << "simulate and learn-test at threads 1,1,2,4: " << identical << '/' << total << " identical to the first run";
    out.check(identical == total, "outputs differ");
}

const struct {
    const char* title;
    std::function<void(const Options&, Outcome&)> run;
} kCriteria[] = {
    {"size control", size_control},
    {"moment/component correspondence", moment_correspondence},
    {"high-frequency advantage", high_frequency},
    {"learning gain", learning_gain},
    {"oracle equivalence", oracle_equivalence},
    {"closed-form kernel", kernel_closed_form},
    {"structural identities", structural_identities},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    std::vector<int> which;
    CLI::App app{"acceptance criteria"};
    app.add_option("--criterion", which, "criterion number (repeatable; default all)")->check(CLI::Range(1, 8));
    app.add_flag("--smoke", opt.smoke, "reduced size-control run");
    app.add_option("--threads", opt.threads, "worker threads");
    CLI11_PARSE(app, argc, argv);
    if (which.empty())
        for (int c = 1; c <= 8; ++c) which.push_back(c);

    bool all = true;
    for (int c : which) {
        const auto& crit = kCriteria[c - 1];
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            crit.run(opt, out);
        } catch (const std::exception& e) {
            out.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << c << ' ' << (out.pass ? "PASS" : "FAIL") << " (" << crit.title << ", "
                  << fmt(secs, 0) << " s): " << out.detail.str() << std::endl;
        all = all && out.pass;
    }
    return all ? 0 : 1;
}
