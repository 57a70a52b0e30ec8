// Acceptance suite: one line per criterion, exit 0 only when all pass.
// Tolerances are pinned here; runtime budgets are part of each criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sheetsew/experiment.hpp"

using namespace sheetsew;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    std::vector<std::string> problems;

    Criterion(int i, std::string n, double budget) : id(i), name(std::move(n)), budget_seconds(budget)
    {
    }

    void require(bool ok, const std::string& what)
    {
        if (!ok) problems.push_back(what);
    }

    void finish()
    {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget_seconds > 0.0 && secs > budget_seconds)
            problems.push_back("runtime " + std::to_string(secs) + "s exceeds budget " +
                               std::to_string(budget_seconds) + "s");
        const bool pass = problems.empty();
        if (!pass) ++g_failures;
        std::printf("[criterion %2d] %s  %-34s (%.1fs)", id, pass ? "PASS" : "FAIL",
                    name.c_str(), secs);
        std::printf("\n");
        for (const auto& p : problems) std::printf("               - %s\n", p.c_str());
        std::fflush(stdout);
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

}  // namespace

// 1. Algebra identity suite: 1e4 randomized checks per identity, <= 1e-12.
static void criterion_1()
{
    Criterion c(1, "algebra identity suite", 10.0);
    try {
        auto rep = algebra_selftest(10000, 20260809);
        c.require(rep.items.size() == 5, "expected five identities");
        for (const auto& it : rep.items) {
            c.require(it.failures == 0, it.name + ": " + std::to_string(it.failures) +
                                            " of " + std::to_string(it.checks) + " failed");
            c.require(it.worst_error <= 1e-12,
                      it.name + ": worst error " + std::to_string(it.worst_error));
        }
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 2. Brownian-sheet strong-past variance vs t1 t2 - s1 s2 within 1% (level 6).
static void criterion_2()
{
    Criterion c(2, "Brownian-sheet strong past", 30.0);
    try {
        auto bs = FieldModel::brownian_sheet(2);
        RandomStream rng(42, derive_stream(stream_purpose::kPairSampling, 2));
        int checked = 0;
        double worst = 0.0;
        while (checked < 50) {
            Point s{rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
            Point t{rng.uniform(s[0] + 0.1, 1.0), rng.uniform(s[1] + 0.1, 1.0)};
            const double expected = t[0] * t[1] - s[0] * s[1];
            const double got = strong_past_variance(bs, t, StrongPastApprox(s, 6));
            worst = std::max(worst, std::abs(got - expected) / expected);
            ++checked;
        }
        c.require(worst < 0.01, "worst relative deviation " + std::to_string(worst));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 3. fBs multiplicative LND: level-5 variance >= normalized lower bound - 1e-6.
static void criterion_3()
{
    Criterion c(3, "fBs multiplicative LND bound", 120.0);
    try {
        for (auto H : {std::array<double, 2>{0.5, 0.5}, std::array<double, 2>{0.7, 0.3}}) {
            auto model = FieldModel::fractional_sheet({H[0], H[1]});
            RandomStream rng(77, derive_stream(stream_purpose::kPairSampling, 3));
            double worst_violation = 0.0;
            for (int k = 0; k < 200; ++k) {
                Point s{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
                Point t{rng.uniform(s[0], 1.0), rng.uniform(s[1], 1.0)};
                const double bound = fbs_variance_lower_bound(H, s, t);
                const double var = strong_past_variance(model, t, StrongPastApprox(s, 5));
                worst_violation = std::max(worst_violation, bound - var);
            }
            c.require(worst_violation <= 1e-6,
                      "H=(" + std::to_string(H[0]) + "," + std::to_string(H[1]) +
                          "): bound violated by " + std::to_string(worst_violation));
        }
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 4. Additive LND fails at the boundary for the sheet, holds for the
//    boundary-augmented field.
static void criterion_4()
{
    Criterion c(4, "additive LND boundary falsification", 60.0);
    try {
        std::vector<double> zeta{0.5, 0.5};
        Rect domain(Point{0.0, 0.0}, Point{1.0, 1.0});
        auto fbs = FieldModel::fractional_sheet({0.5, 0.5});
        auto rep = check_lnd(fbs, LndNotion::Additive, zeta, domain, 60, 4, 11);
        c.require(rep.c_hat <= 1e-3, "sheet c_hat " + std::to_string(rep.c_hat));

        auto ba = FieldModel::boundary_augmented({0.5, 0.5}, {0.5, 0.5});
        auto rep2 = check_lnd(ba, LndNotion::Additive, zeta, domain, 60, 4, 11);
        c.require(rep2.c_hat >= 0.1, "boundary-augmented c_hat " + std::to_string(rep2.c_hat));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 5. BDG ratio stable within +-15% over 4^2 -> 8^2 -> 16^2; biased control
//    grows by at least 2x.
static void criterion_5()
{
    Criterion c(5, "BDG Monte Carlo", 120.0);
    try {
        const std::size_t N = 2000;
        std::vector<double> ratios;
        for (int cells : {4, 8, 16}) {
            auto chk = bdg_check(sheet_increment_array(cells, N, 314), 4);
            ratios.push_back(chk.ratio);
        }
        for (std::size_t i = 1; i < ratios.size(); ++i)
            c.require(std::abs(ratios[i] - ratios[0]) <= 0.15 * ratios[0],
                      "ratio drift " + std::to_string(ratios[i]) + " vs " +
                          std::to_string(ratios[0]));
        auto b4 = bdg_check(sheet_increment_array(4, N, 314, 1.0), 4);
        auto b16 = bdg_check(sheet_increment_array(16, N, 314, 1.0), 4);
        c.require(b16.ratio >= 2.0 * b4.ratio,
                  "biased ratio growth " + std::to_string(b16.ratio / b4.ratio) + " < 2");
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 6. Sewing convergence of the exponential germ: monotone Cauchy decay with
//    slope <= -0.5, and the sewing limit agrees with the direct quadrature.
static void criterion_6()
{
    Criterion c(6, "exponential germ sewing", 120.0);
    try {
        auto model = FieldModel::brownian_sheet(2);
        const Rect box(Point{0.0, 0.0}, Point{0.5, 0.5});
        PathEnsemble ensemble(model, SampleGrid::dyadic(box, 7), 2026, 1000,
                              SampleRoute::SheetIncrements);
        ExponentialGermSpec spec;
        spec.z = {5.0};
        spec.quadrature = 2;
        auto germ = exponential_germ(model, ensemble, spec);
        auto res = multilevel_sums(germ, box, IndexSet::full(2), 1, 6, ensemble.size());

        for (std::size_t i = 0; i + 1 < res.cauchy_lm.size(); ++i)
            c.require(res.cauchy_lm[i + 1].value < res.cauchy_lm[i].value,
                      "Cauchy differences not monotone at level " +
                          std::to_string(res.levels[i + 1]));
        c.require(res.fitted_rate <= -0.5,
                  "fitted slope " + std::to_string(res.fitted_rate) + " > -0.5");

        std::vector<double> direct_abs(ensemble.size()), sewn_abs(ensemble.size());
        for (std::size_t k = 0; k < ensemble.size(); ++k) {
            direct_abs[k] = std::abs(occupation_fourier(ensemble.path(k), box, spec.z,
                                                        OscillationPolicy::Report));
            sewn_abs[k] = std::abs(res.limit[k]);
        }
        auto nd = lm_norm_jackknife<double>(direct_abs, 2);
        auto ns = lm_norm_jackknife<double>(sewn_abs, 2);
        const double se = std::sqrt(nd.stderr * nd.stderr + ns.stderr * ns.stderr);
        c.require(std::abs(nd.value - ns.value) <= 2.0 * se,
                  "norm disagreement " + std::to_string(std::abs(nd.value - ns.value)) +
                      " > 2 x " + std::to_string(se));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 7. Fourier moment decay: fitted exponent >= 0.45 * 0.75 for the fBs at
//    H=(1/2,1/2); deterministic control <= 0.1.
static void criterion_7()
{
    Criterion c(7, "occupation Fourier decay", 180.0);
    try {
        auto model = FieldModel::fractional_sheet({0.5, 0.5});
        const Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
        PathEnsemble ensemble(model, SampleGrid::dyadic(box, 7), 4242, 2000,
                              SampleRoute::Kronecker);
        std::vector<double> radii{2, 4, 8, 16, 32, 64};
        std::vector<double> zeta{0.5, 0.5};
        auto fit =
            moment_decay_fit(ensemble, box, radii, 2, 4242, LndNotion::Multiplicative, zeta);
        c.require(fit.exponent >= 0.45 * 0.75,
                  "fitted exponent " + std::to_string(fit.exponent) + " < 0.3375");

        auto control = moment_decay_fit_deterministic(
            make_constant_path(SampleGrid::dyadic(box, 5), 1, 0.4), box, radii, 2,
            LndNotion::Multiplicative, zeta);
        c.require(control.exponent <= 0.1,
                  "deterministic control decays: " + std::to_string(control.exponent));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 8. Local time: mass conservation 0.1%, occupation-times formula 2%,
//    per-axis Hoelder exponents >= 1/2 within the band at alpha = 0.3.
static void criterion_8()
{
    Criterion c(8, "local-time checks", 180.0);
    try {
        auto model = FieldModel::brownian_sheet(2);
        const Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
        auto path = sample_exact(model, SampleGrid::dyadic(box, 8), 5, 3,
                                 SampleRoute::SheetIncrements);
        auto win = auto_window(path, box);
        auto lt = local_time_density(path, box, win, 256);
        c.require(std::abs(lt.total_mass() - box.volume()) <= 1e-3 * box.volume(),
                  "mass " + std::to_string(lt.total_mass()));

        auto f = [](double x) { return std::exp(-0.5 * (x - 0.2) * (x - 0.2) / 0.09); };
        double lhs = 0.0;
        for (std::size_t b = 0; b < lt.density.size(); ++b)
            lhs += f(lt.x_min + (b + 0.5) * lt.bin_width) * lt.density[b] * lt.bin_width;
        double rhs = 0.0;
        const auto& axes = path.grid.axes;
        const std::size_t n0 = axes[0].size(), n1 = axes[1].size();
        for (std::size_t i = 0; i < n0; ++i)
            for (std::size_t j = 0; j < n1; ++j) {
                double wt = ((i == 0 || i + 1 == n0) ? 0.5 : 1.0) *
                            ((j == 0 || j + 1 == n1) ? 0.5 : 1.0) / ((n0 - 1.0) * (n1 - 1.0));
                rhs += wt * f(path.value(i * n1 + j));
            }
        c.require(std::abs(lhs - rhs) <= 0.02 * std::abs(rhs),
                  "occupation-times formula: " + std::to_string(lhs) + " vs " +
                      std::to_string(rhs));

        PathEnsemble ensemble(model, SampleGrid::dyadic(box, 8), 31415, 120,
                              SampleRoute::SheetIncrements);
        HolderFitSpec spec;
        spec.alpha = 0.3;
        spec.gaps = {0.125, 0.25, 0.5};
        spec.base = Point{0.25, 0.25};
        spec.other_extent = 0.5;
        for (double r = 0.0; r <= 36.0; r += 3.0) spec.radii.push_back(r);
        std::vector<double> zeta{0.5, 0.5};
        auto fit = holder_time_fit(ensemble, spec, LndNotion::Multiplicative, zeta);
        for (std::size_t a = 0; a < fit.per_axis_exponent.size(); ++a)
            c.require(fit.per_axis_exponent[a] + fit.per_axis_band[a] >= 0.5,
                      "axis " + std::to_string(a) + " gamma " +
                          std::to_string(fit.per_axis_exponent[a]));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 9. Young solver: linear Goursat matches the series to 1e-6; the Young-field
//    solve tracks the mesh-refined direct Picard within 2%; the corollary
//    arithmetic is reproduced exactly.
static void criterion_9()
{
    Criterion c(9, "Young solver", 120.0);
    try {
        // (a) linear Goursat vs series
        auto blin = NonlinearitySpec::from_function([](double y) { return y; });
        AveragedFieldSpec fs;
        fs.level = 6;
        const Rect box(Point{0.0, 0.0}, Point{1.0, 1.0});
        auto field = averaged_field(blin, box, std::nullopt, fs);
        PicardOptions opt;
        opt.mode = PicardOptions::Mode::DirectQuadrature;
        opt.quadrature_order = 4;
        opt.tol = 1e-12;
        auto sol = solve_picard(GoursatBoundary::constant(1.0), field, opt, &blin);
        double worst = 0.0;
        const int n2 = field.nodes2();
        for (int i = 0; i < field.nodes1(); i += 4)
            for (int j = 0; j < n2; j += 4)
                worst = std::max(worst, std::abs(sol.y[static_cast<std::size_t>(i) * n2 + j] -
                                                 goursat_series(1.0, 1.0,
                                                                field.lattice.axes[0][i],
                                                                field.lattice.axes[1][j])));
        c.require(worst <= 1e-6, "series deviation " + std::to_string(worst));

        // (b) smooth b: Young 64^2 vs direct 128^2 within 2%
        auto bs = NonlinearitySpec::from_function([](double y) { return std::sin(y); });
        auto w = sample_exact(FieldModel::brownian_sheet(2), SampleGrid::dyadic(box, 7), 4, 0,
                              SampleRoute::SheetIncrements);
        AveragedFieldSpec f6 = fs;
        f6.x_min = -4.0;
        f6.x_max = 4.0;
        auto field6 = averaged_field(bs, box, w, f6);
        PicardOptions young;
        young.mode = PicardOptions::Mode::YoungField;
        young.level = 6;
        young.tol = 1e-9;
        auto ys = solve_picard(GoursatBoundary::constant(0.2), field6, young);

        AveragedFieldSpec f7 = f6;
        f7.level = 7;
        auto field7 = averaged_field(bs, box, w, f7);
        PicardOptions direct;
        direct.mode = PicardOptions::Mode::DirectQuadrature;
        direct.quadrature_order = 2;
        direct.tol = 1e-9;
        auto ds = solve_picard(GoursatBoundary::constant(0.2), field7, direct, &bs, w);
        double diff = 0.0, scale = 0.0;
        const int n2c = field6.nodes2(), n2f = field7.nodes2();
        for (int i = 0; i < field6.nodes1(); ++i)
            for (int j = 0; j < n2c; ++j) {
                diff = std::max(diff,
                                std::abs(ys.y[static_cast<std::size_t>(i) * n2c + j] -
                                         ds.y[static_cast<std::size_t>(2 * i) * n2f + 2 * j]));
                scale = std::max(scale,
                                 std::abs(ds.y[static_cast<std::size_t>(2 * i) * n2f + 2 * j]));
            }
        c.require(diff <= 0.02 * scale,
                  "young vs refined direct: " + std::to_string(diff / scale));

        // (c) corollary arithmetic
        std::vector<double> zq{0.25, 0.25}, zh{0.5, 0.5}, gam{0.6, 0.6};
        auto r1 = check_regularization_condition(2.0, zq, 1, LndNotion::Additive);
        c.require(r1.satisfied && std::abs(r1.margin - 2.5) < 1e-12,
                  "additive corollary margin " + std::to_string(r1.margin));
        auto r2 = check_regularization_condition(0.0, zh, 1, LndNotion::Multiplicative);
        c.require(!r2.satisfied && std::abs(r2.margin + 2.5) < 1e-12,
                  "multiplicative corollary margin " + std::to_string(r2.margin));
        auto r3 = check_regularization_condition_general(2.71, gam, 0.0, 0.7);
        c.require(r3.satisfied && std::abs(r3.margin - 0.01) < 1e-12,
                  "general condition margin " + std::to_string(r3.margin));
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

// 10. Determinism: identical configs give byte-identical CSV outputs, and the
//     results do not depend on the worker count.
static void criterion_10()
{
    Criterion c(10, "determinism", 0.0);
    try {
        const auto root = fs::temp_directory_path() / "sheetsew_acceptance";
        fs::remove_all(root);

        json sample_cfg = {{"experiment", "sample"},
                           {"seed", 99},
                           {"params",
                            {{"model", {{"kind", "fractional_sheet"}, {"H", {0.7, 0.3}}}},
                             {"grid_level", 3},
                             {"count", 2}}}};
        json sew_cfg = {{"experiment", "sew"},
                        {"seed", 7},
                        {"samples", 50},
                        {"params",
                         {{"box", {{0.0, 0.0}, {0.5, 0.5}}},
                          {"z", {5.0}},
                          {"grid_level", 5},
                          {"min_level", 1},
                          {"max_level", 4}}}};
        for (auto [name, cfg] : {std::pair{std::string("sample"), sample_cfg},
                                 std::pair{std::string("sew"), sew_cfg}}) {
            std::vector<std::string> outputs;
            for (int rep = 0; rep < 2; ++rep) {
                json doc = cfg;
                doc["out"] = (root / (name + std::to_string(rep))).string();
                doc["workers"] = rep + 1;  // worker count must not matter
                run(ExperimentConfig::parse(doc));
            }
            for (const auto& entry : fs::directory_iterator(root / (name + "0"))) {
                if (entry.path().extension() != ".csv") continue;
                const auto other = root / (name + "1") / entry.path().filename();
                c.require(slurp(entry.path()) == slurp(other),
                          name + ": " + entry.path().filename().string() + " differs");
            }
        }
    } catch (const std::exception& e) {
        c.require(false, e.what());
    }
    c.finish();
}

int main()
{
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 3;
}
