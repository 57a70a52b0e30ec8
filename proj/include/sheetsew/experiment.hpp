#pragma once

// Reproducible experiment runner: JSON configs, validation, dispatch to the
// compute modules, CSV/JSON emission, and the run manifest. One master seed
// drives every stream through the documented (purpose, sample, component)
// derivation, so identical configs give byte-identical CSV outputs.

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sheetsew/conditioning.hpp"
#include "sheetsew/gaussian_field.hpp"
#include "sheetsew/io.hpp"
#include "sheetsew/occupation.hpp"
#include "sheetsew/selftest.hpp"
#include "sheetsew/sewing.hpp"
#include "sheetsew/young.hpp"

namespace sheetsew {

using json = nlohmann::json;

inline const char* kToolVersion = "sheetsew 0.1.0";

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    json doc;  // full document, serialized alongside the outputs
    std::string experiment;
    std::uint64_t seed = 1;
    long long samples = 200;
    std::string out_dir = "out";
    int workers = 0;
    bool check_mode = false;

    static ExperimentConfig parse(const json& j)
    {
        ExperimentConfig c;
        c.doc = j;
        c.experiment = j.value("experiment", "");
        c.seed = j.value("seed", 1ull);
        c.samples = j.value("samples", 200ll);
        c.out_dir = j.value("out", "out");
        c.workers = j.value("workers", 0);
        return c;
    }

    json params() const { return doc.value("params", json::object()); }
    std::uint64_t config_hash() const { return fnv1a64(doc.dump()); }
};

inline FieldModel model_from_json(const json& j)
{
    const std::string kind = j.value("kind", "brownian_sheet");
    const int n = j.value("n", 1);
    if (kind == "brownian_sheet") return FieldModel::brownian_sheet(j.value("d", 2), n);
    if (kind == "fractional_sheet") {
        FieldModel m;
        m.kind = FieldKind::FractionalBrownianSheet;
        const auto H = j.at("H").get<std::vector<double>>();
        m.d = static_cast<int>(H.size());
        m.n = n;
        m.normalized = j.value("normalized", true);
        for (int i = 0; i < m.d; ++i) m.hurst[i] = H[i];
        m.validate();
        return m;
    }
    if (kind == "boundary_augmented") {
        FieldModel m;
        m.kind = FieldKind::BoundaryAugmented;
        const auto Hb = j.at("H_boundary").get<std::vector<double>>();
        const auto Hi = j.at("H_interior").get<std::vector<double>>();
        if (Hb.size() != Hi.size()) throw std::invalid_argument("model: H vector size mismatch");
        m.d = static_cast<int>(Hb.size());
        m.n = n;
        for (int i = 0; i < m.d; ++i) {
            m.hurst_boundary[i] = Hb[i];
            m.hurst_interior[i] = Hi[i];
            m.boundary_weight[i] = 1.0;
        }
        if (j.contains("boundary_weight")) {
            const auto w = j.at("boundary_weight").get<std::vector<double>>();
            for (int i = 0; i < m.d; ++i) m.boundary_weight[i] = w[i];
        }
        m.interior_weight = j.value("interior_weight", 1.0);
        m.validate();
        return m;
    }
    throw std::invalid_argument("model: unknown kind '" + kind + "'");
}

inline Rect rect_from_json(const json& j)
{
    const auto lo = j.at(0).get<std::vector<double>>();
    const auto hi = j.at(1).get<std::vector<double>>();
    Point a(static_cast<int>(lo.size())), b(static_cast<int>(hi.size()));
    for (std::size_t i = 0; i < lo.size(); ++i) a.v[i] = lo[i];
    for (std::size_t i = 0; i < hi.size(); ++i) b.v[i] = hi[i];
    return Rect(a, b);
}

inline LndNotion notion_from_string(const std::string& s)
{
    if (s == "sectorial") return LndNotion::Sectorial;
    if (s == "strong") return LndNotion::Strong;
    if (s == "additive") return LndNotion::Additive;
    if (s == "multiplicative") return LndNotion::Multiplicative;
    throw std::invalid_argument("unknown LND notion '" + s + "'");
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate(const ExperimentConfig& cfg)
{
    std::vector<std::string> out;
    const json p = cfg.params();
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) out.push_back(msg);
    };
    static const std::vector<std::string> known{"algebra-selftest", "sample", "lnd",
                                               "sew",              "bdg",    "occupation",
                                               "localtime",        "solve"};
    if (std::find(known.begin(), known.end(), cfg.experiment) == known.end()) {
        out.push_back("unknown experiment '" + cfg.experiment + "'");
        return out;
    }
    auto check_model = [&](const json& mj) {
        try {
            model_from_json(mj);
        } catch (const std::exception& e) {
            out.push_back(std::string("model: ") + e.what());
        }
    };
    if (p.contains("model")) check_model(p.at("model"));

    if (cfg.experiment == "sample") {
        const long long points = 1LL << (2 * p.value("grid_level", 5));
        const std::string route = p.value("route", "auto");
        const long long limit = route == "dense"   ? kMaxDensePoints
                                : route == "sheet" ? kMaxSheetPoints
                                                   : kMaxKroneckerPoints;
        need(points <= limit, "grid size " + std::to_string(points) +
                                  " above the sampler limit " + std::to_string(limit));
    }
    if (cfg.experiment == "lnd") {
        for (double z : p.value("zeta", std::vector<double>{}))
            need(z > 0.0 && z < 1.0, "zeta_i must lie in (0,1)");
        need(p.value("level", 5) <= 7, "conditioning level above desk scale");
    }
    if (cfg.experiment == "localtime") {
        const double alpha = p.value("alpha", 0.3);
        const auto zeta = p.value("zeta", std::vector<double>{0.5, 0.5});
        const auto notion = notion_from_string(p.value("notion", "multiplicative"));
        const double bound = holder_alpha_bound(notion, zeta, 1);
        need(alpha < bound,
             "alpha " + fmt17(alpha) + " violates alpha < sum 1/(2 zeta_i) - n/2 (bound " +
                 fmt17(bound) + ")");
    }
    if (cfg.experiment == "occupation") {
        const auto radii = p.value("radii", std::vector<double>{2, 4, 8, 16, 32, 64});
        need(radii.size() >= 5, "need at least 5 radii");
        if (!radii.empty())
            need(radii.back() / radii.front() >= 31.0, "radii must span >= 1.5 decades");
    }
    if (cfg.experiment == "solve") {
        // a distributional (band-limited) nonlinearity needs a satisfied
        // regularization condition; smooth kinds may run unconditionally
        const std::string bkind = p.value("b", json::object()).value("kind", "linear");
        if (bkind == "band_limited") {
            if (!p.contains("regularization")) {
                out.push_back("band-limited b requires a 'regularization' block");
            } else {
                const auto rj = p.at("regularization");
                const auto zeta = rj.value("zeta", std::vector<double>{0.5, 0.5});
                const double rho = p.at("b").value("rho", 0.0);
                auto rc = check_regularization_condition(
                    rho, zeta, rj.value("n", 1),
                    notion_from_string(rj.value("notion", "multiplicative")));
                need(rc.satisfied, "regularization condition unsatisfied (margin " +
                                       fmt17(rc.margin) + ", binding " + rc.binding + ")");
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string experiment;
    std::uint64_t config_hash = 0;
    std::string version = kToolVersion;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, double>> stage_seconds;

    json to_json() const
    {
        json stages = json::object();
        for (const auto& [k, v] : stage_seconds) stages[k] = v;
        return json{{"experiment", experiment},
                    {"config_hash", config_hash},
                    {"version", version},
                    {"wall_seconds", wall_seconds},
                    {"stage_seconds", stages}};
    }
};

struct RunResult {
    RunManifest manifest;
    bool check_passed = true;
    json summary;
};

namespace detail {

class StageTimer {
public:
    explicit StageTimer(RunManifest& m) : manifest_(m), t0_(clock::now()) {}
    void stage(const std::string& name)
    {
        const auto now = clock::now();
        manifest_.stage_seconds.emplace_back(
            name, std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }
    void finish()
    {
        manifest_.wall_seconds =
            std::chrono::duration<double>(clock::now() - t0_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    RunManifest& manifest_;
    clock::time_point t0_{clock::now()}, last_{clock::now()};
};

inline json point_to_json(const Point& p)
{
    json a = json::array();
    for (int i = 0; i < p.dim; ++i) a.push_back(p.v[i]);
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

inline RunResult run(const ExperimentConfig& cfg)
{
    {
        const auto violations = validate(cfg);
        if (!violations.empty()) {
            std::string msg = "config validation failed:";
            for (const auto& v : violations) msg += "\n  - " + v;
            throw std::invalid_argument(msg);
        }
    }
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);

    RunResult result;
    result.manifest.experiment = cfg.experiment;
    result.manifest.config_hash = cfg.config_hash();
    detail::StageTimer timer(result.manifest);

    write_file_atomic(out / "config.json", cfg.doc.dump(2) + "\n");
    const json p = cfg.params();
    const json check = cfg.doc.value("check", json::object());
    auto fail_check = [&](const std::string& what) {
        result.check_passed = false;
        result.summary["check_failures"].push_back(what);
    };

    if (cfg.experiment == "algebra-selftest") {
        const long long checks = p.value("checks", 10000ll);
        auto rep = algebra_selftest(checks, cfg.seed);
        timer.stage("identities");
        json items = json::array();
        for (const auto& it : rep.items)
            items.push_back({{"name", it.name},
                             {"checks", it.checks},
                             {"failures", it.failures},
                             {"worst_error", it.worst_error}});
        result.summary = {{"identities", items}, {"all_passed", rep.all_passed()}};
        write_file_atomic(out / "algebra_selftest.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode && !rep.all_passed()) fail_check("algebra identities failed");
    } else if (cfg.experiment == "sample") {
        const auto model = model_from_json(p.value("model", json{{"kind", "brownian_sheet"}}));
        const Rect box = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {1.0, 1.0}})));
        const auto grid = SampleGrid::dyadic(box, p.value("grid_level", 5));
        const std::string route_s = p.value("route", "auto");
        const SampleRoute route = route_s == "dense"       ? SampleRoute::Dense
                                  : route_s == "kronecker" ? SampleRoute::Kronecker
                                  : route_s == "sheet"     ? SampleRoute::SheetIncrements
                                                           : SampleRoute::Auto;
        const long long count = p.value("count", std::min<long long>(cfg.samples, 8));
        for (long long k = 0; k < count; ++k) {
            const auto sample = sample_exact(model, grid, cfg.seed, k, route);
            std::ostringstream os;
            write_field_sample_csv(os, model, sample);
            write_file_atomic(out / ("field_sample_" + std::to_string(k) + ".csv"), os.str());
        }
        timer.stage("sampling");
        result.summary = {{"count", count}, {"grid_points", grid.num_points()}};
    } else if (cfg.experiment == "lnd") {
        const auto model = model_from_json(p.at("model"));
        const auto zeta = p.at("zeta").get<std::vector<double>>();
        const Rect domain = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {1.0, 1.0}})));
        const auto notion = notion_from_string(p.value("notion", "multiplicative"));
        auto rep = check_lnd(model, notion, zeta, domain,
                             static_cast<int>(p.value("trials", cfg.samples)),
                             p.value("level", 5), cfg.seed, p.value("epsilon", -1.0),
                             cfg.workers);
        timer.stage("conditioning");
        result.summary = {{"notion", to_string(rep.notion)},
                          {"zeta", rep.zeta},
                          {"c_hat", rep.c_hat},
                          {"worst_pair",
                           {{"s", detail::point_to_json(rep.worst_s)},
                            {"t", detail::point_to_json(rep.worst_t)},
                            {"variance", rep.worst_variance},
                            {"comparison", rep.worst_comparison}}},
                          {"pairs_tested", rep.pairs_tested},
                          {"pairs_skipped", rep.pairs_skipped},
                          {"level", rep.level},
                          {"epsilon", rep.epsilon}};
        write_file_atomic(out / "lnd_report.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode) {
            if (check.contains("min_c_hat") && !(rep.c_hat >= check.at("min_c_hat").get<double>()))
                fail_check("c_hat below the required floor");
            if (check.contains("max_c_hat") && !(rep.c_hat <= check.at("max_c_hat").get<double>()))
                fail_check("c_hat above the falsification ceiling");
        }
    } else if (cfg.experiment == "sew") {
        const auto model = model_from_json(p.value("model", json{{"kind", "brownian_sheet"}}));
        const Rect box = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {0.5, 0.5}})));
        const int grid_level = p.value("grid_level", 7);
        const int max_level = p.value("max_level", 6);
        const int min_level = p.value("min_level", 1);
        PathEnsemble ensemble(model, SampleGrid::dyadic(box, grid_level), cfg.seed,
                              static_cast<std::size_t>(cfg.samples),
                              model.kind == FieldKind::BrownianSheet
                                  ? SampleRoute::SheetIncrements
                                  : SampleRoute::Auto,
                              cfg.workers);
        timer.stage("sampling");
        ExponentialGermSpec spec;
        spec.z = p.value("z", std::vector<double>{5.0});
        spec.quadrature = p.value("quadrature", 2);
        auto germ = exponential_germ(model, ensemble, spec);
        IndexSet theta = IndexSet::full(2);
        if (p.contains("theta")) {
            theta = IndexSet::empty(2);
            for (int a : p.at("theta").get<std::vector<int>>()) theta = theta.with(a);
        }
        auto res = multilevel_sums(germ, box, theta, min_level, max_level, ensemble.size(),
                                   p.value("m", 2), cfg.workers);
        timer.stage("sewing");

        std::ostringstream csv;
        csv << "level,cauchy_lm,stderr\n";
        for (std::size_t i = 0; i < res.cauchy_lm.size(); ++i)
            csv << res.levels[i] << "," << fmt17(res.cauchy_lm[i].value) << ","
                << fmt17(res.cauchy_lm[i].stderr) << "\n";
        write_file_atomic(out / "sewing.csv", csv.str());

        double limit_abs_mean = 0.0;
        for (const auto& v : res.limit) limit_abs_mean += std::abs(v);
        limit_abs_mean /= res.limit.size();

        // direct oscillatory quadrature of the same ensemble
        std::vector<double> direct_abs(ensemble.size()), dist(ensemble.size());
        for (std::size_t k = 0; k < ensemble.size(); ++k) {
            const Complex d = occupation_fourier(ensemble.path(k), box, spec.z,
                                                 OscillationPolicy::Report);
            direct_abs[k] = std::abs(d);
            dist[k] = std::abs(res.limit[k] - d);
        }
        std::vector<double> lims(ensemble.size());
        for (std::size_t k = 0; k < ensemble.size(); ++k) lims[k] = std::abs(res.limit[k]);
        auto n_direct = lm_norm_jackknife<double>(direct_abs, 2);
        auto n_sewed = lm_norm_jackknife<double>(lims, 2);

        json theta_axes = json::array();
        for (int i = 0; i < 2; ++i)
            if (theta.contains(i)) theta_axes.push_back(i);
        result.summary = {{"theta", theta_axes},
                          {"fitted_rate", res.fitted_rate},
                          {"rate_is_infinite", res.rate_is_infinite},
                          {"limit_abs_mean", limit_abs_mean},
                          {"quadrature_l2", n_direct.value},
                          {"sewing_l2", n_sewed.value},
                          {"l2_distance", lm_norm<double>(dist, 2)}};
        write_file_atomic(out / "sewing.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode) {
            if (check.value("monotone", false))
                for (std::size_t i = 0; i + 1 < res.cauchy_lm.size(); ++i)
                    if (!(res.cauchy_lm[i + 1].value < res.cauchy_lm[i].value))
                        fail_check("cauchy differences not monotone");
            if (check.contains("max_rate") &&
                !(res.fitted_rate <= check.at("max_rate").get<double>()))
                fail_check("fitted rate above the ceiling");
            if (check.contains("quadrature_agreement_se")) {
                const double nse = check.at("quadrature_agreement_se").get<double>();
                const double se = std::sqrt(n_direct.stderr * n_direct.stderr +
                                            n_sewed.stderr * n_sewed.stderr);
                if (!(std::abs(n_direct.value - n_sewed.value) <= nse * se))
                    fail_check("sewing and quadrature norms disagree");
            }
        }
    } else if (cfg.experiment == "bdg") {
        const auto cells = p.value("cells", std::vector<int>{4, 8, 16});
        const int m = p.value("m", 4);
        const double bias = p.value("bias", 0.0);
        json rows = json::array();
        std::vector<double> ratios;
        for (int N : cells) {
            auto chk = bdg_check(
                sheet_increment_array(N, static_cast<std::size_t>(cfg.samples), cfg.seed, bias,
                                      [](double w) { return std::cos(w); }, cfg.workers),
                m);
            ratios.push_back(chk.ratio);
            rows.push_back({{"cells_per_axis", N},
                            {"lhs", chk.lhs.value},
                            {"rhs", chk.rhs.value},
                            {"ratio", chk.ratio},
                            {"ratio_stderr", chk.ratio_stderr}});
        }
        timer.stage("bdg");
        result.summary = {{"m", m}, {"bias", bias}, {"checks", rows}};
        write_file_atomic(out / "bdg.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode) {
            if (check.contains("max_spread")) {
                const double tol = check.at("max_spread").get<double>();
                for (double r : ratios)
                    if (std::abs(r - ratios.front()) > tol * ratios.front())
                        fail_check("ratio drifts across array sizes");
            }
            if (check.contains("min_growth") &&
                !(ratios.back() >= check.at("min_growth").get<double>() * ratios.front()))
                fail_check("biased ratio did not grow");
        }
    } else if (cfg.experiment == "occupation") {
        const auto model = model_from_json(p.value("model", json{{"kind", "brownian_sheet"}}));
        const Rect box = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {1.0, 1.0}})));
        const auto radii = p.value("radii", std::vector<double>{2, 4, 8, 16, 32, 64});
        const auto zeta = p.value("zeta", std::vector<double>{0.5, 0.5});
        const auto notion = notion_from_string(p.value("notion", "multiplicative"));
        const int m = p.value("m", 2);
        PathEnsemble ensemble(model, SampleGrid::dyadic(box, p.value("grid_level", 7)),
                              cfg.seed, static_cast<std::size_t>(cfg.samples),
                              model.kind == FieldKind::BrownianSheet
                                  ? SampleRoute::SheetIncrements
                                  : SampleRoute::Auto,
                              cfg.workers);
        timer.stage("sampling");
        auto fit = moment_decay_fit(ensemble, box, radii, m, cfg.seed, notion, zeta,
                                    cfg.workers);
        timer.stage("fit");

        // spectrum export on the fitted radii (component n=1 direction)
        if (model.n == 1 && p.value("export_spectrum", true)) {
            std::vector<std::vector<double>> zs;
            for (double r : radii) zs.push_back({r});
            auto spec = occupation_spectrum(ensemble, box, zs, cfg.workers);
            std::ostringstream csv;
            csv << "sample,z1,re,im\n";
            for (std::size_t k = 0; k < spec.values.size(); ++k)
                for (std::size_t j = 0; j < zs.size(); ++j)
                    csv << k << "," << fmt17(zs[j][0]) << ","
                        << fmt17(spec.values[k][j].real()) << ","
                        << fmt17(spec.values[k][j].imag()) << "\n";
            write_file_atomic(out / "spectrum.csv", csv.str());
        }
        timer.stage("export");
        result.summary = {{"kind", fit.kind},
                          {"exponent", fit.exponent},
                          {"band", fit.band},
                          {"theory_target", fit.theory_target},
                          {"n_samples", fit.n_samples},
                          {"resolution", fit.resolution},
                          {"quadrature_resolved", fit.quadrature_resolved},
                          {"noise_floor", fit.noise_floor}};
        write_file_atomic(out / "occupation_fit.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode) {
            if (check.contains("min_exponent") &&
                !(fit.exponent >= check.at("min_exponent").get<double>()))
                fail_check("decay exponent below the floor");
            if (check.contains("max_exponent") &&
                !(fit.exponent <= check.at("max_exponent").get<double>()))
                fail_check("decay exponent above the ceiling");
        }
    } else if (cfg.experiment == "localtime") {
        const auto model = model_from_json(p.value("model", json{{"kind", "brownian_sheet"}}));
        const Rect box = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {1.0, 1.0}})));
        const int grid_level = p.value("grid_level", 8);
        const int bins = p.value("bins", 256);

        // density + mass + occupation-times formula on one sample
        auto path = sample_exact(model, SampleGrid::dyadic(box, grid_level), cfg.seed, 0,
                                 model.kind == FieldKind::BrownianSheet
                                     ? SampleRoute::SheetIncrements
                                     : SampleRoute::Auto);
        auto win = auto_window(path, box);
        auto lt = local_time_density(path, box, win, bins, p.value("mollifier", 0.0));
        timer.stage("density");
        std::ostringstream csv;
        csv << "x,density\n";
        for (std::size_t b = 0; b < lt.density.size(); ++b)
            csv << fmt17(lt.x_min + (b + 0.5) * lt.bin_width) << "," << fmt17(lt.density[b])
                << "\n";
        write_file_atomic(out / "localtime_density.csv", csv.str());

        const double bump_c = p.value("bump_center", 0.2), bump_s = p.value("bump_scale", 0.3);
        auto f = [&](double x) {
            return std::exp(-0.5 * (x - bump_c) * (x - bump_c) / (bump_s * bump_s));
        };
        double lhs = 0.0;
        for (std::size_t b = 0; b < lt.density.size(); ++b)
            lhs += f(lt.x_min + (b + 0.5) * lt.bin_width) * lt.density[b] * lt.bin_width;
        double rhs = 0.0;
        {
            const auto& axes = path.grid.axes;
            const std::size_t n0 = axes[0].size(), n1 = axes[1].size();
            for (std::size_t i = 0; i < n0; ++i)
                for (std::size_t j = 0; j < n1; ++j) {
                    double wt = ((i == 0 || i + 1 == n0) ? 0.5 : 1.0) *
                                ((j == 0 || j + 1 == n1) ? 0.5 : 1.0);
                    wt *= box.volume() / ((n0 - 1.0) * (n1 - 1.0));
                    rhs += wt * f(path.value(i * n1 + j));
                }
        }
        timer.stage("occupation_formula");

        // Hoelder fit over an ensemble
        HolderFitSpec hspec;
        hspec.alpha = p.value("alpha", 0.3);
        hspec.gaps = p.value("gaps", std::vector<double>{0.125, 0.25, 0.5});
        hspec.m = p.value("m", 2);
        hspec.other_extent = p.value("other_extent", 0.5);
        hspec.base = Point{p.value("base", std::vector<double>{0.25, 0.25})[0],
                           p.value("base", std::vector<double>{0.25, 0.25})[1]};
        const double rmax = p.value("radii_max", 36.0), rstep = p.value("radii_step", 3.0);
        for (double r = 0.0; r <= rmax; r += rstep) hspec.radii.push_back(r);
        const auto zeta = p.value("zeta", std::vector<double>{0.5, 0.5});
        const auto notion = notion_from_string(p.value("notion", "multiplicative"));
        PathEnsemble ensemble(model, SampleGrid::dyadic(box, grid_level), cfg.seed,
                              static_cast<std::size_t>(cfg.samples),
                              model.kind == FieldKind::BrownianSheet
                                  ? SampleRoute::SheetIncrements
                                  : SampleRoute::Auto,
                              cfg.workers);
        auto fit = holder_time_fit(ensemble, hspec, notion, zeta, cfg.workers);
        timer.stage("holder_fit");

        result.summary = {{"mass", lt.total_mass()},
                          {"rect_volume", lt.rect_volume},
                          {"clipped_mass", lt.clipped_mass},
                          {"occupation_formula", {{"lhs", lhs}, {"rhs", rhs}}},
                          {"kind", fit.kind},
                          {"alpha", hspec.alpha},
                          {"per_axis_gamma", fit.per_axis_exponent},
                          {"per_axis_band", fit.per_axis_band},
                          {"theory_target", fit.theory_target},
                          {"n_samples", fit.n_samples},
                          {"resolution", fit.resolution}};
        write_file_atomic(out / "localtime_report.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode) {
            if (!(std::abs(lt.total_mass() - lt.rect_volume) <=
                  check.value("mass_tol", 1e-3) * lt.rect_volume))
                fail_check("local-time mass drifted");
            if (!(std::abs(lhs - rhs) <= check.value("occupation_tol", 0.02) * std::abs(rhs)))
                fail_check("occupation-times formula mismatch");
            const double floor = check.value("min_gamma", 0.5);
            for (std::size_t a = 0; a < fit.per_axis_exponent.size(); ++a)
                if (!(fit.per_axis_exponent[a] + fit.per_axis_band[a] >= floor))
                    fail_check("gamma below 1/2 on axis " + std::to_string(a));
        }
    } else if (cfg.experiment == "solve") {
        const Rect box = rect_from_json(p.value("box", json::array({{0.0, 0.0}, {1.0, 1.0}})));
        const json bj = p.value("b", json{{"kind", "linear"}, {"lambda", 1.0}});
        const std::string bkind = bj.value("kind", "linear");
        NonlinearitySpec b;
        if (bkind == "constant") {
            const double c = bj.value("c", 1.0);
            b = NonlinearitySpec::from_function([c](double) { return c; });
        } else if (bkind == "linear") {
            const double lambda = bj.value("lambda", 1.0);
            b = NonlinearitySpec::from_function([lambda](double y) { return lambda * y; });
        } else if (bkind == "sin") {
            const double amp = bj.value("amp", 1.0);
            b = NonlinearitySpec::from_function([amp](double y) { return amp * std::sin(y); });
        } else if (bkind == "band_limited") {
            b = NonlinearitySpec::band_limited(bj.value("rho", 2.0), bj.value("modes", 16),
                                               cfg.seed, bj.value("amp", 1.0));
        } else {
            throw std::invalid_argument("solve: unknown nonlinearity kind");
        }

        std::optional<FieldSample> w;
        AveragedFieldSpec fs;
        fs.level = p.value("level", 6);
        fs.x_min = p.value("x_min", -4.0);
        fs.x_max = p.value("x_max", 4.0);
        fs.bins = p.value("bins", 256);
        fs.route = p.value("route", "direct") == std::string("convolution")
                       ? AveragedFieldRoute::Convolution
                       : AveragedFieldRoute::Direct;
        if (p.contains("w") && !p.at("w").is_null()) {
            const auto wj = p.at("w");
            const auto wmodel = model_from_json(wj.value("model", json{{"kind", "brownian_sheet"}}));
            w = sample_exact(wmodel, SampleGrid::dyadic(box, fs.level), cfg.seed,
                             wj.value("sample_index", 0),
                             wmodel.kind == FieldKind::BrownianSheet
                                 ? SampleRoute::SheetIncrements
                                 : SampleRoute::Auto);
        }
        auto field = averaged_field(b, box, w, fs);
        timer.stage("averaged_field");

        PicardOptions opt;
        opt.tol = p.value("tol", 1e-10);
        opt.max_iter = p.value("max_iter", 80);
        opt.level = p.value("young_level", fs.level);
        opt.mode = p.value("mode", "young") == std::string("direct")
                       ? PicardOptions::Mode::DirectQuadrature
                       : PicardOptions::Mode::YoungField;
        opt.quadrature_order = p.value("order", 4);
        auto xi = GoursatBoundary::constant(p.value("x0", 1.0));
        auto sol = solve_picard(xi, field, opt,
                                opt.mode == PicardOptions::Mode::DirectQuadrature ? &b : nullptr,
                                w);
        timer.stage("picard");

        std::ostringstream csv;
        csv << "t1,t2,comp,y\n";
        const int n2 = field.nodes2();
        for (int i = 0; i < field.nodes1(); ++i)
            for (int j = 0; j < n2; ++j)
                csv << fmt17(sol.lattice.axes[0][i]) << "," << fmt17(sol.lattice.axes[1][j])
                    << ",0," << fmt17(sol.y[static_cast<std::size_t>(i) * n2 + j]) << "\n";
        write_file_atomic(out / "solution.csv", csv.str());

        result.summary = {{"iterations", sol.iterations},
                          {"converged", sol.converged},
                          {"updates", sol.update_log}};
        // optional series comparison for the linear problem
        if (bkind == "linear") {
            const double lambda = bj.value("lambda", 1.0), x0 = p.value("x0", 1.0);
            double worst = 0.0;
            for (int i = 0; i < field.nodes1(); i += 8)
                for (int j = 0; j < n2; j += 8) {
                    const double want = goursat_series(x0, lambda, sol.lattice.axes[0][i],
                                                       sol.lattice.axes[1][j]);
                    worst = std::max(
                        worst, std::abs(sol.y[static_cast<std::size_t>(i) * n2 + j] - want));
                }
            result.summary["series_deviation"] = worst;
            if (cfg.check_mode && check.contains("series_tol") &&
                !(worst <= check.at("series_tol").get<double>()))
                fail_check("linear Goursat solution misses the series");
        }
        if (p.contains("regularization")) {
            const auto rj = p.at("regularization");
            const auto zeta = rj.at("zeta").get<std::vector<double>>();
            auto rc = check_regularization_condition(rj.value("rho", 0.0), zeta,
                                                     rj.value("n", 1),
                                                     notion_from_string(rj.value(
                                                         "notion", "multiplicative")));
            result.summary["regularization"] = {{"satisfied", rc.satisfied},
                                                {"margin", rc.margin},
                                                {"binding", rc.binding}};
        }
        write_file_atomic(out / "picard_log.json", result.summary.dump(2) + "\n");
        if (cfg.check_mode && !sol.converged) fail_check("picard did not converge");
    } else {
        throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
    }

    timer.finish();
    write_file_atomic(out / "manifest.json", result.manifest.to_json().dump(2) + "\n");
    return result;
}

}  // namespace sheetsew
