// Command-line front end: ml, spectrum, manifold, solve, verify, counterexample.
#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fracmanifold/fracmanifold.hpp>
#include <fracmanifold/io.hpp>

namespace fm = fracmanifold;
using fm::cplx;
using fm::json;

namespace {

json matrix_json(const Eigen::MatrixXcd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(fm::complex_to_json(M(r, c)));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const Eigen::VectorXcd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(fm::complex_to_json(v[i]));
    return out;
}

void emit(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw fm::ValidationError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw fm::ValidationError("cannot write '" + path + "'");
    return out;
}

Eigen::VectorXcd parse_vector(const std::string& text, int dim, const std::string& field) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            vals.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw fm::ValidationError(field + ": '" + cell + "' is not a number");
        }
    }
    if (static_cast<int>(vals.size()) != dim)
        throw fm::ValidationError(field + ": expected " + std::to_string(dim) + " comma-separated values");
    Eigen::VectorXcd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = vals[i];
    return v;
}

void require_positive(double v, const std::string& name) {
    if (!(v > 0.0)) throw fm::ValidationError(name + ": must be positive");
}

struct MlArgs {
    double alpha = 0.5, beta = 1.0, mu = 0.0, re = 0.0, im = 0.0, tol = 1e-15;
    int deriv = 0, terms = 5;
    std::string method = "auto", out;
};

int run_ml(const MlArgs& a) {
    fm::MLParams p = a.mu > 0.0 ? fm::MLParams(a.alpha, a.beta, a.mu) : fm::MLParams(a.alpha, a.beta);
    try {
        p.validate();
    } catch (const fm::DomainError& e) {
        throw fm::ValidationError(std::string("--alpha/--mu: ") + e.what());
    }
    if (!(a.tol > 0.0)) throw fm::ValidationError("--tol: must be positive");
    if (a.terms < 1) throw fm::ValidationError("--terms: must be at least 1");
    if (a.deriv > 0 && a.method != "auto") throw fm::ValidationError("--deriv: only available with --method auto");
    const cplx z(a.re, a.im);
    fm::MLValue v;
    if (a.deriv > 0)
        v = fm::ml_deriv(p, z, a.deriv);
    else if (a.method == "series")
        v = fm::ml_series(p, z, a.tol);
    else if (a.method == "asymptotic")
        v = fm::ml_asymptotic(p, z, a.terms);
    else
        v = fm::ml_eval(p, z);
    emit({{"alpha", a.alpha},
          {"beta", a.beta},
          {"mu", p.mu},
          {"z", json::array({a.re, a.im})},
          {"derivative", a.deriv},
          {"value", json::array({v.value.real(), v.value.imag()})},
          {"method", fm::to_string(v.method)},
          {"abs_error_estimate", v.abs_error_estimate}},
         a.out);
    return 0;
}

int run_spectrum(const std::string& path, double delta, const std::string& out) {
    const auto sys = fm::load_system(path);
    double C = 0.0;
    if (!(delta > 0.0)) {
        const auto probe = fm::jordanize(sys.A, sys.alpha, 1.0, sys.jordan_blocks);
        C = fm::estimate_contraction_constant(sys.alpha, probe.coordinate_lambdas());
        delta = 1.0 / (3.0 * C);
    }
    const auto split = fm::jordanize(sys.A, sys.alpha, delta, sys.jordan_blocks);
    json eig = json::array();
    for (const auto& b : split.blocks)
        eig.push_back({{"lambda", json::array({b.lambda.real(), b.lambda.imag()})},
                       {"size", b.size},
                       {"arg", std::arg(b.lambda)},
                       {"classification", fm::to_string(b.kind)}});
    json j = {{"alpha", sys.alpha},
              {"threshold", 0.5 * sys.alpha * std::numbers::pi},
              {"eigenvalues", eig},
              {"k", split.k},
              {"d_u", split.d_u},
              {"d_s", split.d_s},
              {"delta", delta},
              {"T", matrix_json(split.T)},
              {"P", matrix_json(split.P)}};
    if (C > 0.0) j["C_est"] = C;
    emit(j, out);
    return 0;
}

struct ManifoldArgs {
    std::string system, out = "graph.csv", diagnostics_out;
    int samples = 21;
    int N = 1024;
    double T_horizon = 0.0;
    double radius_override = 0.0;
    double inflation = 1.0;
    int pairs = 100;
    bool diagnostics = false;
    std::uint64_t seed = 1;
};

int run_manifold(const ManifoldArgs& a) {
    const auto sys = fm::load_system(a.system);
    if (a.samples < 1) throw fm::ValidationError("--samples: must be at least 1");
    if (a.N < 2) throw fm::ValidationError("--N: must be at least 2");
    fm::LPOptions o;
    o.N = a.N;
    o.T_horizon = a.T_horizon;
    o.radius_override = a.radius_override;
    o.inflation = a.inflation;
    o.seed = a.seed;
    const auto setup = fm::prepare(sys, o);
    const auto xs = fm::stable_ball_samples(setup.split, setup.cfg.r, a.samples, a.seed, sys.is_real());
    const auto graph = fm::manifold_graph(*setup.op, xs);
    const auto pts = fm::pullback_manifold(graph, setup.split);

    Eigen::MatrixXcd all_x(static_cast<Eigen::Index>(pts.size()), sys.dim());
    Eigen::MatrixXcd all_s(static_cast<Eigen::Index>(pts.size()), setup.split.d_s + setup.split.d_u);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        all_x.row(i) = pts[i].transpose();
        all_s.row(i) << graph.samples[i].x_s.transpose(), graph.samples[i].w.transpose();
    }
    const fm::CsvColumns cs{"xs_", setup.split.d_s, !fm::effectively_real(all_s)};
    const fm::CsvColumns cw{"w_", setup.split.d_u, !fm::effectively_real(all_s)};
    const fm::CsvColumns cx{"x_", sys.dim(), !(sys.is_real() && fm::effectively_real(all_x))};
    auto csv = open_out(a.out);
    csv << "index";
    cs.header(csv);
    cw.header(csv);
    csv << ",iterations,residual";
    cx.header(csv);
    csv << '\n';
    double max_res = 0.0, max_quot = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& s = graph.samples[i];
        csv << i;
        cs.row(csv, s.x_s);
        cw.row(csv, s.w);
        csv << ',' << s.iterations << ',' << fm::fmt_num(s.residual);
        cx.row(csv, pts[i]);
        csv << '\n';
        max_res = std::max(max_res, s.residual);
        for (std::size_t k = 0; k < i; ++k) {
            const double dx = fm::max_norm(s.x_s - graph.samples[k].x_s);
            if (dx > 0.0) max_quot = std::max(max_quot, fm::max_norm(s.w - graph.samples[k].w) / dx);
        }
    }
    if (a.diagnostics || !a.diagnostics_out.empty()) {
        const auto ratios = fm::measure_contraction(*setup.op, a.pairs, a.seed, sys.is_real());
        const double measured = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
        const auto& c = setup.cfg;
        json d = {{"alpha", sys.alpha},
                  {"C_est", c.C_est},
                  {"delta", c.delta},
                  {"r_star", c.r_star},
                  {"r", c.r},
                  {"radius_overridden", a.radius_override > 0.0},
                  {"ml_sup", c.ml_sup},
                  {"T_horizon", c.T_horizon},
                  {"T_tail", c.T_tail},
                  {"N", c.N},
                  {"iter_tol", c.iter_tol},
                  {"retries", setup.retries},
                  {"measured_contraction_ratio", measured},
                  {"contraction_pairs", static_cast<int>(ratios.size())},
                  {"samples", static_cast<int>(pts.size())},
                  {"max_residual", max_res},
                  {"lipschitz_bound", graph.lipschitz_bound},
                  {"max_lipschitz_quotient", max_quot},
                  {"seed", a.seed}};
        emit(d, a.diagnostics_out);
    }
    return 0;
}

struct SolveArgs {
    std::string system, x0, out = "traj.csv", mesh = "graded";
    double T = 1.0;
    int N = 1024;
    double grading = 0.0;
};

int run_solve(const SolveArgs& a) {
    const auto sys = fm::load_system(a.system);
    require_positive(a.T, "--T");
    if (a.N < 2) throw fm::ValidationError("--N: must be at least 2");
    fm::SolverOptions so;
    so.mesh = a.mesh == "uniform" ? fm::MeshKind::uniform : fm::MeshKind::graded;
    so.grading = a.grading;
    const auto x0 = parse_vector(a.x0, sys.dim(), "--x0");
    const auto tr = fm::solve_caputo(sys, x0, a.T, a.N, so);
    const fm::CsvColumns cx{"x_", sys.dim(), !(sys.is_real() && fm::effectively_real(tr.states))};
    auto csv = open_out(a.out);
    csv << "t";
    cx.header(csv);
    csv << '\n';
    for (int n = 0; n < tr.nodes(); ++n) {
        csv << fm::fmt_num(tr.times[n]);
        cx.row(csv, tr.state(n));
        csv << '\n';
    }
    return 0;
}

struct VerifyArgs {
    std::string system, points, out;
    double T = 0.0;
    double shrink = 0.1;
    int N = 2048;
    double ball_factor = 5.0;
    double perturb = 0.0;
};

int run_verify(const VerifyArgs& a) {
    const auto sys = fm::load_system(a.system);
    if (!(a.shrink > 0.0 && a.shrink < 1.0)) throw fm::ValidationError("--shrink: must lie in (0, 1)");
    require_positive(a.ball_factor, "--ball-factor");
    if (a.N < 2) throw fm::ValidationError("--N: must be at least 2");
    double T = a.T;
    if (!(T > 0.0)) {
        // Long enough for the slowest stable linear mode to fall below shrink / 2.
        const auto rep = fm::check_hyperbolicity(sys.A, sys.alpha);
        T = 1e-3;
        for (const auto& e : rep.eigenvalues)
            if (e.kind == fm::Stability::stable)
                while (std::abs(fm::ml_eval(fm::MLParams(sys.alpha, 1.0), e.value * std::pow(T, sys.alpha)).value) >
                       0.5 * a.shrink)
                    T *= 1.05;
    }
    auto pts = fm::points_from_csv(fm::read_csv(a.points), sys.dim());
    fm::VerifyOptions vo;
    vo.N = a.N;
    vo.ball_factor = a.ball_factor;
    json rows = json::array();
    int decays = 0, escapes = 0, inconclusive = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::VectorXcd x = pts[i];
        if (a.perturb != 0.0) {
            // Shift along the first unstable eigenvector (original coordinates).
            const auto split = fm::jordanize(sys.A, sys.alpha, 1.0, sys.jordan_blocks);
            if (split.d_u > 0) {
                Eigen::VectorXcd dir = split.T.col(0);
                x += a.perturb * dir / fm::max_norm(dir);
            }
        }
        const auto v = fm::verify_manifold_point(sys, x, T, a.shrink, vo);
        decays += v.verdict == fm::Verdict::decays;
        escapes += v.verdict == fm::Verdict::escapes;
        inconclusive += v.verdict == fm::Verdict::inconclusive;
        json r = {{"index", static_cast<int>(i)},
                  {"x", vector_json(x)},
                  {"verdict", fm::to_string(v.verdict)},
                  {"final_ratio", v.final_ratio},
                  {"max_ratio", v.max_ratio}};
        if (v.verdict == fm::Verdict::escapes && std::isfinite(v.escape_time)) r["escape_time"] = v.escape_time;
        rows.push_back(r);
    }
    emit({{"T", T},
          {"shrink", a.shrink},
          {"N", a.N},
          {"perturbation", a.perturb},
          {"points", rows},
          {"summary", {{"decays", decays}, {"escapes", escapes}, {"inconclusive", inconclusive}}}},
         a.out);
    return 0;
}

int run_counterexample(double alpha, double lambda, double sigma1, const std::string& out) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw fm::ValidationError("--alpha: must lie in (0, 1)");
    require_positive(lambda, "--lambda");
    fm::CounterexampleOptions o;
    o.alpha = alpha;
    o.lambda = lambda;
    o.sigma1 = sigma1;
    const auto rep = fm::counterexample_report(o);
    auto div = [](const std::vector<fm::DivergenceRow>& rows) {
        json a = json::array();
        for (const auto& r : rows) a.push_back({{"t", r.t}, {"value", r.value}, {"bracket_ratio", r.bracket_ratio}});
        return a;
    };
    json gaps = json::array();
    for (const auto& g : rep.gaps) {
        json m = json::array();
        for (int i = 0; i < 2; ++i) m.push_back({g.entrywise_gap(i, 0), g.entrywise_gap(i, 1)});
        gaps.push_back({{"t", g.t}, {"entrywise_gap", m}});
    }
    json cross = json::array();
    for (const auto& [t, v] : rep.crosscheck) cross.push_back({{"t", t}, {"true_ratio_22", v}});
    emit({{"alpha", alpha},
          {"lambda", lambda},
          {"sigma1", sigma1},
          {"divergence",
           {{"analytic", {{"rows", div(rep.analytic)}, {"bracket_limit", rep.bracket_limit_analytic}}},
            {"solver", {{"rows", div(rep.solver)}, {"bracket_limit", rep.bracket_limit_solver}}}}},
          {"gaps", gaps},
          {"expected_gap_22", rep.expected_gap},
          {"gap_factor_22", fm::identity_gap_factor(alpha, lambda)},
          {"crosscheck", cross},
          {"verdict",
           {{"monotone_growth", rep.monotone_growth},
            {"exceeds_bound", rep.exceeds_bound},
            {"bracket_converges", rep.bracket_converges},
            {"gap_matches", rep.gap_matches},
            {"refutation_holds", rep.refutation_holds()}}}},
         out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stable manifolds of Caputo fractional systems"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    auto* ml = app.add_subcommand("ml", "Mittag-Leffler evaluation");
    auto* ml_eval = ml->add_subcommand("eval", "Evaluate E_{alpha,beta}(z) or its k-th derivative");
    ml->require_subcommand(1);
    MlArgs mla;
    ml_eval->add_option("--alpha", mla.alpha, "order in (0, 1]")->required();
    ml_eval->add_option("--beta", mla.beta, "second parameter");
    ml_eval->add_option("--re", mla.re, "real part of z");
    ml_eval->add_option("--im", mla.im, "imaginary part of z");
    ml_eval->add_option("--method", mla.method, "auto, series or asymptotic")
        ->check(CLI::IsMember({"auto", "series", "asymptotic"}));
    ml_eval->add_option("--mu", mla.mu, "sector angle (default 3 alpha pi / 4)");
    ml_eval->add_option("--tol", mla.tol, "series remainder bound");
    ml_eval->add_option("--terms", mla.terms, "asymptotic terms");
    ml_eval->add_option("--deriv", mla.deriv, "derivative order")->check(CLI::NonNegativeNumber);
    ml_eval->add_option("--out", mla.out, "output JSON (default stdout)");

    auto* spec = app.add_subcommand("spectrum", "Eigenvalues, classification and the transform T, P");
    std::string spec_sys, spec_out;
    double spec_delta = 0.0;
    spec->add_option("--system", spec_sys, "system JSON")->required();
    spec->add_option("--delta", spec_delta, "Jordan rescaling (default 1/(3 C_est))");
    spec->add_option("--out", spec_out, "output JSON (default stdout)");

    auto* man = app.add_subcommand("manifold", "Sample the local stable manifold");
    ManifoldArgs ma;
    man->add_option("--system", ma.system, "system JSON")->required();
    man->add_option("--samples", ma.samples, "number of samples in B(0, r)");
    man->add_option("--N", ma.N, "operator grid size");
    man->add_option("--T-horizon", ma.T_horizon, "operator horizon (default from the spectrum)");
    man->add_option("--radius-override", ma.radius_override, "sampling radius instead of r");
    man->add_option("--inflation", ma.inflation, "factor applied to the estimated contraction constant");
    man->add_option("--pairs", ma.pairs, "random pairs for the measured contraction ratio");
    man->add_option("--out", ma.out, "graph CSV");
    man->add_flag("--diagnostics", ma.diagnostics, "print diagnostics JSON to stdout");
    man->add_option("--diagnostics-out", ma.diagnostics_out, "write diagnostics JSON to a file");
    man->add_option("--seed", ma.seed, "seed for randomized sampling");

    auto* sol = app.add_subcommand("solve", "Integrate the system from x0");
    SolveArgs sa;
    sol->add_option("--system", sa.system, "system JSON")->required();
    sol->add_option("--x0", sa.x0, "initial state, comma separated")->required();
    sol->add_option("--T", sa.T, "final time");
    sol->add_option("--N", sa.N, "number of steps");
    sol->add_option("--mesh", sa.mesh, "graded or uniform")->check(CLI::IsMember({"graded", "uniform"}));
    sol->add_option("--grading", sa.grading, "grading exponent (default 1/alpha)");
    sol->add_option("--out", sa.out, "trajectory CSV");

    auto* ver = app.add_subcommand("verify", "Integrate manifold points and classify them");
    VerifyArgs va;
    ver->add_option("--system", va.system, "system JSON")->required();
    ver->add_option("--points", va.points, "CSV with x_0.. columns (e.g. manifold output)")->required();
    ver->add_option("--T", va.T, "final time (default: stable decay below shrink / 2)");
    ver->add_option("--shrink", va.shrink, "required ||phi(T)|| / ||x||");
    ver->add_option("--N", va.N, "solver steps");
    ver->add_option("--ball-factor", va.ball_factor, "escape ball radius in units of ||x||");
    ver->add_option("--perturb", va.perturb, "shift along the unstable direction before integrating");
    ver->add_option("--out", va.out, "output JSON (default stdout)");

    auto* ce = app.add_subcommand("counterexample", "Divergence and identity-gap report for the 2-D example");
    double ce_alpha = 0.5, ce_lambda = 2.0, ce_sigma = 0.05;
    std::string ce_out;
    ce->add_option("--alpha", ce_alpha, "order in (0, 1)");
    ce->add_option("--lambda", ce_lambda, "Jordan block eigenvalue for the gap table");
    ce->add_option("--sigma", ce_sigma, "stable initial value of the candidate trajectories");
    ce->add_option("--report", ce_out, "output JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (ml->parsed()) return run_ml(mla);
        if (spec->parsed()) return run_spectrum(spec_sys, spec_delta, spec_out);
        if (man->parsed()) return run_manifold(ma);
        if (sol->parsed()) return run_solve(sa);
        if (ver->parsed()) return run_verify(va);
        if (ce->parsed()) return run_counterexample(ce_alpha, ce_lambda, ce_sigma, ce_out);
    } catch (const fm::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fm::ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fm::Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
