// basinctl: batch front end over the conjugacy / control / triangular kernels.
// One command per process; JSON for structured artifacts, CSV for sequences.
// Violated certificates exit nonzero after printing a one-line error JSON that
// names the failed condition.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "basin/conjugacy.hpp"
#include "basin/serialize.hpp"

using namespace basin;
using nlohmann::json;
using C = std::complex<double>;
using R = RatC;

namespace {

[[noreturn]] void fail(const std::string& condition, json extra = json::object()) {
    extra["error"] = condition;
    std::cout << extra.dump() << "\n";
    std::exit(2);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("input-unreadable", {{"path", path}});
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail("input-parse-error", {{"path", path}, {"detail", e.what()}});
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail("output-unwritable", {{"path", path}});
    out << text;
}

void write_manifest(const std::string& out_prefix, const std::string& command, const json& flags) {
    json m{{"command", command}, {"flags", flags}};
    if (const char* threads = std::getenv("BASIN_THREADS")) m["threads"] = threads;
    write_text(out_prefix + ".manifest.json", m.dump(2) + "\n");
}

template <class S>
GermSequence<S> germ_from_json(const json& j) {
    GermSequence<S> f;
    f.d = j.at("d").get<int>();
    f.K = j.at("K").get<int>();
    f.decay.lambda = j.at("lambda").get<double>();
    f.decay.mu = j.at("mu").get<double>();
    if (j.contains("sigma")) coeff_from_json(j.at("sigma"), f.sigma);
    f.layers.resize(std::size_t(f.K));
    for (const auto& lj : j.at("layers")) {
        int k = lj.at("k").get<int>();
        if (k < 1 || k > f.K) fail("layer-degree-out-of-range", {{"k", k}});
        std::vector<HomogeneousMap<S>> head, cycle;
        for (const auto& pj : lj.at("head")) head.push_back(homogeneous_from_json<S>(pj, f.d));
        for (const auto& pj : lj.at("cycle")) cycle.push_back(homogeneous_from_json<S>(pj, f.d));
        f.layers[std::size_t(k - 1)] = EvPer<HomogeneousMap<S>>(std::move(head), std::move(cycle));
    }
    for (int k = 1; k <= f.K; ++k)
        if (f.layers[std::size_t(k - 1)].cycle.empty())
            f.layers[std::size_t(k - 1)] =
                EvPer<HomogeneousMap<S>>::constant(HomogeneousMap<S>(f.d, k));
    return f;
}

template <class S>
OrdReport run_ord(const GermSequence<S>& f, long horizon, const std::vector<double>& thetas) {
    std::vector<std::vector<double>> diags;
    for (long n = 0; n < horizon; ++n) {
        Mat<S> L = f.linear_at(n);
        std::vector<double> row;
        for (int i = 0; i < f.d; ++i) row.push_back(scalar_traits<S>::abs(L(i, i)));
        diags.push_back(std::move(row));
    }
    return check_ord(diags, f.decay.lambda, thetas);
}

json ord_to_json(const OrdReport& rep) {
    return {{"theta_grid", rep.theta_grid}, {"C_half", rep.C_half},     {"C_full", rep.C_full},
            {"consistent", rep.consistent}, {"witness_n", rep.witness_n}, {"witness_l", rep.witness_l},
            {"witness_left", rep.witness_left}};
}

template <class S>
void run_conjugate(const std::string& input, int K, long horizon, const std::string& out) {
    GermSequence<S> f = germ_from_json<S>(read_json_file(input));
    if (K > f.K) fail("truncation-exceeds-input", {{"K", K}, {"input_K", f.K}});
    OrdReport ord = run_ord(f, std::max<long>(2 * horizon, 32), {1.05, 1.25, 1.5, 2.0});
    if (!ord.consistent)
        fail("ord-violation", {{"witness_n", ord.witness_n}, {"witness_l", ord.witness_l}});
    int m0 = select_m0(f.decay.lambda, f.decay.mu);
    ConjugacyPair<S> pair = formal_conjugate(f, m0, K, horizon);

    json out_json{{"d", pair.d}, {"K", pair.K}, {"m0", pair.m0}, {"horizon", pair.horizon}};
    json gs = json::array(), hs = json::array();
    for (const auto& g : pair.g) gs.push_back(to_json(g));
    for (const auto& h : pair.h) hs.push_back(to_json(h));
    out_json["g"] = std::move(gs);
    out_json["h"] = std::move(hs);
    write_text(out + ".pair.json", out_json.dump(2) + "\n");

    std::ostringstream csv;
    csv << "n,k,residual_coeff_max\n";
    bool exact_clean = true;
    for (long n = 0; n < horizon; ++n) {
        Jet<S> r = conjugacy_residual(f.jet_at(n).truncated(K), pair.g[std::size_t(n)],
                                      pair.h[std::size_t(n)], pair.h[std::size_t(n) + 1], K);
        for (int k = 1; k <= K; ++k) {
            if (!r.part(k).is_zero()) exact_clean = false;
            csv << n << "," << k << ",";
            if (scalar_traits<S>::is_exact && r.part(k).is_zero())
                csv << "0";
            else
                csv << r.part(k).coeff_max();
            csv << "\n";
        }
    }
    write_text(out + ".residuals.csv", csv.str());
    if (scalar_traits<S>::is_exact && !exact_clean) fail("conjugacy-residual-nonzero");
}

template <class S>
void run_norm_bound(const std::string& input, int k, const std::string& out) {
    json j = read_json_file(input);
    std::vector<TriangularMatrix<S>> Ls;
    for (const auto& mj : j.at("matrices")) {
        Mat<S> m = mat_from_json<S>(mj);
        try {
            Ls.emplace_back(std::move(m));
        } catch (const std::exception& e) {
            fail("not-lower-triangular", {{"detail", e.what()}});
        }
    }
    if (Ls.empty()) fail("empty-cocycle");
    QuozCertificate cert = quoz_bound(Ls, k);
    json cj{{"k", cert.k},
            {"d", cert.d},
            {"N", cert.N},
            {"length", cert.length},
            {"rho", cert.rho},
            {"partition_max", cert.partition_max},
            {"explicit_bound", cert.explicit_bound},
            {"quotient_norm", cert.quotient_norm},
            {"holds", cert.holds}};
    write_text(out + ".certificate.json", cj.dump(2) + "\n");
    if (!cert.holds)
        fail("quoz-violation",
             {{"quotient_norm", cert.quotient_norm}, {"explicit_bound", cert.explicit_bound}});
}

std::vector<long> parse_schedule(const std::string& csv) {
    std::vector<long> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stol(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-autonomous conjugacies of contracting germs: batch computations"};
    app.require_subcommand(1);

    std::string input, out = "run", mode = "exact", schedule_csv, u0_csv;
    int K = 4, k = 2, K_trunc = 5, d = 2;
    long horizon = 30, n_max = 400, points = 100;
    double lambda = 0.5, mu = 4.0, tol = 1e-8, radius = 1.0;
    double attract = 1e-8, overflow = 1e150;
    std::uint64_t seed = 1;
    long trials = 100;
    double u0 = 0.0;

    auto* conj = app.add_subcommand("conjugate", "formal conjugacy of a germ sequence");
    conj->add_option("input", input)->required();
    conj->add_option("--K", K);
    conj->add_option("--horizon", horizon);
    conj->add_option("--mode", mode)->check(CLI::IsMember({"exact", "float"}));
    conj->add_option("--out", out);

    auto* ord = app.add_subcommand("ord-check", "diagonal decay condition audit");
    ord->add_option("input", input)->required();
    ord->add_option("--horizon", horizon);
    ord->add_option("--out", out);

    auto* ctrl = app.add_subcommand("control-solve", "subexponential linear control solve");
    ctrl->add_option("input", input)->required();
    ctrl->add_option("--horizon", horizon);
    ctrl->add_option("--tol", tol);
    ctrl->add_option("--mode", mode)->check(CLI::IsMember({"exact", "float"}));
    ctrl->add_option("--out", out);

    auto* nb = app.add_subcommand("norm-bound", "quotient-norm certificate for a cocycle");
    nb->add_option("input", input)->required();
    nb->add_option("--k", k);
    nb->add_option("--mode", mode)->check(CLI::IsMember({"exact", "float"}));
    nb->add_option("--out", out);

    auto* svil = app.add_subcommand("svil-check", "randomized representation-formula audit");
    svil->add_option("--trials", trials);
    svil->add_option("--seed", seed);
    svil->add_option("--out", out);

    auto* spec = app.add_subcommand("spectral", "power-iteration bound for the truncation operator");
    spec->add_option("--d", d);
    spec->add_option("--lambda", lambda);
    spec->add_option("--mu", mu);
    spec->add_option("--k", k);
    spec->add_option("--K-trunc", K_trunc);
    spec->add_option("--horizon", horizon);
    spec->add_option("--out", out);

    auto* tri = app.add_subcommand("triangularize", "unitary triangularization of a cocycle");
    tri->add_option("input", input)->required();
    tri->add_option("--out", out);

    auto* bs = app.add_subcommand("basin-sample", "escape/attraction sampling of a triangular rule");
    bs->add_option("input", input)->required();
    bs->add_option("--points", points);
    bs->add_option("--radius", radius);
    bs->add_option("--n-max", n_max);
    bs->add_option("--seed", seed);
    bs->add_option("--attract-threshold", attract);
    bs->add_option("--overflow", overflow);
    bs->add_option("--out", out);

    auto* ce = app.add_subcommand("counterexample", "switching-schedule coefficient recursion");
    ce->add_option("--schedule", schedule_csv)->required();
    ce->add_option("--horizon", horizon);
    ce->add_option("--u0", u0_csv);
    ce->add_option("--out", out);

    auto* r12 = app.add_subcommand("remark12", "halving / affine-doubling switching system");
    r12->add_option("--schedule", schedule_csv)->required();
    r12->add_option("--u0", u0);
    r12->add_option("--out", out);

    CLI11_PARSE(app, argc, argv);

    if (conj->parsed()) {
        write_manifest(out, "conjugate",
                       {{"input", input}, {"K", K}, {"horizon", horizon}, {"mode", mode}});
        if (mode == "exact")
            run_conjugate<R>(input, K, horizon, out);
        else
            run_conjugate<C>(input, K, horizon, out);
    } else if (ord->parsed()) {
        write_manifest(out, "ord-check", {{"input", input}, {"horizon", horizon}});
        GermSequence<R> f = germ_from_json<R>(read_json_file(input));
        OrdReport rep = run_ord(f, horizon, {1.05, 1.25, 1.5, 2.0});
        write_text(out + ".ord.json", ord_to_json(rep).dump(2) + "\n");
        if (!rep.consistent)
            fail("ord-violation", {{"witness_n", rep.witness_n}, {"witness_l", rep.witness_l}});
    } else if (ctrl->parsed()) {
        write_manifest(out, "control-solve",
                       {{"input", input}, {"horizon", horizon}, {"tol", tol}, {"mode", mode}});
        json j = read_json_file(input);
        auto load = [&](auto scalar_tag) {
            using S = decltype(scalar_tag);
            std::vector<Mat<S>> Ah, Ac;
            for (const auto& mj : j.at("A").at("head")) Ah.push_back(mat_from_json<S>(mj));
            for (const auto& mj : j.at("A").at("cycle")) Ac.push_back(mat_from_json<S>(mj));
            CocycleRule<S> A(EvPer<Mat<S>>(std::move(Ah), std::move(Ac)));
            std::vector<Vec<S>> bh, bc;
            auto vec_from = [&](const json& vj) {
                Vec<S> v;
                for (const auto& cj : vj) {
                    S c;
                    coeff_from_json(cj, c);
                    v.push_back(c);
                }
                return v;
            };
            for (const auto& vj : j.at("b").at("head")) bh.push_back(vec_from(vj));
            for (const auto& vj : j.at("b").at("cycle")) bc.push_back(vec_from(vj));
            VecRule<S> b(std::move(bh), std::move(bc));

            ControlSolution<S> sol;
            std::vector<Vec<S>> control;
            try {
                if (j.contains("V")) {
                    std::vector<int> V = j.at("V").get<std::vector<int>>();
                    auto cs = solve_with_control(A, b, V, horizon);
                    sol = std::move(cs.u);
                    control = std::move(cs.v);
                } else if (j.contains("decay") && !scalar_traits<S>::is_exact) {
                    DecayData decay;
                    for (const auto& row : j.at("decay").at("theta_table"))
                        decay.theta_table.push_back({row.at("theta").get<double>(),
                                                     row.at("C").get<double>(),
                                                     row.at("alpha").get<double>()});
                    sol = solve_subexp_series(A, b, decay, horizon, tol);
                } else {
                    sol = solve_subexp_exact(A, b, horizon);
                }
            } catch (const std::exception& e) {
                fail("subexponential-solve-failed", {{"detail", e.what()}});
            }
            std::ostringstream csv;
            csv << "n";
            for (int i = 0; i < A.dim(); ++i) csv << ",re_" << i << ",im_" << i;
            csv << ",tail_bound\n";
            for (long n = 0; n <= horizon; ++n) {
                csv << n;
                for (int i = 0; i < A.dim(); ++i) {
                    C z = scalar_traits<S>::to_c(sol.u[std::size_t(n)][std::size_t(i)]);
                    csv << "," << z.real() << "," << z.imag();
                }
                csv << "," << sol.tail_bound[std::size_t(n)] << "\n";
            }
            write_text(out + ".u.csv", csv.str());
            std::ostringstream res;
            res << "n,residual_inf\n";
            for (long n = 0; n < horizon; ++n) {
                Vec<S> r = A.at(n).apply(sol.u[std::size_t(n)]);
                for (int i = 0; i < A.dim(); ++i) {
                    r[std::size_t(i)] = sol.u[std::size_t(n + 1)][std::size_t(i)] - r[std::size_t(i)] -
                                        b.at(n)[std::size_t(i)];
                    if (!control.empty()) r[std::size_t(i)] -= control[std::size_t(n)][std::size_t(i)];
                }
                res << n << "," << vec_norm_inf(r) << "\n";
            }
            write_text(out + ".residuals.csv", res.str());
        };
        if (mode == "exact")
            load(R{});
        else
            load(C{});
    } else if (nb->parsed()) {
        write_manifest(out, "norm-bound", {{"input", input}, {"k", k}, {"mode", mode}});
        if (mode == "exact")
            run_norm_bound<R>(input, k, out);
        else
            run_norm_bound<C>(input, k, out);
    } else if (svil->parsed()) {
        write_manifest(out, "svil-check", {{"trials", trials}, {"seed", seed}});
        std::mt19937_64 rng(seed);
        auto rat = [&](long lo, long hi) { return long(rng() % std::uint64_t(hi - lo + 1)) + lo; };
        long mismatches = 0;
        for (long t = 0; t < trials; ++t) {
            int dd = int(rat(2, 3)), kk = int(rat(2, 3)), ll = int(rat(1, 4));
            std::vector<TriangularMatrix<R>> Ls;
            Mat<R> prod = Mat<R>::identity(dd);
            for (int n = 0; n < ll; ++n) {
                Mat<R> m(dd);
                for (int i = 0; i < dd; ++i) {
                    long p = rat(1, 3) * (rat(0, 1) ? 1 : -1);
                    m(i, i) = R::from_ratio(p, rat(1, 4));
                    for (int jj = 0; jj < i; ++jj) m(i, jj) = R::from_ratio(rat(-3, 3), rat(2, 5));
                }
                prod = m * prod;
                Ls.emplace_back(m);
            }
            HomogeneousMap<R> p(dd, kk);
            for (const auto& a : multi_indices(dd, kk))
                for (int i = 1; i <= dd; ++i) p.set(a, i, R::from_ratio(rat(-3, 3), rat(2, 5)));
            if (!(svil_expansion(Ls, p) == apply_conjugacy(prod, p))) ++mismatches;
        }
        write_text(out + ".svil.json",
                   json{{"trials", trials}, {"mismatches", mismatches}}.dump(2) + "\n");
        if (mismatches > 0) fail("svil-mismatch", {{"mismatches", mismatches}});
    } else if (spec->parsed()) {
        write_manifest(out, "spectral",
                       {{"d", d}, {"lambda", lambda}, {"mu", mu}, {"k", k},
                        {"K_trunc", K_trunc}, {"horizon", horizon}});
        Mat<C> L(d);
        for (int i = 0; i < d; ++i) L(i, i) = lambda;
        SpectralReport rep = spectral_bound(EvPer<Mat<C>>::constant(L), k, K_trunc, horizon, lambda, mu);
        write_text(out + ".spectral.json",
                   json{{"rho_estimate", rep.rho_estimate},
                        {"analytic_bound", rep.analytic_bound},
                        {"within_bound", rep.within_bound}}
                           .dump(2) +
                       "\n");
        if (!rep.within_bound)
            fail("spectral-bound-violation",
                 {{"rho_estimate", rep.rho_estimate}, {"analytic_bound", rep.analytic_bound}});
    } else if (tri->parsed()) {
        write_manifest(out, "triangularize", {{"input", input}});
        json j = read_json_file(input);
        std::vector<Mat<C>> M;
        for (const auto& mj : j.at("matrices")) M.push_back(mat_from_json<C>(mj));
        if (M.empty()) fail("empty-cocycle");
        Mat<C> U0 = j.contains("U0") ? mat_from_json<C>(j.at("U0"))
                                     : Mat<C>::identity(M[0].size());
        TriangularizedCocycle t;
        try {
            t = cocycle_triangularize(M, U0);
        } catch (const std::exception& e) {
            fail("singular-cocycle-factor", {{"detail", e.what()}});
        }
        double defect = 0.0;
        for (const auto& Un : t.U)
            defect = std::max(defect, op_norm_inf(Un * adjoint(Un) - Mat<C>::identity(Un.size())));
        json oj{{"unitarity_defect", defect}};
        json Ls = json::array(), Us = json::array();
        for (const auto& Ln : t.L) Ls.push_back(to_json(Ln));
        for (const auto& Un : t.U) Us.push_back(to_json(Un));
        oj["L"] = std::move(Ls);
        oj["U"] = std::move(Us);
        write_text(out + ".triangularized.json", oj.dump(2) + "\n");
        if (defect > 1e-12) fail("unitarity-defect", {{"defect", defect}});
    } else if (bs->parsed()) {
        write_manifest(out, "basin-sample",
                       {{"input", input}, {"points", points}, {"radius", radius},
                        {"n_max", n_max}, {"seed", seed},
                        {"attract_threshold", attract}, {"overflow", overflow}});
        json j = read_json_file(input);
        const int dd = j.at("d").get<int>();
        std::vector<SpecialTriangularAuto<C>> head, cycle;
        try {
            for (const auto& gj : j.at("head"))
                head.emplace_back(jet_from_json<C>(gj));
            for (const auto& gj : j.at("cycle"))
                cycle.emplace_back(jet_from_json<C>(gj));
        } catch (const std::exception& e) {
            fail("not-special-triangular", {{"detail", e.what()}});
        }
        if (cycle.empty()) fail("empty-rule");
        EvPer<SpecialTriangularAuto<C>> rule(std::move(head), std::move(cycle));
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
        std::uniform_real_distribution<double> rad(0.0, radius);
        std::ostringstream csv;
        csv << "point";
        for (int i = 0; i < dd; ++i) csv << ",re_" << i << ",im_" << i;
        csv << ",steps_to_threshold,final_norm\n";
        for (long t = 0; t < points; ++t) {
            Vec<C> z0(static_cast<std::size_t>(dd));
            double r = rad(rng);
            for (int i = 0; i < dd; ++i) z0[std::size_t(i)] = std::polar(r, ang(rng));
            OrbitReport rep = orbit(rule, z0, n_max, attract, overflow);
            csv << t;
            for (int i = 0; i < dd; ++i)
                csv << "," << z0[std::size_t(i)].real() << "," << z0[std::size_t(i)].imag();
            csv << "," << (rep.overflowed ? -1 : rep.first_below) << ","
                << vec_norm_inf(rep.trajectory.back()) << "\n";
        }
        write_text(out + ".orbits.csv", csv.str());
    } else if (ce->parsed()) {
        std::vector<long> schedule = parse_schedule(schedule_csv);
        write_manifest(out, "counterexample",
                       {{"schedule", schedule}, {"horizon", horizon}, {"u0", u0_csv}});
        std::vector<mpq_class> grid;
        if (u0_csv.empty()) {
            grid.emplace_back(0);
        } else {
            std::stringstream ss(u0_csv);
            std::string tok;
            while (std::getline(ss, tok, ',')) grid.push_back(rational_from_string(tok));
        }
        Counterexample4Report rep;
        try {
            rep = counterexample_section4(schedule, horizon, grid);
        } catch (const std::exception& e) {
            fail("bad-schedule", {{"detail", e.what()}});
        }
        std::ostringstream csv;
        csv << "start,n,abs_u\n";
        for (std::size_t s = 0; s < rep.u_abs.size(); ++s)
            for (std::size_t n = 0; n < rep.u_abs[s].size(); ++n)
                csv << s << "," << n << "," << rep.u_abs[s][n] << "\n";
        write_text(out + ".u.csv", csv.str());
        json verdict{{"all_growth_ok", rep.all_growth_ok},
                     {"all_non_subexponential", rep.all_non_subexponential}};
        write_text(out + ".verdict.json", verdict.dump(2) + "\n");
        if (!rep.all_growth_ok) fail("switch-growth-violation");
    } else if (r12->parsed()) {
        std::vector<long> schedule = parse_schedule(schedule_csv);
        write_manifest(out, "remark12", {{"schedule", schedule}, {"u0", u0}});
        Remark12Report rep;
        try {
            rep = remark12_demo(schedule, u0);
        } catch (const std::exception& e) {
            fail("bad-schedule", {{"detail", e.what()}});
        }
        write_text(out + ".remark12.json",
                   json{{"switch_values", rep.switch_values},
                        {"doubling_ratio", rep.doubling_ratio},
                        {"doubling_exact", rep.doubling_exact}}
                           .dump(2) +
                       "\n");
        if (!rep.doubling_exact) fail("doubling-growth-mismatch");
    }
    return 0;
}
