#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "basin/conjugacy.hpp"

using namespace basin;
using C = std::complex<double>;
using R = RatC;

namespace {

struct Lcg {
    std::uint64_t s;
    explicit Lcg(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() { return s = s * 6364136223846793005ULL + 1442695040888963407ULL; }
    long range(long lo, long hi) { return lo + long(next() % std::uint64_t(hi - lo + 1)); }
    R rat() { return R::from_ratio(range(-3, 3), range(2, 5)); }
};

// d=1 Koenigs model f(z) = z/2 + z^2
GermSequence<R> koenigs_input(int K) {
    GermSequence<R> f;
    f.d = 1;
    f.K = K;
    HomogeneousMap<R> lin(1, 1), quad(1, 2);
    lin.set({1}, 1, R::from_ratio(1, 2));
    quad.set({2}, 1, R(1));
    f.layers.push_back(EvPer<HomogeneousMap<R>>::constant(lin));
    f.layers.push_back(EvPer<HomogeneousMap<R>>::constant(quad));
    for (int k = 3; k <= K; ++k)
        f.layers.push_back(EvPer<HomogeneousMap<R>>::constant(HomogeneousMap<R>(1, k)));
    f.decay.lambda = 0.5;
    f.decay.mu = 2.0;
    return f;
}

// d=2 instance with period-2 linear parts, diagonal moduli (1/2,1/4)/(1/2,1/3)
GermSequence<R> d2_input(Lcg& rng, int K) {
    GermSequence<R> f;
    f.d = 2;
    f.K = K;
    HomogeneousMap<R> l0(2, 1), l1(2, 1);
    l0.set({1, 0}, 1, R::from_ratio(1, 2));
    l0.set({1, 0}, 2, R::from_ratio(1, 5));
    l0.set({0, 1}, 2, R::from_ratio(1, 4));
    l1.set({1, 0}, 1, R::from_ratio(-1, 2));
    l1.set({1, 0}, 2, R::from_ratio(1, 3));
    l1.set({0, 1}, 2, R::from_ratio(1, 3));
    f.layers.push_back(EvPer<HomogeneousMap<R>>({}, {l0, l1}));
    for (int k = 2; k <= K; ++k) {
        HomogeneousMap<R> a(2, k), b(2, k);
        for (const auto& al : multi_indices(2, k))
            for (int i = 1; i <= 2; ++i) {
                a.set(al, i, rng.rat());
                b.set(al, i, rng.rat());
            }
        f.layers.push_back(EvPer<HomogeneousMap<R>>({}, {a, b}));
    }
    f.decay.lambda = 0.5;
    f.decay.mu = 4.0;
    return f;
}

// diagonal modulus schedule of the switching counterexample
std::vector<std::vector<double>> section4_diags(const std::vector<long>& schedule, long horizon) {
    auto is_add = [&](long n) {
        long i = 0;
        while (i < long(schedule.size()) && schedule[std::size_t(i)] <= n) ++i;
        return i == 0 || (i - 1) % 2 == 0;
    };
    std::vector<std::vector<double>> diags;
    for (long n = 0; n < horizon; ++n) {
        if (is_add(n))
            diags.push_back({0.25, 0.5});
        else
            diags.push_back({0.5, 0.25});
    }
    return diags;
}

bool residuals_zero(const GermSequence<R>& f, const ConjugacyPair<R>& pair, long N, int K) {
    for (long n = 0; n < N; ++n) {
        Jet<R> r = conjugacy_residual(f.jet_at(n).truncated(K), pair.g[std::size_t(n)],
                                      pair.h[std::size_t(n)], pair.h[std::size_t(n) + 1], K);
        if (!r.is_zero()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("degree cutoff selection") {
    CHECK(select_m0(0.5, 4.0) == 2);
    CHECK(select_m0(0.5, 1.5) == 1);  // lambda^2 mu < 1: linearizable
    int m0 = select_m0(0.9, 2.0);
    CHECK(std::pow(0.9, m0 + 1) * 2.0 < 1.0);
    CHECK(std::pow(0.9, m0) * 2.0 >= 1.0);  // minimality
}

TEST_CASE("diagonal decay audit: constant diagonals are consistent") {
    std::vector<std::vector<double>> diags(64, {0.5, 0.25});
    OrdReport rep = check_ord(diags, 0.5, {1.1, 1.5, 2.0});
    CHECK(rep.consistent);
    // left side is exactly (1/2)^l: required constant 1 at every theta
    for (double cf : rep.C_full) CHECK(cf == doctest::Approx(1.0));
}

TEST_CASE("diagonal decay audit: switching schedule is violated") {
    OrdReport rep = check_ord(section4_diags({1, 3, 9, 27, 81}, 250), 0.5, {1.05, 1.25, 1.5, 2.0});
    CHECK(!rep.consistent);
    CHECK(rep.witness_left == 1.0);  // the (1/2)^l 2^l = 1 mechanism, exactly
    CHECK(rep.witness_n >= 1);
}

TEST_CASE("diagonal decay audit: one dimension is always consistent") {
    std::vector<std::vector<double>> diags;
    for (long n = 0; n < 48; ++n) diags.push_back({n % 2 == 0 ? 0.5 : 0.3});
    CHECK(check_ord(diags, 0.5, {1.1, 2.0}).consistent);
}

TEST_CASE("formal conjugacy: Koenigs coefficients") {
    GermSequence<R> f = koenigs_input(3);
    ConjugacyPair<R> pair = formal_conjugate(f, 1, 3, 12);
    // c2 = 1/(a - a^2) = 4 at a = 1/2
    CHECK(pair.h[0].part(2).coeff({2}, 1) == R(4));
    CHECK(residuals_zero(f, pair, 12, 3));
    for (long n = 0; n < 12; ++n) {
        CHECK(pair.g[std::size_t(n)].part(1).coeff({1}, 1) == R::from_ratio(1, 2));
        CHECK(pair.g[std::size_t(n)].part(2).is_zero());
        CHECK(pair.g[std::size_t(n)].part(3).is_zero());
    }
}

TEST_CASE("formal conjugacy: linear input gives identity conjugation") {
    GermSequence<R> f = koenigs_input(3);
    f.layers[1] = EvPer<HomogeneousMap<R>>::constant(HomogeneousMap<R>(1, 2));
    ConjugacyPair<R> pair = formal_conjugate(f, 1, 3, 10);
    for (const auto& h : pair.h) CHECK(h == Jet<R>::identity(1, 3));
    for (long n = 0; n < 10; ++n) CHECK(pair.g[std::size_t(n)] == f.jet_at(n).truncated(3));
}

TEST_CASE("formal conjugacy: exact residuals and normal form shape, d=2") {
    Lcg rng(3);
    GermSequence<R> f = d2_input(rng, 4);
    ConjugacyPair<R> pair = formal_conjugate(f, 2, 4, 30);
    CHECK(residuals_zero(f, pair, 30, 4));
    for (long n = 0; n < 30; ++n) {
        const Jet<R>& g = pair.g[std::size_t(n)];
        CHECK(g.part(1) == f.layers[0].at(n));
        if (!g.part(2).is_zero())
            CHECK(triangularity(g.part(2)) == Triangularity::strictly_triangular);
        CHECK(g.part(3).is_zero());
        CHECK(g.part(4).is_zero());
        CHECK(pair.h[std::size_t(n)].linear_part() == Mat<R>::identity(2));
    }
    // solution layers are eventually periodic, hence bounded: the growth fit
    // over a long window must come out subexponential
    long span = 64;
    for (int k = 2; k <= 4; ++k) {
        std::vector<double> hn;
        for (long n = 0; n < span; ++n)
            hn.push_back(pair.h_layers[std::size_t(k - 2)].at(n).coeff_max());
        CHECK(subexponential_test(hn).is_subexp_consistent);
    }
}

TEST_CASE("rescaling scales parts by theta^{(1-k)n+1}") {
    Lcg rng(9);
    GermSequence<R> f = d2_input(rng, 3);
    R theta = R(2);
    GermSequence<R> ft = rescale(f, theta);
    // k=1: factor theta at every n
    CHECK(ft.jet_at(0).part(1) == f.jet_at(0).part(1).scaled(R(2)));
    CHECK(ft.jet_at(5).part(1) == f.jet_at(5).part(1).scaled(R(2)));
    // k=2: factor 2 at n=0, factor 2^0 = 1 at n=1
    CHECK(ft.jet_at(0).part(2) == f.jet_at(0).part(2).scaled(R(2)));
    CHECK(ft.jet_at(1).part(2) == f.jet_at(1).part(2));
    // k=3, n=2: factor 2^{-3}
    CHECK(ft.jet_at(2).part(3) == f.jet_at(2).part(3).scaled(R::from_ratio(1, 8)));
}

TEST_CASE("rescaled sequences conjugate with zero residuals") {
    Lcg rng(15);
    GermSequence<R> f = d2_input(rng, 4);
    GermSequence<R> ft = rescale(f, R::from_ratio(5, 4));
    ConjugacyPair<R> pair = formal_conjugate(ft, 2, 4, 12);
    CHECK(residuals_zero(ft, pair, 12, 4));
}

TEST_CASE("block composition") {
    Lcg rng(21);
    GermSequence<R> f = d2_input(rng, 3);
    GermSequence<R> same = block_sequence(f, 1);
    CHECK(same.jet_at(3) == f.jet_at(3));

    GermSequence<R> blocked = block_sequence(f, 2);
    CHECK(blocked.linear_at(0) == f.linear_at(1) * f.linear_at(0));
    CHECK(blocked.linear_at(1) == f.linear_at(3) * f.linear_at(2));
    CHECK(blocked.jet_at(0) == compose_jets(f.jet_at(1), f.jet_at(0), 3));
    CHECK(blocked.decay.lambda == doctest::Approx(0.25));
    // blocked linear norms contract like lambda^2
    for (long n = 0; n < 6; ++n)
        CHECK(op_norm_inf(blocked.linear_at(n)) <= 2.0 * 0.25 + 1e-12);
}

TEST_CASE("higher-degree extension and residual order") {
    GermSequence<R> f = koenigs_input(2);
    ConjugacyPair<R> pair = formal_conjugate(f, 1, 2, 10);
    ConjugacyPair<R> ext = extend_conjugacy(f, pair, 6);
    CHECK(ext.K == 6);
    // the extension leaves the low-degree layers untouched
    CHECK(ext.h[0].part(2) == pair.h[0].part(2));
    // residual vanishes through degree 6 as a jet
    CHECK(residuals_zero(f, ext, 10, 6));
    GermResidualReport rep = germ_residual_order(f, ext, {0.1, 0.05, 0.025, 0.0125});
    CHECK(rep.slope >= 6.5);
}

TEST_CASE("identical sequences are conjugated by the identity") {
    GermSequence<R> f = koenigs_input(3);
    ConjugacyPair<R> id;
    id.d = 1;
    id.K = 3;
    id.m0 = 1;
    id.horizon = 6;
    for (long n = 0; n < 6; ++n) id.g.push_back(f.jet_at(n).truncated(3));
    for (long n = 0; n <= 6; ++n) id.h.push_back(Jet<R>::identity(1, 3));
    for (long n = 0; n < 6; ++n) {
        Jet<R> r = conjugacy_residual(f.jet_at(n).truncated(3), id.g[std::size_t(n)],
                                      id.h[std::size_t(n)], id.h[std::size_t(n) + 1], 3);
        CHECK(r.is_zero());
    }
}

TEST_CASE("spectral bound of the truncation operator") {
    Mat<C> L1(1);
    L1(0, 0) = 0.5;
    SpectralReport r1 = spectral_bound(EvPer<Mat<C>>::constant(L1), 2, 5, 4, 0.5, 2.0);
    CHECK(r1.rho_estimate == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(r1.analytic_bound == doctest::Approx(0.25));
    CHECK(r1.within_bound);

    // lambda-homothety in d=2 with mu = 1/lambda: bound lambda^k, attained
    Mat<C> L2(2);
    L2(0, 0) = 0.6;
    L2(1, 1) = 0.6;
    SpectralReport r2 = spectral_bound(EvPer<Mat<C>>::constant(L2), 2, 5, 3, 0.6, 1.0 / 0.6);
    CHECK(r2.within_bound);
    CHECK(r2.rho_estimate == doctest::Approx(0.36).epsilon(1e-8));

    Mat<C> L3(1);
    L3(0, 0) = 0.3;
    SpectralReport r3 = spectral_bound(EvPer<Mat<C>>::constant(L3), 6, 8, 3, 0.3, 2.0);
    CHECK(r3.rho_estimate < 0.01);
}

TEST_CASE("cocycle triangularization") {
    // already lower triangular input: |diag| is reproduced
    std::vector<Mat<C>> M;
    Mat<C> m(2);
    m(0, 0) = C(0.5);
    m(1, 0) = C(0.3, 0.1);
    m(1, 1) = C(0.0, 0.25);
    for (int n = 0; n < 6; ++n) M.push_back(m);
    TriangularizedCocycle t = cocycle_triangularize(M, Mat<C>::identity(2));
    for (const auto& L : t.L) {
        CHECK(std::abs(std::abs(L(0, 0)) - 0.5) < 1e-12);
        CHECK(std::abs(std::abs(L(1, 1)) - 0.25) < 1e-12);
        CHECK(L(0, 1) == C(0.0));
    }

    // the swap matrix: first step gives |diag| = (1,1)
    Mat<C> swap(2);
    swap(0, 1) = C(1.0);
    swap(1, 0) = C(1.0);
    TriangularizedCocycle ts = cocycle_triangularize({swap}, Mat<C>::identity(2));
    CHECK(std::abs(std::abs(ts.L[0](0, 0)) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(ts.L[0](1, 1)) - 1.0) < 1e-12);

    // |diag| does not depend on the phase gauge of the initial unitary:
    // U0 -> D U0 with D diagonal unitary gives U_n -> D U_n, L_n -> D L_n D*
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<Mat<C>> rand_cocycle;
    for (int n = 0; n < 20; ++n) {
        Mat<C> r(3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = C(U(rng), U(rng));
        for (int i = 0; i < 3; ++i) r(i, i) += C(2.0);
        rand_cocycle.push_back(r);
    }
    Mat<C> base(3);
    base(0, 0) = C(0.6);
    base(0, 1) = C(0.8);
    base(1, 0) = C(-0.8);
    base(1, 1) = C(0.6);
    base(2, 2) = C(0.0, 1.0);
    Mat<C> D(3);
    D(0, 0) = std::polar(1.0, 0.7);
    D(1, 1) = std::polar(1.0, 2.1);
    D(2, 2) = C(-1.0);
    TriangularizedCocycle a = cocycle_triangularize(rand_cocycle, base);
    TriangularizedCocycle b = cocycle_triangularize(rand_cocycle, D * base);
    for (std::size_t n = 0; n < rand_cocycle.size(); ++n) {
        for (int i = 0; i < 3; ++i)
            CHECK(std::abs(std::abs(a.L[n](i, i)) - std::abs(b.L[n](i, i))) < 1e-12);
        Mat<C> recon = adjoint(a.U[n + 1]) * a.L[n] * a.U[n];
        CHECK(op_norm_inf(recon - rand_cocycle[n]) < 1e-12);
    }
}

TEST_CASE("switching recursion growth") {
    Counterexample4Report rep = counterexample_section4({0, 3}, 6, {mpq_class(0)});
    CHECK(rep.u_abs[0][3] == 3.0);
    CHECK(rep.u_abs[0][6] == 1536.0);  // 8^3 * 3

    // a u0 tuned to cancel once still grows later
    Counterexample4Report tuned =
        counterexample_section4({1, 3, 9, 27, 81}, 81, {mpq_class(-2), mpq_class(0), mpq_class(7)});
    CHECK(tuned.all_growth_ok);
    CHECK(tuned.all_non_subexponential);
}

TEST_CASE("switching germ maps carry the right coefficients") {
    Jet<R> add = counterexample_map(true);
    CHECK(add.part(1).coeff({1, 0}, 1) == R::from_ratio(1, 4));
    CHECK(add.part(1).coeff({0, 1}, 2) == R::from_ratio(1, 2));
    CHECK(add.part(2).coeff({0, 2}, 1) == R::from_ratio(-1, 4));
    Jet<R> mul = counterexample_map(false);
    CHECK(mul.part(1).coeff({1, 0}, 1) == R::from_ratio(1, 2));
    CHECK(mul.part(2).coeff({2, 0}, 2) == R::from_ratio(-1, 4));
}

TEST_CASE("end-to-end pipeline on a well-behaved instance") {
    Lcg rng(27);
    GermSequence<R> f = d2_input(rng, 4);
    BasinChartReport<R> rep = basin_chart(f, 4, 6, 20, {0.1, 0.05, 0.025, 0.0125});
    CHECK(rep.ord_ok);
    CHECK(rep.m0 == 2);
    CHECK(rep.theta > 1.0);
    CHECK(std::pow(rep.theta, rep.m0) * std::pow(0.5, rep.m0 + 1) * 4.0 <= 0.95 + 1e-12);
    CHECK(rep.germ.slope >= 4.5);  // K + 0.5 with K = 4
    CHECK(rep.triangular.coefficients_bounded);
}

TEST_CASE("pipeline on a linearizable instance keeps g linear") {
    GermSequence<R> f = koenigs_input(3);
    BasinChartReport<R> rep = basin_chart(f, 3, 4, 16, {0.1, 0.05});
    CHECK(rep.ord_ok);
    CHECK(rep.m0 == 1);
    for (const auto& g : rep.pair.g)
        for (int k = 2; k <= g.truncation(); ++k) CHECK(g.part(k).is_zero());
}

TEST_CASE("pipeline rejects the switching schedule at the decay audit") {
    // render the growing-block schedule as a long explicit head; the cycle
    // only continues the final block, the audit fails well before it matters
    std::vector<long> schedule{1, 3, 9, 27, 81};
    auto is_add = [&](long n) {
        long i = 0;
        while (i < long(schedule.size()) && schedule[std::size_t(i)] <= n) ++i;
        return i == 0 || (i - 1) % 2 == 0;
    };
    Jet<R> add = counterexample_map(true), mul = counterexample_map(false);
    GermSequence<R> f;
    f.d = 2;
    f.K = 2;
    std::vector<HomogeneousMap<R>> lh, qh;
    for (long n = 0; n < 240; ++n) {
        const Jet<R>& j = is_add(n) ? add : mul;
        lh.push_back(j.part(1));
        qh.push_back(j.part(2));
    }
    f.layers.emplace_back(lh, std::vector<HomogeneousMap<R>>{lh.back()});
    f.layers.emplace_back(qh, std::vector<HomogeneousMap<R>>{qh.back()});
    f.decay.lambda = 0.5;
    f.decay.mu = 4.0;
    BasinChartReport<R> rep = basin_chart(f, 2, 2, 120, {0.1});
    CHECK(!rep.ord_ok);
    CHECK(rep.ord.witness_left == 1.0);
}
