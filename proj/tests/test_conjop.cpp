#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <complex>

#include "basin/conjop.hpp"

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
    R nonzero_rat() {
        long p = range(1, 3);
        if (next() & 1) p = -p;
        return R::from_ratio(p, range(1, 4));
    }
};

TriangularMatrix<R> random_lower(Lcg& rng, int d) {
    Mat<R> m(d);
    for (int i = 0; i < d; ++i) {
        m(i, i) = rng.nonzero_rat();
        for (int j = 0; j < i; ++j) m(i, j) = rng.rat();
    }
    return TriangularMatrix<R>(m);
}

HomogeneousMap<R> random_hom(Lcg& rng, int d, int k) {
    HomogeneousMap<R> p(d, k);
    for (const auto& a : multi_indices(d, k))
        for (int i = 1; i <= d; ++i) p.set(a, i, rng.rat());
    return p;
}

}  // namespace

TEST_CASE("conjugacy by a diagonal matrix scales monomials") {
    Mat<R> L(2);
    L(0, 0) = R::from_ratio(1, 2);
    L(1, 1) = R::from_ratio(1, 3);
    HomogeneousMap<R> p(2, 2);
    p.set({2, 0}, 2, R(1));  // z1^2 e2
    HomogeneousMap<R> q = apply_conjugacy(L, p);
    // delta1^2 / delta2 = (1/4) * 3 = 3/4
    CHECK(q.coeff({2, 0}, 2) == R::from_ratio(3, 4));
    CHECK(q.terms().size() == 1);
}

TEST_CASE("conjugacy by the identity") {
    Lcg rng(5);
    HomogeneousMap<R> p = random_hom(rng, 3, 2);
    CHECK(apply_conjugacy(Mat<R>::identity(3), p) == p);
}

TEST_CASE("conjugacy by a unipotent matrix, by hand") {
    Mat<R> L(2);
    L(0, 0) = R(1);
    L(1, 0) = R(1);
    L(1, 1) = R(1);
    HomogeneousMap<R> p(2, 2);
    p.set({2, 0}, 1, R(1));  // z1^2 e1
    HomogeneousMap<R> q = apply_conjugacy(L, p);
    CHECK(q.coeff({2, 0}, 1) == R(1));
    CHECK(q.coeff({2, 0}, 2) == R(-1));
    CHECK(q.terms().size() == 2);
}

TEST_CASE("contravariance of the conjugacy operator") {
    Lcg rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Mat<R> L = random_lower(rng, 2).entries;
        Mat<R> M = random_lower(rng, 2).entries;
        HomogeneousMap<R> p = random_hom(rng, 2, 3);
        CHECK(apply_conjugacy(L * M, p) == apply_conjugacy(M, apply_conjugacy(L, p)));
    }
}

TEST_CASE("strictly triangular maps are invariant under triangular conjugacy") {
    Lcg rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        Mat<R> L = random_lower(rng, 3).entries;
        HomogeneousMap<R> p = random_hom(rng, 3, 2);
        HomogeneousMap<R> t = project_T(p).first;
        if (t.is_zero()) continue;
        CHECK(triangularity(apply_conjugacy(L, t)) == Triangularity::strictly_triangular);
    }
}

TEST_CASE("conjugacy matrix") {
    // diagonal L: the matrix is diagonal with the monomial eigenvalues
    Mat<R> D(2);
    D(0, 0) = R::from_ratio(1, 2);
    D(1, 1) = R::from_ratio(1, 4);
    Mat<R> A = conjugacy_matrix(D, 2);
    auto basis = monomial_basis(2, 2);
    for (std::size_t r = 0; r < basis.size(); ++r)
        for (std::size_t c = 0; c < basis.size(); ++c) {
            if (r == c) {
                R ev = scalar_pow(D(0, 0), basis[r].alpha[0]) * scalar_pow(D(1, 1), basis[r].alpha[1]) /
                       D(basis[r].comp - 1, basis[r].comp - 1);
                CHECK(A(int(r), int(c)) == ev);
            } else {
                CHECK(A(int(r), int(c)) == R(0));
            }
        }

    CHECK(conjugacy_matrix(Mat<R>::identity(2), 3) == Mat<R>::identity(int(dim_homogeneous(2, 3))));

    // action agrees with apply_conjugacy on random input
    Lcg rng(31);
    Mat<R> L = random_lower(rng, 2).entries;
    HomogeneousMap<R> p = random_hom(rng, 2, 2);
    Mat<R> AL = conjugacy_matrix(L, 2);
    Vec<R> coeffs(basis.size(), R(0));
    for (std::size_t i = 0; i < basis.size(); ++i) coeffs[i] = p.coeff(basis[i].alpha, basis[i].comp);
    Vec<R> image = AL.apply(coeffs);
    HomogeneousMap<R> direct = apply_conjugacy(L, p);
    for (std::size_t i = 0; i < basis.size(); ++i)
        CHECK(image[i] == direct.coeff(basis[i].alpha, basis[i].comp));
}

TEST_CASE("diagonal quotient bound") {
    Vec<R> d1{R::from_ratio(1, 2), R::from_ratio(1, 4)};
    CHECK(diag_quotient_bound(d1, 2) == doctest::Approx(1.5));

    Vec<R> ones{R(1), R(1), R(1)};
    CHECK(diag_quotient_bound(ones, 2) == doctest::Approx(comb_const(2, 3)));

    Vec<R> d2{R::from_ratio(1, 4), R::from_ratio(1, 2)};
    CHECK(diag_quotient_bound(d2, 2) == doctest::Approx(3.0));
}

TEST_CASE("representation formula: single factor and diagonal collapse") {
    Lcg rng(43);
    TriangularMatrix<R> L = random_lower(rng, 2);
    HomogeneousMap<R> p = random_hom(rng, 2, 2);
    CHECK(svil_expansion<R>({L}, p) == apply_conjugacy(L.entries, p));

    // all-diagonal factors: only the zero binary words survive
    std::vector<TriangularMatrix<R>> diags;
    Mat<R> prod = Mat<R>::identity(2);
    for (int n = 0; n < 3; ++n) {
        Mat<R> D(2);
        D(0, 0) = rng.nonzero_rat();
        D(1, 1) = rng.nonzero_rat();
        diags.emplace_back(D);
        prod = D * prod;
    }
    CHECK(svil_expansion(diags, p) == apply_conjugacy(prod, p));
}

TEST_CASE("representation formula equals direct conjugation of the product") {
    Lcg rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<TriangularMatrix<R>> Ls;
        Mat<R> prod = Mat<R>::identity(2);
        for (int n = 0; n < 3; ++n) {
            TriangularMatrix<R> L = random_lower(rng, 2);
            prod = L.entries * prod;
            Ls.push_back(L);
        }
        HomogeneousMap<R> p = random_hom(rng, 2, 2);
        CHECK(svil_expansion(Ls, p) == apply_conjugacy(prod, p));
    }
}

TEST_CASE("quotient certificate, single diagonal factor") {
    Mat<R> D(2);
    D(0, 0) = R::from_ratio(1, 2);
    D(1, 1) = R::from_ratio(1, 4);
    QuozCertificate cert = quoz_bound<R>({TriangularMatrix<R>(D)}, 2);
    CHECK(cert.N == 3);
    CHECK(cert.holds);
    CHECK(cert.explicit_bound >= diag_quotient_bound(Vec<R>{D(0, 0), D(1, 1)}, 2));
    // the quotient action of a diagonal matrix is diagonal; its norm is the
    // largest monomial eigenvalue outside the triangle, here (1/2)^2/(1/2)
    CHECK(cert.quotient_norm == doctest::Approx(0.5));
}

TEST_CASE("quotient certificate, constant cocycle of length 4") {
    Mat<R> D(2);
    D(0, 0) = R::from_ratio(1, 2);
    D(1, 1) = R::from_ratio(1, 4);
    std::vector<TriangularMatrix<R>> Ls(4, TriangularMatrix<R>(D));
    QuozCertificate cert = quoz_bound(Ls, 2);
    CHECK(cert.length == 4);
    CHECK(cert.quotient_norm == doctest::Approx(std::pow(0.5, 4.0)));
    CHECK(cert.holds);
    CHECK(cert.partition_max > 0.0);
}

TEST_CASE("quotient certificate holds on random cocycles") {
    Lcg rng(61);
    for (int trial = 0; trial < 25; ++trial) {
        int d = 2 + int(rng.range(0, 1));
        int k = 2 + int(rng.range(0, 1));
        int l = 1 + int(rng.range(0, 3));
        std::vector<TriangularMatrix<R>> Ls;
        for (int n = 0; n < l; ++n) Ls.push_back(random_lower(rng, d));
        CHECK(quoz_bound(Ls, k).holds);
    }
}
