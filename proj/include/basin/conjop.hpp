#ifndef BASIN_CONJOP_HPP
#define BASIN_CONJOP_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "basin/jets.hpp"
#include "basin/linalg.hpp"
#include "basin/multiindex.hpp"

namespace basin {

/// Right composition with a linear map: p -> p o L, by monomial substitution.
template <class S>
HomogeneousMap<S> substitute_linear(const HomogeneousMap<S>& p, const Mat<S>& L) {
    if (L.size() != p.dim()) throw std::invalid_argument("substitute_linear: dimension mismatch");
    const int d = p.dim(), k = p.degree();

    // powers of the linear forms (Lz)_v, cached
    std::vector<std::vector<ScalarPoly<S>>> pw(static_cast<std::size_t>(d));
    auto power = [&](int var, int e) -> const ScalarPoly<S>& {
        auto& slot = pw[std::size_t(var)];
        if (slot.empty()) {
            slot.push_back(ScalarPoly<S>::one(d, k));
            ScalarPoly<S> lin(d, k);
            for (int j = 0; j < d; ++j) {
                if (scalar_traits<S>::is_zero(L(var, j))) continue;
                MultiIndex a(std::size_t(d), 0);
                a[std::size_t(j)] = 1;
                lin.add(a, L(var, j));
            }
            slot.push_back(std::move(lin));
        }
        while (int(slot.size()) <= e) slot.push_back(slot.back().mul(slot[1]));
        return slot[std::size_t(e)];
    };

    HomogeneousMap<S> substituted(d, k);
    for (const auto& [key, c] : p.terms()) {
        ScalarPoly<S> prod = ScalarPoly<S>::one(d, k);
        for (int v = 0; v < d; ++v)
            if (key.alpha[std::size_t(v)] > 0) prod = prod.mul(power(v, key.alpha[std::size_t(v)]));
        for (const auto& [a, pc] : prod.degs[std::size_t(k)]) substituted.add(a, key.comp, c * pc);
    }
    return substituted;
}

/// Conjugacy by a linear automorphism: p -> L^{-1} (p o L). Contravariant:
/// conjugating by LM equals conjugating by L first, then by M.
template <class S>
HomogeneousMap<S> apply_conjugacy(const Mat<S>& L, const HomogeneousMap<S>& p) {
    return substitute_linear(p, L).left_mul(inverse(L));
}

/// Basis of H^k in the fixed order: component-major, colex within a component.
inline std::vector<TermKey> monomial_basis(int d, int k) {
    std::vector<TermKey> basis;
    auto alphas = multi_indices(d, k);
    for (int i = 1; i <= d; ++i)
        for (const auto& a : alphas) basis.push_back(TermKey{a, i});
    return basis;
}

/// Materialize the conjugacy operator as a matrix on the coefficient space.
template <class S>
Mat<S> conjugacy_matrix(const Mat<S>& L, int k) {
    const int d = L.size();
    std::uint64_t n = dim_homogeneous(d, k);
    if (n > 4096) throw std::range_error("conjugacy_matrix: coefficient space too large");
    auto basis = monomial_basis(d, k);
    Mat<S> out(static_cast<int>(n));
    for (std::size_t col = 0; col < basis.size(); ++col) {
        HomogeneousMap<S> e(d, k);
        e.set(basis[col].alpha, basis[col].comp, scalar_traits<S>::one());
        HomogeneousMap<S> img = apply_conjugacy(L, e);
        for (std::size_t row = 0; row < basis.size(); ++row)
            out(int(row), int(col)) = img.coeff(basis[row].alpha, basis[row].comp);
    }
    return out;
}

/// c(k,d) = binom(k+d-1, d-1): the combinatorial constant of the norm
/// comparison and of the diagonal quotient bound.
inline double comb_const(int k, int d) { return double(binomial(k + d - 1, d - 1)); }

/// Bound for the quotient norm of the conjugacy by diag(delta):
/// c(k,d) * (max |delta_h|)^{k-1} * max_{i<=j} |delta_j|/|delta_i|.
template <class S>
double diag_quotient_bound(const Vec<S>& delta, int k) {
    const int d = int(delta.size());
    double mx = 0.0;
    std::vector<double> a(static_cast<std::size_t>(d));
    for (int h = 0; h < d; ++h) {
        a[std::size_t(h)] = scalar_traits<S>::abs(delta[std::size_t(h)]);
        if (a[std::size_t(h)] == 0.0) throw std::domain_error("diag_quotient_bound: zero entry");
        mx = std::max(mx, a[std::size_t(h)]);
    }
    double ratio = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) ratio = std::max(ratio, a[std::size_t(j)] / a[std::size_t(i)]);
    return comb_const(k, d) * std::pow(mx, k - 1) * ratio;
}

namespace detail {

template <class S>
void split_diag(const Mat<S>& L, Mat<S>& D, Mat<S>& N) {
    D = Mat<S>(L.size());
    N = Mat<S>(L.size());
    for (int i = 0; i < L.size(); ++i)
        for (int j = 0; j < L.size(); ++j) {
            if (i == j)
                D(i, i) = L(i, i);
            else
                N(i, j) = L(i, j);
        }
}

template <class S>
bool is_zero_mat(const Mat<S>& m) {
    for (int i = 0; i < m.size(); ++i)
        for (int j = 0; j < m.size(); ++j)
            if (!scalar_traits<S>::is_zero(m(i, j))) return false;
    return true;
}

}  // namespace detail

/// The representation of the conjugacy by L_l ... L_1 as a sum over binary
/// multi-indices: the inverse product expands into terms D_1^{-1} Ft_1^{b_1}
/// ... D_l^{-1} Ft_l^{b_l} (left factors), the direct product into terms
/// D_l F_l^{a_l} ... D_1 F_1^{a_1} (multilinear arguments), where F_n =
/// D_n^{-1} N_n and Ft_n = D_n (L_n^{-1} - D_n^{-1}). Only binary weights < d
/// survive, since d-fold products of strictly triangular factors vanish.
/// Argument tuples are grouped by multiset with multinomial multiplicity;
/// the symmetric bracket makes the grouping exact.
template <class S>
HomogeneousMap<S> svil_expansion(const std::vector<TriangularMatrix<S>>& L_list,
                                 const HomogeneousMap<S>& p) {
    const int d = p.dim(), k = p.degree();
    const int l = int(L_list.size());
    if (l < 1) throw std::invalid_argument("svil_expansion: need at least one factor");

    std::vector<Mat<S>> D(static_cast<std::size_t>(l)), F(static_cast<std::size_t>(l)), Ft(static_cast<std::size_t>(l)), Dinv(static_cast<std::size_t>(l));
    for (int n = 0; n < l; ++n) {
        Mat<S> Dn, Nn;
        detail::split_diag(L_list[std::size_t(n)].entries, Dn, Nn);
        D[std::size_t(n)] = Dn;
        Dinv[std::size_t(n)] = inverse(Dn);
        F[std::size_t(n)] = Dinv[std::size_t(n)] * Nn;
        Mat<S> Linv = inverse(L_list[std::size_t(n)].entries);
        Ft[std::size_t(n)] = Dn * (Linv - Dinv[std::size_t(n)]);
    }

    // all binary words of weight < d, with the corresponding matrix products
    std::vector<Mat<S>> left_terms;   // D_1^{-1} Ft_1^{b_1} ... D_l^{-1} Ft_l^{b_l}
    std::vector<Mat<S>> arg_terms;    // D_l F_l^{a_l} ... D_1 F_1^{a_1}
    for (unsigned mask = 0; mask < (1u << l); ++mask) {
        int w = 0;
        for (int n = 0; n < l; ++n) w += int((mask >> n) & 1u);
        if (w >= d) continue;
        Mat<S> lt = Mat<S>::identity(d);
        for (int n = 0; n < l; ++n) {
            lt = lt * Dinv[std::size_t(n)];
            if ((mask >> n) & 1u) lt = lt * Ft[std::size_t(n)];
        }
        Mat<S> at = Mat<S>::identity(d);
        for (int n = l - 1; n >= 0; --n) {
            at = at * D[std::size_t(n)];
            if ((mask >> n) & 1u) at = at * F[std::size_t(n)];
        }
        left_terms.push_back(std::move(lt));
        arg_terms.push_back(std::move(at));
    }

    auto linear_map = [d](const Mat<S>& m) {
        HomogeneousMap<S> lin(d, 1);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                if (scalar_traits<S>::is_zero(m(i, j))) continue;
                MultiIndex a(std::size_t(d), 0);
                a[std::size_t(j)] = 1;
                lin.set(a, i + 1, m(i, j));
            }
        return lin;
    };

    // sum of brackets over multisets of argument terms, with multinomial weight
    const int m = int(arg_terms.size());
    HomogeneousMap<S> bracket_sum(d, k);
    std::vector<int> pick(std::size_t(k), 0);  // non-decreasing index tuple
    while (true) {
        bool skip = false;
        for (int s = 0; s < k; ++s)
            if (detail::is_zero_mat(arg_terms[std::size_t(pick[std::size_t(s)])])) skip = true;
        if (!skip) {
            long mult = 1, run = 1, tot = 1;
            for (int s = 1; s < k; ++s) {
                ++tot;
                run = (pick[std::size_t(s)] == pick[std::size_t(s - 1)]) ? run + 1 : 1;
                mult = mult * tot / run;  // running multinomial k!/(prod of run lengths!)
            }
            std::vector<HomogeneousMap<S>> args;
            for (int s = 0; s < k; ++s) args.push_back(linear_map(arg_terms[std::size_t(pick[std::size_t(s)])]));
            HomogeneousMap<S> br = multilinear_bracket(p, args);
            bracket_sum = bracket_sum + br.scaled(scalar_traits<S>::from_int(mult));
        }
        // next non-decreasing tuple
        int s = k - 1;
        while (s >= 0 && pick[std::size_t(s)] == m - 1) --s;
        if (s < 0) break;
        int v = pick[std::size_t(s)] + 1;
        for (int t = s; t < k; ++t) pick[std::size_t(t)] = v;
    }

    HomogeneousMap<S> out(d, k);
    for (const auto& lt : left_terms) out = out + bracket_sum.left_mul(lt);
    return out;
}

struct QuozCertificate {
    int k = 0;
    int d = 0;
    int N = 0;                  // (k+1)(d-1) segments boundaries
    int length = 0;             // number of cocycle factors
    double rho = 0.0;           // max_n (|L_n| |L_n^{-1}| + 1)
    double partition_max = 0.0;
    double explicit_bound = 0.0;
    double quotient_norm = 0.0;  // measured on the coefficient max norm
    bool holds = false;
};

/// Certified bound for the quotient norm of the conjugacy by a lower
/// triangular cocycle. The multiplicative constant is instantiated from the
/// chain of estimates behind the bound: K = e^{k+1} rho^N c(k,d)^{N+1}, so
/// explicit_bound = K * l^N * partition_max. The partition maximum runs over
/// 0 = n_0 <= ... <= n_{N+1} = l and is solved by dynamic programming on
/// prefix products of the diagonal moduli.
template <class S>
QuozCertificate quoz_bound(const std::vector<TriangularMatrix<S>>& L_list, int k) {
    const int l = int(L_list.size());
    if (l < 1) throw std::invalid_argument("quoz_bound: empty cocycle");
    const int d = L_list[0].dim();
    QuozCertificate cert;
    cert.k = k;
    cert.d = d;
    cert.N = (k + 1) * (d - 1);
    cert.length = l;

    for (const auto& L : L_list) {
        Mat<S> inv = inverse(L.entries);
        cert.rho = std::max(cert.rho, op_norm_inf(L.entries) * op_norm_inf(inv) + 1.0);
    }

    // prefix[h][n] = product of |diagonal entry h| over the first n factors
    std::vector<std::vector<double>> prefix(std::size_t(d), std::vector<double>(std::size_t(l) + 1, 1.0));
    for (int h = 0; h < d; ++h)
        for (int n = 0; n < l; ++n)
            prefix[std::size_t(h)][std::size_t(n) + 1] =
                prefix[std::size_t(h)][std::size_t(n)] *
                scalar_traits<S>::abs(L_list[std::size_t(n)].entries(h, h));

    auto segment = [&](int a, int b) {  // factor for the segment (a, b]
        double mx = 0.0;
        for (int h = 0; h < d; ++h)
            mx = std::max(mx, prefix[std::size_t(h)][std::size_t(b)] / prefix[std::size_t(h)][std::size_t(a)]);
        double ratio = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                double li = prefix[std::size_t(i)][std::size_t(b)] / prefix[std::size_t(i)][std::size_t(a)];
                double lj = prefix[std::size_t(j)][std::size_t(b)] / prefix[std::size_t(j)][std::size_t(a)];
                ratio = std::max(ratio, lj / li);
            }
        return std::pow(mx, k - 1) * ratio;
    };

    // dp over the number of segments used so far
    std::vector<double> dp(std::size_t(l) + 1, 0.0);
    for (int e = 0; e <= l; ++e) dp[std::size_t(e)] = segment(0, e);
    for (int seg = 2; seg <= cert.N + 1; ++seg) {
        std::vector<double> nxt(std::size_t(l) + 1, 0.0);
        for (int e = 0; e <= l; ++e)
            for (int s = 0; s <= e; ++s)
                nxt[std::size_t(e)] = std::max(nxt[std::size_t(e)], dp[std::size_t(s)] * segment(s, e));
        dp = nxt;
    }
    cert.partition_max = dp[std::size_t(l)];

    const double K = std::exp(double(k + 1)) * std::pow(cert.rho, cert.N) *
                     std::pow(comb_const(k, d), cert.N + 1);
    cert.explicit_bound = K * std::pow(double(l), cert.N) * cert.partition_max;

    // measured quotient norm: restrict the materialized operator to the
    // coordinates outside the strictly triangular index set
    Mat<S> product = L_list[std::size_t(l) - 1].entries;
    for (int n = l - 2; n >= 0; --n) product = product * L_list[std::size_t(n)].entries;
    Mat<S> A = conjugacy_matrix(product, k);
    auto basis = monomial_basis(d, k);
    std::vector<int> quot_idx;
    for (int i = 0; i < int(basis.size()); ++i)
        if (!in_strict_triangle(basis[std::size_t(i)].alpha, basis[std::size_t(i)].comp))
            quot_idx.push_back(i);
    double qn = 0.0;
    for (int r : quot_idx) {
        double s = 0.0;
        for (int c : quot_idx) s += scalar_traits<S>::abs(A(r, c));
        qn = std::max(qn, s);
    }
    cert.quotient_norm = qn;
    cert.holds = cert.quotient_norm <= cert.explicit_bound * (1.0 + 1e-12);
    return cert;
}

}  // namespace basin

#endif
