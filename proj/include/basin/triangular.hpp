#ifndef BASIN_TRIANGULAR_HPP
#define BASIN_TRIANGULAR_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "basin/control.hpp"
#include "basin/jets.hpp"

namespace basin {

/// Lower triangular linear part plus strictly triangular polynomial part:
/// component j is lambda_j z_j + (terms in z_1..z_{j-1} only). Always an
/// automorphism; the class is closed under composition and inversion, with
/// degrees governed by a weight profile (k_1=1, k_2, ..., k_d): every
/// monomial z^alpha in component j satisfies sum_i alpha_i k_i <= k_j.
template <class S>
class SpecialTriangularAuto {
  public:
    explicit SpecialTriangularAuto(const Jet<S>& map) : map_(map.truncated(std::max(1, map.max_degree()))) {
        const int d = map_.dim();
        Mat<S> L = map_.linear_part();
        if (!is_lower_triangular(L))
            throw std::invalid_argument("SpecialTriangularAuto: linear part not lower triangular");
        for (int i = 0; i < d; ++i)
            if (scalar_traits<S>::is_zero(L(i, i)))
                throw std::invalid_argument("SpecialTriangularAuto: zero diagonal entry");
        for (int k = 2; k <= map_.truncation(); ++k)
            if (triangularity(map_.part(k)) != Triangularity::strictly_triangular)
                throw std::invalid_argument("SpecialTriangularAuto: polynomial part not strictly triangular");
        compute_profile();
    }

    static SpecialTriangularAuto identity(int d) { return SpecialTriangularAuto(Jet<S>::identity(d, 1)); }

    int dim() const { return map_.dim(); }
    int degree() const { return map_.max_degree(); }
    const Jet<S>& jet() const { return map_; }
    Mat<S> linear_part() const { return map_.linear_part(); }
    const std::vector<int>& profile() const { return profile_; }

    Vec<S> operator()(const Vec<S>& z) const { return map_.evaluate(z); }

    bool operator==(const SpecialTriangularAuto& o) const {
        int K = std::max(map_.truncation(), o.map_.truncation());
        return map_.truncated(K) == o.map_.truncated(K);
    }

  private:
    // smallest valid profile: k_j = max(1, weighted degrees of the monomials
    // of component j), computed in increasing j
    void compute_profile() {
        const int d = map_.dim();
        profile_.assign(std::size_t(d), 1);
        for (int j = 1; j <= d; ++j) {
            int kj = 1;
            for (int k = 1; k <= map_.truncation(); ++k)
                for (const auto& [key, c] : map_.part(k).terms()) {
                    if (key.comp != j) continue;
                    int w = 0;
                    for (int i = 0; i < d; ++i) w += key.alpha[std::size_t(i)] * profile_[std::size_t(i)];
                    kj = std::max(kj, w);
                }
            profile_[std::size_t(j - 1)] = kj;
        }
    }

    Jet<S> map_;
    std::vector<int> profile_;
};

/// Exact composition g2 o g1; stays in the class, and the combined weight
/// profile is audited (a violation here is a bug, not bad input).
template <class S>
SpecialTriangularAuto<S> compose_special(const SpecialTriangularAuto<S>& g2,
                                         const SpecialTriangularAuto<S>& g1) {
    if (g2.dim() != g1.dim()) throw std::invalid_argument("compose_special: dimension mismatch");
    const int d = g1.dim();
    int K = std::max(1, g2.degree() * std::max(1, g1.degree()));
    Jet<S> comp = compose_jets(g2.jet().truncated(K), g1.jet().truncated(K), K);
    SpecialTriangularAuto<S> out(comp);

    // smallest profile valid for both factors simultaneously
    std::vector<int> bound(std::size_t(d), 1);
    for (int j = 1; j <= d; ++j) {
        int kj = 1;
        for (const auto* g : {&g1, &g2})
            for (int k = 1; k <= g->jet().truncation(); ++k)
                for (const auto& [key, c] : g->jet().part(k).terms()) {
                    if (key.comp != j) continue;
                    int w = 0;
                    for (int i = 0; i < d; ++i) w += key.alpha[std::size_t(i)] * bound[std::size_t(i)];
                    kj = std::max(kj, w);
                }
        bound[std::size_t(j - 1)] = kj;
    }
    // closure audit: the composite must satisfy the shared profile
    for (int k = 1; k <= out.jet().truncation(); ++k)
        for (const auto& [key, c] : out.jet().part(k).terms()) {
            int w = 0;
            for (int i = 0; i < d; ++i) w += key.alpha[std::size_t(i)] * bound[std::size_t(i)];
            if (w > bound[std::size_t(key.comp - 1)])
                throw std::logic_error("compose_special: weight profile violated");
        }
    return out;
}

/// Exact inverse by forward substitution: z_1 = w_1/lambda_1, then each
/// z_j = (w_j - offdiagonal - p_j(z_1,...,z_{j-1})) / lambda_j with the
/// earlier components already expressed as polynomials in w. The inverse
/// satisfies the same weight profile, so plain degree <= max_j k_j.
template <class S>
SpecialTriangularAuto<S> invert_special(const SpecialTriangularAuto<S>& g) {
    const int d = g.dim();
    int K = 1;
    for (int kj : g.profile()) K = std::max(K, kj);
    Mat<S> L = g.linear_part();

    std::vector<ScalarPoly<S>> zc;  // z_j as a polynomial in w
    zc.reserve(std::size_t(d));
    for (int j = 0; j < d; ++j) {
        ScalarPoly<S> acc(d, K);
        MultiIndex wj(std::size_t(d), 0);
        wj[std::size_t(j)] = 1;
        acc.add(wj, scalar_traits<S>::one());
        for (int i = 0; i < j; ++i) {
            if (scalar_traits<S>::is_zero(L(j, i))) continue;
            for (const auto& m : zc[std::size_t(i)].degs)
                for (const auto& [a, c] : m) acc.add(a, -(L(j, i) * c));
        }
        // subtract p_j evaluated at the already-inverted components
        for (int k = 2; k <= g.jet().truncation(); ++k)
            for (const auto& [key, c] : g.jet().part(k).terms()) {
                if (key.comp != j + 1) continue;
                ScalarPoly<S> prod = ScalarPoly<S>::one(d, K);
                for (int v = 0; v < j; ++v)
                    for (int e = 0; e < key.alpha[std::size_t(v)]; ++e) prod = prod.mul(zc[std::size_t(v)]);
                for (const auto& m : prod.degs)
                    for (const auto& [a, pc] : m) acc.add(a, -(c * pc));
            }
        S inv_l = scalar_traits<S>::one() / L(j, j);
        ScalarPoly<S> scaled(d, K);
        for (const auto& m : acc.degs)
            for (const auto& [a, c] : m) scaled.add(a, c * inv_l);
        zc.push_back(std::move(scaled));
    }

    Jet<S> inv(d, K);
    std::vector<HomogeneousMap<S>> parts;
    for (int k = 1; k <= K; ++k) parts.emplace_back(d, k);
    for (int j = 0; j < d; ++j)
        for (int k = 1; k <= K; ++k)
            for (const auto& [a, c] : zc[std::size_t(j)].degs[std::size_t(k)])
                parts[std::size_t(k - 1)].add(a, j + 1, c);
    for (const auto& p : parts) inv.set_part(p);
    return SpecialTriangularAuto<S>(inv);
}

struct OrbitReport {
    std::vector<Vec<std::complex<double>>> trajectory;
    long first_below = -1;  // first n with |z_n| < threshold, -1 if never
    bool overflowed = false;
};

/// Numerical forward orbit z_{n+1} = g_n(z_n) with overflow detection.
inline OrbitReport orbit(const EvPer<SpecialTriangularAuto<std::complex<double>>>& rule,
                         Vec<std::complex<double>> z0, long n_max,
                         double attract_threshold = 1e-8, double overflow = 1e150) {
    OrbitReport rep;
    rep.trajectory.push_back(z0);
    Vec<std::complex<double>> z = std::move(z0);
    for (long n = 0; n <= n_max; ++n) {
        double norm = vec_norm_inf(z);
        if (norm < attract_threshold && rep.first_below < 0) rep.first_below = n;
        if (norm > overflow) {
            rep.overflowed = true;
            break;
        }
        if (n == n_max) break;
        z = rule.at(n)(z);
        rep.trajectory.push_back(z);
    }
    return rep;
}

struct IterateBoundReport {
    double empirical_C = 0.0;     // smallest C fitting |g_{n,0}(z)| <= C lambda^n (|z|+|z|^k)
    double max_scaled_coeff = 0.0;  // max over n of coefficient norm of lambda^{-n} g_{n,0}
    int k = 1;                    // degree entering |z| + |z|^k
    bool coefficients_bounded = true;
};

/// Fits the contraction constant of the composed maps over a sample grid and
/// audits boundedness of the rescaled compositions lambda^{-n} g_{n,0}.
inline IterateBoundReport iterate_bound_check(
    const EvPer<SpecialTriangularAuto<std::complex<double>>>& rule,
    const std::vector<Vec<std::complex<double>>>& samples, long n_max, double lambda,
    double coeff_cap = 1e6) {
    IterateBoundReport rep;
    for (long n = 0; n < rule.preperiod() + rule.period(); ++n)
        rep.k = std::max(rep.k, rule.at(n).degree());

    for (const auto& z0 : samples) {
        Vec<std::complex<double>> z = z0;
        double base = vec_norm_inf(z0) + std::pow(vec_norm_inf(z0), double(rep.k));
        if (base == 0.0) continue;
        for (long n = 1; n <= n_max; ++n) {
            z = rule.at(n - 1)(z);
            double ratio = vec_norm_inf(z) / (std::pow(lambda, double(n)) * base);
            rep.empirical_C = std::max(rep.empirical_C, ratio);
        }
    }

    SpecialTriangularAuto<std::complex<double>> comp =
        SpecialTriangularAuto<std::complex<double>>::identity(rule.at(0).dim());
    double scale = 1.0;
    for (long n = 1; n <= n_max; ++n) {
        comp = compose_special(rule.at(n - 1), comp);
        scale /= lambda;
        double cmax = 0.0;
        for (int k = 1; k <= comp.jet().truncation(); ++k)
            cmax = std::max(cmax, comp.jet().part(k).coeff_max());
        rep.max_scaled_coeff = std::max(rep.max_scaled_coeff, scale * cmax);
    }
    rep.coefficients_bounded = rep.max_scaled_coeff <= coeff_cap;
    return rep;
}

}  // namespace basin

#endif
