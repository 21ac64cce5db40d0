#ifndef BASIN_CONJUGACY_HPP
#define BASIN_CONJUGACY_HPP

#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "basin/conjop.hpp"
#include "basin/control.hpp"
#include "basin/jets.hpp"
#include "basin/triangular.hpp"

namespace basin {

/// A sequence of germ jets, stored in a scaled eventually-periodic form:
/// the degree-k part at time n is sigma^{(1-k)n} * layer_k(n), with each
/// layer eventually periodic. With sigma = 1 this is a plain eventually
/// periodic jet rule; the twist by sigma is exactly the shape produced by
/// the rescaling f_n -> theta^{n+1} f_n(theta^{-n} z), so rescaled sequences
/// stay representable and exactly computable at every n.
template <class S>
struct GermSequence {
    int d = 0;
    int K = 0;
    S sigma = scalar_traits<S>::one();
    std::vector<EvPer<HomogeneousMap<S>>> layers;  // index k-1 for degree k = 1..K
    DecayData decay;

    long layer_preperiod() const {
        long q = 0;
        for (const auto& l : layers) q = std::max(q, l.preperiod());
        return q;
    }
    long layer_period() const {
        long P = 1;
        for (const auto& l : layers) P = std::lcm(P, l.period());
        return P;
    }

    Mat<S> linear_at(long n) const {
        HomogeneousMap<S> lin = layers[0].at(n);
        Mat<S> m(d);
        for (const auto& [key, c] : lin.terms())
            for (int j = 0; j < d; ++j)
                if (key.alpha[std::size_t(j)] == 1) m(key.comp - 1, j) = c;
        return m;
    }

    Jet<S> jet_at(long n) const {
        Jet<S> j(d, K);
        for (int k = 1; k <= K; ++k) {
            const HomogeneousMap<S>& base = layers[std::size_t(k - 1)].at(n);
            if (base.is_zero()) continue;
            S factor = scalar_pow(sigma, long(1 - k) * n);
            j.set_part(base.scaled(factor));
        }
        return j;
    }
};

/// theta^{(1-k)n+1}-rescaling: absorbs theta into sigma and multiplies every
/// layer value by theta. Corresponds to conjugating by the dilations
/// z -> theta^n z, so conjugacy solutions transport across it.
template <class S>
GermSequence<S> rescale(const GermSequence<S>& f, const S& theta) {
    GermSequence<S> out = f;
    out.sigma = f.sigma * theta;
    for (auto& layer : out.layers) {
        for (auto& v : layer.head) v = v.scaled(theta);
        for (auto& v : layer.cycle) v = v.scaled(theta);
    }
    return out;
}

/// Block composition: replaces f by the composites over consecutive blocks
/// of N_block maps, with decay constants raised to the block length.
/// Requires the plain (sigma = 1) form.
template <class S>
GermSequence<S> block_sequence(const GermSequence<S>& f, long N_block) {
    if (N_block < 1) throw std::invalid_argument("block_sequence: block length must be positive");
    if (!scalar_traits<S>::is_zero(f.sigma - scalar_traits<S>::one()))
        throw std::invalid_argument("block_sequence: requires an unscaled sequence");
    if (N_block == 1) return f;
    const long q = f.layer_preperiod(), P = f.layer_period();
    const long qb = (q + N_block - 1) / N_block;
    const long Pb = P / std::gcd(P, N_block);

    auto block_at = [&](long n) {
        Jet<S> comp = f.jet_at(n * N_block);
        for (long i = 1; i < N_block; ++i) comp = compose_jets(f.jet_at(n * N_block + i), comp, f.K);
        return comp;
    };

    GermSequence<S> out;
    out.d = f.d;
    out.K = f.K;
    out.decay = f.decay;
    out.decay.lambda = std::pow(f.decay.lambda, double(N_block));
    out.decay.mu = std::pow(f.decay.mu, double(N_block));
    std::vector<std::vector<HomogeneousMap<S>>> head(std::size_t(f.K)), cycle(std::size_t(f.K));
    for (long n = 0; n < qb + Pb; ++n) {
        Jet<S> j = block_at(n);
        for (int k = 1; k <= f.K; ++k)
            (n < qb ? head : cycle)[std::size_t(k - 1)].push_back(j.part(k));
    }
    for (int k = 1; k <= f.K; ++k)
        out.layers.emplace_back(std::move(head[std::size_t(k - 1)]), std::move(cycle[std::size_t(k - 1)]));
    return out;
}

inline int select_m0(double lambda, double mu) {
    if (!(lambda > 0.0 && lambda < 1.0 && mu > 1.0))
        throw std::invalid_argument("select_m0: need 0 < lambda < 1 < mu");
    int m0 = 1;
    while (std::pow(lambda, double(m0 + 1)) * mu >= 1.0) ++m0;
    return m0;
}

struct OrdReport {
    std::vector<double> theta_grid;
    std::vector<double> C_half;  // required constant over the half horizon
    std::vector<double> C_full;  // required constant over the full horizon
    bool consistent = true;
    long witness_n = 0;
    long witness_l = 0;
    double witness_left = 0.0;  // left side at the worst window for the smallest theta
};

/// Exhaustive audit of the diagonal decay condition: the left side
/// max_h prod |lambda(h)| * max_{i<=j} prod |lambda(j)|/|lambda(i)| over the
/// window [n, n+l) must stay below C(theta) theta^n lambda^l. The required
/// C(theta) is fitted over the half and the full horizon; growth between the
/// two flags a violation, and the worst window is reported as witness.
inline OrdReport check_ord(const std::vector<std::vector<double>>& diags, double lambda,
                           const std::vector<double>& theta_grid, double growth_tol = 1.2) {
    const long H = long(diags.size());
    if (H < 4) throw std::invalid_argument("check_ord: horizon too short");
    const int d = int(diags[0].size());
    for (const auto& row : diags)
        for (double v : row)
            if (v == 0.0) throw std::domain_error("check_ord: zero diagonal entry");

    // prefix[h][n] = product of |lambda_m(h)| over m < n
    std::vector<std::vector<double>> prefix(std::size_t(d), std::vector<double>(std::size_t(H) + 1, 1.0));
    for (int h = 0; h < d; ++h)
        for (long n = 0; n < H; ++n)
            prefix[std::size_t(h)][std::size_t(n) + 1] =
                prefix[std::size_t(h)][std::size_t(n)] * std::abs(diags[std::size_t(n)][std::size_t(h)]);

    auto left = [&](long n, long l) {
        double mx = 0.0;
        for (int h = 0; h < d; ++h)
            mx = std::max(mx, prefix[std::size_t(h)][std::size_t(n + l)] / prefix[std::size_t(h)][std::size_t(n)]);
        double ratio = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                double pi = prefix[std::size_t(i)][std::size_t(n + l)] / prefix[std::size_t(i)][std::size_t(n)];
                double pj = prefix[std::size_t(j)][std::size_t(n + l)] / prefix[std::size_t(j)][std::size_t(n)];
                ratio = std::max(ratio, pj / pi);
            }
        return mx * ratio;
    };

    OrdReport rep;
    rep.theta_grid = theta_grid;
    const double theta0 = theta_grid.front();
    double worst = -1.0;
    for (std::size_t t = 0; t < theta_grid.size(); ++t) {
        double theta = theta_grid[t];
        double chalf = 0.0, cfull = 0.0;
        for (long n = 0; n < H; ++n)
            for (long l = 1; n + l <= H; ++l) {
                double lv = left(n, l);
                double req = lv / (std::pow(theta, double(n)) * std::pow(lambda, double(l)));
                if (n + l <= H / 2) chalf = std::max(chalf, req);
                cfull = std::max(cfull, req);
                if (theta == theta0 && req > worst) {
                    worst = req;
                    rep.witness_n = n;
                    rep.witness_l = l;
                    rep.witness_left = lv;
                }
            }
        rep.C_half.push_back(chalf);
        rep.C_full.push_back(cfull);
        if (cfull > chalf * growth_tol) rep.consistent = false;
    }
    return rep;
}

template <class S>
struct ConjugacyPair {
    int d = 0;
    int K = 0;
    int m0 = 0;
    long horizon = 0;
    S sigma = scalar_traits<S>::one();
    std::vector<Jet<S>> g;  // n = 0 .. horizon-1, degree <= m0 parts
    std::vector<Jet<S>> h;  // n = 0 .. horizon, identity linear part
    // unscaled eventually periodic layers (degree k at index k-2)
    std::vector<EvPer<HomogeneousMap<S>>> g_layers;
    std::vector<EvPer<HomogeneousMap<S>>> h_layers;
};

namespace detail {

template <class S>
HomogeneousMap<S> coeffs_to_map(const Vec<S>& v, const std::vector<TermKey>& basis, int d, int k) {
    HomogeneousMap<S> p(d, k);
    for (std::size_t i = 0; i < basis.size(); ++i) p.add(basis[i].alpha, basis[i].comp, v[i]);
    return p;
}

template <class S>
Vec<S> map_to_coeffs(const HomogeneousMap<S>& p, const std::vector<TermKey>& basis) {
    Vec<S> v(basis.size(), scalar_traits<S>::zero());
    for (std::size_t i = 0; i < basis.size(); ++i) v[i] = p.coeff(basis[i].alpha, basis[i].comp);
    return v;
}

/// One homological degree for an unscaled sequence: fills in the degree-k
/// layers of h (and of g when controlled), given all lower layers.
template <class S>
void solve_degree(const GermSequence<S>& f, int k, bool controlled, long N,
                  std::vector<EvPer<HomogeneousMap<S>>>& h_layers,
                  std::vector<EvPer<HomogeneousMap<S>>>& g_layers) {
    const int d = f.d;
    auto basis = monomial_basis(d, k);

    long q = f.layer_preperiod();
    long P = f.layer_period();
    for (const auto& l : h_layers) {
        q = std::max(q, l.preperiod());
        P = std::lcm(P, l.period());
    }
    for (const auto& l : g_layers) {
        q = std::max(q, l.preperiod());
        P = std::lcm(P, l.period());
    }

    // A_n = matrix of p -> L_n p o L_n^{-1} on the degree-k coefficient space
    std::vector<Mat<S>> Ah, Ac;
    for (long n = 0; n < q + P; ++n) {
        Mat<S> m = conjugacy_matrix(inverse(f.linear_at(n)), k);
        (n < q ? Ah : Ac).push_back(std::move(m));
    }
    CocycleRule<S> A(EvPer<Mat<S>>(std::move(Ah), std::move(Ac)));

    // forcing b_n: the degree-k defect of the conjugacy with the unknown
    // degree-k parts of h and g set to zero, right-composed with L_n^{-1}
    auto known_jet = [&](const std::vector<EvPer<HomogeneousMap<S>>>& layers, long n, bool identity_lin) {
        Jet<S> j(d, k);
        if (identity_lin)
            j = Jet<S>::identity(d, k);
        else
            j.set_part(f.layers[0].at(n));
        for (int m = 2; m < k; ++m)
            if (m - 2 < int(layers.size())) j.set_part(layers[std::size_t(m - 2)].at(n));
        return j;
    };
    std::vector<Vec<S>> bh, bc;
    for (long n = 0; n < q + P; ++n) {
        Jet<S> G = known_jet(g_layers, n, false);
        Jet<S> H = known_jet(h_layers, n, true);
        Jet<S> H1 = known_jet(h_layers, n + 1, true);
        Jet<S> F = f.jet_at(n).truncated(k);
        HomogeneousMap<S> r = compose_jets(G, H, k).part(k) - compose_jets(H1, F, k).part(k);
        HomogeneousMap<S> b = substitute_linear(r, inverse(f.linear_at(n)));
        (n < q ? bh : bc).push_back(map_to_coeffs(b, basis));
    }
    VecRule<S> brule(std::move(bh), std::move(bc));

    const long Nsolve = std::max(N + 1, q + P);
    std::vector<HomogeneousMap<S>> uh, uc, gh, gc;
    if (controlled) {
        std::vector<int> V;
        for (int i = 0; i < int(basis.size()); ++i)
            if (in_strict_triangle(basis[std::size_t(i)].alpha, basis[std::size_t(i)].comp)) V.push_back(i);
        ControlledSolution<S> sol = solve_with_control(A, brule, V, Nsolve);
        for (long n = 0; n < q + P; ++n) {
            auto& dest = (n < q ? uh : uc);
            dest.push_back(coeffs_to_map(sol.u.u[std::size_t(n)], basis, d, k));
            HomogeneousMap<S> ghat = coeffs_to_map(sol.v[std::size_t(n)], basis, d, k);
            (n < q ? gh : gc).push_back(substitute_linear(ghat, f.linear_at(n)));
        }
    } else {
        ControlSolution<S> sol = solve_subexp_exact(A, brule, Nsolve);
        for (long n = 0; n < q + P; ++n)
            (n < q ? uh : uc).push_back(coeffs_to_map(sol.u[std::size_t(n)], basis, d, k));
        for (long n = 0; n < q + P; ++n)
            (n < q ? gh : gc).push_back(HomogeneousMap<S>(d, k));
    }
    h_layers.emplace_back(std::move(uh), std::move(uc));
    g_layers.emplace_back(std::move(gh), std::move(gc));
}

}  // namespace detail

/// Degree-by-degree solution of the homological equations
/// h_{n+1} o f_n = g_n o h_n: at each degree k the coefficient recursion is
/// u_{n+1} = A_n u_n + ghat_n + b_n with A_n the conjugacy by L_n^{-1}; for
/// k <= m0 the strictly triangular space absorbs the control (ghat), above
/// m0 the unique subexponential solution is taken with g^k = 0. Scaled
/// (sigma != 1) input is normalized first and the solution transported back
/// through the dilation conjugacy.
template <class S>
ConjugacyPair<S> formal_conjugate(const GermSequence<S>& f, int m0, int K, long N) {
    const S one = scalar_traits<S>::one();
    GermSequence<S> base = f;
    if (!scalar_traits<S>::is_zero(f.sigma - one)) base = rescale(f, one / f.sigma);

    ConjugacyPair<S> pair;
    pair.d = f.d;
    pair.K = K;
    pair.m0 = m0;
    pair.horizon = N;
    pair.sigma = f.sigma;

    for (int k = 2; k <= K; ++k)
        detail::solve_degree(base, k, k <= m0, N, pair.h_layers, pair.g_layers);

    // assemble jets over the horizon, transporting by sigma
    for (long n = 0; n <= N; ++n) {
        Jet<S> h = Jet<S>::identity(f.d, K);
        for (int k = 2; k <= K; ++k) {
            const auto& v = pair.h_layers[std::size_t(k - 2)].at(n);
            if (!v.is_zero()) h.set_part(v.scaled(scalar_pow(pair.sigma, long(1 - k) * n)));
        }
        pair.h.push_back(std::move(h));
        if (n == N) break;
        Jet<S> g(f.d, K);
        g.set_part(f.layers[0].at(n));  // linear part of f itself (sigma-exponent is zero)
        for (int k = 2; k <= std::min(K, m0); ++k) {
            const auto& v = pair.g_layers[std::size_t(k - 2)].at(n);
            if (!v.is_zero()) g.set_part(v.scaled(scalar_pow(pair.sigma, long(1 - k) * n + 1)));
        }
        pair.g.push_back(std::move(g));
    }
    return pair;
}

/// Degree-k parts of h_{n+1} o f_n - g_n o h_n for all k <= K: the exact
/// conjugacy defect at step n.
template <class S>
Jet<S> conjugacy_residual(const Jet<S>& f_n, const Jet<S>& g_n, const Jet<S>& h_n,
                          const Jet<S>& h_np1, int K) {
    return compose_jets(h_np1, f_n, K) - compose_jets(g_n, h_n, K);
}

/// Extends an existing conjugacy pair to higher degrees with g frozen: above
/// the stored degrees every homological equation has the unique
/// subexponential solution, so no new control terms appear.
template <class S>
ConjugacyPair<S> extend_conjugacy(const GermSequence<S>& f, const ConjugacyPair<S>& pair, int K_ext) {
    if (K_ext <= pair.K) return pair;
    GermSequence<S> base = f;
    const S one = scalar_traits<S>::one();
    if (!scalar_traits<S>::is_zero(f.sigma - one)) base = rescale(f, one / f.sigma);
    if (base.K < K_ext) {
        // zero-pad the jet rule above its stored truncation
        for (int k = base.K + 1; k <= K_ext; ++k)
            base.layers.push_back(EvPer<HomogeneousMap<S>>::constant(HomogeneousMap<S>(base.d, k)));
        base.K = K_ext;
    }
    ConjugacyPair<S> out = pair;
    out.K = K_ext;
    out.g.clear();
    out.h.clear();
    for (int k = pair.K + 1; k <= K_ext; ++k)
        detail::solve_degree(base, k, false, pair.horizon, out.h_layers, out.g_layers);
    for (long n = 0; n <= pair.horizon; ++n) {
        Jet<S> h = Jet<S>::identity(f.d, K_ext);
        for (int k = 2; k <= K_ext; ++k) {
            const auto& v = out.h_layers[std::size_t(k - 2)].at(n);
            if (!v.is_zero()) h.set_part(v.scaled(scalar_pow(out.sigma, long(1 - k) * n)));
        }
        out.h.push_back(std::move(h));
        if (n == pair.horizon) break;
        Jet<S> g(f.d, K_ext);
        g.set_part(f.layers[0].at(n));
        for (int k = 2; k <= std::min(K_ext, out.m0); ++k) {
            const auto& v = out.g_layers[std::size_t(k - 2)].at(n);
            if (!v.is_zero()) g.set_part(v.scaled(scalar_pow(out.sigma, long(1 - k) * n + 1)));
        }
        out.g.push_back(std::move(g));
    }
    return out;
}

struct GermResidualReport {
    std::vector<double> r_grid;
    std::vector<double> sup_residual;  // per r: sup over samples and early n
    double slope = 0.0;                // log-log regression slope, about K_ext + 1
};

/// Samples |h_{n+1}(f_n(z)) - g_n(h_n(z))| on spheres |z| = r and fits the
/// log-log slope, the numerical signature of germ conjugacy to order K_ext.
template <class S>
GermResidualReport germ_residual_order(const GermSequence<S>& f, const ConjugacyPair<S>& pair,
                                       const std::vector<double>& r_grid, long n_window = 4,
                                       int dirs = 16) {
    GermResidualReport rep;
    rep.r_grid = r_grid;
    const int d = f.d;
    using C = std::complex<double>;

    auto to_double_jet = [&](const Jet<S>& j) {
        Jet<C> out(j.dim(), j.truncation());
        for (int k = 1; k <= j.truncation(); ++k) {
            HomogeneousMap<C> p(j.dim(), k);
            for (const auto& [key, c] : j.part(k).terms()) p.set(key.alpha, key.comp, scalar_traits<S>::to_c(c));
            out.set_part(p);
        }
        return out;
    };

    std::vector<Jet<C>> fj, gj, hj;
    long N = std::min<long>(n_window, pair.horizon);
    for (long n = 0; n < N; ++n) {
        fj.push_back(to_double_jet(f.jet_at(n).truncated(pair.K)));
        gj.push_back(to_double_jet(pair.g[std::size_t(n)]));
    }
    for (long n = 0; n <= N; ++n) hj.push_back(to_double_jet(pair.h[std::size_t(n)]));

    for (double r : r_grid) {
        double sup = 0.0;
        for (int t = 0; t < dirs; ++t) {
            Vec<C> z(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) {
                double phase = 2.0 * std::numbers::pi * (double(t) / dirs + double(j) / (3.1 * d));
                z[std::size_t(j)] = std::polar(r, phase);
            }
            for (long n = 0; n < N; ++n) {
                Vec<C> lhs = hj[std::size_t(n + 1)].evaluate(fj[std::size_t(n)].evaluate(z));
                Vec<C> rhs = gj[std::size_t(n)].evaluate(hj[std::size_t(n)].evaluate(z));
                double res = 0.0;
                for (int j = 0; j < d; ++j) res = std::max(res, std::abs(lhs[std::size_t(j)] - rhs[std::size_t(j)]));
                sup = std::max(sup, res);
            }
        }
        rep.sup_residual.push_back(sup);
    }

    // least-squares slope of log sup vs log r
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long m = 0;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        if (rep.sup_residual[i] <= 0.0) continue;
        double x = std::log(r_grid[i]), y = std::log(rep.sup_residual[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2) rep.slope = (double(m) * sxy - sx * sy) / (double(m) * sxx - sx * sx);
    return rep;
}

struct SpectralReport {
    double rho_estimate = 0.0;
    double analytic_bound = 0.0;  // lambda^{k+1} mu
    bool within_bound = false;
};

/// Power iteration for the truncation operator (Tu)_n = L_n^{-1} u_{n+1} o L_n
/// acting on horizon-periodic sequences of polynomial maps with parts of
/// degrees k+1..K_trunc.
inline SpectralReport spectral_bound(const EvPer<Mat<std::complex<double>>>& L_rule, int k,
                                     int K_trunc, long horizon, double lambda, double mu,
                                     long iterations = 300) {
    using C = std::complex<double>;
    const int d = L_rule.at(0).size();
    SpectralReport rep;
    rep.analytic_bound = std::pow(lambda, double(k + 1)) * mu;

    std::vector<std::vector<Mat<C>>> op(static_cast<std::size_t>(horizon));  // [n][degree slot]
    for (long n = 0; n < horizon; ++n)
        for (int j = k + 1; j <= K_trunc; ++j)
            op[std::size_t(n)].push_back(conjugacy_matrix(L_rule.at(n), j));

    std::vector<std::vector<Vec<C>>> state(static_cast<std::size_t>(horizon));
    for (long n = 0; n < horizon; ++n)
        for (int j = k + 1; j <= K_trunc; ++j)
            state[std::size_t(n)].push_back(Vec<C>(dim_homogeneous(d, j), C(1.0, 0.3)));

    auto norm_of = [&](const std::vector<std::vector<Vec<C>>>& s) {
        double m = 0.0;
        for (const auto& per_n : s)
            for (const auto& v : per_n) m = std::max(m, vec_norm_inf(v));
        return m;
    };

    double last_ratio = 0.0;
    for (long it = 0; it < iterations; ++it) {
        std::vector<std::vector<Vec<C>>> next(static_cast<std::size_t>(horizon));
        for (long n = 0; n < horizon; ++n) {
            long np = (n + 1) % horizon;
            for (std::size_t s = 0; s < op[std::size_t(n)].size(); ++s)
                next[std::size_t(n)].push_back(op[std::size_t(n)][s].apply(state[std::size_t(np)][s]));
        }
        double nn = norm_of(next);
        if (nn == 0.0) {
            rep.rho_estimate = 0.0;
            rep.within_bound = true;
            return rep;
        }
        last_ratio = nn / norm_of(state);
        for (auto& per_n : next)
            for (auto& v : per_n)
                for (auto& x : v) x /= nn;
        state = std::move(next);
    }
    rep.rho_estimate = last_ratio;
    rep.within_bound = rep.rho_estimate <= rep.analytic_bound * (1.0 + 1e-6);
    return rep;
}

struct TriangularizedCocycle {
    std::vector<Mat<std::complex<double>>> U;  // unitary, size horizon+1
    std::vector<Mat<std::complex<double>>> L;  // lower triangular, size horizon
};

inline Mat<std::complex<double>> adjoint(const Mat<std::complex<double>>& m) {
    Mat<std::complex<double>> a(m.size());
    for (int i = 0; i < m.size(); ++i)
        for (int j = 0; j < m.size(); ++j) a(i, j) = std::conj(m(j, i));
    return a;
}

/// Inductive unitary triangularization L_n = U_{n+1} M_n U_n^*: each step
/// orthonormalizes the columns of M_n U_n^* from last to first, which is the
/// factorization into (unitary) x (lower triangular).
inline TriangularizedCocycle cocycle_triangularize(const std::vector<Mat<std::complex<double>>>& M,
                                                   const Mat<std::complex<double>>& U0) {
    using C = std::complex<double>;
    const int d = U0.size();
    TriangularizedCocycle out;
    out.U.push_back(U0);
    for (const auto& Mn : M) {
        Mat<C> B = Mn * adjoint(out.U.back());
        // Gram-Schmidt on columns, right to left: column j of B lies in the
        // span of the orthonormal vectors q_j..q_d
        std::vector<Vec<C>> q(static_cast<std::size_t>(d), Vec<C>(static_cast<std::size_t>(d)));
        for (int j = d - 1; j >= 0; --j) {
            Vec<C> v(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) v[std::size_t(i)] = B(i, j);
            for (int p = d - 1; p > j; --p) {
                C dot(0.0);
                for (int i = 0; i < d; ++i) dot += std::conj(q[std::size_t(p)][std::size_t(i)]) * v[std::size_t(i)];
                for (int i = 0; i < d; ++i) v[std::size_t(i)] -= dot * q[std::size_t(p)][std::size_t(i)];
            }
            double nrm = 0.0;
            for (int i = 0; i < d; ++i) nrm += std::norm(v[std::size_t(i)]);
            nrm = std::sqrt(nrm);
            if (nrm < 1e-300) throw std::domain_error("cocycle_triangularize: singular factor");
            for (int i = 0; i < d; ++i) q[std::size_t(j)][std::size_t(i)] = v[std::size_t(i)] / nrm;
        }
        Mat<C> Q(d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) Q(i, j) = q[std::size_t(j)][std::size_t(i)];
        Mat<C> Unext = adjoint(Q);
        Mat<C> Ln = Unext * B;
        // clean the structural zeros above the diagonal
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) Ln(i, j) = C(0.0);
        out.U.push_back(Unext);
        out.L.push_back(Ln);
    }
    return out;
}

struct Counterexample4Report {
    std::vector<std::vector<double>> u_abs;  // per starting value, |u_n| over the horizon
    std::vector<bool> growth_ok;             // |u_{s_{2k}}| >= 0.9 * 8^{s_{2k}-s_{2k-1}}
    std::vector<SubexpReport> subexp;
    bool all_non_subexponential = true;
    bool all_growth_ok = true;
};

/// The exact degree-2 coefficient recursion behind the switching germ
/// schedule: u_{n+1} = u_n + 1 on blocks with diagonal (1/4, 1/2) and
/// u_{n+1} = 8 u_n on blocks with diagonal (1/2, 1/4); blocks alternate at
/// the schedule times, starting (and beginning before s_0) with the additive
/// one. Run in exact rational arithmetic for a grid of starting values.
inline Counterexample4Report counterexample_section4(const std::vector<long>& schedule, long horizon,
                                                     const std::vector<mpq_class>& u0_grid,
                                                     double theta_min = 1.5) {
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1])
            throw std::invalid_argument("counterexample_section4: schedule must increase strictly");
    auto is_add = [&](long n) {
        long i = 0;
        while (i < long(schedule.size()) && schedule[std::size_t(i)] <= n) ++i;
        // before s_0: additive; block [s_{j}, s_{j+1}) is additive for even j
        return i == 0 || (i - 1) % 2 == 0;
    };

    Counterexample4Report rep;
    for (const auto& u0 : u0_grid) {
        mpq_class u = u0;
        std::vector<double> abs_seq{std::abs(u.get_d())};
        for (long n = 0; n < horizon; ++n) {
            if (is_add(n))
                u = u + 1;
            else
                u = u * 8;
            abs_seq.push_back(std::abs(u.get_d()));
        }
        bool ok = true;
        for (std::size_t j = 2; j < schedule.size(); j += 2) {
            long s2k = schedule[j], s2k1 = schedule[j - 1];
            if (s2k > horizon) break;
            double need = 0.9 * std::pow(8.0, double(s2k - s2k1));
            if (abs_seq[std::size_t(s2k)] < need) ok = false;
        }
        rep.growth_ok.push_back(ok);
        if (!ok) rep.all_growth_ok = false;
        SubexpReport sr = subexponential_test(abs_seq, theta_min);
        if (sr.is_subexp_consistent) rep.all_non_subexponential = false;
        rep.subexp.push_back(sr);
        rep.u_abs.push_back(std::move(abs_seq));
    }
    return rep;
}

/// The two germ maps generating the recursion above, as exact jets:
/// additive block (z1/4 - z2^2/4, z2/2), multiplicative block
/// (z1/2, z2/4 - z1^2/4).
inline Jet<RatC> counterexample_map(bool additive) {
    Jet<RatC> j(2, 2);
    HomogeneousMap<RatC> lin(2, 1), quad(2, 2);
    MultiIndex e1{1, 0}, e2{0, 1}, sq1{2, 0}, sq2{0, 2};
    if (additive) {
        lin.set(e1, 1, RatC::from_ratio(1, 4));
        lin.set(e2, 2, RatC::from_ratio(1, 2));
        quad.set(sq2, 1, RatC::from_ratio(-1, 4));
    } else {
        lin.set(e1, 1, RatC::from_ratio(1, 2));
        lin.set(e2, 2, RatC::from_ratio(1, 4));
        quad.set(sq1, 2, RatC::from_ratio(-1, 4));
    }
    j.set_part(lin);
    j.set_part(quad);
    return j;
}

template <class S>
struct BasinChartReport {
    bool ord_ok = false;
    OrdReport ord;
    int m0 = 0;
    double theta = 0.0;
    ConjugacyPair<S> pair;
    GermResidualReport germ;
    IterateBoundReport triangular;
};

/// End-to-end pipeline: diagonal decay audit, theta selection with margin,
/// rescaling, degree-by-degree conjugacy, higher-degree extension with
/// residual-order measurement, and the contraction audit of the triangular
/// target dynamics.
template <class S>
BasinChartReport<S> basin_chart(const GermSequence<S>& f, int K, int K_ext, long N,
                                const std::vector<double>& r_grid) {
    BasinChartReport<S> rep;
    const double lambda = f.decay.lambda, mu = f.decay.mu;

    long ord_horizon = std::max<long>(2 * N, 32);
    std::vector<std::vector<double>> diags;
    for (long n = 0; n < ord_horizon; ++n) {
        Mat<S> L = f.linear_at(n);
        std::vector<double> row;
        for (int i = 0; i < f.d; ++i) row.push_back(scalar_traits<S>::abs(L(i, i)));
        diags.push_back(std::move(row));
    }
    rep.ord = check_ord(diags, lambda, {1.05, 1.25, 1.5, 2.0});
    rep.ord_ok = rep.ord.consistent;
    if (!rep.ord_ok) return rep;

    rep.m0 = select_m0(lambda, mu);
    // largest theta in (1, 1/lambda) with theta^{m0} lambda^{m0+1} mu <= 0.95,
    // snapped down to a 64th so it stays an exact scalar
    double lo = 1.0, hi = 1.0 / lambda;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (std::pow(mid, double(rep.m0)) * std::pow(lambda, double(rep.m0 + 1)) * mu <= 0.95 ? lo : hi) = mid;
    }
    long num = std::max<long>(65, long(std::floor(lo * 64.0)));
    rep.theta = double(num) / 64.0;
    S theta = scalar_traits<S>::from_ratio(num, 64);

    GermSequence<S> ft = rescale(f, theta);
    rep.pair = formal_conjugate(ft, rep.m0, K, N);
    if (K_ext > K) rep.pair = extend_conjugacy(ft, rep.pair, K_ext);
    rep.germ = germ_residual_order(ft, rep.pair, r_grid);

    // contraction audit of the triangular targets over the horizon
    std::vector<SpecialTriangularAuto<std::complex<double>>> gs;
    for (long n = 0; n < N; ++n) {
        const Jet<S>& gj = rep.pair.g[std::size_t(n)];
        Jet<std::complex<double>> gd(f.d, gj.truncation());
        for (int k = 1; k <= gj.truncation(); ++k) {
            HomogeneousMap<std::complex<double>> p(f.d, k);
            for (const auto& [key, c] : gj.part(k).terms()) p.set(key.alpha, key.comp, scalar_traits<S>::to_c(c));
            gd.set_part(p);
        }
        gs.emplace_back(gd);
    }
    auto tail = gs.back();
    EvPer<SpecialTriangularAuto<std::complex<double>>> grule(std::move(gs), {tail});
    std::vector<Vec<std::complex<double>>> samples;
    for (int t = 0; t < 12; ++t) {
        Vec<std::complex<double>> z(std::size_t(f.d));
        for (int j = 0; j < f.d; ++j)
            z[std::size_t(j)] = std::polar(0.5 + 0.04 * t, 0.7 * t + 1.3 * j);
        samples.push_back(std::move(z));
    }
    double glambda = rep.theta * lambda;
    rep.triangular = iterate_bound_check(grule, samples, std::min<long>(N, 30), glambda);
    return rep;
}

}  // namespace basin

#endif
