#ifndef BASIN_JETS_HPP
#define BASIN_JETS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "basin/linalg.hpp"
#include "basin/multiindex.hpp"
#include "basin/scalar.hpp"

namespace basin {

struct TermKey {
    MultiIndex alpha;
    int comp;  // 1-based component index

    bool operator<(const TermKey& o) const {
        if (comp != o.comp) return comp < o.comp;
        return colex_less(alpha, o.alpha);
    }
    bool operator==(const TermKey& o) const { return comp == o.comp && alpha == o.alpha; }
};

enum class Triangularity { strictly_triangular, triangular, neither };

/// Scalar polynomial in d variables, graded by degree, truncated at K.
/// Internal workhorse for substitution-based composition.
template <class S>
struct ScalarPoly {
    int d = 0;
    int K = 0;
    // degs[k] holds the degree-k monomials
    std::vector<std::map<MultiIndex, S, bool (*)(const MultiIndex&, const MultiIndex&)>> degs;

    ScalarPoly(int dim, int trunc) : d(dim), K(trunc) {
        degs.assign(std::size_t(K) + 1,
                    std::map<MultiIndex, S, bool (*)(const MultiIndex&, const MultiIndex&)>(colex_less));
    }

    void add(const MultiIndex& a, const S& c) {
        int k = mi_degree(a);
        if (k > K) return;
        auto& m = degs[std::size_t(k)];
        auto it = m.find(a);
        if (it == m.end()) {
            if (!scalar_traits<S>::is_zero(c)) m.emplace(a, c);
        } else {
            it->second += c;
            if (scalar_traits<S>::is_zero(it->second)) m.erase(it);
        }
    }

    static ScalarPoly one(int dim, int trunc) {
        ScalarPoly p(dim, trunc);
        p.add(MultiIndex(dim, 0), scalar_traits<S>::one());
        return p;
    }

    ScalarPoly mul(const ScalarPoly& o) const {
        ScalarPoly r(d, K);
        for (int ka = 0; ka <= K; ++ka) {
            if (degs[std::size_t(ka)].empty()) continue;
            for (int kb = 0; ka + kb <= K; ++kb) {
                for (const auto& [a, ca] : degs[std::size_t(ka)])
                    for (const auto& [b, cb] : o.degs[std::size_t(kb)]) {
                        MultiIndex sum(d);
                        for (int j = 0; j < d; ++j) sum[j] = a[j] + b[j];
                        r.add(sum, ca * cb);
                    }
            }
        }
        return r;
    }
};

/// Degree-k homogeneous polynomial endomorphism of C^d, sparse on the
/// monomial basis z^alpha e_i (colex within each component).
template <class S>
class HomogeneousMap {
  public:
    HomogeneousMap() = default;
    HomogeneousMap(int d, int k) : d_(d), k_(k) {
        if (d < 1 || k < 1) throw std::invalid_argument("HomogeneousMap: d,k must be positive");
    }

    int dim() const { return d_; }
    int degree() const { return k_; }
    bool is_zero() const { return c_.empty(); }
    const std::map<TermKey, S>& terms() const { return c_; }

    void set(const MultiIndex& alpha, int comp, const S& c) {
        check_index(alpha, comp);
        if (scalar_traits<S>::is_zero(c))
            c_.erase(TermKey{alpha, comp});
        else
            c_[TermKey{alpha, comp}] = c;
    }

    void add(const MultiIndex& alpha, int comp, const S& c) {
        check_index(alpha, comp);
        TermKey key{alpha, comp};
        auto it = c_.find(key);
        if (it == c_.end()) {
            if (!scalar_traits<S>::is_zero(c)) c_.emplace(key, c);
        } else {
            it->second += c;
            if (scalar_traits<S>::is_zero(it->second)) c_.erase(it);
        }
    }

    S coeff(const MultiIndex& alpha, int comp) const {
        auto it = c_.find(TermKey{alpha, comp});
        return it == c_.end() ? scalar_traits<S>::zero() : it->second;
    }

    friend HomogeneousMap operator+(const HomogeneousMap& a, const HomogeneousMap& b) {
        a.check_shape(b);
        HomogeneousMap r = a;
        for (const auto& [key, c] : b.c_) r.add(key.alpha, key.comp, c);
        return r;
    }

    friend HomogeneousMap operator-(const HomogeneousMap& a, const HomogeneousMap& b) {
        a.check_shape(b);
        HomogeneousMap r = a;
        for (const auto& [key, c] : b.c_) r.add(key.alpha, key.comp, -c);
        return r;
    }

    HomogeneousMap scaled(const S& f) const {
        HomogeneousMap r(d_, k_);
        for (const auto& [key, c] : c_) r.set(key.alpha, key.comp, c * f);
        return r;
    }

    bool operator==(const HomogeneousMap& o) const {
        return d_ == o.d_ && k_ == o.k_ && c_ == o.c_;
    }

    /// Left multiplication by a matrix: z -> M p(z).
    HomogeneousMap left_mul(const Mat<S>& m) const {
        if (m.size() != d_) throw std::invalid_argument("left_mul: dimension mismatch");
        HomogeneousMap r(d_, k_);
        for (const auto& [key, c] : c_)
            for (int i = 0; i < d_; ++i) {
                if (scalar_traits<S>::is_zero(m(i, key.comp - 1))) continue;
                r.add(key.alpha, i + 1, m(i, key.comp - 1) * c);
            }
        return r;
    }

    Vec<S> evaluate(const Vec<S>& z) const {
        if (int(z.size()) != d_) throw std::invalid_argument("evaluate: dimension mismatch");
        // cache z_j^e once per variable
        std::vector<std::vector<S>> pw(static_cast<std::size_t>(d_));
        for (int j = 0; j < d_; ++j) {
            pw[std::size_t(j)].resize(std::size_t(k_) + 1, scalar_traits<S>::one());
            for (int e = 1; e <= k_; ++e) pw[std::size_t(j)][std::size_t(e)] = pw[std::size_t(j)][std::size_t(e - 1)] * z[std::size_t(j)];
        }
        Vec<S> out(std::size_t(d_), scalar_traits<S>::zero());
        for (const auto& [key, c] : c_) {
            S t = c;
            for (int j = 0; j < d_; ++j)
                if (key.alpha[std::size_t(j)] > 0) t *= pw[std::size_t(j)][std::size_t(key.alpha[std::size_t(j)])];
            out[std::size_t(key.comp - 1)] += t;
        }
        return out;
    }

    double coeff_max() const {
        double best = 0.0;
        for (const auto& [key, c] : c_) best = std::max(best, scalar_traits<S>::abs(c));
        return best;
    }

  private:
    void check_index(const MultiIndex& alpha, int comp) const {
        if (int(alpha.size()) != d_ || mi_degree(alpha) != k_ || comp < 1 || comp > d_)
            throw std::invalid_argument("HomogeneousMap: bad term index");
    }
    void check_shape(const HomogeneousMap& o) const {
        if (d_ != o.d_ || k_ != o.k_) throw std::invalid_argument("HomogeneousMap: shape mismatch");
    }

    int d_ = 0, k_ = 0;
    std::map<TermKey, S> c_;
};

/// Truncated formal series: homogeneous parts of degrees 1..K.
template <class S>
class Jet {
  public:
    Jet() = default;
    Jet(int d, int K) : d_(d), K_(K) {
        if (d < 1 || K < 1) throw std::invalid_argument("Jet: d,K must be positive");
        parts_.assign(std::size_t(K) + 1, HomogeneousMap<S>());
    }

    static Jet identity(int d, int K) {
        Jet j(d, K);
        HomogeneousMap<S> lin(d, 1);
        for (int i = 0; i < d; ++i) {
            MultiIndex a(std::size_t(d), 0);
            a[std::size_t(i)] = 1;
            lin.set(a, i + 1, scalar_traits<S>::one());
        }
        j.set_part(lin);
        return j;
    }

    static Jet from_linear(const Mat<S>& m, int K) {
        Jet j(m.size(), K);
        HomogeneousMap<S> lin(m.size(), 1);
        for (int i = 0; i < m.size(); ++i)
            for (int v = 0; v < m.size(); ++v) {
                if (scalar_traits<S>::is_zero(m(i, v))) continue;
                MultiIndex a(std::size_t(m.size()), 0);
                a[std::size_t(v)] = 1;
                lin.set(a, i + 1, m(i, v));
            }
        j.set_part(lin);
        return j;
    }

    int dim() const { return d_; }
    int truncation() const { return K_; }

    const HomogeneousMap<S>& part(int k) const {
        if (k < 1 || k > K_) throw std::out_of_range("Jet::part: degree out of range");
        if (parts_[std::size_t(k)].dim() == 0) zero_part(k);
        return parts_[std::size_t(k)];
    }

    void set_part(const HomogeneousMap<S>& p) {
        if (p.dim() != d_ || p.degree() < 1 || p.degree() > K_)
            throw std::invalid_argument("Jet::set_part: shape mismatch");
        parts_[std::size_t(p.degree())] = p;
    }

    Mat<S> linear_part() const {
        Mat<S> m(d_);
        const auto& lin = part(1);
        for (const auto& [key, c] : lin.terms())
            for (int j = 0; j < d_; ++j)
                if (key.alpha[std::size_t(j)] == 1) m(key.comp - 1, j) = c;
        return m;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        a.check_shape(b);
        Jet r = a;
        for (int k = 1; k <= a.K_; ++k) r.set_part(a.part(k) + b.part(k));
        return r;
    }

    friend Jet operator-(const Jet& a, const Jet& b) {
        a.check_shape(b);
        Jet r = a;
        for (int k = 1; k <= a.K_; ++k) r.set_part(a.part(k) - b.part(k));
        return r;
    }

    bool operator==(const Jet& o) const {
        if (d_ != o.d_ || K_ != o.K_) return false;
        for (int k = 1; k <= K_; ++k)
            if (!(part(k) == o.part(k))) return false;
        return true;
    }

    bool is_zero() const {
        for (int k = 1; k <= K_; ++k)
            if (!part(k).is_zero()) return false;
        return true;
    }

    Jet truncated(int K) const {
        Jet r(d_, K);
        for (int k = 1; k <= std::min(K, K_); ++k) r.set_part(part(k));
        return r;
    }

    Vec<S> evaluate(const Vec<S>& z) const {
        Vec<S> out(std::size_t(d_), scalar_traits<S>::zero());
        for (int k = 1; k <= K_; ++k) {
            if (part(k).is_zero()) continue;
            Vec<S> v = part(k).evaluate(z);
            for (int i = 0; i < d_; ++i) out[std::size_t(i)] += v[std::size_t(i)];
        }
        return out;
    }

    int max_degree() const {
        for (int k = K_; k >= 1; --k)
            if (!part(k).is_zero()) return k;
        return 0;
    }

  private:
    void check_shape(const Jet& o) const {
        if (d_ != o.d_ || K_ != o.K_) throw std::invalid_argument("Jet: shape mismatch");
    }
    void zero_part(int k) const { parts_[std::size_t(k)] = HomogeneousMap<S>(d_, k); }

    int d_ = 0, K_ = 0;
    mutable std::vector<HomogeneousMap<S>> parts_;  // index = degree, slot 0 unused
};

template <class S>
HomogeneousMap<S> homogeneous_part(const Jet<S>& j, int k) {
    return j.part(k);
}

namespace detail {

template <class S>
ScalarPoly<S> component_poly(const Jet<S>& j, int comp, int K) {
    ScalarPoly<S> p(j.dim(), K);
    for (int k = 1; k <= std::min(K, j.truncation()); ++k)
        for (const auto& [key, c] : j.part(k).terms())
            if (key.comp == comp) p.add(key.alpha, c);
    return p;
}

template <class S>
ScalarPoly<S> component_poly(const HomogeneousMap<S>& h, int comp, int K) {
    ScalarPoly<S> p(h.dim(), K);
    for (const auto& [key, c] : h.terms())
        if (key.comp == comp) p.add(key.alpha, c);
    return p;
}

}  // namespace detail

/// Formal composition h o f truncated at degree K. Computed by monomial
/// substitution: each monomial of h becomes a product of powers of the
/// components of f, truncated degree by degree.
template <class S>
Jet<S> compose_jets(const Jet<S>& h, const Jet<S>& f, int K) {
    if (h.dim() != f.dim()) throw std::invalid_argument("compose_jets: dimension mismatch");
    const int d = h.dim();
    Jet<S> out(d, K);

    // powers of the components of f, cached on demand
    std::vector<std::vector<ScalarPoly<S>>> pw(static_cast<std::size_t>(d));
    auto power = [&](int var, int e) -> const ScalarPoly<S>& {
        auto& slot = pw[std::size_t(var)];
        if (slot.empty()) slot.push_back(ScalarPoly<S>::one(d, K));
        while (int(slot.size()) <= e) {
            if (slot.size() == 1)
                slot.push_back(detail::component_poly(f, var + 1, K));
            else
                slot.push_back(slot.back().mul(slot[1]));
        }
        return slot[std::size_t(e)];
    };

    std::vector<HomogeneousMap<S>> parts;
    parts.reserve(std::size_t(K));
    for (int k = 1; k <= K; ++k) parts.emplace_back(d, k);

    for (int j = 1; j <= std::min(K, h.truncation()); ++j) {
        for (const auto& [key, c] : h.part(j).terms()) {
            ScalarPoly<S> prod = ScalarPoly<S>::one(d, K);
            bool first = true;
            for (int v = 0; v < d; ++v) {
                if (key.alpha[std::size_t(v)] == 0) continue;
                const ScalarPoly<S>& q = power(v, key.alpha[std::size_t(v)]);
                prod = first ? q : prod.mul(q);
                first = false;
            }
            for (int k = j; k <= K; ++k)  // min degree of the product is j
                for (const auto& [a, pc] : prod.degs[std::size_t(k)])
                    parts[std::size_t(k - 1)].add(a, key.comp, c * pc);
        }
    }
    for (auto& p : parts) out.set_part(p);
    return out;
}

/// Symmetric multilinear bracket p[q_1,...,q_k] of a k-homogeneous map,
/// evaluated at homogeneous (or linear) polynomial arguments. Direct
/// symmetrization; meant for oracles and for the representation-formula sum,
/// where k stays small.
template <class S>
HomogeneousMap<S> multilinear_bracket(const HomogeneousMap<S>& p,
                                      const std::vector<HomogeneousMap<S>>& args) {
    const int d = p.dim(), k = p.degree();
    if (int(args.size()) != k) throw std::invalid_argument("multilinear_bracket: need k arguments");
    int deg_out = 0;
    for (const auto& q : args) {
        if (q.dim() != d) throw std::invalid_argument("multilinear_bracket: dimension mismatch");
        deg_out += q.degree();
    }
    HomogeneousMap<S> out(d, deg_out);

    std::vector<int> perm(static_cast<std::size_t>(k));
    long kfact = 1;
    for (int i = 0; i < k; ++i) {
        perm[std::size_t(i)] = i;
        kfact *= (i + 1);
    }
    const S inv_kfact = scalar_traits<S>::one() / scalar_traits<S>::from_int(kfact);

    for (const auto& [key, c] : p.terms()) {
        // coordinate multiset of the monomial, with multiplicities
        std::vector<int> coords;
        for (int j = 0; j < d; ++j)
            for (int t = 0; t < key.alpha[std::size_t(j)]; ++t) coords.push_back(j + 1);
        std::vector<int> pv = perm;
        do {
            // product over slots of component coords[s] of args[pv[s]]
            ScalarPoly<S> prod = ScalarPoly<S>::one(d, deg_out);
            for (int s = 0; s < k; ++s) {
                ScalarPoly<S> f = detail::component_poly(args[std::size_t(pv[std::size_t(s)])],
                                                         coords[std::size_t(s)], deg_out);
                prod = prod.mul(f);
            }
            for (const auto& [a, pc] : prod.degs[std::size_t(deg_out)])
                out.add(a, key.comp, c * inv_kfact * pc);
        } while (std::next_permutation(pv.begin(), pv.end()));
    }
    return out;
}

struct NormSandwich {
    double coeff_max = 0.0;
    double sampled_sup = 0.0;
    double upper_bound = 0.0;
};

/// Coefficient norm, a sampled lower estimate of the sup norm on the closed
/// unit polydisk (max over a grid on the boundary torus |z_j|=1), and the
/// Cauchy upper bound binom(k+d-1,d-1) * coeff_max.
template <class S>
NormSandwich norms(const HomogeneousMap<S>& p, int grid_per_angle = 64) {
    if (grid_per_angle < 1) throw std::invalid_argument("norms: empty grid");
    NormSandwich out;
    out.coeff_max = p.coeff_max();
    out.upper_bound = double(binomial(p.degree() + p.dim() - 1, p.dim() - 1)) * out.coeff_max;
    if (p.is_zero()) return out;

    const int d = p.dim();
    // convert once to double coefficients
    HomogeneousMap<std::complex<double>> pd(d, p.degree());
    for (const auto& [key, c] : p.terms()) pd.set(key.alpha, key.comp, scalar_traits<S>::to_c(c));

    std::vector<int> idx(std::size_t(d), 0);
    const double step = 2.0 * std::numbers::pi / grid_per_angle;
    while (true) {
        Vec<std::complex<double>> z(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j)
            z[std::size_t(j)] = std::polar(1.0, step * idx[std::size_t(j)]);
        double v = vec_norm_inf(pd.evaluate(z));
        out.sampled_sup = std::max(out.sampled_sup, v);
        int j = 0;
        while (j < d && ++idx[std::size_t(j)] == grid_per_angle) idx[std::size_t(j++)] = 0;
        if (j == d) break;
    }
    return out;
}

template <class S>
Triangularity triangularity(const HomogeneousMap<S>& p) {
    bool strict = true, tri = true;
    for (const auto& [key, c] : p.terms()) {
        if (!in_strict_triangle(key.alpha, key.comp)) strict = false;
        if (!in_triangle(key.alpha, key.comp)) tri = false;
    }
    if (strict) return Triangularity::strictly_triangular;
    return tri ? Triangularity::triangular : Triangularity::neither;
}

template <class S>
Triangularity triangularity(const Jet<S>& j) {
    bool strict = true, tri = true;
    for (int k = 1; k <= j.truncation(); ++k) {
        Triangularity t = triangularity(j.part(k));
        if (t != Triangularity::strictly_triangular) strict = false;
        if (t == Triangularity::neither) tri = false;
    }
    if (strict) return Triangularity::strictly_triangular;
    return tri ? Triangularity::triangular : Triangularity::neither;
}

/// Split p into its T_k part and the complement, p = t + q.
template <class S>
std::pair<HomogeneousMap<S>, HomogeneousMap<S>> project_T(const HomogeneousMap<S>& p) {
    HomogeneousMap<S> t(p.dim(), p.degree()), q(p.dim(), p.degree());
    for (const auto& [key, c] : p.terms()) {
        if (in_strict_triangle(key.alpha, key.comp))
            t.set(key.alpha, key.comp, c);
        else
            q.set(key.alpha, key.comp, c);
    }
    return {t, q};
}

}  // namespace basin

#endif
