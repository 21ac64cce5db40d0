#ifndef BASIN_CONTROL_HPP
#define BASIN_CONTROL_HPP

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "basin/linalg.hpp"

namespace basin {

/// Eventually periodic sequence rule: explicit head, then a repeating cycle.
/// Every tail query is computable, which is what lets series be summed in
/// closed form.
template <class T>
struct EvPer {
    std::vector<T> head;
    std::vector<T> cycle;  // nonempty

    EvPer() = default;
    EvPer(std::vector<T> h, std::vector<T> c) : head(std::move(h)), cycle(std::move(c)) {
        if (cycle.empty()) throw std::invalid_argument("EvPer: empty cycle");
    }
    static EvPer constant(T v) { return EvPer({}, {std::move(v)}); }

    const T& at(long n) const {
        if (n < 0) throw std::out_of_range("EvPer: negative index");
        if (n < long(head.size())) return head[std::size_t(n)];
        return cycle[std::size_t((n - long(head.size())) % long(cycle.size()))];
    }
    long preperiod() const { return long(head.size()); }
    long period() const { return long(cycle.size()); }
};

template <class S>
struct CocycleRule {
    EvPer<Mat<S>> A;
    EvPer<Mat<S>> Ainv;  // entry-wise inverses of A, same shape

    CocycleRule() = default;
    explicit CocycleRule(EvPer<Mat<S>> a) : A(std::move(a)) {
        std::vector<Mat<S>> h, c;
        for (const auto& m : A.head) h.push_back(inverse(m));
        for (const auto& m : A.cycle) c.push_back(inverse(m));
        Ainv = EvPer<Mat<S>>(std::move(h), std::move(c));
    }

    int dim() const { return A.cycle[0].size(); }
    const Mat<S>& at(long n) const { return A.at(n); }
    const Mat<S>& inv_at(long n) const { return Ainv.at(n); }

    /// Composite A_{n,m} = A_{n-1} ... A_m.
    Mat<S> composite(long n, long m) const {
        Mat<S> r = Mat<S>::identity(dim());
        for (long j = m; j < n; ++j) r = at(j) * r;
        return r;
    }
};

template <class S>
using VecRule = EvPer<Vec<S>>;

struct DecayRow {
    double theta = 0.0;  // > 1
    double C = 0.0;
    double alpha = 0.0;  // in (0,1): |A_{n+l,n}^{-1}| <= C theta^n alpha^l
};

struct DecayData {
    double c = 1.0;
    double lambda = 0.5;  // in (0,1)
    double mu = 2.0;      // > 1
    std::vector<DecayRow> theta_table;
};

template <class S>
struct ControlSolution {
    std::vector<Vec<S>> u;           // indices 0..N
    std::vector<long> tail_lengths;  // series truncation length per n (0 = closed form)
    std::vector<double> tail_bound;  // certified remainder per n (0 = exact)
};

namespace detail {

template <class S>
bool forward_contracting(const Mat<S>& M) {
    // crude but sufficient spectral check: squared powers must shrink
    Mat<S> P = M;
    for (int i = 0; i < 24; ++i) {
        double n = op_norm_inf(P);
        if (n < 1.0) return true;
        if (n > 1e100) return false;
        P = P * P;
    }
    return op_norm_inf(P) < 1.0;
}

}  // namespace detail

/// The unique subexponential solution of u_{n+1} = A_n u_n + b_n, for
/// eventually periodic data, in closed form. Over one period beyond the
/// preperiod the series groups into a geometric matrix series, so the anchor
/// value is u_q = -(I - M)^{-1} S with M the inverse composite over one
/// period and S the one-period partial sum; the rest follows by running the
/// recursion forwards and backwards. Residuals are exactly zero.
template <class S>
ControlSolution<S> solve_subexp_exact(const CocycleRule<S>& A, const VecRule<S>& b, long N) {
    const int dim = A.dim();
    const long q = std::max(A.A.preperiod(), b.preperiod());
    const long P = std::lcm(A.A.period(), b.period());

    // M = A_{q+P,q}^{-1} = A_q^{-1} A_{q+1}^{-1} ... A_{q+P-1}^{-1}
    Mat<S> M = Mat<S>::identity(dim);
    Vec<S> Ssum(std::size_t(dim), scalar_traits<S>::zero());
    Mat<S> acc = Mat<S>::identity(dim);
    for (long l = 1; l <= P; ++l) {
        acc = acc * A.inv_at(q + l - 1);
        Vec<S> t = acc.apply(b.at(q + l - 1));
        for (int i = 0; i < dim; ++i) Ssum[std::size_t(i)] += t[std::size_t(i)];
    }
    M = acc;
    if (!detail::forward_contracting(M))
        throw std::domain_error("solve_subexp: inverse cocycle not contracting over a period");

    Mat<S> resolvent = inverse(Mat<S>::identity(dim) - M);
    Vec<S> uq = resolvent.apply(Ssum);
    for (auto& x : uq) x = -x;

    ControlSolution<S> sol;
    sol.u.assign(std::size_t(N) + 1, Vec<S>(std::size_t(dim), scalar_traits<S>::zero()));
    sol.tail_lengths.assign(std::size_t(N) + 1, 0);
    sol.tail_bound.assign(std::size_t(N) + 1, 0.0);

    const long anchor = std::min(q, N);
    // recompute the anchor if it had to be clamped
    Vec<S> uq_at = uq;
    if (anchor < q) {
        // walk backwards from q to anchor
        for (long n = q - 1; n >= anchor; --n) {
            Vec<S> t = uq_at;
            for (int i = 0; i < dim; ++i) t[std::size_t(i)] -= b.at(n)[std::size_t(i)];
            uq_at = A.inv_at(n).apply(t);
        }
    }
    sol.u[std::size_t(anchor)] = uq_at;
    for (long n = anchor + 1; n <= N; ++n) {
        Vec<S> t = A.at(n - 1).apply(sol.u[std::size_t(n - 1)]);
        for (int i = 0; i < dim; ++i) t[std::size_t(i)] += b.at(n - 1)[std::size_t(i)];
        sol.u[std::size_t(n)] = t;
    }
    for (long n = anchor - 1; n >= 0; --n) {
        Vec<S> t = sol.u[std::size_t(n) + 1];
        for (int i = 0; i < dim; ++i) t[std::size_t(i)] -= b.at(n)[std::size_t(i)];
        sol.u[std::size_t(n)] = A.inv_at(n).apply(t);
    }
    return sol;
}

/// Truncated-series solver with a certified tail. Picks the decay row
/// minimizing alpha(theta) * omega (omega = growth witness of b) and chooses
/// per-n truncation lengths so the geometric remainder stays below tol.
template <class S>
ControlSolution<S> solve_subexp_series(const CocycleRule<S>& A, const VecRule<S>& b,
                                       const DecayData& decay, long N, double tol,
                                       double b_bound = -1.0, double omega = 1.0) {
    if (decay.theta_table.empty()) throw std::invalid_argument("solve_subexp: empty decay table");
    const int dim = A.dim();
    if (b_bound < 0.0) {
        b_bound = 0.0;
        long span = b.preperiod() + b.period();
        for (long n = 0; n < span; ++n) b_bound = std::max(b_bound, vec_norm_inf(b.at(n)));
    }

    const DecayRow* row = nullptr;
    for (const auto& r : decay.theta_table)
        if (r.alpha * omega < 1.0 && (!row || r.alpha * omega < row->alpha * omega)) row = &r;
    if (!row) throw std::domain_error("solve_subexp: no decay row certifies series convergence");

    ControlSolution<S> sol;
    sol.u.assign(std::size_t(N) + 1, Vec<S>(std::size_t(dim), scalar_traits<S>::zero()));
    sol.tail_lengths.assign(std::size_t(N) + 1, 0);
    sol.tail_bound.assign(std::size_t(N) + 1, 0.0);

    for (long n = 0; n <= N; ++n) {
        const double aw = row->alpha * omega;
        double pref = row->C * b_bound * std::pow(row->theta * omega, double(n)) / (1.0 - aw);
        long L = 1;
        while (pref * std::pow(aw, double(L + 1)) > tol && L < 4000) ++L;
        Mat<S> acc = Mat<S>::identity(dim);
        Vec<S> sum(std::size_t(dim), scalar_traits<S>::zero());
        for (long l = 1; l <= L; ++l) {
            acc = acc * A.inv_at(n + l - 1);
            Vec<S> t = acc.apply(b.at(n + l - 1));
            for (int i = 0; i < dim; ++i) sum[std::size_t(i)] += t[std::size_t(i)];
        }
        for (auto& x : sum) x = -x;
        sol.u[std::size_t(n)] = sum;
        sol.tail_lengths[std::size_t(n)] = L;
        sol.tail_bound[std::size_t(n)] = pref * std::pow(aw, double(L + 1));
    }
    return sol;
}

/// Controlled solve modulo an invariant coordinate subspace V: solve the
/// quotient problem on the complementary coordinates, lift with zero
/// V-coordinates, and read off the control v_n = u_{n+1} - A_n u_n - b_n,
/// which lands in V.
template <class S>
struct ControlledSolution {
    ControlSolution<S> u;
    std::vector<Vec<S>> v;  // indices 0..N-1, supported on V
};

template <class S>
ControlledSolution<S> solve_with_control(const CocycleRule<S>& A, const VecRule<S>& b,
                                         const std::vector<int>& V_coords, long N) {
    const int dim = A.dim();
    std::vector<bool> inV(std::size_t(dim), false);
    for (int j : V_coords) inV[std::size_t(j)] = true;
    std::vector<int> Q;  // complement coordinates, quotient basis
    for (int j = 0; j < dim; ++j)
        if (!inV[std::size_t(j)]) Q.push_back(j);

    // invariance audit over one full period of the rule
    long span = A.A.preperiod() + A.A.period();
    for (long n = 0; n < span; ++n)
        for (int i : Q)
            for (int j : V_coords)
                if (!scalar_traits<S>::is_zero(A.at(n)(i, j)))
                    throw std::domain_error("solve_with_control: A_n does not preserve V");

    ControlledSolution<S> out;
    out.u.u.assign(std::size_t(N) + 1, Vec<S>(std::size_t(dim), scalar_traits<S>::zero()));
    out.u.tail_lengths.assign(std::size_t(N) + 1, 0);
    out.u.tail_bound.assign(std::size_t(N) + 1, 0.0);

    if (!Q.empty()) {
        const int qd = int(Q.size());
        auto restrict_mat = [&](const Mat<S>& m) {
            Mat<S> r(qd);
            for (int i = 0; i < qd; ++i)
                for (int j = 0; j < qd; ++j) r(i, j) = m(Q[std::size_t(i)], Q[std::size_t(j)]);
            return r;
        };
        auto restrict_vec = [&](const Vec<S>& x) {
            Vec<S> r(static_cast<std::size_t>(qd));
            for (int i = 0; i < qd; ++i) r[std::size_t(i)] = x[std::size_t(Q[std::size_t(i)])];
            return r;
        };
        std::vector<Mat<S>> Ah, Ac;
        for (const auto& m : A.A.head) Ah.push_back(restrict_mat(m));
        for (const auto& m : A.A.cycle) Ac.push_back(restrict_mat(m));
        CocycleRule<S> Aq(EvPer<Mat<S>>(std::move(Ah), std::move(Ac)));
        std::vector<Vec<S>> bh, bc;
        for (const auto& x : b.head) bh.push_back(restrict_vec(x));
        for (const auto& x : b.cycle) bc.push_back(restrict_vec(x));
        VecRule<S> bq(std::move(bh), std::move(bc));

        ControlSolution<S> qsol = solve_subexp_exact(Aq, bq, N);
        for (long n = 0; n <= N; ++n)
            for (int i = 0; i < qd; ++i)
                out.u.u[std::size_t(n)][std::size_t(Q[std::size_t(i)])] = qsol.u[std::size_t(n)][std::size_t(i)];
    }

    out.v.assign(std::size_t(N), Vec<S>(std::size_t(dim), scalar_traits<S>::zero()));
    for (long n = 0; n < N; ++n) {
        Vec<S> Au = A.at(n).apply(out.u.u[std::size_t(n)]);
        for (int i = 0; i < dim; ++i)
            out.v[std::size_t(n)][std::size_t(i)] = out.u.u[std::size_t(n) + 1][std::size_t(i)] -
                                                    Au[std::size_t(i)] - b.at(n)[std::size_t(i)];
        for (int i : Q)
            if (!scalar_traits<S>::is_zero(out.v[std::size_t(n)][std::size_t(i)]))
                throw std::logic_error("solve_with_control: control escaped V");
    }
    return out;
}

struct SubexpReport {
    bool is_subexp_consistent = true;
    double fitted_rate = 0.0;  // limsup estimate of log|u_n| / n
};

/// Fits the exponential growth rate of a norm sequence and compares it with
/// the smallest admissible theta. All-zero sequences are trivially consistent.
inline SubexpReport subexponential_test(const std::vector<double>& norms, double theta_min = 1.5) {
    SubexpReport rep;
    const long N = long(norms.size());
    if (N < 2) return rep;
    double rate = -1e300;
    bool any = false;
    for (long n = N / 2; n < N; ++n) {
        if (norms[std::size_t(n)] <= 0.0) continue;
        any = true;
        rate = std::max(rate, std::log(norms[std::size_t(n)]) / double(n));
    }
    if (!any) return rep;
    rep.fitted_rate = rate;
    rep.is_subexp_consistent = rate <= std::log(theta_min);
    return rep;
}

struct Remark12Report {
    std::vector<double> switch_values;   // |u| sampled at the switching times
    std::vector<double> doubling_ratio;  // |u_end - 1| / |u_start - 1| per doubling block
    bool doubling_exact = true;          // ratios equal 2^(block length) exactly
};

/// Alternating halving / affine-doubling scalar system: f_n(u) = u/2 on even
/// blocks of the schedule and f_n(u) = 2u - 1 on odd blocks. The fixed point
/// of the doubling map is 1, and distances from it double each step.
inline Remark12Report remark12_demo(const std::vector<long>& schedule, double u0) {
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i] <= schedule[i - 1])
            throw std::invalid_argument("remark12_demo: schedule must increase strictly");
    Remark12Report rep;
    double u = u0;
    long n = 0;
    bool halving = true;
    long prev = 0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        double start = u;
        for (; n < schedule[s]; ++n) u = halving ? u / 2.0 : 2.0 * u - 1.0;
        rep.switch_values.push_back(std::abs(u));
        if (!halving) {
            long len = schedule[s] - prev;
            double expect = std::ldexp(1.0, int(len));
            double ratio = (start == 1.0) ? expect : std::abs(u - 1.0) / std::abs(start - 1.0);
            rep.doubling_ratio.push_back(ratio);
            if (ratio != expect) rep.doubling_exact = false;
        }
        prev = schedule[s];
        halving = !halving;
    }
    return rep;
}

}  // namespace basin

#endif
