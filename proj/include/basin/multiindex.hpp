#ifndef BASIN_MULTIINDEX_HPP
#define BASIN_MULTIINDEX_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace basin {

using MultiIndex = std::vector<int>;  // exponent vector, one entry per variable

inline int mi_degree(const MultiIndex& a) { return std::accumulate(a.begin(), a.end(), 0); }

/// Colexicographic order: compare the last differing exponent.
inline bool colex_less(const MultiIndex& a, const MultiIndex& b) {
    for (int j = int(a.size()) - 1; j >= 0; --j) {
        if (a[j] != b[j]) return a[j] < b[j];
    }
    return false;
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        std::uint64_t num = std::uint64_t(n - k + i);
        if (r > UINT64_MAX / num) throw std::range_error("binomial: overflow");
        r = r * num / std::uint64_t(i);
    }
    return r;
}

/// dim of the space of d-component k-homogeneous polynomial maps of C^d.
inline std::uint64_t dim_homogeneous(int d, int k) {
    if (d < 1 || k < 1) throw std::range_error("dim_homogeneous: d and k must be positive");
    std::uint64_t card = binomial(k + d - 1, d - 1);
    if (card > UINT64_MAX / std::uint64_t(d)) throw std::range_error("dim_homogeneous: overflow");
    return std::uint64_t(d) * card;
}

/// All multi-indices of degree k in d variables, in colexicographic order.
inline std::vector<MultiIndex> multi_indices(int d, int k) {
    std::vector<MultiIndex> out;
    MultiIndex cur(d, 0);
    // recursive enumeration; colex order falls out of filling the last variable slowest
    auto rec = [&](auto&& self, int pos, int rem) -> void {
        if (pos == d - 1) {
            cur[pos] = rem;
            out.push_back(cur);
            return;
        }
        for (int t = rem; t >= 0; --t) {
            cur[pos] = t;
            self(self, pos + 1, rem - t);
        }
        cur[pos] = 0;
    };
    rec(rec, 0, k);
    std::sort(out.begin(), out.end(), colex_less);
    return out;
}

/// Membership in T_k: the monomial z^alpha e_i is strictly triangular iff
/// alpha_j = 0 for every variable j >= i (1-based component index i).
inline bool in_strict_triangle(const MultiIndex& alpha, int comp) {
    for (int j = comp - 1; j < int(alpha.size()); ++j) {
        if (alpha[j] != 0) return false;
    }
    return true;
}

/// Triangular (non-strict) index: component i may depend on z_1..z_i.
inline bool in_triangle(const MultiIndex& alpha, int comp) {
    for (int j = comp; j < int(alpha.size()); ++j) {
        if (alpha[j] != 0) return false;
    }
    return true;
}

}  // namespace basin

#endif
