#ifndef BASIN_LINALG_HPP
#define BASIN_LINALG_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "basin/scalar.hpp"

namespace basin {

template <class S>
using Vec = std::vector<S>;

/// Small dense square matrix. Sizes here top out around the dimension of the
/// space of homogeneous maps (tens), so plain O(n^3) kernels are fine.
template <class S>
class Mat {
  public:
    Mat() = default;
    explicit Mat(int n) : n_(n), a_(std::size_t(n) * n, scalar_traits<S>::zero()) {}

    static Mat identity(int n) {
        Mat m(n);
        for (int i = 0; i < n; ++i) m(i, i) = scalar_traits<S>::one();
        return m;
    }

    int size() const { return n_; }
    S& operator()(int i, int j) { return a_[std::size_t(i) * n_ + j]; }
    const S& operator()(int i, int j) const { return a_[std::size_t(i) * n_ + j]; }

    friend Mat operator*(const Mat& x, const Mat& y) {
        if (x.n_ != y.n_) throw std::invalid_argument("Mat: size mismatch");
        Mat r(x.n_);
        for (int i = 0; i < x.n_; ++i)
            for (int k = 0; k < x.n_; ++k) {
                if (scalar_traits<S>::is_zero(x(i, k))) continue;
                for (int j = 0; j < x.n_; ++j) r(i, j) += x(i, k) * y(k, j);
            }
        return r;
    }

    friend Mat operator+(const Mat& x, const Mat& y) {
        Mat r(x.n_);
        for (std::size_t i = 0; i < x.a_.size(); ++i) r.a_[i] = x.a_[i] + y.a_[i];
        return r;
    }

    friend Mat operator-(const Mat& x, const Mat& y) {
        Mat r(x.n_);
        for (std::size_t i = 0; i < x.a_.size(); ++i) r.a_[i] = x.a_[i] - y.a_[i];
        return r;
    }

    Vec<S> apply(const Vec<S>& v) const {
        Vec<S> r(n_, scalar_traits<S>::zero());
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                if (!scalar_traits<S>::is_zero((*this)(i, j))) r[i] += (*this)(i, j) * v[j];
            }
        return r;
    }

    bool operator==(const Mat& o) const { return n_ == o.n_ && a_ == o.a_; }

  private:
    int n_ = 0;
    std::vector<S> a_;
};

/// Gauss-Jordan inverse. Pivot choice: largest modulus (works for both the
/// float and the exact scalar; in the exact case the modulus is only a
/// selection heuristic, the arithmetic itself stays exact).
template <class S>
Mat<S> inverse(const Mat<S>& m) {
    const int n = m.size();
    Mat<S> a = m, inv = Mat<S>::identity(n);
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        double best = 0.0;
        for (int r = col; r < n; ++r) {
            double v = scalar_traits<S>::abs(a(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (piv < 0) throw std::domain_error("inverse: singular matrix");
        if (piv != col)
            for (int j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        S d = a(col, col);
        for (int j = 0; j < n; ++j) {
            a(col, j) = a(col, j) / d;
            inv(col, j) = inv(col, j) / d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col || scalar_traits<S>::is_zero(a(r, col))) continue;
            S f = a(r, col);
            for (int j = 0; j < n; ++j) {
                a(r, j) = a(r, j) - f * a(col, j);
                inv(r, j) = inv(r, j) - f * inv(col, j);
            }
        }
    }
    return inv;
}

/// Operator norm induced by the max norm on coordinates: max absolute row sum.
template <class S>
double op_norm_inf(const Mat<S>& m) {
    double best = 0.0;
    for (int i = 0; i < m.size(); ++i) {
        double s = 0.0;
        for (int j = 0; j < m.size(); ++j) s += scalar_traits<S>::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

template <class S>
double vec_norm_inf(const Vec<S>& v) {
    double best = 0.0;
    for (const S& x : v) best = std::max(best, scalar_traits<S>::abs(x));
    return best;
}

template <class S>
bool is_lower_triangular(const Mat<S>& m) {
    for (int i = 0; i < m.size(); ++i)
        for (int j = i + 1; j < m.size(); ++j)
            if (!scalar_traits<S>::is_zero(m(i, j))) return false;
    return true;
}

/// Lower triangular linear automorphism with its diagonal kept at hand.
template <class S>
struct TriangularMatrix {
    Mat<S> entries;

    explicit TriangularMatrix(Mat<S> m) : entries(std::move(m)) {
        if (!is_lower_triangular(entries))
            throw std::invalid_argument("TriangularMatrix: entries above the diagonal");
        for (int i = 0; i < entries.size(); ++i)
            if (scalar_traits<S>::is_zero(entries(i, i)))
                throw std::invalid_argument("TriangularMatrix: zero diagonal entry");
    }

    int dim() const { return entries.size(); }

    Vec<S> diagonal() const {
        Vec<S> d(entries.size());
        for (int i = 0; i < entries.size(); ++i) d[i] = entries(i, i);
        return d;
    }
};

}  // namespace basin

#endif
