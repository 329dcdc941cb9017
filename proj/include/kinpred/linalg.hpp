#ifndef KINPRED_LINALG_HPP
#define KINPRED_LINALG_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

namespace kinpred {

/// Dense row-major matrix over float or double. Sized for the small
/// shapes of this project (tens to hundreds per side); kernels below are
/// laid out so the inner loops run over contiguous rows.
template <class T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c) {}

    // No-op when the shape already matches (contents kept); zero-filled
    // only when the shape actually changes.
    void resize(int r, int c) {
        if (rows == r && cols == c) return;
        rows = r;
        cols = c;
        v.assign(std::size_t(r) * c, T(0));
    }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    T* row(int i) { return v.data() + std::size_t(i) * cols; }
    const T* row(int i) const { return v.data() + std::size_t(i) * cols; }
    T& operator()(int r, int c) { return v[std::size_t(r) * cols + c]; }
    T operator()(int r, int c) const { return v[std::size_t(r) * cols + c]; }
    std::size_t size() const { return v.size(); }
};

/// C (MxN) += A (MxK) * B (KxN). Inner loop is an axpy over a contiguous
/// row of B, which vectorizes well at our shapes.
template <class T>
void matmul_nn_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        T* ci = c.row(i);
        const T* ai = a.row(i);
        int p = 0;
        for (; p + 4 <= k; p += 4) {
            const T a0 = ai[p], a1 = ai[p + 1], a2 = ai[p + 2], a3 = ai[p + 3];
            const T* b0 = b.row(p);
            const T* b1 = b.row(p + 1);
            const T* b2 = b.row(p + 2);
            const T* b3 = b.row(p + 3);
            for (int j = 0; j < n; ++j)
                ci[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; p < k; ++p) {
            const T ap = ai[p];
            const T* bp = b.row(p);
            for (int j = 0; j < n; ++j) ci[j] += ap * bp[j];
        }
    }
}

/// C (KxN) += A (MxK)^T * B (MxN). Same axpy structure, contraction over
/// the rows of A and B.
template <class T>
void matmul_tn_acc(Mat<T>& c, const Mat<T>& a, const Mat<T>& b) {
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        const T* ai = a.row(i);
        const T* bi = b.row(i);
        for (int p = 0; p < k; ++p) {
            const T ap = ai[p];
            T* cp = c.row(p);
            for (int j = 0; j < n; ++j) cp[j] += ap * bi[j];
        }
    }
}

/// rows of C set to the bias vector.
template <class T>
void broadcast_rows(Mat<T>& c, const std::vector<T>& bias) {
    for (int i = 0; i < c.rows; ++i)
        std::memcpy(c.row(i), bias.data(), sizeof(T) * bias.size());
}

/// bias (N) += column sums of A (MxN).
template <class T>
void colsum_acc(std::vector<T>& bias, const Mat<T>& a) {
    for (int i = 0; i < a.rows; ++i) {
        const T* ai = a.row(i);
        for (int j = 0; j < a.cols; ++j) bias[j] += ai[j];
    }
}

/// exp for the float path: 2^n reconstruction with a degree-6 polynomial
/// for the fraction. Saturation happens on the integer exponent, not the
/// float input: float clamps block gcc's if-conversion, integer selects
/// do not, and this loop must vectorize. Relative error ~1e-7; NaN
/// propagates through the polynomial.
inline float fast_exp(float x) {
    const float t = x * 1.4426950408889634f; // x / ln 2
    const float magic = 12582912.0f;         // 1.5 * 2^23: round-to-nearest
    const float n = (t + magic) - magic;
    const float g = (t - n) * 0.6931471805599453f;
    float p = 1.0f / 5040.0f;
    p = p * g + 1.0f / 720.0f;
    p = p * g + 1.0f / 120.0f;
    p = p * g + 1.0f / 24.0f;
    p = p * g + 1.0f / 6.0f;
    p = p * g + 0.5f;
    p = p * g + 1.0f;
    p = p * g + 1.0f;
    std::int32_t e = std::int32_t(n);
    e = e < -126 ? -126 : e; // underflow saturates near zero
    e = e > 127 ? 127 : e;   // overflow saturates near FLT_MAX
    const std::int32_t bits = (e + 127) << 23;
    return p * std::bit_cast<float>(bits);
}

/// The double path keeps the libm exp so the analytic gate derivatives
/// match finite differences to full precision.
inline double fast_exp(double x) { return std::exp(x); }

template <class T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + fast_exp(-x));
}

template <class T>
inline T tanh_approx(T x) {
    return T(2) * sigmoid(T(2) * x) - T(1);
}

} // namespace kinpred

#endif
