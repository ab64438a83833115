/*
 * Copyright (C) 2026 The bnlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef BNLAB_LINALG_HPP
#define BNLAB_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "bnlab/error.hpp"

namespace bnlab {

/// Dense row-major real matrix. Sized for the small batch dimension (n <= 64)
/// but also carries d x n hidden representations.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw Error(ErrorCode::ShapeMismatch, "entry count does not match rows*cols");
    }
    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto &row : init) {
            if (row.size() != cols_)
                throw Error(ErrorCode::ShapeMismatch, "ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> diag) {
        Matrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i)
            m(i, i) = diag[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> entries() noexcept { return data_; }
    std::span<const double> entries() const noexcept { return data_; }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Matrix &operator+=(const Matrix &o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i)
            data_[i] += o.data_[i];
        return *this;
    }
    Matrix &operator-=(const Matrix &o) {
        check_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i)
            data_[i] -= o.data_[i];
        return *this;
    }
    Matrix &operator*=(double s) noexcept {
        for (double &v : data_)
            v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix &b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix &b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }
    friend bool operator==(const Matrix &a, const Matrix &b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    void check_same_shape(const Matrix &o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw Error(ErrorCode::ShapeMismatch, "matrix shapes differ");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Descending eigendecomposition of a symmetric matrix; column k of
/// `eigenvectors` belongs to `eigenvalues[k]`.
struct Spectrum {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
};

inline Matrix transpose(const Matrix &m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            t(j, i) = m(i, j);
    return t;
}

inline Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.rows())
        throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                out[j] += aik * brow[j];
        }
    }
    return c;
}

/// aᵀ·a scaled by `scale`, accumulated row by row (the Gram of the columns).
inline Matrix gram_of_columns(const Matrix &a, double scale = 1.0) {
    const std::size_t n = a.cols();
    Matrix g(n, n);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto x = a.row(r);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            for (std::size_t j = i; j < n; ++j)
                g(i, j) += xi * x[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            g(i, j) *= scale;
            g(j, i) = g(i, j);
        }
    return g;
}

inline double trace(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "trace of non-square matrix");
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        t += m(i, i);
    return t;
}

inline double frobenius_norm(const Matrix &m) noexcept {
    double s = 0.0;
    for (double v : m.entries())
        s += v * v;
    return std::sqrt(s);
}

inline Matrix symmetrize(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "cannot symmetrize a non-square matrix");
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

inline bool is_symmetric(const Matrix &m) noexcept {
    if (!m.square())
        return false;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != m(j, i))
                return false;
    return true;
}

namespace detail {

inline constexpr double kJacobiOffDiagonalTol = 1e-14;
inline constexpr int kJacobiMaxSweeps = 100;

inline double off_diagonal_mass(const Matrix &a) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j)
                s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace detail

/// Cyclic Jacobi eigensolver for symmetric input. The input is averaged with
/// its transpose first. Eigenvalues come back descending; ties keep the
/// order in which the rotations left them.
inline Spectrum sym_eig(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "sym_eig needs a square matrix");
    if (!m.all_finite())
        throw Error(ErrorCode::NonFinite, "sym_eig input has non-finite entries");

    const std::size_t n = m.rows();
    Matrix a = symmetrize(m);
    Matrix v = Matrix::identity(n);
    const double target = detail::kJacobiOffDiagonalTol * frobenius_norm(a);

    int sweep = 0;
    while (detail::off_diagonal_mass(a) > target) {
        if (sweep++ >= detail::kJacobiMaxSweeps)
            throw Error(ErrorCode::NoConvergence, "Jacobi sweep cap reached");
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    Spectrum out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i)
            out.eigenvectors(i, k) = v(i, order[k]);
    }
    return out;
}

inline std::vector<double> eigenvalues(const Matrix &m) { return sym_eig(m).eigenvalues; }

/// V·diag(f(λ))·Vᵀ for a spectrum.
template <typename F>
Matrix spectral_apply(const Spectrum &spec, F &&f) {
    const std::size_t n = spec.eigenvalues.size();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fk = f(spec.eigenvalues[k]);
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = spec.eigenvectors(i, k) * fk;
            if (vik == 0.0)
                continue;
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += vik * spec.eigenvectors(j, k);
        }
    }
    return out;
}

inline constexpr double kPositiveDefiniteFloor = 1e-12;

/// M^a = U S^a Uᵀ for symmetric positive-definite M.
inline Matrix matpow(const Matrix &m, double exponent) {
    const Spectrum spec = sym_eig(m);
    if (!spec.eigenvalues.empty() && spec.eigenvalues.back() <= kPositiveDefiniteFloor)
        throw Error(ErrorCode::NotPositiveDefinite, "matpow needs smallest eigenvalue > 1e-12");
    if (exponent == 1.0)
        return symmetrize(m);
    return spectral_apply(spec, [exponent](double lam) { return std::pow(lam, exponent); });
}

/// Singular values, descending. Symmetric input uses |eigenvalues| directly
/// rather than squaring the conditioning through MᵀM.
inline std::vector<double> singular_values(const Matrix &m) {
    std::vector<double> s;
    if (is_symmetric(m)) {
        for (double lam : sym_eig(m).eigenvalues)
            s.push_back(std::abs(lam));
    } else {
        const Matrix mtm = m.rows() >= m.cols() ? gram_of_columns(m) : gram_of_columns(transpose(m));
        for (double lam : sym_eig(mtm).eigenvalues)
            s.push_back(std::sqrt(std::max(lam, 0.0)));
    }
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

inline double operator_norm(const Matrix &m) {
    if (m.empty())
        return 0.0;
    return singular_values(m).front();
}

inline double condition_number(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "condition number of non-square matrix");
    const auto s = singular_values(m);
    if (s.empty() || !(s.back() > 1e-12 * s.front()))
        throw Error(ErrorCode::Singular, "smallest singular value below 1e-12 of largest");
    return s.front() / s.back();
}

inline double logdet(const Matrix &m) {
    const auto lams = eigenvalues(m);
    double s = 0.0;
    for (double lam : lams) {
        if (!(lam > 0.0))
            throw Error(ErrorCode::NotPositiveDefinite, "logdet of a non-positive-definite matrix");
        s += std::log(lam);
    }
    return s;
}

/// Gauss-Jordan elimination with partial pivoting.
inline Matrix inverse(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "inverse of non-square matrix");
    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix inv = Matrix::identity(n);
    const double scale = std::max(frobenius_norm(m), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col)))
                piv = r;
        if (std::abs(a(piv, col)) <= 1e-14 * scale)
            throw Error(ErrorCode::Singular, "matrix is numerically singular");
        if (piv != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        const double d = a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = a(r, col);
            if (f == 0.0)
                continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

/// Determinant by LU with partial pivoting.
inline double determinant(const Matrix &m) {
    if (!m.square())
        throw Error(ErrorCode::NonSquare, "determinant of non-square matrix");
    const std::size_t n = m.rows();
    Matrix a = m;
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col)))
                piv = r;
        if (a(piv, col) == 0.0)
            return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j)
                a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

/// One-sided (Hestenes) Jacobi SVD; singular values descending. Keeps high
/// relative accuracy on strongly graded matrices where going through MᵀM
/// would lose the small singular values.
inline std::vector<double> singular_values_jacobi(const Matrix &m) {
    Matrix u = m.rows() >= m.cols() ? m : transpose(m);
    const std::size_t rows = u.rows();
    const std::size_t n = u.cols();
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    alpha += u(i, p) * u(i, p);
                    beta += u(i, q) * u(i, q);
                    gamma += u(i, p) * u(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double up = u(i, p);
                    const double uq = u(i, q);
                    u(i, p) = c * up - s * uq;
                    u(i, q) = s * up + c * uq;
                }
            }
        if (!rotated)
            break;
    }
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
            acc += u(i, j) * u(i, j);
        s[j] = std::sqrt(acc);
    }
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

/// Thin QR by modified Gram-Schmidt with one reorthogonalization pass.
/// Returns Q (rows x cols, orthonormal columns) and upper-triangular R with
/// a non-negative diagonal.
inline std::pair<Matrix, Matrix> thin_qr(const Matrix &a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (m < n)
        throw Error(ErrorCode::BadShape, "thin QR needs rows >= cols");
    Matrix q = a;
    Matrix r(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    dot += q(i, k) * q(i, j);
                r(k, j) += dot;
                for (std::size_t i = 0; i < m; ++i)
                    q(i, j) -= dot * q(i, k);
            }
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            nrm += q(i, j) * q(i, j);
        nrm = std::sqrt(nrm);
        if (nrm == 0.0)
            throw Error(ErrorCode::Singular, "thin QR on rank-deficient input");
        r(j, j) = nrm;
        for (std::size_t i = 0; i < m; ++i)
            q(i, j) /= nrm;
    }
    return {std::move(q), std::move(r)};
}

/// Orthonormal basis (n x (n-1)) of the complement of the all-ones vector.
inline Matrix centered_basis(std::size_t n) {
    Matrix a(n, n - 1);
    // Helmert-style contrasts: column k separates entry k+1 from entries 0..k.
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double len = std::sqrt(static_cast<double>((k + 1) * (k + 2)));
        for (std::size_t i = 0; i <= k; ++i)
            a(i, k) = 1.0 / len;
        a(k + 1, k) = -static_cast<double>(k + 1) / len;
    }
    return a;
}

/// Bᵀ·M·B with B = centered_basis(n): M restricted to the subspace ⟂ 1ₙ.
inline Matrix restrict_to_centered(const Matrix &m) {
    const Matrix b = centered_basis(m.rows());
    return matmul(transpose(b), matmul(m, b));
}

} // namespace bnlab

#endif // BNLAB_LINALG_HPP
