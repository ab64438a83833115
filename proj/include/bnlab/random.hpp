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

#ifndef BNLAB_RANDOM_HPP
#define BNLAB_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "bnlab/error.hpp"
#include "bnlab/linalg.hpp"

namespace bnlab {

/// The SplitMix64 finalizer. Used both to derive stream keys and as the
/// counter-to-output bijection.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

/// Key of the stream (master_seed, stream_id):
///     key = mix64(mix64(master_seed + golden) ^ (stream_id * golden + 1))
constexpr std::uint64_t derive_stream_key(std::uint64_t master_seed, std::uint64_t stream_id) noexcept {
    return mix64(mix64(master_seed + kGolden) ^ (stream_id * kGolden + 1));
}

/*
 * Counter-based 64-bit generator. Output k of a stream is
 * mix64(key + (k + 1) * golden), so the full state is (key, counter) plus the
 * cached second output of the last polar Box-Muller pair.
 *
 * Normal draws use the polar Box-Muller method: uniform pairs in (-1,1)^2 are
 * rejected until 0 < s < 1; the pair yields two normals, returned first u*f
 * then v*f.
 */
class RngStream {
public:
    struct State {
        std::uint64_t key = 0;
        std::uint64_t counter = 0;
        bool has_spare = false;
        double spare = 0.0;

        friend bool operator==(const State &, const State &) = default;
    };

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : master_seed_(master_seed), stream_id_(stream_id) {
        state_.key = derive_stream_key(master_seed, stream_id);
    }

    static RngStream from_state(const State &s) {
        RngStream r(0, 0);
        r.state_ = s;
        return r;
    }

    /// A fresh, independent stream keyed on this stream's key and `sub`.
    /// Does not advance this stream.
    RngStream derive(std::uint64_t sub) const {
        RngStream r(0, 0);
        r.master_seed_ = master_seed_;
        r.stream_id_ = stream_id_;
        r.state_.key = mix64(state_.key ^ mix64(sub * kGolden + 0x632be59bd9b4e019ull));
        return r;
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    const State &state() const noexcept { return state_; }

    std::uint64_t next_u64() noexcept {
        ++state_.counter;
        return mix64(state_.key + state_.counter * kGolden);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() noexcept {
        if (state_.has_spare) {
            state_.has_spare = false;
            return state_.spare;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        state_.spare = v * f;
        state_.has_spare = true;
        return u * f;
    }

private:
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_id_ = 0;
    State state_;
};

/// rows x cols matrix of i.i.d. N(0, variance), filled in row-major order.
inline Matrix gaussian_matrix(RngStream &stream, std::size_t rows, std::size_t cols, double variance) {
    if (!(variance > 0.0))
        throw Error(ErrorCode::NonPositiveVariance, "gaussian_matrix variance must be positive");
    const double sd = std::sqrt(variance);
    Matrix m(rows, cols);
    for (double &v : m.entries())
        v = sd * stream.normal();
    return m;
}

/// `count` rows drawn i.i.d. from N(0, cov), as z·cov^{1/2}.
inline Matrix mvn_rows(RngStream &stream, std::size_t count, const Matrix &cov) {
    const Matrix root = matpow(cov, 0.5);
    const std::size_t n = cov.rows();
    Matrix z(count, n);
    for (double &v : z.entries())
        v = stream.normal();
    return matmul(z, root);
}

} // namespace bnlab

#endif // BNLAB_RANDOM_HPP
