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

#ifndef BNLAB_TESTS_UTIL_HPP
#define BNLAB_TESTS_UTIL_HPP

#include "bnlab/linalg.hpp"
#include "oracles.hpp"

namespace testing_util {

inline bnlab::Matrix to_matrix(const oracle::Dense &a) {
    bnlab::Matrix m(a.size(), a.empty() ? 0 : a[0].size());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            m(i, j) = a[i][j];
    return m;
}

inline oracle::Dense to_dense(const bnlab::Matrix &m) {
    oracle::Dense a = oracle::zeros(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            a[i][j] = m(i, j);
    return a;
}

inline double max_abs_diff(const bnlab::Matrix &a, const bnlab::Matrix &b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
    return worst;
}

} // namespace testing_util

#endif // BNLAB_TESTS_UTIL_HPP
