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

#ifndef BNLAB_BNLAB_HPP
#define BNLAB_BNLAB_HPP

#include "bnlab/activations.hpp"
#include "bnlab/chain.hpp"
#include "bnlab/constants.hpp"
#include "bnlab/error.hpp"
#include "bnlab/experiments.hpp"
#include "bnlab/linalg.hpp"
#include "bnlab/meanfield.hpp"
#include "bnlab/parallel.hpp"
#include "bnlab/random.hpp"
#include "bnlab/randprod.hpp"
#include "bnlab/report.hpp"
#include "bnlab/spectra.hpp"
#include "bnlab/svg.hpp"

#endif // BNLAB_BNLAB_HPP
