// Copyright 2026 The timfg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header for the numerical library.

#ifndef TIMFG_TIMFG_HPP_
#define TIMFG_TIMFG_HPP_

#include "timfg/classic.hpp"
#include "timfg/consistent.hpp"
#include "timfg/dynamics.hpp"
#include "timfg/errors.hpp"
#include "timfg/io.hpp"
#include "timfg/measures.hpp"
#include "timfg/model.hpp"
#include "timfg/nagent.hpp"
#include "timfg/policy.hpp"
#include "timfg/rng.hpp"
#include "timfg/tabulated_model.hpp"

#endif  // TIMFG_TIMFG_HPP_
