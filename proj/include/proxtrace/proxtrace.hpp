// Copyright 2026 The Proxtrace Authors
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

#ifndef PROXTRACE_PROXTRACE_HPP_
#define PROXTRACE_PROXTRACE_HPP_

#include "proxtrace/audio_dsp.hpp"
#include "proxtrace/audio_ranging.hpp"
#include "proxtrace/config.hpp"
#include "proxtrace/csv.hpp"
#include "proxtrace/episode_stats.hpp"
#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"
#include "proxtrace/propagation.hpp"
#include "proxtrace/random.hpp"
#include "proxtrace/simulator.hpp"
#include "proxtrace/validation.hpp"

#endif  // PROXTRACE_PROXTRACE_HPP_
