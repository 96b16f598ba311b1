// Copyright 2026 The qmpe Authors
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

#pragma once

/// \file qmpe.hpp
/// Parallel Bayesian multiphase estimation: qudit circuit statistics, dense
/// grid posterior, the multiround protocol and Monte Carlo campaign analysis.

#include "qmpe/circuit.hpp"
#include "qmpe/error.hpp"
#include "qmpe/experiments.hpp"
#include "qmpe/grid.hpp"
#include "qmpe/io.hpp"
#include "qmpe/phase.hpp"
#include "qmpe/protocol.hpp"
#include "qmpe/verify.hpp"
