// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The pilotmae authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include "pilotmae/tasks/codebook.hpp"
#include "pilotmae/tasks/estimate.hpp"
#include "pilotmae/tasks/features.hpp"
#include "pilotmae/tasks/knn.hpp"
#include "pilotmae/tasks/metrics.hpp"
#include "pilotmae/tasks/results.hpp"
#include "pilotmae/tasks/supervised.hpp"
