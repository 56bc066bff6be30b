// Copyright 2026 The taxelsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "taxelsim/cloud.hpp"
#include "taxelsim/contact.hpp"
#include "taxelsim/heatmap.hpp"
#include "taxelsim/io.hpp"
#include "taxelsim/mesh.hpp"
#include "taxelsim/pad.hpp"
#include "taxelsim/replay.hpp"
#include "taxelsim/rng.hpp"
#include "taxelsim/scene.hpp"
#include "taxelsim/sdf.hpp"
#include "taxelsim/signal.hpp"
#include "taxelsim/vec.hpp"
