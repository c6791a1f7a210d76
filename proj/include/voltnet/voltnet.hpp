/*
 * Copyright 2026 The voltnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "voltnet/error.hpp"
#include "voltnet/csv.hpp"
#include "voltnet/feeder.hpp"
#include "voltnet/scenario.hpp"
#include "voltnet/synthetic.hpp"
#include "voltnet/policy.hpp"
#include "voltnet/trainer.hpp"
#include "voltnet/baselines.hpp"
#include "voltnet/evaluation.hpp"
#include "voltnet/ieee13.hpp"
#include "voltnet/config.hpp"
#include "voltnet/pipeline.hpp"
