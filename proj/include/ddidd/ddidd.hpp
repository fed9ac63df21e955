// Copyright 2026 The ddidd Authors
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

#pragma once

#include "ddidd/error.hpp"
#include "ddidd/trace.hpp"
#include "ddidd/params.hpp"
#include "ddidd/filter_id.hpp"
#include "ddidd/fq_filter.hpp"
#include "ddidd/source_filters.hpp"
#include "ddidd/wr_filter.hpp"
#include "ddidd/learning_store.hpp"
#include "ddidd/pipeline.hpp"
#include "ddidd/estimate.hpp"
#include "ddidd/selector.hpp"
#include "ddidd/detector.hpp"
#include "ddidd/metrics.hpp"
#include "ddidd/tables_io.hpp"
#include "ddidd/engine.hpp"
#include "ddidd/synth.hpp"
#include "ddidd/rules.hpp"
