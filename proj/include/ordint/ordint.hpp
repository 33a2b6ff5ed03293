#pragma once

#include "ordint/data.hpp"
#include "ordint/diagnostics.hpp"
#include "ordint/dists.hpp"
#include "ordint/eval.hpp"
#include "ordint/infer.hpp"
#include "ordint/model.hpp"
#include "ordint/nuts.hpp"
#include "ordint/ordered.hpp"
#include "ordint/timeseries.hpp"
