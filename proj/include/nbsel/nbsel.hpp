#pragma once

// Feature selection for two-class problems described only by expert
// estimates of per-feature conditional probabilities, using the exact
// classifier error under the independence assumption as the criterion.

#include "nbsel/cell_list.hpp"
#include "nbsel/counterexample.hpp"
#include "nbsel/io.hpp"
#include "nbsel/prob_table.hpp"
#include "nbsel/region.hpp"
#include "nbsel/selector.hpp"
#include "nbsel/sensitivity.hpp"
#include "nbsel/truncated_normal.hpp"
