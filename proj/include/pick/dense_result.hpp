#pragma once

#include <optional>

#include "pick/graphs.hpp"

namespace pick {

/// Candidate edges produced by the leaf/parent loop, before pruning.
/// dense_w(i, j) == 1 proposes i -> j; dense_p uses the LaggedGraphs
/// convention (row = current target, column = lagged source).
struct DenseResult {
    TopoOrder order;
    BinaryMatrix dense_w;
    std::optional<LaggedGraphs> dense_p;
};

}  // namespace pick
