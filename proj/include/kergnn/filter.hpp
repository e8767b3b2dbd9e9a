#pragma once

#include "kergnn/error.hpp"
#include "kergnn/graph.hpp"

namespace kergnn {

/// A small trainable graph compared against node neighborhoods.
///
/// `adjacency` is real-valued, symmetric, zero-diagonal. It may take negative
/// values during training; pruning to non-negative weights happens only when
/// filters are exported.
struct GraphFilter {
    Matrix adjacency;
    Matrix attributes;

    Index n_nodes() const { return adjacency.rows(); }
    Index attr_dim() const { return attributes.cols(); }

    void validate() const {
        detail::require(adjacency.rows() == adjacency.cols(), "filter adjacency must be square");
        detail::require(attributes.rows() == adjacency.rows(), "filter attributes must have one row per node");
        for (Index i = 0; i < n_nodes(); ++i) {
            detail::require(adjacency(i, i) == 0.0, "filter adjacency must have a zero diagonal");
            for (Index j = i + 1; j < n_nodes(); ++j) {
                detail::require(adjacency(i, j) == adjacency(j, i), "filter adjacency must be symmetric");
            }
        }
    }
};

} // namespace kergnn
