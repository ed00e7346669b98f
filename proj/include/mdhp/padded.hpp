#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mdhp/events.hpp"

namespace mdhp {

/// Rectangularized timestamps plus the precomputed pairwise-difference tensor.
///
/// Layout (row-major):
///   padded, mask:        [i][a]            D x L
///   tmpt, pair_mask:     [i][a][j][b]      D x L x D x L
///   prefix:              [i][a][j]         number of leading b with pair_mask set
///
/// Masked-out slots of `padded` hold t_span, so e^{-beta (t_span - padded)} - 1
/// vanishes for them. pair_mask is true only where both slots are real events
/// and the difference is strictly positive; because each row is ascending the
/// true entries of pair_mask[i][a][j][*] always form a prefix.
struct PaddedEvents {
    std::size_t dims = 0;
    std::size_t max_len = 0;
    double t_span = 0.0;
    std::vector<std::size_t> counts;
    std::vector<double> padded;
    std::vector<std::uint8_t> mask;
    std::vector<double> tmpt;
    std::vector<std::uint8_t> pair_mask;
    std::vector<std::uint32_t> prefix;

    std::size_t slot(std::size_t i, std::size_t a) const noexcept { return i * max_len + a; }
    std::size_t pair(std::size_t i, std::size_t a, std::size_t j, std::size_t b) const noexcept {
        return ((i * max_len + a) * dims + j) * max_len + b;
    }
};

/// Pads every dimension to the longest one and precomputes tmpt / pair_mask.
/// This is the one-off work that does not depend on the parameters.
PaddedEvents pad_and_stack(const EventSequences& events);

}  // namespace mdhp
