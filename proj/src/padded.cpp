#include "mdhp/padded.hpp"

#include <limits>

namespace mdhp {

PaddedEvents pad_and_stack(const EventSequences& events) {
    PaddedEvents pe;
    pe.dims = events.dims();
    pe.max_len = events.max_count();
    pe.t_span = events.t_span();
    const std::size_t d = pe.dims;
    const std::size_t len = pe.max_len;
    if (len > std::numeric_limits<std::uint32_t>::max()) {
        throw ConfigError("pad_and_stack: sequence too long");
    }

    pe.counts.resize(d);
    pe.padded.assign(d * len, pe.t_span);
    pe.mask.assign(d * len, 0);
    for (std::size_t i = 0; i < d; ++i) {
        const auto times = events.times(i);
        pe.counts[i] = times.size();
        for (std::size_t a = 0; a < times.size(); ++a) {
            pe.padded[pe.slot(i, a)] = times[a];
            pe.mask[pe.slot(i, a)] = 1;
        }
    }

    pe.tmpt.resize(d * len * d * len);
    pe.pair_mask.assign(d * len * d * len, 0);
    pe.prefix.assign(d * len * d, 0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t a = 0; a < len; ++a) {
            const double t = pe.padded[pe.slot(i, a)];
            const bool row_valid = pe.mask[pe.slot(i, a)] != 0;
            for (std::size_t j = 0; j < d; ++j) {
                std::uint32_t run = 0;
                bool in_prefix = true;
                for (std::size_t b = 0; b < len; ++b) {
                    const std::size_t idx = pe.pair(i, a, j, b);
                    const double diff = t - pe.padded[pe.slot(j, b)];
                    pe.tmpt[idx] = diff;
                    const bool valid = row_valid && pe.mask[pe.slot(j, b)] != 0 && diff > 0.0;
                    pe.pair_mask[idx] = valid ? 1 : 0;
                    if (valid && in_prefix) {
                        ++run;
                    } else {
                        in_prefix = false;
                    }
                }
                pe.prefix[(i * len + a) * d + j] = run;
            }
        }
    }
    return pe;
}

}  // namespace mdhp
