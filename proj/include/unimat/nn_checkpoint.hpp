#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unimat/dataset.hpp"
#include "unimat/nn_layers.hpp"

namespace unimat {

struct named_array {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

// Versioned portable checkpoint: "UNIMAT01" magic, JSON config echo, named
// row-major float64 arrays (raw, EMA, Adam first/second moments), RNG state
// blob, and the batch stream position.  All scalars little-endian; identical
// serial-mode training runs produce identical bytes.
struct checkpoint_data {
    std::string config_json;
    std::int64_t step = 0;
    std::vector<named_array> params, ema, adam_m, adam_v;
    std::string rng_state;
    batch_stream_state stream;
};

void save_checkpoint(const checkpoint_data& ck, const std::string& path);
checkpoint_data load_checkpoint(const std::string& path);

// Store layout -> named arrays, with the given flat values (params, EMA, ...).
std::vector<named_array> arrays_from_values(const param_store& ps,
                                            const std::vector<double>& values);
// Strict by-name restore: every store entry must match an array and vice
// versa, shapes included.
std::vector<double> flat_from_arrays(const param_store& ps,
                                     const std::vector<named_array>& arrays);

} // namespace unimat
