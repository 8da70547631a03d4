#pragma once
#include <stdexcept>
#include <string>

namespace unimat {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define UNIMAT_DEFINE_ERROR(name)                                              \
    struct name : error {                                                      \
        using error::error;                                                    \
    }

UNIMAT_DEFINE_ERROR(unknown_element);
UNIMAT_DEFINE_ERROR(unsupported_element);
UNIMAT_DEFINE_ERROR(element_out_of_shape);
UNIMAT_DEFINE_ERROR(capacity_exceeded);
UNIMAT_DEFINE_ERROR(invalid_cell);
UNIMAT_DEFINE_ERROR(shape_mismatch);
UNIMAT_DEFINE_ERROR(index_error);
UNIMAT_DEFINE_ERROR(schema_error);
UNIMAT_DEFINE_ERROR(duplicate_id);
UNIMAT_DEFINE_ERROR(io_error);
UNIMAT_DEFINE_ERROR(config_error);
UNIMAT_DEFINE_ERROR(checkpoint_error);
UNIMAT_DEFINE_ERROR(non_finite_sample);
UNIMAT_DEFINE_ERROR(non_finite_loss);
UNIMAT_DEFINE_ERROR(non_finite_energy);
UNIMAT_DEFINE_ERROR(empty_input);
UNIMAT_DEFINE_ERROR(element_outside_basis);
UNIMAT_DEFINE_ERROR(placement_failed);
UNIMAT_DEFINE_ERROR(relax_error);

#undef UNIMAT_DEFINE_ERROR

// Parse failures carry the 1-based line number of the offending input line.
struct parse_error : error {
    int line;
    parse_error(const std::string& msg, int line_no)
        : error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

} // namespace unimat
