#pragma once
#include <map>
#include <string>
#include <vector>

#include "unimat/crystal.hpp"

namespace unimat {

// Minimal CIF subset: the six cell tags plus one atom loop with
// _atom_site_type_symbol and _atom_site_fract_x/y/z.  Unknown tags and other
// loops are skipped.  Total on arbitrary text: every failure is a parse_error
// carrying the offending line number.
crystal parse_cif(const std::string& text);

// Deterministic emission (fixed tag order, 6-decimal fixed-point, '\n'
// newlines); parse_cif(emit_cif(x)) round-trips coordinates to 1e-6.
std::string emit_cif(const crystal& x, const std::string& block_name = "unimat");

} // namespace unimat
