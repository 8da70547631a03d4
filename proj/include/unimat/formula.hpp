#pragma once
#include <string>
#include <vector>

#include "unimat/crystal.hpp"

namespace unimat {

// "Si4C4" / "CaTiO3" -> (atomic number, count) pairs ordered by atomic number.
std::vector<std::pair<int, int>> parse_formula(const std::string& formula);

// Canonical composition key: reduced integer ratios, symbols sorted
// alphabetically, counts always explicit ("Si4C4" and "SiC" -> "C1Si1").
std::string composition_key(const std::vector<std::pair<int, int>>& composition);
std::string composition_key(const crystal& x);
std::string composition_key(const std::string& formula);

// Display form: alphabetical symbols, count 1 omitted ("CSi", "O3SrTi").
std::string format_formula(const std::vector<std::pair<int, int>>& composition);

} // namespace unimat
