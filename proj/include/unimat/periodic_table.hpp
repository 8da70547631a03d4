#pragma once
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unimat/errors.hpp"

namespace unimat {

inline constexpr int grid_rows = 9;  // periods plus the two f-block rows
inline constexpr int grid_cols = 18; // groups
inline constexpr int max_z = 94;

struct element {
    int z = 0;
    std::string symbol;
    int h = 0, w = 0; // periodic-table grid cell
    double covalent_radius = 0.0;      // Angstrom
    double atomic_sphere_volume = 0.0; // Angstrom^3
    std::vector<int> oxidation_states; // empty = none tabulated
    double reference_energy = 0.0;     // eV/atom, elemental reference of the toy oracle
};

// Static element database.  Immutable after construction; the default
// instance parses a table embedded at build time and can be overridden once
// at startup (element table path flag).
class periodic_table {
  public:
    static periodic_table from_text(const std::string& text);
    static periodic_table from_file(const std::string& path);

    // Process-wide table.  load_override must run before the first instance()
    // call that needs the data (the CLI does this while parsing flags).
    static const periodic_table& instance();
    static void load_override(const std::string& path);

    const element& by_z(int z) const;
    const element& by_symbol(std::string_view symbol) const;
    bool has_symbol(std::string_view symbol) const;

    // nullptr means an empty grid cell.
    const element* cell(int h, int w) const;

    const std::vector<element>& all() const { return elements_; }
    int size() const { return static_cast<int>(elements_.size()); }

  private:
    std::vector<element> elements_; // sorted by z
    std::vector<int> grid_;        // grid_rows*grid_cols cells -> index+1, 0 = empty
};

// Grid placement of an element (Fig-1-style cell lookup).
std::pair<int, int> element_to_cell(const element& e);

// Inverse lookup; nullopt for empty cells, index_error when out of range.
std::optional<std::reference_wrapper<const element>> cell_to_element(int h, int w);
std::optional<std::reference_wrapper<const element>> cell_to_element(const periodic_table& pt, int h, int w);

// Strips oxidation-state decorations: "Fe2+" -> "Fe", "O2-" -> "O".
std::string normalize_symbol(std::string_view raw);

} // namespace unimat
