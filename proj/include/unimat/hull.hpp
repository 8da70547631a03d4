#pragma once

#include <string>
#include <utility>
#include <vector>

#include "unimat/crystal.hpp"

namespace unimat {

struct phase_entry {
    std::vector<std::pair<int, int>> composition; // (atomic number, count), sorted by z
    double e_f = 0.0;                             // eV/atom
    std::string id;
};

struct decomposition_term {
    std::string id;
    double weight = 0.0;
};

// Lower convex envelope over barycentric element fractions.  Elemental
// endpoints are auto-inserted at E_f = 0 (id = element symbol) when absent;
// degenerate ties resolve to fewer decomposition products, then
// lexicographically smaller id sequences.  Immutable once built.
class phase_diagram {
  public:
    static phase_diagram build(std::vector<phase_entry> entries);

    const std::vector<int>& basis() const { return basis_; } // sorted atomic numbers
    const std::vector<phase_entry>& entries() const { return entries_; }
    // Hull vertices, one per composition (lowest e_f, then smallest id).
    const std::vector<std::size_t>& stable_entries() const { return stable_; }

    // Barycentric fraction of an entry over this basis.
    std::vector<double> fraction_of(const phase_entry& e) const;

    // Lower hull energy at a fraction vector (size = basis, sums to 1).
    double hull_energy(const std::vector<double>& fraction) const;

    // E_d = e_f - hull energy at the query fraction, with the decomposition
    // into hull entries (weights >= 0, summing to 1).
    std::pair<double, std::vector<decomposition_term>>
    decomposition_energy(const phase_entry& query) const;

  private:
    struct lp_result {
        double value = 0.0;
        std::vector<double> weights;       // per entry
        std::vector<std::size_t> tight;    // entries on the optimal face
    };
    lp_result solve(const std::vector<double>& fraction) const;

    std::vector<int> basis_;
    std::vector<phase_entry> entries_;
    std::vector<std::vector<double>> fractions_; // cached per entry
    std::vector<std::size_t> stable_;
};

struct stability_flag {
    std::string id;
    double e_d = 0.0;
    bool stable = false;     // E_d < 0, strict
    bool metastable = false; // E_d < threshold
};

struct stability_count {
    int n_stable = 0;
    int n_metastable = 0;
    std::vector<stability_flag> flags; // one per kept composition representative
    int duplicates_dropped = 0;
};

// Deduplicates queries by composition (keeping the lowest e_f, then smallest
// id) and counts strict below-hull and below-threshold entries.
stability_count count_stable(const phase_diagram& pd, const std::vector<phase_entry>& queries,
                             double threshold = 0.025);

// JSON-lines of {"id", "composition": {symbol: count}, "e_f"}.
std::vector<phase_entry> read_phase_entries(const std::string& path);
void write_phase_entries(const std::vector<phase_entry>& entries, const std::string& path);

phase_entry entry_of(const crystal& x, double e_f, std::string id);

} // namespace unimat
