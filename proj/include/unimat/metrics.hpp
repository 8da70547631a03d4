#pragma once
#include <cstdint>
#include <vector>

#include "unimat/crystal.hpp"
#include "unimat/energy.hpp"

namespace unimat {

struct validity_options {
    double min_dist = 0.5;             // Angstrom, between distinct sites
    double min_volume_per_atom = 1.0;  // Angstrom^3, guards degenerate cells
    void validate() const;
};

// True iff every pair of distinct sites keeps min_image_distance >= min_dist
// and the cell volume per atom clears the floor.  Empty crystals are invalid.
bool structural_validity(const crystal& x, const validity_options& opts = {});

struct composition_check {
    bool valid = false;
    std::uint64_t searched = 0;  // oxidation-state assignments examined
};

// Charge neutrality: some assignment of one allowed oxidation state per
// element (count-weighted) sums to zero.  Single-element compositions are
// neutral by the zero state.  Exhaustive search with partial-sum pruning.
composition_check composition_validity(const std::vector<std::pair<int, int>>& composition);

inline constexpr int fingerprint_bins = 32;
inline constexpr double fingerprint_range = 8.0;  // Angstrom
inline constexpr double fingerprint_sigma = 0.2;  // Angstrom

// Isometry-invariant descriptors: the structure part is a Gaussian-smeared
// neighbor-distance histogram (all periodic images within range) averaged
// over sites; the composition part is the atom-fraction vector over the
// periodic grid and sums to 1.
struct fingerprint {
    std::vector<double> structure;    // fingerprint_bins entries
    std::vector<double> composition;  // one entry per periodic-grid cell
};

fingerprint fingerprint_of(const crystal& x);

double structure_distance(const fingerprint& a, const fingerprint& b);
double composition_distance(const fingerprint& a, const fingerprint& b);

struct coverage_options {
    double delta_struct = 2.0;
    double delta_comp = 0.14;
    void validate() const;
};

struct coverage_result {
    double cov_r = 0, cov_p = 0;      // fraction matched within both deltas
    double amsd_r = 0, amsd_p = 0;    // average minimum structure distance
    double amcd_r = 0, amcd_p = 0;    // average minimum composition distance
};

// Recall direction scans the reference set against generated neighbors;
// precision swaps the roles.  A match must be within both deltas at once.
coverage_result coverage(const std::vector<fingerprint>& generated,
                         const std::vector<fingerprint>& reference,
                         const coverage_options& opts = {});

// 1-D earth mover's distance between empirical distributions: mean absolute
// difference of sorted samples at equal size, exact step-quantile integral
// otherwise.
double property_emd(std::vector<double> a, std::vector<double> b);

struct proxy_options {
    validity_options validity;
    coverage_options cov;
};

struct proxy_report {
    int n_generated = 0;    // decodable generated structures
    int n_undecodable = 0;  // counted structurally invalid, excluded below
    int n_reference = 0;
    double structural_validity_rate = 0;
    double composition_validity_rate = 0;
    coverage_result cov;
    // Property distributions over structurally valid generated items vs the
    // reference set: atoms per volume, oracle formation energy, element count.
    double emd_density = 0;
    double emd_energy = 0;
    double emd_nelem = 0;
    bool cov_defined = false;  // false when either valid subset is empty
};

proxy_report proxy_evaluate(const std::vector<crystal>& generated, int n_undecodable,
                            const std::vector<crystal>& reference, const energy_oracle& oracle,
                            const proxy_options& opts = {});

}  // namespace unimat
