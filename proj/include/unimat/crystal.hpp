#pragma once
#include <array>
#include <string>
#include <vector>

#include "unimat/errors.hpp"
#include "unimat/periodic_table.hpp"

namespace unimat {

using vec3 = std::array<double, 3>;
using mat3 = std::array<std::array<double, 3>, 3>; // row vectors = lattice vectors

struct unit_cell {
    double a = 1, b = 1, c = 1;          // Angstrom
    double alpha = 90, beta = 90, gamma = 90; // degrees

    void validate() const;
    std::array<double, 6> params() const { return {a, b, c, alpha, beta, gamma}; }
    static unit_cell from_params(const std::array<double, 6>& p) {
        return {p[0], p[1], p[2], p[3], p[4], p[5]};
    }
};

// Lattice row-vector matrix: a along x, b in the xy plane.
mat3 lattice_matrix(const unit_cell& cell);
double cell_volume(const unit_cell& cell);

struct site {
    int z = 0;  // atomic number
    vec3 frac{};
};

struct crystal {
    unit_cell cell;
    std::vector<site> sites;

    int natoms() const { return static_cast<int>(sites.size()); }
};

vec3 frac_to_cartesian(const unit_cell& cell, const vec3& f);
vec3 cartesian_to_frac(const unit_cell& cell, const vec3& p);

// Cartesian positions of all sites, paired with their elements.
std::vector<std::pair<const element*, vec3>> to_cartesian(const crystal& x);

// Shortest distance between two fractional positions over the 27 adjacent
// image translations.  Sufficient for cells whose skew keeps nearest images
// adjacent (the generation/validity workloads here); a wider sweep is used as
// the test oracle.
double min_image_distance(const unit_cell& cell, const vec3& f1, const vec3& f2);

// Wrap into [0,1).
double wrap_frac(double v);
vec3 wrap_frac(const vec3& f);

// Per-axis lattice image counts covering a cutoff sphere, assuming the
// fractional displacement was first reduced to [-1/2, 1/2) per axis.  Derived
// from the perpendicular plane spacings, so it is exact for arbitrary skew.
std::array<int, 3> lattice_image_box(const unit_cell& cell, double cutoff);

// n1 x n2 x n3 replication; fractional coordinates rescaled into the supercell.
crystal make_supercell(const crystal& x, int n1, int n2, int n3);

// element -> count, ordered by atomic number.
std::vector<std::pair<int, int>> composition_of(const crystal& x);

} // namespace unimat
