#pragma once

#include <array>
#include <string>
#include <vector>

#include "unimat/crystal.hpp"

namespace unimat {

struct oracle_result {
    double energy = 0.0;                       // eV
    std::vector<std::array<double, 3>> forces; // eV/Angstrom, Cartesian, per site
    // Generalized stress: dE/d(a,b,c,alpha,beta,gamma) at fixed fractional
    // coordinates; lengths in eV/Angstrom, angles in eV/degree.
    std::array<double, 6> cell_grad{};
};

// Forces are the exact negative Cartesian gradient; energy is invariant under
// the dataset augmentation isometries and supercell replication (per atom).
class energy_oracle {
  public:
    virtual ~energy_oracle() = default;
    virtual oracle_result evaluate(const crystal& x) const = 0;
    virtual std::string name() const = 0;
};

struct element_potential {
    double radius = 0.0;            // Angstrom, soft-sphere contact radius
    double well_depth = 0.0;        // eV, homonuclear Morse depth
    double electronegativity = 0.0; // Pauling scale
};

// Pair potential: cubic soft-sphere repulsion inside the contact distance
// d0 = r_i + r_j plus a Morse tail with its minimum at d0, force-shifted to
// zero value and slope at the cutoff.  Heteronuclear depth
// D_ij = sqrt(D_i D_j) (1 + hetero_depth_coeff |en_i - en_j|).
struct pair_potential_params {
    double stiffness = 8.0;          // eV, repulsion prefactor
    double cutoff_factor = 1.8;      // cutoff = cutoff_factor * d0
    double morse_range_factor = 4.0; // Morse width a = morse_range_factor / d0
    double hetero_depth_coeff = 0.3;
    bool repulsion_only = false;
    std::vector<element_potential> by_z; // index = atomic number, radius 0 = absent

    static pair_potential_params defaults(); // embedded table
    static pair_potential_params from_text(const std::string& text);
    static pair_potential_params from_file(const std::string& path);

    const element_potential& of(int z) const;
    void validate() const; // positive radii/depths for every present element
};

class soft_sphere_oracle : public energy_oracle {
  public:
    soft_sphere_oracle();
    explicit soft_sphere_oracle(pair_potential_params params);

    oracle_result evaluate(const crystal& x) const override;
    std::string name() const override;

    const pair_potential_params& params() const { return params_; }

    // phi(d) and phi'(d) for one element pair; the lattice sum's kernel,
    // exposed for hand-computed pair tests.
    std::array<double, 2> pair_terms(int zi, int zj, double d) const;

  private:
    pair_potential_params params_;
};

// (E_total - sum of elemental reference energies) / n_sites.
double formation_energy(const crystal& x, const energy_oracle& oracle);
double formation_energy_from_total(const crystal& x, double e_total);

} // namespace unimat
