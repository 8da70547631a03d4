#pragma once

#include <vector>

#include "unimat/crystal.hpp"
#include "unimat/energy.hpp"

namespace unimat {

struct relax_options {
    int max_steps = 2000;     // accepted steps across both stages
    double force_tol = 1e-3;  // eV/Angstrom
    double energy_tol = 1e-8; // eV
    bool relax_cell = true;
    // When set, receives the starting energy and then the energy after every
    // accepted step; the sequence is non-increasing by construction.
    std::vector<double>* trace = nullptr;
};

struct relaxation_result {
    crystal relaxed;
    double e_total = 0.0;
    double e_f = 0.0; // eV/atom
    bool converged = false;
    int steps = 0;
    double max_force = 0.0; // eV/Angstrom at the final geometry
};

// Preconditioned gradient descent with backtracking line search, first on
// coordinates (steps taken along the Cartesian forces), then (when
// relax_cell) on coordinates plus log-lengths and radian-scaled angles,
// followed by a final static evaluation.  Energy never increases across
// accepted steps; converged means max_force <= force_tol and the last step's
// energy decrease <= energy_tol.  Exhausting max_steps clears converged; a
// non-finite energy aborts.
relaxation_result relax(const crystal& x, const energy_oracle& oracle,
                        const relax_options& opts = {});

} // namespace unimat
