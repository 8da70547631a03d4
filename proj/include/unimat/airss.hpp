#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "unimat/crystal.hpp"
#include "unimat/energy.hpp"
#include "unimat/relax.hpp"

namespace unimat {

struct airss_config {
    int structures_per_composition = 100;
    // Scale factors on the summed atomic sphere volumes; the sweep spans
    // [0.4, 1.2] and every factor must stay inside that span.
    std::vector<double> volume_factors = {0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
    double min_separation_fraction = 0.7;  // of the summed covalent radii
    std::uint64_t seed = 0;
    void validate() const;
};

// Random cell of exactly volume_factor times the summed atomic sphere
// volumes, aspect ratio at most 2, angles in [60, 120] degrees, sites placed
// by rejection sampling that keeps every pair at least
// min_separation_fraction * (r_i + r_j) apart.  Deterministic per
// (composition, volume_factor, seed); throws placement_failed when the
// bounded rejection budget runs out.
crystal random_init(const std::vector<std::pair<int, int>>& composition, double volume_factor,
                    std::uint64_t seed, double min_separation_fraction = 0.7);

// Seed tag of a (sorted, deduplicated) composition; attempt i of a search run
// draws from derive_seed(seed, {hash_tag("airss"), composition_hash(c), i}).
std::uint64_t composition_hash(const std::vector<std::pair<int, int>>& composition);

struct airss_record {
    int n_attempted = 0;
    int n_placement_failed = 0;
    int n_converged = 0;
    bool converged = false;  // at least one attempt converged
    std::optional<relaxation_result> best;  // lowest-e_f converged attempt
};

// One search per composition: every attempt gets a repulsion-only
// pre-relaxation at fixed cell, then a full relaxation under the given
// potential.  Placement or evaluation failures count the attempt, never
// abort the run.
airss_record airss_run(const std::vector<std::pair<int, int>>& composition,
                       const airss_config& cfg, const pair_potential_params& params);

struct airss_summary {
    int n_compositions = 0;
    int n_converged_compositions = 0;  // records with converged == true
    double composition_rate = 0;       // converged compositions / compositions
    double attempt_rate = 0;           // converged attempts / attempts
};

airss_summary summarize(const std::vector<airss_record>& records);

struct convergence_group {
    int n_converged = 0;          // converged compositions within the sample
    int n_sampled = 0;            // compositions actually evaluated
    std::int64_t population = 0;  // stratum size in the full pool
};

// Stratified convergence estimate: per-group rates weighted by each group's
// share of the total population.
double weighted_convergence_rate(const std::vector<convergence_group>& groups);

}  // namespace unimat
