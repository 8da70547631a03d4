#include "unimat/airss.hpp"

#include <algorithm>
#include <cmath>

#include "unimat/log.hpp"
#include "unimat/rng.hpp"

namespace unimat {

void airss_config::validate() const {
    if (structures_per_composition < 1)
        throw config_error("structures_per_composition must be >= 1");
    if (volume_factors.empty()) throw config_error("volume_factors must be non-empty");
    for (double f : volume_factors)
        if (!(f >= 0.4 && f <= 1.2)) throw config_error("volume factors must lie in [0.4, 1.2]");
    if (!(min_separation_fraction > 0.0))
        throw config_error("min_separation_fraction must be positive");
}

namespace {

std::vector<std::pair<int, int>> normalized(std::vector<std::pair<int, int>> comp) {
    if (comp.empty()) throw schema_error("empty composition");
    std::sort(comp.begin(), comp.end());
    for (std::size_t i = 0; i < comp.size(); ++i) {
        if (comp[i].second < 1) throw schema_error("composition counts must be >= 1");
        if (i > 0 && comp[i].first == comp[i - 1].first)
            throw schema_error("duplicate element in composition");
    }
    return comp;
}

}  // namespace

std::uint64_t composition_hash(const std::vector<std::pair<int, int>>& composition) {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [z, count] : composition) {
        h = (h ^ static_cast<std::uint64_t>(z)) * 1099511628211ull;
        h = (h ^ static_cast<std::uint64_t>(count)) * 1099511628211ull;
    }
    return h;
}

crystal random_init(const std::vector<std::pair<int, int>>& composition, double volume_factor,
                    std::uint64_t seed, double min_separation_fraction) {
    auto comp = normalized(composition);
    const auto& table = periodic_table::instance();

    double target_volume = 0.0;
    std::vector<const element*> elems;
    for (const auto& [z, count] : comp) {
        const element& e = table.by_z(z);
        target_volume += count * e.atomic_sphere_volume;
        for (int k = 0; k < count; ++k) elems.push_back(&e);
    }
    target_volume *= volume_factor;

    rng r(derive_seed(seed, {hash_tag("airss-init")}));

    // Cell shape: aspect ratio <= 2, angles in [60, 120], rejecting
    // near-degenerate metric tensors; then scale to the target volume.
    unit_cell cell;
    constexpr double deg = 3.14159265358979323846 / 180.0;
    bool have_cell = false;
    for (int attempt = 0; attempt < 100 && !have_cell; ++attempt) {
        cell.a = 1.0 + r.uniform();
        cell.b = 1.0 + r.uniform();
        cell.c = 1.0 + r.uniform();
        cell.alpha = 60.0 + 60.0 * r.uniform();
        cell.beta = 60.0 + 60.0 * r.uniform();
        cell.gamma = 60.0 + 60.0 * r.uniform();
        double ca = std::cos(cell.alpha * deg);
        double cb = std::cos(cell.beta * deg);
        double cg = std::cos(cell.gamma * deg);
        double vv = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg;
        have_cell = vv >= 0.1;
    }
    if (!have_cell) throw placement_failed("no usable cell shape after bounded attempts");
    double scale = std::cbrt(target_volume / cell_volume(cell));
    cell.a *= scale;
    cell.b *= scale;
    cell.c *= scale;

    crystal x;
    x.cell = cell;
    for (std::size_t i = 0; i < elems.size(); ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            vec3 f{r.uniform(), r.uniform(), r.uniform()};
            placed = true;
            for (const auto& s : x.sites) {
                double sep = min_separation_fraction *
                             (elems[i]->covalent_radius + table.by_z(s.z).covalent_radius);
                if (min_image_distance(cell, f, s.frac) < sep) {
                    placed = false;
                    break;
                }
            }
            if (placed) x.sites.push_back({elems[i]->z, f});
        }
        if (!placed)
            throw placement_failed("site " + std::to_string(i + 1) + " of " +
                                   std::to_string(elems.size()) +
                                   " could not be placed at this volume");
    }
    return x;
}

airss_record airss_run(const std::vector<std::pair<int, int>>& composition,
                       const airss_config& cfg, const pair_potential_params& params) {
    cfg.validate();
    auto comp = normalized(composition);

    soft_sphere_oracle full(params);
    pair_potential_params pre_params = params;
    pre_params.repulsion_only = true;
    soft_sphere_oracle pre(pre_params);

    relax_options pre_opts;
    pre_opts.max_steps = 100;
    pre_opts.force_tol = 1e-2;
    pre_opts.relax_cell = false;

    std::uint64_t ch = composition_hash(comp);
    airss_record rec;
    for (int i = 0; i < cfg.structures_per_composition; ++i) {
        ++rec.n_attempted;
        double factor = cfg.volume_factors[static_cast<std::size_t>(i) % cfg.volume_factors.size()];
        std::uint64_t seed_i =
            derive_seed(cfg.seed, {hash_tag("airss"), ch, static_cast<std::uint64_t>(i)});
        crystal x0;
        try {
            x0 = random_init(comp, factor, seed_i, cfg.min_separation_fraction);
        } catch (const placement_failed&) {
            ++rec.n_placement_failed;
            continue;
        }
        try {
            relaxation_result warm = relax(x0, pre, pre_opts);
            relaxation_result res = relax(warm.relaxed, full, relax_options{});
            if (res.converged) {
                ++rec.n_converged;
                if (!rec.best || res.e_f < rec.best->e_f) rec.best = res;
            }
        } catch (const error& e) {
            // A blown-up attempt counts as not converged.
            log_line(log_level::debug, "airss_attempt_failed",
                     {{"attempt", std::to_string(i)}, {"reason", e.what()}});
            continue;
        }
    }
    rec.converged = rec.n_converged >= 1;
    return rec;
}

double weighted_convergence_rate(const std::vector<convergence_group>& groups) {
    if (groups.empty()) throw empty_input("weighted_convergence_rate needs groups");
    std::int64_t total = 0;
    for (const auto& g : groups) {
        if (g.n_sampled < 1) throw config_error("group sample size must be >= 1");
        if (g.n_converged < 0 || g.n_converged > g.n_sampled)
            throw config_error("group converged count out of range");
        if (g.population < 0) throw config_error("group population must be >= 0");
        total += g.population;
    }
    if (total <= 0) throw config_error("total population must be positive");
    double rate = 0.0;
    for (const auto& g : groups)
        rate += (static_cast<double>(g.n_converged) / g.n_sampled) *
                (static_cast<double>(g.population) / static_cast<double>(total));
    return rate;
}

airss_summary summarize(const std::vector<airss_record>& records) {
    airss_summary s;
    s.n_compositions = static_cast<int>(records.size());
    std::int64_t attempts = 0, converged = 0;
    for (const auto& r : records) {
        if (r.converged) ++s.n_converged_compositions;
        attempts += r.n_attempted;
        converged += r.n_converged;
    }
    if (s.n_compositions > 0)
        s.composition_rate = static_cast<double>(s.n_converged_compositions) / s.n_compositions;
    if (attempts > 0) s.attempt_rate = static_cast<double>(converged) / static_cast<double>(attempts);
    return s;
}

}  // namespace unimat
