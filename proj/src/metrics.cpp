#include "unimat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unimat/dataset.hpp"

namespace unimat {

void validity_options::validate() const {
    if (!(min_dist > 0.0)) throw config_error("min_dist must be positive");
    if (!(min_volume_per_atom > 0.0)) throw config_error("min_volume_per_atom must be positive");
}

void coverage_options::validate() const {
    if (!(delta_struct > 0.0)) throw config_error("delta_struct must be positive");
    if (!(delta_comp > 0.0)) throw config_error("delta_comp must be positive");
}

bool structural_validity(const crystal& x, const validity_options& opts) {
    opts.validate();
    int n = x.natoms();
    if (n == 0) return false;
    if (cell_volume(x.cell) / n < opts.min_volume_per_atom) return false;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = min_image_distance(x.cell, x.sites[static_cast<std::size_t>(i)].frac,
                                          x.sites[static_cast<std::size_t>(j)].frac);
            if (d < opts.min_dist) return false;
        }
    return true;
}

composition_check composition_validity(const std::vector<std::pair<int, int>>& composition) {
    if (composition.empty()) throw schema_error("empty composition");
    const auto& table = periodic_table::instance();

    // Pure elements are neutral as-is.
    if (composition.size() == 1) {
        table.by_z(composition[0].first);
        return {true, 1};
    }

    std::vector<const std::vector<int>*> states;
    std::vector<std::int64_t> counts;
    std::uint64_t space = 1;
    for (const auto& [z, count] : composition) {
        const element& e = table.by_z(z);
        if (count < 1) throw schema_error("composition counts must be >= 1");
        states.push_back(&e.oxidation_states);
        counts.push_back(count);
        space *= static_cast<std::uint64_t>(e.oxidation_states.size());
    }
    if (space == 0) return {false, 0};

    // Partial-sum bounds over the remaining elements prune the search.
    std::size_t k = states.size();
    std::vector<std::int64_t> lo(k + 1, 0), hi(k + 1, 0);
    for (std::size_t i = k; i-- > 0;) {
        auto [mn, mx] = std::minmax_element(states[i]->begin(), states[i]->end());
        lo[i] = lo[i + 1] + counts[i] * *mn;
        hi[i] = hi[i + 1] + counts[i] * *mx;
    }

    std::vector<std::size_t> pick(k, 0);
    bool valid = false;
    auto dfs = [&](auto&& self, std::size_t i, std::int64_t sum) -> void {
        if (valid) return;
        if (sum + lo[i] > 0 || sum + hi[i] < 0) return;
        if (i == k) {
            valid = (sum == 0);
            return;
        }
        for (int s : *states[i]) self(self, i + 1, sum + counts[i] * s);
    };
    dfs(dfs, 0, 0);
    return {valid, space};
}

fingerprint fingerprint_of(const crystal& x) {
    int n = x.natoms();
    if (n == 0) throw empty_input("fingerprint of an empty crystal");
    const auto& table = periodic_table::instance();
    system_shape grid = system_shape::full();

    fingerprint fp;
    fp.composition.assign(static_cast<std::size_t>(grid.H()) * grid.W(), 0.0);
    for (const auto& s : x.sites) {
        const element& e = table.by_z(s.z);
        fp.composition[static_cast<std::size_t>(e.h) * grid.W() + e.w] += 1.0 / n;
    }

    fp.structure.assign(fingerprint_bins, 0.0);
    mat3 m = lattice_matrix(x.cell);
    std::array<int, 3> nmax = lattice_image_box(x.cell, fingerprint_range);
    double bin_width = fingerprint_range / fingerprint_bins;
    double inv2s2 = 1.0 / (2.0 * fingerprint_sigma * fingerprint_sigma);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            vec3 g0;
            for (int k = 0; k < 3; ++k) {
                double gk = x.sites[static_cast<std::size_t>(j)].frac[k] -
                            x.sites[static_cast<std::size_t>(i)].frac[k];
                g0[k] = gk - std::round(gk);
            }
            for (int v0 = -nmax[0]; v0 <= nmax[0]; ++v0)
                for (int v1 = -nmax[1]; v1 <= nmax[1]; ++v1)
                    for (int v2 = -nmax[2]; v2 <= nmax[2]; ++v2) {
                        vec3 gv{g0[0] + v0, g0[1] + v1, g0[2] + v2};
                        if (i == j && gv[0] == 0.0 && gv[1] == 0.0 && gv[2] == 0.0) continue;
                        vec3 u{};
                        for (int k = 0; k < 3; ++k)
                            for (int al = 0; al < 3; ++al) u[al] += gv[k] * m[k][al];
                        double d = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
                        if (d > fingerprint_range) continue;
                        for (int b = 0; b < fingerprint_bins; ++b) {
                            double c = (b + 0.5) * bin_width;
                            fp.structure[static_cast<std::size_t>(b)] +=
                                std::exp(-(d - c) * (d - c) * inv2s2);
                        }
                    }
        }
    for (double& v : fp.structure) v /= n;
    return fp;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw shape_mismatch("fingerprint sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

struct direction_stats {
    double cov = 0, amsd = 0, amcd = 0;
};

direction_stats scan(const std::vector<fingerprint>& from, const std::vector<fingerprint>& against,
                     const coverage_options& opts) {
    direction_stats st;
    for (const auto& f : from) {
        double ms = std::numeric_limits<double>::infinity();
        double mc = ms;
        bool hit = false;
        for (const auto& g : against) {
            double sd = structure_distance(f, g);
            double cd = composition_distance(f, g);
            ms = std::min(ms, sd);
            mc = std::min(mc, cd);
            if (sd <= opts.delta_struct && cd <= opts.delta_comp) hit = true;
        }
        st.cov += hit ? 1.0 : 0.0;
        st.amsd += ms;
        st.amcd += mc;
    }
    double n = static_cast<double>(from.size());
    st.cov /= n;
    st.amsd /= n;
    st.amcd /= n;
    return st;
}

}  // namespace

double structure_distance(const fingerprint& a, const fingerprint& b) {
    return euclidean(a.structure, b.structure);
}

double composition_distance(const fingerprint& a, const fingerprint& b) {
    return euclidean(a.composition, b.composition);
}

coverage_result coverage(const std::vector<fingerprint>& generated,
                         const std::vector<fingerprint>& reference,
                         const coverage_options& opts) {
    opts.validate();
    if (generated.empty() || reference.empty()) throw empty_input("coverage needs non-empty sets");
    coverage_result r;
    direction_stats recall = scan(reference, generated, opts);
    direction_stats precision = scan(generated, reference, opts);
    r.cov_r = recall.cov;
    r.amsd_r = recall.amsd;
    r.amcd_r = recall.amcd;
    r.cov_p = precision.cov;
    r.amsd_p = precision.amsd;
    r.amcd_p = precision.amcd;
    return r;
}

double property_emd(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw empty_input("property_emd needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t na = a.size(), nb = b.size();
    if (na == nb) {
        double s = 0.0;
        for (std::size_t i = 0; i < na; ++i) s += std::abs(a[i] - b[i]);
        return s / static_cast<double>(na);
    }
    // Exact integral of |Fa^-1(q) - Fb^-1(q)| over the step quantile functions.
    double emd = 0.0, q = 0.0;
    std::size_t i = 0, j = 0;
    while (i < na && j < nb) {
        double qa = static_cast<double>(i + 1) / static_cast<double>(na);
        double qb = static_cast<double>(j + 1) / static_cast<double>(nb);
        double next = std::min(qa, qb);
        emd += (next - q) * std::abs(a[i] - b[j]);
        q = next;
        if (qa == next) ++i;
        if (qb == next) ++j;
    }
    return emd;
}

proxy_report proxy_evaluate(const std::vector<crystal>& generated, int n_undecodable,
                            const std::vector<crystal>& reference, const energy_oracle& oracle,
                            const proxy_options& opts) {
    if (n_undecodable < 0) throw config_error("n_undecodable must be >= 0");
    proxy_report rep;
    rep.n_generated = static_cast<int>(generated.size());
    rep.n_undecodable = n_undecodable;
    rep.n_reference = static_cast<int>(reference.size());

    std::vector<const crystal*> valid;
    int n_comp_valid = 0;
    for (const auto& x : generated) {
        if (structural_validity(x, opts.validity)) valid.push_back(&x);
        if (x.natoms() > 0 && composition_validity(composition_of(x)).valid) ++n_comp_valid;
    }
    int denom = rep.n_generated + rep.n_undecodable;
    if (denom > 0) {
        rep.structural_validity_rate = static_cast<double>(valid.size()) / denom;
        rep.composition_validity_rate = static_cast<double>(n_comp_valid) / denom;
    }

    // Coverage and property distances compare the structurally valid subset
    // against the reference set.
    if (!valid.empty() && !reference.empty()) {
        std::vector<fingerprint> gen_fp, ref_fp;
        gen_fp.reserve(valid.size());
        ref_fp.reserve(reference.size());
        std::vector<double> gd, ge, gn, rd, re, rn;
        for (const crystal* x : valid) {
            gen_fp.push_back(fingerprint_of(*x));
            gd.push_back(x->natoms() / cell_volume(x->cell));
            ge.push_back(formation_energy(*x, oracle));
            gn.push_back(static_cast<double>(composition_of(*x).size()));
        }
        for (const auto& x : reference) {
            if (x.natoms() == 0) throw empty_input("reference set contains an empty crystal");
            ref_fp.push_back(fingerprint_of(x));
            rd.push_back(x.natoms() / cell_volume(x.cell));
            re.push_back(formation_energy(x, oracle));
            rn.push_back(static_cast<double>(composition_of(x).size()));
        }
        rep.cov = coverage(gen_fp, ref_fp, opts.cov);
        rep.emd_density = property_emd(gd, rd);
        rep.emd_energy = property_emd(ge, re);
        rep.emd_nelem = property_emd(gn, rn);
        rep.cov_defined = true;
    }
    return rep;
}

}  // namespace unimat
