#include "unimat/energy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "unimat/periodic_table.hpp"

namespace unimat::embedded {
extern const char* const potential_params_tsv;
}

namespace unimat {

namespace {

constexpr double deg = 3.141592653589793238462643383279502884 / 180.0;

std::vector<std::string> split_tabs(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_num(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw parse_error("trailing characters in number: " + s, line_no);
        return v;
    } catch (const std::invalid_argument&) {
        throw parse_error("not a number: " + s, line_no);
    } catch (const std::out_of_range&) {
        throw parse_error("number out of range: " + s, line_no);
    }
}

// dM/dp for the a-along-x lattice construction, p indexing
// (a, b, c, alpha, beta, gamma); angle derivatives are per degree.
mat3 lattice_matrix_grad(const unit_cell& cell, int p) {
    double ca = std::cos(cell.alpha * deg), sa = std::sin(cell.alpha * deg);
    double cb = std::cos(cell.beta * deg), sb = std::sin(cell.beta * deg);
    double cg = std::cos(cell.gamma * deg), sg = std::sin(cell.gamma * deg);
    double cy = (ca - cb * cg) / sg;
    double cz = std::sqrt(std::max(0.0, 1.0 - cb * cb - cy * cy));
    if (cz < 1e-12) throw invalid_cell("nearly degenerate cell");
    mat3 g{};
    switch (p) {
    case 0: g[0] = {1.0, 0.0, 0.0}; break;
    case 1: g[1] = {cg, sg, 0.0}; break;
    case 2: g[2] = {cb, cy, cz}; break;
    case 3: { // alpha
        double dcy = -sa / sg;
        double dcz = -cy * dcy / cz;
        g[2] = {0.0, cell.c * dcy * deg, cell.c * dcz * deg};
        break;
    }
    case 4: { // beta
        double dcb = -sb;
        double dcy = sb * cg / sg;
        double dcz = -(cb * dcb + cy * dcy) / cz;
        g[2] = {cell.c * dcb * deg, cell.c * dcy * deg, cell.c * dcz * deg};
        break;
    }
    default: { // gamma
        double dcy = cb - cy * cg / sg;
        double dcz = -cy * dcy / cz;
        g[1] = {-cell.b * sg * deg, cell.b * cg * deg, 0.0};
        g[2] = {0.0, cell.c * dcy * deg, cell.c * dcz * deg};
        break;
    }
    }
    return g;
}

} // namespace

const element_potential& pair_potential_params::of(int z) const {
    if (z < 1 || z >= static_cast<int>(by_z.size()) || by_z[static_cast<std::size_t>(z)].radius <= 0.0)
        throw unsupported_element("no potential parameters for Z=" + std::to_string(z));
    return by_z[static_cast<std::size_t>(z)];
}

void pair_potential_params::validate() const {
    if (!(stiffness > 0.0)) throw config_error("stiffness must be positive");
    if (!(cutoff_factor > 1.0)) throw config_error("cutoff_factor must exceed 1");
    if (!(morse_range_factor > 0.0)) throw config_error("morse_range_factor must be positive");
    if (hetero_depth_coeff < 0.0) throw config_error("hetero_depth_coeff must be non-negative");
    for (std::size_t z = 0; z < by_z.size(); ++z) {
        const element_potential& e = by_z[z];
        if (e.radius == 0.0 && e.well_depth == 0.0) continue;
        if (!(e.radius > 0.0) || !(e.well_depth > 0.0) || e.electronegativity < 0.0)
            throw config_error("non-positive potential parameters for Z=" + std::to_string(z));
    }
}

pair_potential_params pair_potential_params::from_text(const std::string& text) {
    pair_potential_params p;
    p.by_z.assign(static_cast<std::size_t>(max_z) + 1, element_potential{});
    const periodic_table& pt = periodic_table::instance();
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    int seen = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_tabs(line);
        if (cols.size() != 4) throw parse_error("potential table: expected 4 columns", line_no);
        if (!pt.has_symbol(cols[0]))
            throw parse_error("unknown element symbol: " + cols[0], line_no);
        int z = pt.by_symbol(cols[0]).z;
        element_potential& e = p.by_z[static_cast<std::size_t>(z)];
        if (e.radius > 0.0) throw parse_error("duplicate element: " + cols[0], line_no);
        e.radius = parse_num(cols[1], line_no);
        e.well_depth = parse_num(cols[2], line_no);
        e.electronegativity = parse_num(cols[3], line_no);
        ++seen;
    }
    if (seen == 0) throw schema_error("potential table is empty");
    p.validate();
    return p;
}

pair_potential_params pair_potential_params::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return from_text(buf.str());
}

pair_potential_params pair_potential_params::defaults() {
    static const pair_potential_params table = from_text(embedded::potential_params_tsv);
    return table;
}

soft_sphere_oracle::soft_sphere_oracle() : params_(pair_potential_params::defaults()) {}

soft_sphere_oracle::soft_sphere_oracle(pair_potential_params params)
    : params_(std::move(params)) {
    params_.validate();
}

std::string soft_sphere_oracle::name() const {
    return params_.repulsion_only ? "soft-sphere" : "soft-sphere+morse";
}

std::array<double, 2> soft_sphere_oracle::pair_terms(int zi, int zj, double d) const {
    const element_potential& ei = params_.of(zi);
    const element_potential& ej = params_.of(zj);
    double d0 = ei.radius + ej.radius;
    double rc = params_.cutoff_factor * d0;
    if (d >= rc) return {0.0, 0.0};
    double phi = 0.0, dphi = 0.0;
    if (d < d0) {
        double u = (d0 - d) / d0;
        phi += params_.stiffness * u * u * u;
        dphi += -3.0 * params_.stiffness * u * u / d0;
    }
    if (!params_.repulsion_only) {
        double depth = std::sqrt(ei.well_depth * ej.well_depth) *
                       (1.0 + params_.hetero_depth_coeff *
                                  std::abs(ei.electronegativity - ej.electronegativity));
        double a = params_.morse_range_factor / d0;
        auto morse = [&](double r) {
            double e1 = std::exp(-a * (r - d0));
            return depth * (e1 * e1 - 2.0 * e1);
        };
        auto dmorse = [&](double r) {
            double e1 = std::exp(-a * (r - d0));
            return depth * 2.0 * a * (e1 - e1 * e1);
        };
        // Force-shifted so value and slope vanish at the cutoff.
        phi += morse(d) - morse(rc) - (d - rc) * dmorse(rc);
        dphi += dmorse(d) - dmorse(rc);
    }
    return {phi, dphi};
}

oracle_result soft_sphere_oracle::evaluate(const crystal& x) const {
    if (x.sites.empty()) throw empty_input("energy of an empty crystal");
    mat3 M = lattice_matrix(x.cell);
    int n = x.natoms();

    double rmax = 0.0;
    std::vector<const element_potential*> ep(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ep[static_cast<std::size_t>(i)] = &params_.of(x.sites[static_cast<std::size_t>(i)].z);
        rmax = std::max(rmax, ep[static_cast<std::size_t>(i)]->radius);
    }
    double rc_max = params_.cutoff_factor * 2.0 * rmax;

    std::array<int, 3> nmax = lattice_image_box(x.cell, rc_max);

    oracle_result res;
    res.forces.assign(static_cast<std::size_t>(n), {0.0, 0.0, 0.0});
    mat3 dEdM{};

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double d0 = ep[static_cast<std::size_t>(i)]->radius + ep[static_cast<std::size_t>(j)]->radius;
            double rc = params_.cutoff_factor * d0;
            double rc2 = rc * rc;
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
                            for (int al = 0; al < 3; ++al) u[al] += gv[k] * M[k][al];
                        double d2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
                        if (d2 >= rc2) continue;
                        double d = std::sqrt(d2);
                        auto [phi, dphi] =
                            pair_terms(x.sites[static_cast<std::size_t>(i)].z,
                                       x.sites[static_cast<std::size_t>(j)].z, d);
                        res.energy += 0.5 * phi;
                        double f = 0.5 * dphi / std::max(d, 1e-10);
                        for (int al = 0; al < 3; ++al) {
                            res.forces[static_cast<std::size_t>(i)][al] += f * u[al];
                            res.forces[static_cast<std::size_t>(j)][al] -= f * u[al];
                        }
                        for (int k = 0; k < 3; ++k)
                            for (int al = 0; al < 3; ++al) dEdM[k][al] += f * u[al] * gv[k];
                    }
        }
    }

    for (int p = 0; p < 6; ++p) {
        mat3 dM = lattice_matrix_grad(x.cell, p);
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
            for (int al = 0; al < 3; ++al) s += dEdM[k][al] * dM[k][al];
        res.cell_grad[static_cast<std::size_t>(p)] = s;
    }
    return res;
}

double formation_energy_from_total(const crystal& x, double e_total) {
    if (x.sites.empty()) throw empty_input("formation energy of an empty crystal");
    const periodic_table& pt = periodic_table::instance();
    double ref = 0.0;
    for (const site& s : x.sites) ref += pt.by_z(s.z).reference_energy;
    return (e_total - ref) / static_cast<double>(x.natoms());
}

double formation_energy(const crystal& x, const energy_oracle& oracle) {
    return formation_energy_from_total(x, oracle.evaluate(x).energy);
}

} // namespace unimat
