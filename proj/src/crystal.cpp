#include "unimat/crystal.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace unimat {

namespace {
constexpr double deg = std::numbers::pi / 180.0;
}

void unit_cell::validate() const {
    if (!(a > 0) || !(b > 0) || !(c > 0))
        throw invalid_cell("cell lengths must be positive");
    for (double ang : {alpha, beta, gamma})
        if (!(ang > 0) || !(ang < 180)) throw invalid_cell("cell angles must lie in (0, 180)");
    double ca = std::cos(alpha * deg), cb = std::cos(beta * deg), cg = std::cos(gamma * deg);
    double v2 = 1 - ca * ca - cb * cb - cg * cg + 2 * ca * cb * cg;
    if (!(v2 > 0)) throw invalid_cell("cell angles give non-positive volume");
}

mat3 lattice_matrix(const unit_cell& cell) {
    cell.validate();
    double ca = std::cos(cell.alpha * deg), cb = std::cos(cell.beta * deg);
    double cg = std::cos(cell.gamma * deg), sg = std::sin(cell.gamma * deg);
    double v = std::sqrt(1 - ca * ca - cb * cb - cg * cg + 2 * ca * cb * cg);
    mat3 m{};
    m[0] = {cell.a, 0.0, 0.0};
    m[1] = {cell.b * cg, cell.b * sg, 0.0};
    m[2] = {cell.c * cb, cell.c * (ca - cb * cg) / sg, cell.c * v / sg};
    return m;
}

double cell_volume(const unit_cell& cell) {
    cell.validate();
    double ca = std::cos(cell.alpha * deg), cb = std::cos(cell.beta * deg);
    double cg = std::cos(cell.gamma * deg);
    double v = std::sqrt(1 - ca * ca - cb * cb - cg * cg + 2 * ca * cb * cg);
    return cell.a * cell.b * cell.c * v;
}

vec3 frac_to_cartesian(const unit_cell& cell, const vec3& f) {
    mat3 m = lattice_matrix(cell);
    vec3 p{};
    for (int k = 0; k < 3; ++k)
        p[k] = f[0] * m[0][k] + f[1] * m[1][k] + f[2] * m[2][k];
    return p;
}

vec3 cartesian_to_frac(const unit_cell& cell, const vec3& p) {
    mat3 m = lattice_matrix(cell);
    // Invert the row-vector lattice matrix.
    double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if (std::abs(det) < 1e-300) throw invalid_cell("degenerate lattice matrix");
    mat3 inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    // p = f * M  =>  f = p * M^-1.
    vec3 f{};
    for (int k = 0; k < 3; ++k)
        f[k] = p[0] * inv[0][k] + p[1] * inv[1][k] + p[2] * inv[2][k];
    return f;
}

std::vector<std::pair<const element*, vec3>> to_cartesian(const crystal& x) {
    const auto& pt = periodic_table::instance();
    std::vector<std::pair<const element*, vec3>> out;
    out.reserve(x.sites.size());
    for (const auto& s : x.sites)
        out.emplace_back(&pt.by_z(s.z), frac_to_cartesian(x.cell, s.frac));
    return out;
}

double min_image_distance(const unit_cell& cell, const vec3& f1, const vec3& f2) {
    mat3 m = lattice_matrix(cell);
    vec3 df{f2[0] - f1[0], f2[1] - f1[1], f2[2] - f1[2]};
    for (int k = 0; k < 3; ++k) df[k] -= std::floor(df[k] + 0.5); // nearest-cell reduction
    double best = 1e300;
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
            for (int k = -1; k <= 1; ++k) {
                double fx = df[0] + i, fy = df[1] + j, fz = df[2] + k;
                double px = fx * m[0][0] + fy * m[1][0] + fz * m[2][0];
                double py = fx * m[0][1] + fy * m[1][1] + fz * m[2][1];
                double pz = fx * m[0][2] + fy * m[1][2] + fz * m[2][2];
                double d2 = px * px + py * py + pz * pz;
                if (d2 < best) best = d2;
            }
    return std::sqrt(best);
}

double wrap_frac(double v) {
    double r = v - std::floor(v);
    if (r >= 1.0) r = 0.0; // guards floor rounding at exact integers
    return r;
}

vec3 wrap_frac(const vec3& f) { return {wrap_frac(f[0]), wrap_frac(f[1]), wrap_frac(f[2])}; }

std::array<int, 3> lattice_image_box(const unit_cell& cell, double cutoff) {
    mat3 m = lattice_matrix(cell);
    double vol = cell_volume(cell);
    std::array<int, 3> nmax{};
    for (int k = 0; k < 3; ++k) {
        const auto& p = m[(k + 1) % 3];
        const auto& q = m[(k + 2) % 3];
        double cx = p[1] * q[2] - p[2] * q[1];
        double cy = p[2] * q[0] - p[0] * q[2];
        double cz = p[0] * q[1] - p[1] * q[0];
        double w = vol / std::sqrt(cx * cx + cy * cy + cz * cz);
        nmax[k] = static_cast<int>(std::floor(cutoff / w + 0.5)) + 1;
    }
    return nmax;
}

crystal make_supercell(const crystal& x, int n1, int n2, int n3) {
    if (n1 < 1 || n2 < 1 || n3 < 1) throw index_error("supercell factors must be >= 1");
    crystal out;
    out.cell = x.cell;
    out.cell.a *= n1;
    out.cell.b *= n2;
    out.cell.c *= n3;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j)
            for (int k = 0; k < n3; ++k)
                for (const auto& s : x.sites)
                    out.sites.push_back({s.z,
                                         {(s.frac[0] + i) / n1, (s.frac[1] + j) / n2,
                                          (s.frac[2] + k) / n3}});
    return out;
}

std::vector<std::pair<int, int>> composition_of(const crystal& x) {
    std::map<int, int> counts;
    for (const auto& s : x.sites) ++counts[s.z];
    return {counts.begin(), counts.end()};
}

} // namespace unimat
