#include "unimat/repr.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace unimat {

system_shape system_shape::full(int L) {
    if (L < 1) throw shape_mismatch("L must be >= 1");
    system_shape s;
    s.L = L;
    s.row_h.resize(grid_rows);
    s.col_w.resize(grid_cols);
    for (int h = 0; h < grid_rows; ++h) s.row_h[h] = h;
    for (int w = 0; w < grid_cols; ++w) s.col_w[w] = w;
    return s;
}

system_shape system_shape::reduced(int L, std::vector<int> zs) {
    if (L < 1) throw shape_mismatch("L must be >= 1");
    if (zs.empty()) throw shape_mismatch("reduced shape needs a non-empty element set");
    std::sort(zs.begin(), zs.end());
    zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
    const auto& pt = periodic_table::instance();
    system_shape s;
    s.L = L;
    s.filter = zs;
    for (int z : zs) {
        const element& e = pt.by_z(z);
        s.row_h.push_back(e.h);
        s.col_w.push_back(e.w);
    }
    auto uniq = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(s.row_h);
    uniq(s.col_w);
    return s;
}

system_shape system_shape::reduced_symbols(int L, const std::vector<std::string>& symbols) {
    const auto& pt = periodic_table::instance();
    std::vector<int> zs;
    zs.reserve(symbols.size());
    for (const auto& sym : symbols) zs.push_back(pt.by_symbol(sym).z);
    return reduced(L, std::move(zs));
}

bool system_shape::contains(int z) const {
    if (filter.empty()) return z >= 1 && z <= max_z;
    return std::binary_search(filter.begin(), filter.end(), z);
}

std::pair<int, int> system_shape::cell_of(int z) const {
    if (!contains(z))
        throw element_out_of_shape("element Z=" + std::to_string(z) + " outside shape");
    const element& e = periodic_table::instance().by_z(z);
    auto row = std::lower_bound(row_h.begin(), row_h.end(), e.h);
    auto col = std::lower_bound(col_w.begin(), col_w.end(), e.w);
    if (row == row_h.end() || *row != e.h || col == col_w.end() || *col != e.w)
        throw element_out_of_shape("element Z=" + std::to_string(z) + " outside shape");
    return {static_cast<int>(row - row_h.begin()), static_cast<int>(col - col_w.begin())};
}

const element* system_shape::element_at(int h, int w) const {
    if (h < 0 || h >= H() || w < 0 || w >= W()) throw index_error("tensor cell out of range");
    const element* e = periodic_table::instance().cell(row_h[h], col_w[w]);
    if (!e) return nullptr;
    if (!filter.empty() && !std::binary_search(filter.begin(), filter.end(), e->z))
        return nullptr;
    return e;
}

unimat_tensor encode(const crystal& x, const system_shape& shape) {
    unimat_tensor t(shape);
    t.cell_params = x.cell.params();
    std::map<int, std::vector<vec3>> per_element;
    for (const auto& s : x.sites) {
        vec3 f = s.frac;
        for (double& v : f)
            if (v < 0.0 || v > 1.0) v = wrap_frac(v);
        per_element[s.z].push_back(f);
    }
    for (auto& [z, coords] : per_element) {
        auto [h, w] = shape.cell_of(z);
        if (static_cast<int>(coords.size()) > shape.L)
            throw capacity_exceeded(periodic_table::instance().by_z(z).symbol + ": " +
                                    std::to_string(coords.size()) + " sites exceed L=" +
                                    std::to_string(shape.L));
        std::sort(coords.begin(), coords.end());
        for (std::size_t l = 0; l < coords.size(); ++l)
            for (int c = 0; c < 3; ++c) t(static_cast<int>(l), h, w, c) = coords[l][c];
    }
    return t;
}

crystal decode(const unimat_tensor& t, double null_threshold) {
    crystal out;
    out.cell = unit_cell::from_params(t.cell_params);
    out.cell.validate();
    for (int h = 0; h < t.shape.H(); ++h)
        for (int w = 0; w < t.shape.W(); ++w) {
            const element* e = t.shape.element_at(h, w);
            for (int l = 0; l < t.shape.L; ++l) {
                if (t.slot_is_null(l, h, w, null_threshold)) continue;
                if (!e) continue; // noise in an unoccupied cell carries no element
                vec3 f{};
                for (int c = 0; c < 3; ++c) {
                    double v = std::clamp(t(l, h, w, c), -0.25, 1.25);
                    f[c] = wrap_frac(v);
                }
                out.sites.push_back({e->z, f});
            }
        }
    return out;
}

} // namespace unimat
