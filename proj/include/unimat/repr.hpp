#pragma once
#include <array>
#include <string>
#include <vector>

#include "unimat/crystal.hpp"
#include "unimat/periodic_table.hpp"

namespace unimat {

// Grid geometry of the material tensor: L slots per element over an H x W
// periodic-table layout.  The full table is 9 x 18; a reduced shape compacts
// the rows/columns spanned by an element subset so small studies stay small.
struct system_shape {
    int L = 8;
    std::vector<int> filter;  // atomic numbers; empty = full table
    std::vector<int> row_h;   // grid row of each tensor row
    std::vector<int> col_w;   // grid column of each tensor column

    static system_shape full(int L = 8);
    static system_shape reduced(int L, std::vector<int> zs);
    static system_shape reduced_symbols(int L, const std::vector<std::string>& symbols);

    int H() const { return static_cast<int>(row_h.size()); }
    int W() const { return static_cast<int>(col_w.size()); }
    int slots() const { return L * H() * W(); }

    bool contains(int z) const;
    // Tensor cell of an element; element_out_of_shape if filtered out.
    std::pair<int, int> cell_of(int z) const;
    // Element housed at a tensor cell, nullptr when the cell is empty.
    const element* element_at(int h, int w) const;

    bool operator==(const system_shape& o) const {
        return L == o.L && filter == o.filter && row_h == o.row_h && col_w == o.col_w;
    }
};

inline constexpr double null_coord = -1.0;
inline constexpr double default_null_threshold = -0.5;

struct unimat_tensor {
    system_shape shape;
    std::vector<double> values;          // (L, H, W, 3) row-major
    std::array<double, 6> cell_params{}; // a,b,c,alpha,beta,gamma (unscaled)

    unimat_tensor() = default;
    explicit unimat_tensor(const system_shape& s)
        : shape(s), values(static_cast<std::size_t>(s.slots()) * 3, null_coord) {}

    std::size_t at(int l, int h, int w, int c) const {
        return ((static_cast<std::size_t>(l) * shape.H() + h) * shape.W() + w) * 3 + c;
    }
    double& operator()(int l, int h, int w, int c) { return values[at(l, h, w, c)]; }
    double operator()(int l, int h, int w, int c) const { return values[at(l, h, w, c)]; }

    bool slot_is_null(int l, int h, int w, double threshold = default_null_threshold) const {
        return (*this)(l, h, w, 0) < threshold && (*this)(l, h, w, 1) < threshold &&
               (*this)(l, h, w, 2) < threshold;
    }
};

// Crystal -> tensor.  Coordinates already in [0,1] are stored verbatim
// (1.0 included); out-of-range inputs wrap mod 1 first.  Occupied slots pack
// from l=0 in lexicographic coordinate order, everything else is null.
unimat_tensor encode(const crystal& x, const system_shape& shape);

// Tensor -> crystal.  Total on arbitrary real tensors: a slot is null iff all
// three components fall below null_threshold; surviving coordinates clamp to
// [-0.25, 1.25] then wrap mod 1.  Non-null slots at empty grid cells carry no
// element and are dropped.
crystal decode(const unimat_tensor& t, double null_threshold = default_null_threshold);

} // namespace unimat
