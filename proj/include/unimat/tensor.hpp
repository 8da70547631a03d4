#pragma once
#include <cstddef>
#include <vector>

#include "unimat/errors.hpp"

namespace unimat {

// Dense row-major tensor over (batch, depth, height, width, channels).
// Channels vary fastest so per-voxel channel vectors are contiguous, which is
// the layout every compute kernel assumes.
struct tensor {
    int n = 0, l = 0, h = 0, w = 0, c = 0;
    std::vector<double> v;

    tensor() = default;
    tensor(int n_, int l_, int h_, int w_, int c_)
        : n(n_), l(l_), h(h_), w(w_), c(c_),
          v(static_cast<std::size_t>(n_) * l_ * h_ * w_ * c_, 0.0) {}

    std::size_t size() const { return v.size(); }
    int spatial() const { return l * h * w; }

    std::size_t at(int in, int il, int ih, int iw, int ic) const {
        return ((((static_cast<std::size_t>(in) * l + il) * h + ih) * w + iw) * c) + ic;
    }
    double& operator()(int in, int il, int ih, int iw, int ic) { return v[at(in, il, ih, iw, ic)]; }
    double operator()(int in, int il, int ih, int iw, int ic) const { return v[at(in, il, ih, iw, ic)]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool same_shape(const tensor& o) const {
        return n == o.n && l == o.l && h == o.h && w == o.w && c == o.c;
    }
    void require_shape(int n_, int l_, int h_, int w_, int c_) const {
        if (n != n_ || l != l_ || h != h_ || w != w_ || c != c_)
            throw shape_mismatch("tensor shape mismatch");
    }
};

} // namespace unimat
