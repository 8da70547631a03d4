#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "unimat/errors.hpp"
#include "unimat/kernels.hpp"
#include "unimat/rng.hpp"

namespace unimat {

// Named flat parameter arrays in creation order; gradients share the layout.
// Layers hold integer handles because the backing storage grows during
// construction.
class param_store {
  public:
    struct entry {
        std::string name;
        std::vector<int> shape;
        std::size_t offset = 0;
        std::size_t size = 0;
    };

    int add(const std::string& name, std::vector<int> shape);

    const entry& info(int idx) const { return entries_.at(static_cast<std::size_t>(idx)); }
    const std::vector<entry>& entries() const { return entries_; }
    int find(const std::string& name) const;  // -1 when absent

    double* value(int idx) { return values_.data() + info(idx).offset; }
    const double* value(int idx) const { return values_.data() + info(idx).offset; }
    double* grad(int idx) { return grads_.data() + info(idx).offset; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& grads() { return grads_; }

    std::size_t size() const { return values_.size(); }
    void zero_grads();

  private:
    std::vector<entry> entries_;
    std::vector<double> values_, grads_;
};

void silu_fwd(const double* x, std::size_t count, double* y);
// dx is written, not accumulated.
void silu_bwd(const double* x, const double* dy, std::size_t count, double* dx);

// Sinusoidal step features; dim must be even.
void time_features(const double* t, int n, int dim, double* out);

// Average pooling with window (1,3,3) and ceil-division output sizes; edge
// windows average over their actual extent.  Channels-last.
kernels::conv_dims pooled_dims(kernels::conv_dims d);
void avgpool3_fwd(const double* x, kernels::conv_dims d, int C, double* y);
void avgpool3_bwd(const double* dy, kernels::conv_dims d, int C, double* dx);

// Nearest-neighbour upsample from pooled_dims(od) back to od.
void upsample3_fwd(const double* x, kernels::conv_dims od, int C, double* y);
void upsample3_bwd(const double* dy, kernels::conv_dims od, int C, double* dx);

struct conv3d_layer {
    param_store* ps = nullptr;
    int cin = 0, cout = 0;
    int w = -1, b = -1;
    std::vector<double> x_cache;
    kernels::conv_dims d_cache{};

    void init(param_store& store, const std::string& name, int cin_, int cout_, rng& r,
              bool zero_init = false);
    void forward(const double* x, kernels::conv_dims d, double* y);
    // dx may be null when the input gradient is not needed.
    void backward(const double* dy, double* dx);
};

struct linear_layer {
    param_store* ps = nullptr;
    int in = 0, out = 0;
    int w = -1, b = -1;
    std::vector<double> x_cache;
    long rows_cache = 0;

    void init(param_store& store, const std::string& name, int in_, int out_, rng& r,
              bool zero_init = false);
    void forward(const double* x, long rows, double* y);
    void backward(const double* dy, double* dx);
};

struct groupnorm_layer {
    static constexpr double gn_eps = 1e-5;

    param_store* ps = nullptr;
    int C = 0, groups = 0;
    int gamma = -1, beta = -1;
    std::vector<double> x_cache, mean_cache, rstd_cache;
    int n_cache = 0, S_cache = 0;

    void init(param_store& store, const std::string& name, int C_);
    void forward(const double* x, int n, int S, double* y);
    void backward(const double* dy, double* dx);
};

// Inverted dropout; a null rng means eval mode (identity).
struct dropout_layer {
    double rate = 0.0;
    bool active = false;
    std::size_t count_cache = 0;
    std::vector<unsigned char> mask;

    void forward(const double* x, std::size_t count, double* y, rng* r);
    void backward(const double* dy, double* dx);
};

// Pre-norm self-attention over all spatial tokens with a residual connection:
// y = x + proj(attention(qkv(groupnorm(x)))).
struct attention_layer {
    param_store* ps = nullptr;
    int C = 0, heads = 0, hd = 0;
    groupnorm_layer gn;
    linear_layer qkv;
    linear_layer proj;  // zero-init
    std::vector<double> gn_out, q, k, v, attn, attn_out;
    int n_cache = 0, T_cache = 0;

    void init(param_store& store, const std::string& name, int C_, int head_dim, rng& r);
    void forward(const double* x, int n, int T, double* y);
    void backward(const double* dy, double* dx);
};

// Residual block with time conditioning:
// y = skip(x) + conv2(dropout(silu(gn2(conv1(silu(gn1(x))) + time)))).
struct res_block {
    param_store* ps = nullptr;
    int cin = 0, cout = 0, time_dim = 0;
    groupnorm_layer gn1;
    conv3d_layer conv1;
    linear_layer time_proj;
    groupnorm_layer gn2;
    conv3d_layer conv2;  // zero-init
    bool has_skip = false;
    linear_layer skip;  // 1x1 projection when cin != cout
    dropout_layer drop;

    std::vector<double> a_cache, c2_cache, temb_cache, h_cache;
    kernels::conv_dims d_cache{};
    int n_cache = 0;

    void init(param_store& store, const std::string& name, int cin_, int cout_, int time_dim_,
              double dropout_rate, rng& r);
    void forward(const double* x, const double* temb, int n, kernels::conv_dims d, double* y,
                 rng* drop_rng);
    // dtemb accumulates; dx is written.
    void backward(const double* dy, double* dx, double* dtemb);
};

// temb = lin2(silu(lin1(sinusoidal(t)))).
struct time_embedding {
    param_store* ps = nullptr;
    int feat_dim = 0, embed_dim = 0;
    linear_layer lin1, lin2;
    std::vector<double> feats, h1;
    int n_cache = 0;

    void init(param_store& store, const std::string& name, int feat_dim_, int embed_dim_, rng& r);
    void forward(const double* t, int n, double* temb);
    void backward(const double* dtemb);  // parameters only; t is not differentiated
};

} // namespace unimat
