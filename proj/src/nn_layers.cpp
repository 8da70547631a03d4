#include "unimat/nn_layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace unimat {

namespace {

std::size_t shape_count(const std::vector<int>& shape) {
    std::size_t c = 1;
    for (int s : shape) c *= static_cast<std::size_t>(s);
    return c;
}

void fill_gaussian(double* p, std::size_t count, double scale, rng& r) {
    for (std::size_t i = 0; i < count; ++i) p[i] = r.gaussian() * scale;
}

} // namespace

int param_store::add(const std::string& name, std::vector<int> shape) {
    if (find(name) >= 0) throw duplicate_id("duplicate parameter name: " + name);
    entry e;
    e.name = name;
    e.size = shape_count(shape);
    e.shape = std::move(shape);
    e.offset = values_.size();
    values_.resize(values_.size() + e.size, 0.0);
    grads_.resize(values_.size(), 0.0);
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
}

int param_store::find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return static_cast<int>(i);
    return -1;
}

void param_store::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void silu_fwd(const double* x, std::size_t count, double* y) {
    for (std::size_t i = 0; i < count; ++i) {
        double s = 1.0 / (1.0 + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

void silu_bwd(const double* x, const double* dy, std::size_t count, double* dx) {
    for (std::size_t i = 0; i < count; ++i) {
        double s = 1.0 / (1.0 + std::exp(-x[i]));
        dx[i] = dy[i] * s * (1.0 + x[i] * (1.0 - s));
    }
}

void time_features(const double* t, int n, int dim, double* out) {
    if (dim < 2 || dim % 2 != 0) throw config_error("time feature dimension must be even");
    int half = dim / 2;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < half; ++j) {
            double f = std::exp(-std::log(10000.0) * j / half);
            out[static_cast<std::size_t>(i) * dim + j] = std::sin(t[i] * f);
            out[static_cast<std::size_t>(i) * dim + half + j] = std::cos(t[i] * f);
        }
}

kernels::conv_dims pooled_dims(kernels::conv_dims d) {
    return {d.n, d.l, (d.h + 2) / 3, (d.w + 2) / 3};
}

void avgpool3_fwd(const double* x, kernels::conv_dims d, int C, double* y) {
    kernels::conv_dims o = pooled_dims(d);
    for (int n = 0; n < o.n; ++n)
        for (int l = 0; l < o.l; ++l)
            for (int oh = 0; oh < o.h; ++oh)
                for (int ow = 0; ow < o.w; ++ow) {
                    int h0 = oh * 3, h1 = std::min(h0 + 3, d.h);
                    int w0 = ow * 3, w1 = std::min(w0 + 3, d.w);
                    double inv = 1.0 / ((h1 - h0) * (w1 - w0));
                    double* yr =
                        y + (((static_cast<std::size_t>(n) * o.l + l) * o.h + oh) * o.w + ow) * C;
                    for (int c = 0; c < C; ++c) yr[c] = 0.0;
                    for (int h = h0; h < h1; ++h)
                        for (int w = w0; w < w1; ++w) {
                            const double* xr =
                                x + (((static_cast<std::size_t>(n) * d.l + l) * d.h + h) * d.w + w) * C;
                            for (int c = 0; c < C; ++c) yr[c] += xr[c] * inv;
                        }
                }
}

void avgpool3_bwd(const double* dy, kernels::conv_dims d, int C, double* dx) {
    kernels::conv_dims o = pooled_dims(d);
    std::memset(dx, 0, static_cast<std::size_t>(d.n) * d.l * d.h * d.w * C * sizeof(double));
    for (int n = 0; n < o.n; ++n)
        for (int l = 0; l < o.l; ++l)
            for (int oh = 0; oh < o.h; ++oh)
                for (int ow = 0; ow < o.w; ++ow) {
                    int h0 = oh * 3, h1 = std::min(h0 + 3, d.h);
                    int w0 = ow * 3, w1 = std::min(w0 + 3, d.w);
                    double inv = 1.0 / ((h1 - h0) * (w1 - w0));
                    const double* dyr =
                        dy + (((static_cast<std::size_t>(n) * o.l + l) * o.h + oh) * o.w + ow) * C;
                    for (int h = h0; h < h1; ++h)
                        for (int w = w0; w < w1; ++w) {
                            double* dxr =
                                dx + (((static_cast<std::size_t>(n) * d.l + l) * d.h + h) * d.w + w) * C;
                            for (int c = 0; c < C; ++c) dxr[c] += dyr[c] * inv;
                        }
                }
}

void upsample3_fwd(const double* x, kernels::conv_dims od, int C, double* y) {
    kernels::conv_dims i = pooled_dims(od);
    for (int n = 0; n < od.n; ++n)
        for (int l = 0; l < od.l; ++l)
            for (int h = 0; h < od.h; ++h)
                for (int w = 0; w < od.w; ++w) {
                    const double* xr =
                        x +
                        (((static_cast<std::size_t>(n) * i.l + l) * i.h + h / 3) * i.w + w / 3) * C;
                    double* yr =
                        y + (((static_cast<std::size_t>(n) * od.l + l) * od.h + h) * od.w + w) * C;
                    std::memcpy(yr, xr, static_cast<std::size_t>(C) * sizeof(double));
                }
}

void upsample3_bwd(const double* dy, kernels::conv_dims od, int C, double* dx) {
    kernels::conv_dims i = pooled_dims(od);
    std::memset(dx, 0, static_cast<std::size_t>(i.n) * i.l * i.h * i.w * C * sizeof(double));
    for (int n = 0; n < od.n; ++n)
        for (int l = 0; l < od.l; ++l)
            for (int h = 0; h < od.h; ++h)
                for (int w = 0; w < od.w; ++w) {
                    double* dxr =
                        dx +
                        (((static_cast<std::size_t>(n) * i.l + l) * i.h + h / 3) * i.w + w / 3) * C;
                    const double* dyr =
                        dy + (((static_cast<std::size_t>(n) * od.l + l) * od.h + h) * od.w + w) * C;
                    for (int c = 0; c < C; ++c) dxr[c] += dyr[c];
                }
}

void conv3d_layer::init(param_store& store, const std::string& name, int cin_, int cout_, rng& r,
                        bool zero_init) {
    ps = &store;
    cin = cin_;
    cout = cout_;
    w = store.add(name + ".w", {27, cin, cout});
    b = store.add(name + ".b", {cout});
    if (!zero_init)
        fill_gaussian(store.value(w), store.info(w).size, 1.0 / std::sqrt(27.0 * cin), r);
}

void conv3d_layer::forward(const double* x, kernels::conv_dims d, double* y) {
    d_cache = d;
    std::size_t count = static_cast<std::size_t>(d.n) * d.l * d.h * d.w * cin;
    x_cache.assign(x, x + count);
    kernels::conv3d_fwd(x, cin, ps->value(w), ps->value(b), y, cout, d);
}

void conv3d_layer::backward(const double* dy, double* dx) {
    kernels::conv3d_bwd_weights(x_cache.data(), cin, dy, cout, ps->grad(w), ps->grad(b), d_cache);
    if (dx) kernels::conv3d_bwd_data(dy, cout, ps->value(w), dx, cin, d_cache);
}

void linear_layer::init(param_store& store, const std::string& name, int in_, int out_, rng& r,
                        bool zero_init) {
    ps = &store;
    in = in_;
    out = out_;
    w = store.add(name + ".w", {in, out});
    b = store.add(name + ".b", {out});
    if (!zero_init)
        fill_gaussian(store.value(w), store.info(w).size, 1.0 / std::sqrt(static_cast<double>(in)), r);
}

void linear_layer::forward(const double* x, long rows, double* y) {
    rows_cache = rows;
    x_cache.assign(x, x + static_cast<std::size_t>(rows) * in);
    kernels::linear_fwd(x, in, ps->value(w), ps->value(b), y, out, rows);
}

void linear_layer::backward(const double* dy, double* dx) {
    kernels::linear_bwd_weights(x_cache.data(), in, dy, out, ps->grad(w), ps->grad(b), rows_cache);
    if (dx) kernels::linear_bwd_data(dy, out, ps->value(w), dx, in, rows_cache);
}

void groupnorm_layer::init(param_store& store, const std::string& name, int C_) {
    ps = &store;
    C = C_;
    groups = std::gcd(C, 32);
    gamma = store.add(name + ".g", {C});
    beta = store.add(name + ".b", {C});
    std::fill_n(store.value(gamma), static_cast<std::size_t>(C), 1.0);
}

void groupnorm_layer::forward(const double* x, int n, int S, double* y) {
    n_cache = n;
    S_cache = S;
    std::size_t count = static_cast<std::size_t>(n) * S * C;
    x_cache.assign(x, x + count);
    mean_cache.resize(static_cast<std::size_t>(n) * groups);
    rstd_cache.resize(static_cast<std::size_t>(n) * groups);
    kernels::groupnorm_fwd(x, n, S, C, groups, ps->value(gamma), ps->value(beta), gn_eps, y,
                           mean_cache.data(), rstd_cache.data());
}

void groupnorm_layer::backward(const double* dy, double* dx) {
    kernels::groupnorm_bwd(x_cache.data(), mean_cache.data(), rstd_cache.data(), ps->value(gamma),
                           dy, n_cache, S_cache, C, groups, dx, ps->grad(gamma), ps->grad(beta));
}

void dropout_layer::forward(const double* x, std::size_t count, double* y, rng* r) {
    count_cache = count;
    active = r != nullptr && rate > 0.0;
    if (!active) {
        if (y != x) std::memcpy(y, x, count * sizeof(double));
        return;
    }
    mask.resize(count);
    double inv_keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < count; ++i) {
        mask[i] = r->uniform() >= rate;
        y[i] = mask[i] ? x[i] * inv_keep : 0.0;
    }
}

void dropout_layer::backward(const double* dy, double* dx) {
    if (!active) {
        if (dx != dy) std::memcpy(dx, dy, count_cache * sizeof(double));
        return;
    }
    double inv_keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < count_cache; ++i) dx[i] = mask[i] ? dy[i] * inv_keep : 0.0;
}

void attention_layer::init(param_store& store, const std::string& name, int C_, int head_dim,
                           rng& r) {
    ps = &store;
    C = C_;
    hd = head_dim;
    if (C % hd != 0)
        throw config_error("channels " + std::to_string(C) + " not divisible by head dim " +
                           std::to_string(hd));
    heads = C / hd;
    gn.init(store, name + ".gn", C);
    qkv.init(store, name + ".qkv", C, 3 * C, r);
    proj.init(store, name + ".proj", C, C, r, /*zero_init=*/true);
}

void attention_layer::forward(const double* x, int n, int T, double* y) {
    n_cache = n;
    T_cache = T;
    std::size_t tokens = static_cast<std::size_t>(n) * T;
    std::size_t count = tokens * C;
    gn_out.resize(count);
    gn.forward(x, n, T, gn_out.data());

    std::vector<double> qkv_out(tokens * 3 * C);
    qkv.forward(gn_out.data(), static_cast<long>(tokens), qkv_out.data());

    q.resize(count);
    k.resize(count);
    v.resize(count);
    // [token][3C] -> [n][heads][T][hd]
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t) {
            const double* row = qkv_out.data() + (static_cast<std::size_t>(i) * T + t) * 3 * C;
            for (int h = 0; h < heads; ++h) {
                std::size_t dst = ((static_cast<std::size_t>(i) * heads + h) * T + t) * hd;
                std::memcpy(q.data() + dst, row + h * hd, hd * sizeof(double));
                std::memcpy(k.data() + dst, row + C + h * hd, hd * sizeof(double));
                std::memcpy(v.data() + dst, row + 2 * C + h * hd, hd * sizeof(double));
            }
        }

    attn.resize(static_cast<std::size_t>(n) * heads * T * T);
    attn_out.resize(count);
    kernels::attention_fwd(q.data(), k.data(), v.data(), n, heads, T, hd, attn_out.data(),
                           attn.data());

    // [n][heads][T][hd] -> [token][C]
    std::vector<double> merged(count);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < heads; ++h)
                std::memcpy(merged.data() + (static_cast<std::size_t>(i) * T + t) * C + h * hd,
                            attn_out.data() + ((static_cast<std::size_t>(i) * heads + h) * T + t) * hd,
                            hd * sizeof(double));

    proj.forward(merged.data(), static_cast<long>(tokens), y);
    for (std::size_t idx = 0; idx < count; ++idx) y[idx] += x[idx];
}

void attention_layer::backward(const double* dy, double* dx) {
    int n = n_cache, T = T_cache;
    std::size_t tokens = static_cast<std::size_t>(n) * T;
    std::size_t count = tokens * C;

    std::vector<double> dmerged(count);
    proj.backward(dy, dmerged.data());

    std::vector<double> dattn_out(count);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < heads; ++h)
                std::memcpy(dattn_out.data() + ((static_cast<std::size_t>(i) * heads + h) * T + t) * hd,
                            dmerged.data() + (static_cast<std::size_t>(i) * T + t) * C + h * hd,
                            hd * sizeof(double));

    std::vector<double> dq(count), dk(count), dv(count);
    kernels::attention_bwd(q.data(), k.data(), v.data(), attn.data(), dattn_out.data(), n, heads,
                           T, hd, dq.data(), dk.data(), dv.data());

    std::vector<double> dqkv(tokens * 3 * C);
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < T; ++t) {
            double* row = dqkv.data() + (static_cast<std::size_t>(i) * T + t) * 3 * C;
            for (int h = 0; h < heads; ++h) {
                std::size_t src = ((static_cast<std::size_t>(i) * heads + h) * T + t) * hd;
                std::memcpy(row + h * hd, dq.data() + src, hd * sizeof(double));
                std::memcpy(row + C + h * hd, dk.data() + src, hd * sizeof(double));
                std::memcpy(row + 2 * C + h * hd, dv.data() + src, hd * sizeof(double));
            }
        }

    std::vector<double> dgn(count);
    qkv.backward(dqkv.data(), dgn.data());
    gn.backward(dgn.data(), dx);
    for (std::size_t idx = 0; idx < count; ++idx) dx[idx] += dy[idx];
}

void res_block::init(param_store& store, const std::string& name, int cin_, int cout_,
                     int time_dim_, double dropout_rate, rng& r) {
    ps = &store;
    cin = cin_;
    cout = cout_;
    time_dim = time_dim_;
    gn1.init(store, name + ".gn1", cin);
    conv1.init(store, name + ".conv1", cin, cout, r);
    time_proj.init(store, name + ".time", time_dim, cout, r);
    gn2.init(store, name + ".gn2", cout);
    conv2.init(store, name + ".conv2", cout, cout, r, /*zero_init=*/true);
    has_skip = cin != cout;
    if (has_skip) skip.init(store, name + ".skip", cin, cout, r);
    drop.rate = dropout_rate;
}

void res_block::forward(const double* x, const double* temb, int n, kernels::conv_dims d,
                        double* y, rng* drop_rng) {
    d_cache = d;
    n_cache = n;
    std::size_t voxels = static_cast<std::size_t>(d.n) * d.l * d.h * d.w;
    std::size_t in_count = voxels * cin;
    std::size_t out_count = voxels * cout;
    int S = d.l * d.h * d.w;

    a_cache.resize(in_count);
    gn1.forward(x, n, S, a_cache.data());
    std::vector<double> b1(in_count);
    silu_fwd(a_cache.data(), in_count, b1.data());

    h_cache.resize(out_count);
    conv1.forward(b1.data(), d, h_cache.data());

    temb_cache.assign(temb, temb + static_cast<std::size_t>(n) * time_dim);
    std::vector<double> ts(temb_cache.size());
    silu_fwd(temb_cache.data(), temb_cache.size(), ts.data());
    std::vector<double> tp(static_cast<std::size_t>(n) * cout);
    time_proj.forward(ts.data(), n, tp.data());
    for (int i = 0; i < n; ++i) {
        double* hr = h_cache.data() + static_cast<std::size_t>(i) * S * cout;
        const double* tr = tp.data() + static_cast<std::size_t>(i) * cout;
        for (int s = 0; s < S; ++s)
            for (int c = 0; c < cout; ++c) hr[static_cast<std::size_t>(s) * cout + c] += tr[c];
    }

    c2_cache.resize(out_count);
    gn2.forward(h_cache.data(), n, S, c2_cache.data());
    std::vector<double> d2(out_count);
    silu_fwd(c2_cache.data(), out_count, d2.data());
    std::vector<double> e(out_count);
    drop.forward(d2.data(), out_count, e.data(), drop_rng);
    conv2.forward(e.data(), d, y);

    if (has_skip) {
        std::vector<double> sk(out_count);
        skip.forward(x, static_cast<long>(voxels), sk.data());
        for (std::size_t idx = 0; idx < out_count; ++idx) y[idx] += sk[idx];
    } else {
        for (std::size_t idx = 0; idx < out_count; ++idx) y[idx] += x[idx];
    }
}

void res_block::backward(const double* dy, double* dx, double* dtemb) {
    kernels::conv_dims d = d_cache;
    int n = n_cache;
    std::size_t voxels = static_cast<std::size_t>(d.n) * d.l * d.h * d.w;
    std::size_t in_count = voxels * cin;
    std::size_t out_count = voxels * cout;
    int S = d.l * d.h * d.w;

    std::vector<double> de(out_count);
    conv2.backward(dy, de.data());
    std::vector<double> dd2(out_count);
    drop.backward(de.data(), dd2.data());
    std::vector<double> dc2(out_count);
    silu_bwd(c2_cache.data(), dd2.data(), out_count, dc2.data());
    std::vector<double> dh(out_count);
    gn2.backward(dc2.data(), dh.data());

    // time branch: dh summed over voxels per example.
    std::vector<double> dtp(static_cast<std::size_t>(n) * cout, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* hr = dh.data() + static_cast<std::size_t>(i) * S * cout;
        double* tr = dtp.data() + static_cast<std::size_t>(i) * cout;
        for (int s = 0; s < S; ++s)
            for (int c = 0; c < cout; ++c) tr[c] += hr[static_cast<std::size_t>(s) * cout + c];
    }
    std::vector<double> dts(static_cast<std::size_t>(n) * time_dim);
    time_proj.backward(dtp.data(), dts.data());
    std::vector<double> dtemb_local(dts.size());
    silu_bwd(temb_cache.data(), dts.data(), dts.size(), dtemb_local.data());
    for (std::size_t idx = 0; idx < dtemb_local.size(); ++idx) dtemb[idx] += dtemb_local[idx];

    std::vector<double> db1(in_count);
    conv1.backward(dh.data(), db1.data());
    std::vector<double> da(in_count);
    silu_bwd(a_cache.data(), db1.data(), in_count, da.data());
    gn1.backward(da.data(), dx);

    if (has_skip) {
        std::vector<double> dsk(in_count);
        skip.backward(dy, dsk.data());
        for (std::size_t idx = 0; idx < in_count; ++idx) dx[idx] += dsk[idx];
    } else {
        for (std::size_t idx = 0; idx < out_count; ++idx) dx[idx] += dy[idx];
    }
}

void time_embedding::init(param_store& store, const std::string& name, int feat_dim_,
                          int embed_dim_, rng& r) {
    ps = &store;
    feat_dim = feat_dim_;
    embed_dim = embed_dim_;
    lin1.init(store, name + ".lin1", feat_dim, embed_dim, r);
    lin2.init(store, name + ".lin2", embed_dim, embed_dim, r);
}

void time_embedding::forward(const double* t, int n, double* temb) {
    n_cache = n;
    feats.resize(static_cast<std::size_t>(n) * feat_dim);
    time_features(t, n, feat_dim, feats.data());
    h1.resize(static_cast<std::size_t>(n) * embed_dim);
    lin1.forward(feats.data(), n, h1.data());
    std::vector<double> s(h1.size());
    silu_fwd(h1.data(), h1.size(), s.data());
    lin2.forward(s.data(), n, temb);
}

void time_embedding::backward(const double* dtemb) {
    std::vector<double> ds(h1.size());
    lin2.backward(dtemb, ds.data());
    std::vector<double> dh1(h1.size());
    silu_bwd(h1.data(), ds.data(), h1.size(), dh1.data());
    lin1.backward(dh1.data(), nullptr);
}

} // namespace unimat
