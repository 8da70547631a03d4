#include "unimat/nn_unet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace unimat {

namespace {

bool contains(const std::vector<int>& v, int x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

std::size_t buf_count(kernels::conv_dims d, int C) {
    return static_cast<std::size_t>(d.n) * d.l * d.h * d.w * C;
}

// Channels-last concatenation over rows tokens.
void concat_channels(const double* a, int ca, const double* b, int cb, std::size_t rows,
                     double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(out + r * (ca + cb), a + r * ca, static_cast<std::size_t>(ca) * sizeof(double));
        std::memcpy(out + r * (ca + cb) + ca, b + r * cb,
                    static_cast<std::size_t>(cb) * sizeof(double));
    }
}

void split_channels(const double* dcat, int ca, int cb, std::size_t rows, double* da, double* db) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(da + r * ca, dcat + r * (ca + cb), static_cast<std::size_t>(ca) * sizeof(double));
        std::memcpy(db + r * cb, dcat + r * (ca + cb) + ca,
                    static_cast<std::size_t>(cb) * sizeof(double));
    }
}

} // namespace

model_config model_config::tiny() {
    model_config c;
    c.base_channels = 4;
    c.channel_multipliers = {1, 2};
    c.blocks_per_resolution = 1;
    c.attention_resolutions = {1, 2, 3};
    c.attention_head_dim = 4;
    return c;
}

model_config model_config::wide() {
    model_config c;
    c.base_channels = 64;
    return c;
}

model_config model_config::full_scale() {
    model_config c;
    c.base_channels = 256;
    c.attention_head_dim = 64;
    return c;
}

void model_config::validate() const {
    if (base_channels < 2 || base_channels % 2 != 0)
        throw config_error("base_channels must be even and >= 2");
    if (channel_multipliers.empty()) throw config_error("channel_multipliers must be non-empty");
    int prev = 1;
    for (int m : channel_multipliers) {
        if (m < 1) throw config_error("channel multipliers must be >= 1");
        if (m < prev) throw config_error("channel multipliers must be non-decreasing");
        prev = m;
    }
    if (blocks_per_resolution < 1) throw config_error("blocks_per_resolution must be >= 1");
    if (attention_head_dim < 1) throw config_error("attention_head_dim must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw config_error("dropout must lie in [0, 1)");
    if (time_embed_dim < 0) throw config_error("time_embed_dim must be >= 0");
    if (cond_channels != 0 && cond_channels != 1)
        throw config_error("cond_channels must be 0 or 1");
    if (aux_channels < 0) throw config_error("aux_channels must be >= 0");
}

unet::unet(const model_config& cfg, const system_shape& shape, std::uint64_t init_seed)
    : cfg_(cfg), shape_(shape) {
    build(init_seed);
}

void unet::build(std::uint64_t init_seed) {
    cfg_.validate();
    rng r(derive_seed(init_seed, {hash_tag("init")}));
    int levels = static_cast<int>(cfg_.channel_multipliers.size());
    int embed = cfg_.embed_dim();

    level_h_.resize(levels);
    level_w_.resize(levels);
    level_ch_.resize(levels);
    level_attn_.resize(levels);
    int h = shape_.H(), w = shape_.W();
    for (int i = 0; i < levels; ++i) {
        if (i) {
            h = (h + 2) / 3;
            w = (w + 2) / 3;
        }
        level_h_[i] = h;
        level_w_[i] = w;
        level_ch_[i] = cfg_.base_channels * cfg_.channel_multipliers[i];
        level_attn_[i] = contains(cfg_.attention_resolutions, h) ? 1 : 0;
    }

    temb_.init(ps_, "temb", cfg_.base_channels, embed, r);
    conv_in_.init(ps_, "in", cfg_.input_channels(), cfg_.base_channels, r);

    std::vector<int> skip_ch;
    skip_ch.push_back(cfg_.base_channels);
    int ch = cfg_.base_channels;

    down_.resize(static_cast<std::size_t>(levels));
    for (int i = 0; i < levels; ++i) {
        down_[i].resize(static_cast<std::size_t>(cfg_.blocks_per_resolution));
        for (int b = 0; b < cfg_.blocks_per_resolution; ++b) {
            std::string base = "down." + std::to_string(i) + "." + std::to_string(b);
            block_unit& u = down_[i][b];
            u.res.init(ps_, base + ".res", ch, level_ch_[i], embed, cfg_.dropout, r);
            ch = level_ch_[i];
            u.has_attn = level_attn_[i] != 0;
            if (u.has_attn) u.attn.init(ps_, base + ".attn", ch, cfg_.attention_head_dim, r);
            skip_ch.push_back(ch);
        }
        if (i + 1 < levels) skip_ch.push_back(ch);
    }

    mid_res1_.init(ps_, "mid.res1", ch, ch, embed, cfg_.dropout, r);
    mid_attn_.init(ps_, "mid.attn", ch, cfg_.attention_head_dim, r);
    mid_res2_.init(ps_, "mid.res2", ch, ch, embed, cfg_.dropout, r);

    up_.resize(static_cast<std::size_t>(levels));
    up_skip_idx_.assign(static_cast<std::size_t>(levels),
                        std::vector<int>(static_cast<std::size_t>(cfg_.blocks_per_resolution) + 1, -1));
    int pop = static_cast<int>(skip_ch.size());
    for (int i = levels - 1; i >= 0; --i) {
        up_[i].resize(static_cast<std::size_t>(cfg_.blocks_per_resolution) + 1);
        for (int b = 0; b <= cfg_.blocks_per_resolution; ++b) {
            --pop;
            up_skip_idx_[i][b] = pop;
            std::string base = "up." + std::to_string(i) + "." + std::to_string(b);
            block_unit& u = up_[i][b];
            u.res.init(ps_, base + ".res", ch + skip_ch[pop], level_ch_[i], embed, cfg_.dropout, r);
            ch = level_ch_[i];
            u.has_attn = level_attn_[i] != 0;
            if (u.has_attn) u.attn.init(ps_, base + ".attn", ch, cfg_.attention_head_dim, r);
        }
    }
    skip_ch_ = std::move(skip_ch);

    out_gn_.init(ps_, "out.gn", ch);
    out_conv_.init(ps_, "out", ch, 9, r, /*zero_init=*/true);
}

void unet::adapt_input(const predictor_batch& b, std::vector<double>& x_in) const {
    if (!b.x || !b.t || b.n < 1) throw shape_mismatch("predictor batch is empty");
    if (b.dim != material_dim(shape_))
        throw shape_mismatch("material vector length does not match the model shape");
    int L = shape_.L, H = shape_.H(), W = shape_.W();
    int Cin = cfg_.input_channels();
    int slots = shape_.slots();
    std::size_t voxels = static_cast<std::size_t>(L) * H * W;
    x_in.assign(static_cast<std::size_t>(b.n) * voxels * Cin, 0.0);

    for (int r = 0; r < b.n; ++r) {
        const double* row = b.x + static_cast<std::size_t>(r) * b.dim;
        const composition_cond* cond = b.conds ? &b.conds[r] : nullptr;
        if (cond) {
            if (cfg_.cond_channels == 0)
                throw shape_mismatch("model was built without a conditioning channel");
            std::size_t want = cond->mode == composition_cond::kind::types
                                   ? static_cast<std::size_t>(H) * W
                                   : voxels;
            if (cond->mask.size() != want) throw shape_mismatch("conditioning mask size mismatch");
            if (!cond->aux.empty() && static_cast<int>(cond->aux.size()) != cfg_.aux_channels)
                throw shape_mismatch("auxiliary payload size mismatch");
        }
        bool aux_on = cond && !cond->aux.empty() && (b.aux_mask == nullptr || b.aux_mask[r]);
        for (int l = 0; l < L; ++l)
            for (int hh = 0; hh < H; ++hh)
                for (int ww = 0; ww < W; ++ww) {
                    std::size_t vox = (static_cast<std::size_t>(l) * H + hh) * W + ww;
                    double* xr = x_in.data() + (static_cast<std::size_t>(r) * voxels + vox) * Cin;
                    const double* src = row + vox * 3;
                    xr[0] = src[0];
                    xr[1] = src[1];
                    xr[2] = src[2];
                    for (int k = 0; k < 6; ++k) xr[3 + k] = row[static_cast<std::size_t>(slots) * 3 + k];
                    int c = 9;
                    if (cfg_.cond_channels > 0) {
                        double mval = 0.0;
                        if (cond)
                            mval = cond->mode == composition_cond::kind::types
                                       ? cond->mask[static_cast<std::size_t>(hh) * W + ww]
                                       : cond->mask[vox];
                        xr[c++] = mval;
                    }
                    for (int a = 0; a < cfg_.aux_channels; ++a) xr[c + a] = aux_on ? cond->aux[a] : 0.0;
                }
    }
}

void unet::forward(const predictor_batch& b, bool training, rng* drop_rng, double* eps_out) {
    int n = b.n;
    n_cur_ = n;
    int levels = static_cast<int>(cfg_.channel_multipliers.size());
    int L = shape_.L, H = shape_.H(), W = shape_.W();
    int slots = shape_.slots();
    std::size_t voxels = static_cast<std::size_t>(L) * H * W;
    rng* dr = training ? drop_rng : nullptr;

    adapt_input(b, x_in_);
    temb_buf_.resize(static_cast<std::size_t>(n) * cfg_.embed_dim());
    temb_.forward(b.t, n, temb_buf_.data());

    kernels::conv_dims d{n, L, level_h_[0], level_w_[0]};
    int ch = cfg_.base_channels;
    cur_.resize(buf_count(d, ch));
    conv_in_.forward(x_in_.data(), d, cur_.data());

    skips_.clear();
    skips_.push_back(cur_);

    for (int i = 0; i < levels; ++i) {
        d = {n, L, level_h_[i], level_w_[i]};
        int T = L * d.h * d.w;
        for (int blk = 0; blk < cfg_.blocks_per_resolution; ++blk) {
            block_unit& u = down_[i][blk];
            tmp_.resize(buf_count(d, level_ch_[i]));
            u.res.forward(cur_.data(), temb_buf_.data(), n, d, tmp_.data(), dr);
            cur_.swap(tmp_);
            ch = level_ch_[i];
            if (u.has_attn) {
                tmp_.resize(cur_.size());
                u.attn.forward(cur_.data(), n, T, tmp_.data());
                cur_.swap(tmp_);
            }
            skips_.push_back(cur_);
        }
        if (i + 1 < levels) {
            kernels::conv_dims pd = pooled_dims(d);
            tmp_.resize(buf_count(pd, ch));
            avgpool3_fwd(cur_.data(), d, ch, tmp_.data());
            cur_.swap(tmp_);
            skips_.push_back(cur_);
        }
    }

    d = {n, L, level_h_[levels - 1], level_w_[levels - 1]};
    int Tdeep = L * d.h * d.w;
    tmp_.resize(cur_.size());
    mid_res1_.forward(cur_.data(), temb_buf_.data(), n, d, tmp_.data(), dr);
    cur_.swap(tmp_);
    tmp_.resize(cur_.size());
    mid_attn_.forward(cur_.data(), n, Tdeep, tmp_.data());
    cur_.swap(tmp_);
    tmp_.resize(cur_.size());
    mid_res2_.forward(cur_.data(), temb_buf_.data(), n, d, tmp_.data(), dr);
    cur_.swap(tmp_);

    for (int i = levels - 1; i >= 0; --i) {
        d = {n, L, level_h_[i], level_w_[i]};
        int T = L * d.h * d.w;
        std::size_t rows = static_cast<std::size_t>(n) * T;
        for (int blk = 0; blk <= cfg_.blocks_per_resolution; ++blk) {
            block_unit& u = up_[i][blk];
            int idx = up_skip_idx_[i][blk];
            int sc = skip_ch_[idx];
            cat_.resize(rows * (ch + sc));
            concat_channels(cur_.data(), ch, skips_[idx].data(), sc, rows, cat_.data());
            tmp_.resize(buf_count(d, level_ch_[i]));
            u.res.forward(cat_.data(), temb_buf_.data(), n, d, tmp_.data(), dr);
            cur_.swap(tmp_);
            ch = level_ch_[i];
            if (u.has_attn) {
                tmp_.resize(cur_.size());
                u.attn.forward(cur_.data(), n, T, tmp_.data());
                cur_.swap(tmp_);
            }
        }
        if (i > 0) {
            kernels::conv_dims od{n, L, level_h_[i - 1], level_w_[i - 1]};
            tmp_.resize(buf_count(od, ch));
            upsample3_fwd(cur_.data(), od, ch, tmp_.data());
            cur_.swap(tmp_);
        }
    }

    d = {n, L, H, W};
    out_silu_in_.resize(buf_count(d, ch));
    out_gn_.forward(cur_.data(), n, L * H * W, out_silu_in_.data());
    tmp_.resize(out_silu_in_.size());
    silu_fwd(out_silu_in_.data(), out_silu_in_.size(), tmp_.data());
    y_out_.resize(buf_count(d, 9));
    out_conv_.forward(tmp_.data(), d, y_out_.data());

    // (n,L,H,W,9) -> material rows: per-voxel coordinate noise plus the
    // voxel-mean cell-parameter noise.
    for (int r = 0; r < n; ++r) {
        double* row = eps_out + static_cast<std::size_t>(r) * b.dim;
        const double* yr = y_out_.data() + static_cast<std::size_t>(r) * voxels * 9;
        for (std::size_t vox = 0; vox < voxels; ++vox)
            for (int c = 0; c < 3; ++c) row[vox * 3 + c] = yr[vox * 9 + c];
        for (int k = 0; k < 6; ++k) {
            double acc = 0.0;
            for (std::size_t vox = 0; vox < voxels; ++vox) acc += yr[vox * 9 + 3 + k];
            row[static_cast<std::size_t>(slots) * 3 + k] = acc / static_cast<double>(voxels);
        }
    }
}

void unet::backward(const double* d_eps) {
    int n = n_cur_;
    int levels = static_cast<int>(cfg_.channel_multipliers.size());
    int L = shape_.L, H = shape_.H(), W = shape_.W();
    int slots = shape_.slots();
    int dim = material_dim(shape_);
    std::size_t voxels = static_cast<std::size_t>(L) * H * W;

    std::vector<double> dy(static_cast<std::size_t>(n) * voxels * 9);
    for (int r = 0; r < n; ++r) {
        const double* drow = d_eps + static_cast<std::size_t>(r) * dim;
        double* dyr = dy.data() + static_cast<std::size_t>(r) * voxels * 9;
        for (std::size_t vox = 0; vox < voxels; ++vox) {
            for (int c = 0; c < 3; ++c) dyr[vox * 9 + c] = drow[vox * 3 + c];
            for (int k = 0; k < 6; ++k)
                dyr[vox * 9 + 3 + k] =
                    drow[static_cast<std::size_t>(slots) * 3 + k] / static_cast<double>(voxels);
        }
    }

    std::vector<double> dtemb(temb_buf_.size(), 0.0);
    std::vector<double> dcur(out_silu_in_.size()), dtmp;

    {
        std::vector<double> dsilu(out_silu_in_.size());
        out_conv_.backward(dy.data(), dsilu.data());
        std::vector<double> dgn(out_silu_in_.size());
        silu_bwd(out_silu_in_.data(), dsilu.data(), out_silu_in_.size(), dgn.data());
        out_gn_.backward(dgn.data(), dcur.data());
    }

    std::vector<std::vector<double>> dskips(skips_.size());

    // Up path, reverse execution order.
    int ch = level_ch_[0];
    for (int i = 0; i < levels; ++i) {
        kernels::conv_dims d{n, L, level_h_[i], level_w_[i]};
        std::size_t rows = static_cast<std::size_t>(n) * L * d.h * d.w;
        if (i > 0) {
            // Backward through the upsample that fed level i-1.
            kernels::conv_dims od{n, L, level_h_[i - 1], level_w_[i - 1]};
            dtmp.assign(buf_count(d, ch), 0.0);
            upsample3_bwd(dcur.data(), od, ch, dtmp.data());
            dcur.swap(dtmp);
        }
        for (int blk = cfg_.blocks_per_resolution; blk >= 0; --blk) {
            block_unit& u = up_[i][blk];
            if (u.has_attn) {
                dtmp.resize(dcur.size());
                u.attn.backward(dcur.data(), dtmp.data());
                dcur.swap(dtmp);
            }
            int cin = u.res.cin;
            int idx = up_skip_idx_[i][blk];
            int sc = skip_ch_[idx];
            std::vector<double> dcat(rows * cin);
            u.res.backward(dcur.data(), dcat.data(), dtemb.data());
            dcur.assign(rows * (cin - sc), 0.0);
            dskips[idx].assign(rows * sc, 0.0);
            split_channels(dcat.data(), cin - sc, sc, rows, dcur.data(), dskips[idx].data());
        }
        // blk 0 was processed last; its h-part width is what crosses the next
        // upsample.
        ch = up_[i][0].res.cin - skip_ch_[up_skip_idx_[i][0]];
    }

    // Mid.
    {
        dtmp.resize(dcur.size());
        mid_res2_.backward(dcur.data(), dtmp.data(), dtemb.data());
        dcur.swap(dtmp);
        dtmp.resize(dcur.size());
        mid_attn_.backward(dcur.data(), dtmp.data());
        dcur.swap(dtmp);
        dtmp.resize(dcur.size());
        mid_res1_.backward(dcur.data(), dtmp.data(), dtemb.data());
        dcur.swap(dtmp);
    }

    // Down path, reverse execution order.
    int idx = static_cast<int>(skips_.size()) - 1;
    for (int i = levels - 1; i >= 0; --i) {
        kernels::conv_dims d{n, L, level_h_[i], level_w_[i]};
        for (int blk = cfg_.blocks_per_resolution - 1; blk >= 0; --blk) {
            for (std::size_t p = 0; p < dcur.size(); ++p) dcur[p] += dskips[idx][p];
            --idx;
            block_unit& u = down_[i][blk];
            if (u.has_attn) {
                dtmp.resize(dcur.size());
                u.attn.backward(dcur.data(), dtmp.data());
                dcur.swap(dtmp);
            }
            dtmp.resize(buf_count(d, u.res.cin));
            u.res.backward(dcur.data(), dtmp.data(), dtemb.data());
            dcur.swap(dtmp);
        }
        if (i > 0) {
            // Crossing the pool between level i-1 and i; the pooled activation
            // was itself pushed as a skip.
            for (std::size_t p = 0; p < dcur.size(); ++p) dcur[p] += dskips[idx][p];
            --idx;
            kernels::conv_dims pd{n, L, level_h_[i - 1], level_w_[i - 1]};
            int pch = down_[i][0].res.cin;
            dtmp.assign(buf_count(pd, pch), 0.0);
            avgpool3_bwd(dcur.data(), pd, pch, dtmp.data());
            dcur.swap(dtmp);
        }
    }
    for (std::size_t p = 0; p < dcur.size(); ++p) dcur[p] += dskips[0][p];
    conv_in_.backward(dcur.data(), nullptr);

    temb_.backward(dtemb.data());
}

void unet::predict(const predictor_batch& b, double* eps_out) {
    forward(b, /*training=*/false, nullptr, eps_out);
}

predictor_fn unet::as_predictor() {
    return [this](const predictor_batch& b, double* out) { predict(b, out); };
}

double unet::loss_and_grad(const predictor_batch& b, const double* eps_target, rng* drop_rng) {
    ps_.zero_grads();
    std::size_t total = static_cast<std::size_t>(b.n) * b.dim;
    pred_.resize(total);
    forward(b, /*training=*/true, drop_rng, pred_.data());

    double acc = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        double diff = pred_[i] - eps_target[i];
        acc += diff * diff;
    }
    double loss = acc / static_cast<double>(total);
    if (!std::isfinite(loss)) throw non_finite_loss("training loss is not finite");

    std::vector<double> d_eps(total);
    double scale = 2.0 / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) d_eps[i] = scale * (pred_[i] - eps_target[i]);
    backward(d_eps.data());
    return loss;
}

} // namespace unimat
