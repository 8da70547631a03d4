#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unimat/diffusion.hpp"
#include "unimat/nn_layers.hpp"
#include "unimat/repr.hpp"

namespace unimat {

// Denoiser hyperparameters.  attention_resolutions lists the H-axis sizes at
// which attention layers are interleaved; each pooling level divides H and W
// by three (ceil), so the full 9-row table visits H = 9, 3, 1.
struct model_config {
    int base_channels = 32;
    std::vector<int> channel_multipliers{1, 2, 4};
    int blocks_per_resolution = 3;
    std::vector<int> attention_resolutions{1, 3, 9};
    int attention_head_dim = 16;
    double dropout = 0.1;
    int time_embed_dim = 0;  // 0 = 4 * base_channels
    int cond_channels = 0;   // 1 when composition-conditioned
    int aux_channels = 0;

    // Desk-scale default: the values above.
    static model_config desk() { return {}; }
    // Minimal config for gradient and unit tests.
    static model_config tiny();
    // Larger desk preset used for capacity comparisons.
    static model_config wide();
    // Published full-scale values; too large to instantiate on a desk machine.
    static model_config full_scale();

    int input_channels() const { return 3 + 6 + cond_channels + aux_channels; }
    int embed_dim() const { return time_embed_dim > 0 ? time_embed_dim : 4 * base_channels; }
    void validate() const;
};

// U-Net epsilon-predictor over (L,H,W,C) tensors: residual conv blocks with
// time conditioning, attention over flattened L*H*W tokens at configured
// resolutions, (1,3,3) average pooling on the way down and nearest upsampling
// with skip concatenation on the way up.  Output head is zero-initialized.
// Instances are single-threaded (forward caches live in the layers); run
// concurrent samplers on separate instances.
class unet {
  public:
    unet(const model_config& cfg, const system_shape& shape, std::uint64_t init_seed);

    // Eval-mode prediction (dropout off, deterministic); writes n*dim values.
    void predict(const predictor_batch& b, double* eps_out);
    predictor_fn as_predictor();

    // Training forward + backward; gradients land in params().grads().
    double loss_and_grad(const predictor_batch& b, const double* eps_target, rng* drop_rng);

    param_store& params() { return ps_; }
    const param_store& params() const { return ps_; }
    const model_config& config() const { return cfg_; }
    const system_shape& sys_shape() const { return shape_; }
    std::size_t parameter_count() const { return ps_.size(); }

  private:
    struct block_unit {
        res_block res;
        bool has_attn = false;
        attention_layer attn;
    };

    void build(std::uint64_t init_seed);
    void forward(const predictor_batch& b, bool training, rng* drop_rng, double* eps_out);
    void backward(const double* d_eps);
    void adapt_input(const predictor_batch& b, std::vector<double>& x_in) const;

    model_config cfg_;
    system_shape shape_;
    param_store ps_;

    time_embedding temb_;
    conv3d_layer conv_in_;
    std::vector<std::vector<block_unit>> down_;
    res_block mid_res1_;
    attention_layer mid_attn_;
    res_block mid_res2_;
    std::vector<std::vector<block_unit>> up_;
    groupnorm_layer out_gn_;
    conv3d_layer out_conv_;

    std::vector<int> level_h_, level_w_, level_ch_;
    std::vector<char> level_attn_;

    // Forward state consumed by backward.
    int n_cur_ = 0;
    std::vector<double> x_in_, temb_buf_, cur_, tmp_, cat_, out_silu_in_, y_out_, pred_;
    std::vector<std::vector<double>> skips_;
    std::vector<int> skip_ch_;
    std::vector<std::vector<int>> up_skip_idx_;
};

} // namespace unimat
