#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unimat/dataset.hpp"
#include "unimat/diffusion.hpp"
#include "unimat/nn_checkpoint.hpp"
#include "unimat/nn_unet.hpp"

namespace unimat {

struct train_config {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double ema_decay = 0.9999;
    double weight_decay = 0.0;
    int batch_size = 32;
    std::int64_t steps = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

// Adam with bias correction plus an EMA parameter shadow.  All stochastic
// draws (timesteps, noise, aux dropout, layer dropout) come from one
// serializable stream, so serial-mode training resumes bit-identically.
class trainer {
  public:
    trainer(unet& model, const train_config& cfg, const diffusion_config& dcfg);

    // One optimization step; returns the batch loss.
    double step(const training_batch& batch);

    std::int64_t steps_done() const { return step_; }
    const std::vector<double>& ema() const { return ema_; }
    const std::vector<double>& adam_m() const { return m_; }
    const std::vector<double>& adam_v() const { return v_; }
    std::string rng_state() const { return rng_.save_state(); }

    void restore(std::int64_t step, const std::vector<double>& ema, const std::vector<double>& m,
                 const std::vector<double>& v, const std::string& rng_state);

  private:
    unet& model_;
    train_config cfg_;
    diffusion_config dcfg_;
    std::int64_t step_ = 0;
    std::vector<double> ema_, m_, v_;
    rng rng_;
};

// Loss of the current parameters on one batch with dropout off, drawing
// (t, eps) from r; touches neither trainer nor stream state.
double evaluate_loss(unet& model, const training_batch& batch, const diffusion_config& dcfg,
                     rng& r);

// Everything a training run needs; checkpoints echo it as JSON.
struct run_config {
    model_config model;
    system_shape shape = system_shape::full();
    train_config train;
    diffusion_config diffusion;
    augment_config augment;
    std::optional<composition_cond::kind> cond_mode;
};

std::string encode_run_config(const run_config& rc);
run_config decode_run_config(const std::string& json);

struct train_callbacks {
    std::int64_t log_every = 100;
    std::function<void(std::int64_t step, double loss)> on_log;
};

// Fresh run, or bit-identical continuation when resume_from names a
// checkpoint written by an identical run_config.
checkpoint_data train(const std::vector<structure_record>& corpus, const run_config& rc,
                      const std::string& resume_from = {}, const train_callbacks& cb = {});

// Rebuilds a model from a checkpoint's config echo; loads EMA or raw params.
unet model_from_checkpoint(const checkpoint_data& ck, bool use_ema, run_config* rc_out = nullptr);

} // namespace unimat
