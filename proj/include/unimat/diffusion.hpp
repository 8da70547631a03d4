#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "unimat/crystal.hpp"
#include "unimat/errors.hpp"
#include "unimat/repr.hpp"
#include "unimat/rng.hpp"
#include "unimat/schedule.hpp"

namespace unimat {

// Composition conditioning: a 0/1 mask over periodic-table cells (types) or
// over per-element slots (exact), plus an optional auxiliary payload vector
// that guidance can drop. Either mode contributes one input channel.
struct composition_cond {
    enum class kind { types, exact };
    kind mode = kind::types;
    std::vector<double> mask; // H*W (types) or L*H*W (exact), row-major
    std::vector<double> aux;  // empty = no auxiliary payload
};

composition_cond make_condition(const std::vector<std::pair<int, int>>& composition,
                                composition_cond::kind mode, const system_shape& shape);
composition_cond make_condition(const std::string& formula, composition_cond::kind mode,
                                const system_shape& shape);
composition_cond make_condition(const crystal& x, composition_cond::kind mode,
                                const system_shape& shape);

struct diffusion_config {
    noise_schedule schedule = noise_schedule::cosine(1000);
    int sample_steps = 256;
    double guidance_omega = 0.0;
    double variance_interp = 0.1; // log-variance weight on beta vs beta_tilde
    std::array<double, 6> cell_scale{1.0 / 20, 1.0 / 20, 1.0 / 20,
                                     1.0 / 180, 1.0 / 180, 1.0 / 180};
    double cond_dropout = 0.1; // training-time aux dropout probability
};

// Diffused material vector: all slot coordinates followed by 6 scaled cell params.
inline int material_dim(const system_shape& shape) { return shape.slots() * 3 + 6; }

std::vector<double> pack_material(const unimat_tensor& t, const std::array<double, 6>& cell_scale);
unimat_tensor unpack_material(const std::vector<double>& v, const system_shape& shape,
                              const std::array<double, 6>& cell_scale);

// One denoiser call over a batch of material vectors.
//   conds: per-row conditioning array of length n, or nullptr for unconditional.
//   aux_mask: per-row flags, 0 = auxiliary payload dropped; nullptr = all fed.
struct predictor_batch {
    const double* x = nullptr;
    int n = 0;
    int dim = 0;
    const double* t = nullptr;
    const composition_cond* conds = nullptr;
    const unsigned char* aux_mask = nullptr;
};

// Writes the epsilon prediction (n*dim values) to eps_out.
using predictor_fn = std::function<void(const predictor_batch&, double* eps_out)>;

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
void forward_noise(const double* x0, int dim, int t, const double* eps,
                   const noise_schedule& sched, double* x_t);

// Mean squared error between eps and the prediction, averaged over all entries.
double training_loss(const std::vector<double>& x0, int n, int dim, const std::vector<int>& t,
                     const std::vector<double>& eps, const noise_schedule& sched,
                     const predictor_fn& predictor, const composition_cond* conds,
                     const unsigned char* aux_mask);

// Classifier-free guidance: eps_hat = (1+omega) eps(x,t|c,aux) - omega eps(x,t|c).
// omega = 0 is a single aux-conditioned call, bit-exact.
void guided_eps(const predictor_fn& predictor, const double* x, int n, int dim, const double* t,
                const composition_cond* conds, double omega, double* out);

struct sample_options {
    bool force_sigma_zero = false;
};

// Ancestral sampler over a respaced step ladder; returns decoded-ready tensors
// with cell parameters un-scaled.
std::vector<unimat_tensor> sample(const predictor_fn& predictor, const composition_cond* cond,
                                  const diffusion_config& cfg, const system_shape& shape, int n,
                                  std::uint64_t seed, const sample_options& opts = {});

// tau_0 = 0 < tau_1 < ... < tau_steps = T, evenly spaced.
std::vector<int> sample_ladder(int T, int steps);

} // namespace unimat
