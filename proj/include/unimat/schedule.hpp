#pragma once
#include <vector>

#include "unimat/errors.hpp"

namespace unimat {

// Discrete diffusion schedule in log-SNR form.  lambda_t is the cosine
// schedule's log signal-to-noise ratio clipped to [log_snr_min, log_snr_max];
// the signal fraction is alpha_bar_t = sigmoid(lambda_t), strictly decreasing
// from ~1 at t=0 to ~0 at t=T.
struct noise_schedule {
    int T = 1000;
    double log_snr_min = -20.0, log_snr_max = 20.0;
    std::vector<double> lambda;    // T+1 entries, t = 0..T
    std::vector<double> alpha_bar; // T+1 entries

    static noise_schedule cosine(int T, double log_snr_min = -20.0, double log_snr_max = 20.0);

    double abar(int t) const {
        if (t < 0 || t > T) throw index_error("schedule step out of range");
        return alpha_bar[t];
    }
    // Per-step quantities for t in [1, T].
    double alpha(int t) const { return abar(t) / abar(t - 1); }
    double beta(int t) const { return 1.0 - alpha(t); }
    double beta_tilde(int t) const {
        return (1.0 - abar(t - 1)) / (1.0 - abar(t)) * beta(t);
    }
};

} // namespace unimat
