#include "unimat/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace unimat {

noise_schedule noise_schedule::cosine(int T, double log_snr_min, double log_snr_max) {
    if (T < 1) throw config_error("schedule needs T >= 1");
    if (!(log_snr_min < log_snr_max)) throw config_error("log SNR range is empty");
    noise_schedule s;
    s.T = T;
    s.log_snr_min = log_snr_min;
    s.log_snr_max = log_snr_max;
    s.lambda.resize(T + 1);
    s.alpha_bar.resize(T + 1);
    for (int t = 0; t <= T; ++t) {
        double u = static_cast<double>(t) / T;
        // -2 log tan(pi u / 2), with the endpoint infinities handled by the clip.
        double lam;
        if (t == 0)
            lam = log_snr_max;
        else if (t == T)
            lam = log_snr_min;
        else
            lam = -2.0 * std::log(std::tan(std::numbers::pi * u / 2.0));
        lam = std::clamp(lam, log_snr_min, log_snr_max);
        s.lambda[t] = lam;
        s.alpha_bar[t] = 1.0 / (1.0 + std::exp(-lam));
    }
    for (int t = 1; t <= T; ++t)
        if (!(s.alpha_bar[t] < s.alpha_bar[t - 1]))
            throw config_error("schedule not strictly decreasing; T too large for the clip range");
    return s;
}

} // namespace unimat
