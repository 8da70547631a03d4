#include "unimat/diffusion.hpp"

#include <cmath>

#include "unimat/formula.hpp"

namespace unimat {

composition_cond make_condition(const std::vector<std::pair<int, int>>& composition,
                                composition_cond::kind mode, const system_shape& shape) {
    composition_cond c;
    c.mode = mode;
    int H = shape.H(), W = shape.W();
    if (mode == composition_cond::kind::types) {
        c.mask.assign(static_cast<std::size_t>(H) * W, 0.0);
        for (auto [z, count] : composition) {
            if (count < 1) throw schema_error("composition counts must be positive");
            auto [h, w] = shape.cell_of(z);
            c.mask[static_cast<std::size_t>(h) * W + w] = 1.0;
        }
    } else {
        c.mask.assign(static_cast<std::size_t>(shape.L) * H * W, 0.0);
        for (auto [z, count] : composition) {
            if (count < 1) throw schema_error("composition counts must be positive");
            if (count > shape.L)
                throw capacity_exceeded("composition needs " + std::to_string(count) +
                                        " slots, shape provides L=" + std::to_string(shape.L));
            auto [h, w] = shape.cell_of(z);
            for (int l = 0; l < count; ++l)
                c.mask[(static_cast<std::size_t>(l) * H + h) * W + w] = 1.0;
        }
    }
    return c;
}

composition_cond make_condition(const std::string& formula, composition_cond::kind mode,
                                const system_shape& shape) {
    return make_condition(parse_formula(formula), mode, shape);
}

composition_cond make_condition(const crystal& x, composition_cond::kind mode,
                                const system_shape& shape) {
    return make_condition(composition_of(x), mode, shape);
}

std::vector<double> pack_material(const unimat_tensor& t, const std::array<double, 6>& cell_scale) {
    std::vector<double> v(t.values.begin(), t.values.end());
    v.reserve(v.size() + 6);
    for (int k = 0; k < 6; ++k) v.push_back(t.cell_params[k] * cell_scale[k]);
    return v;
}

unimat_tensor unpack_material(const std::vector<double>& v, const system_shape& shape,
                              const std::array<double, 6>& cell_scale) {
    if (static_cast<int>(v.size()) != material_dim(shape))
        throw shape_mismatch("material vector length does not match shape");
    unimat_tensor t(shape);
    std::copy(v.begin(), v.end() - 6, t.values.begin());
    for (int k = 0; k < 6; ++k) t.cell_params[k] = v[v.size() - 6 + k] / cell_scale[k];
    return t;
}

void forward_noise(const double* x0, int dim, int t, const double* eps,
                   const noise_schedule& sched, double* x_t) {
    double ab = sched.abar(t);
    double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    for (int i = 0; i < dim; ++i) x_t[i] = sa * x0[i] + sn * eps[i];
}

double training_loss(const std::vector<double>& x0, int n, int dim, const std::vector<int>& t,
                     const std::vector<double>& eps, const noise_schedule& sched,
                     const predictor_fn& predictor, const composition_cond* conds,
                     const unsigned char* aux_mask) {
    if (static_cast<int>(x0.size()) != n * dim || eps.size() != x0.size() ||
        static_cast<int>(t.size()) != n)
        throw shape_mismatch("training_loss: inconsistent batch shapes");
    std::vector<double> x_t(x0.size()), tval(n);
    for (int r = 0; r < n; ++r) {
        forward_noise(x0.data() + static_cast<std::size_t>(r) * dim, dim, t[r],
                      eps.data() + static_cast<std::size_t>(r) * dim, sched,
                      x_t.data() + static_cast<std::size_t>(r) * dim);
        tval[r] = static_cast<double>(t[r]);
    }
    std::vector<double> pred(x0.size());
    predictor_batch pb{x_t.data(), n, dim, tval.data(), conds, aux_mask};
    predictor(pb, pred.data());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - eps[i];
        acc += d * d;
    }
    double loss = acc / static_cast<double>(pred.size());
    if (!std::isfinite(loss)) throw non_finite_loss("training loss is not finite");
    return loss;
}

void guided_eps(const predictor_fn& predictor, const double* x, int n, int dim, const double* t,
                const composition_cond* conds, double omega, double* out) {
    std::size_t total = static_cast<std::size_t>(n) * dim;
    predictor_batch with_aux{x, n, dim, t, conds, nullptr};
    predictor(with_aux, out);
    bool have_aux = false;
    if (conds)
        for (int i = 0; i < n && !have_aux; ++i) have_aux = !conds[i].aux.empty();
    if (omega == 0.0 || !have_aux) return;
    std::vector<double> dropped(total);
    std::vector<unsigned char> mask(static_cast<std::size_t>(n), 0); // aux dropped everywhere
    predictor_batch without_aux{x, n, dim, t, conds, mask.data()};
    predictor(without_aux, dropped.data());
    // a + ω(a − b) keeps equal branch outputs fixed points for any ω.
    for (std::size_t i = 0; i < total; ++i) out[i] += omega * (out[i] - dropped[i]);
}

std::vector<int> sample_ladder(int T, int steps) {
    if (steps < 1 || steps > T) throw config_error("sample_steps must lie in [1, T]");
    std::vector<int> taus(steps + 1);
    for (int i = 0; i <= steps; ++i)
        taus[i] = static_cast<int>(std::llround(static_cast<double>(i) * T / steps));
    for (int i = 1; i <= steps; ++i)
        if (taus[i] <= taus[i - 1]) throw config_error("sample ladder collapsed");
    return taus;
}

std::vector<unimat_tensor> sample(const predictor_fn& predictor, const composition_cond* cond,
                                  const diffusion_config& cfg, const system_shape& shape, int n,
                                  std::uint64_t seed, const sample_options& opts) {
    if (n < 1) throw empty_input("sample: n must be >= 1");
    const int dim = material_dim(shape);
    const auto& sched = cfg.schedule;
    auto taus = sample_ladder(sched.T, cfg.sample_steps);

    rng r(derive_seed(seed, {hash_tag("sample")}));
    std::vector<double> x(static_cast<std::size_t>(n) * dim);
    for (double& v : x) v = r.gaussian();

    std::vector<composition_cond> conds;
    if (cond) conds.assign(static_cast<std::size_t>(n), *cond);
    const composition_cond* conds_ptr = cond ? conds.data() : nullptr;

    std::vector<double> eps(x.size()), tval(n);
    for (int i = cfg.sample_steps; i >= 1; --i) {
        int t = taus[i], s = taus[i - 1];
        double ab_t = sched.abar(t), ab_s = sched.abar(s);
        double alpha = ab_t / ab_s;
        double beta = 1.0 - alpha;
        double beta_tilde = (1.0 - ab_s) / (1.0 - ab_t) * beta;
        for (int row = 0; row < n; ++row) tval[row] = static_cast<double>(t);
        guided_eps(predictor, x.data(), n, dim, tval.data(), conds_ptr, cfg.guidance_omega,
                   eps.data());
        double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        double eps_coef = beta / std::sqrt(1.0 - ab_t);
        bool add_noise = i > 1 && !opts.force_sigma_zero;
        double sigma = 0.0;
        if (add_noise) {
            double log_var = cfg.variance_interp * std::log(beta) +
                             (1.0 - cfg.variance_interp) * std::log(beta_tilde);
            sigma = std::exp(0.5 * log_var);
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            double v = inv_sqrt_alpha * (x[k] - eps_coef * eps[k]);
            if (add_noise) v += sigma * r.gaussian();
            x[k] = v;
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw non_finite_sample("non-finite sample value at step t=" + std::to_string(t));
    }

    std::vector<unimat_tensor> out;
    out.reserve(n);
    std::vector<double> row(dim);
    for (int i = 0; i < n; ++i) {
        std::copy(x.begin() + static_cast<std::size_t>(i) * dim,
                  x.begin() + static_cast<std::size_t>(i + 1) * dim, row.begin());
        out.push_back(unpack_material(row, shape, cfg.cell_scale));
    }
    return out;
}

} // namespace unimat
