#include "unimat/relax.hpp"

#include <cmath>
#include <vector>

namespace unimat {

namespace {

double max_force_of(const oracle_result& r) {
    double m = 0.0;
    for (const auto& f : r.forces)
        m = std::max(m, std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]));
    return m;
}

// Preconditioned DOF gradient: the position block is mapped so a unit step
// moves atoms along the Cartesian forces (cell-size independent), log-lengths
// keep positivity during descent, and angle entries are rescaled to radian
// dynamics so all blocks share one step size.  Any fixed positive scaling
// keeps backtracking descent monotone.
std::vector<double> dof_grad(const crystal& x, const oracle_result& r, bool cell_free) {
    mat3 M = lattice_matrix(x.cell);
    // Row-vector inverse: frac = cart * Minv with Minv[al][k] = adj/det.
    double det = M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1]) -
                 M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0]) +
                 M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]);
    mat3 inv;
    inv[0][0] = (M[1][1] * M[2][2] - M[1][2] * M[2][1]) / det;
    inv[0][1] = (M[0][2] * M[2][1] - M[0][1] * M[2][2]) / det;
    inv[0][2] = (M[0][1] * M[1][2] - M[0][2] * M[1][1]) / det;
    inv[1][0] = (M[1][2] * M[2][0] - M[1][0] * M[2][2]) / det;
    inv[1][1] = (M[0][0] * M[2][2] - M[0][2] * M[2][0]) / det;
    inv[1][2] = (M[0][2] * M[1][0] - M[0][0] * M[1][2]) / det;
    inv[2][0] = (M[1][0] * M[2][1] - M[1][1] * M[2][0]) / det;
    inv[2][1] = (M[0][1] * M[2][0] - M[0][0] * M[2][1]) / det;
    inv[2][2] = (M[0][0] * M[1][1] - M[0][1] * M[1][0]) / det;
    std::size_t n = x.sites.size();
    std::vector<double> g(3 * n + (cell_free ? 6 : 0), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            // Delta frac = -eta * g gives Delta cart = +eta * force.
            double s = 0.0;
            for (int al = 0; al < 3; ++al) s -= r.forces[i][al] * inv[al][k];
            g[3 * i + static_cast<std::size_t>(k)] = s;
        }
    if (cell_free) {
        constexpr double deg2 = (180.0 / 3.14159265358979323846) * (180.0 / 3.14159265358979323846);
        g[3 * n + 0] = x.cell.a * r.cell_grad[0];
        g[3 * n + 1] = x.cell.b * r.cell_grad[1];
        g[3 * n + 2] = x.cell.c * r.cell_grad[2];
        for (int k = 0; k < 3; ++k)
            g[3 * n + 3 + static_cast<std::size_t>(k)] = deg2 * r.cell_grad[3 + k];
    }
    return g;
}

crystal apply_step(const crystal& x, const std::vector<double>& g, double eta, bool cell_free) {
    crystal t = x;
    std::size_t n = x.sites.size();
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k)
            t.sites[i].frac[k] -= eta * g[3 * i + static_cast<std::size_t>(k)];
    if (cell_free) {
        t.cell.a = std::exp(std::log(x.cell.a) - eta * g[3 * n + 0]);
        t.cell.b = std::exp(std::log(x.cell.b) - eta * g[3 * n + 1]);
        t.cell.c = std::exp(std::log(x.cell.c) - eta * g[3 * n + 2]);
        t.cell.alpha = x.cell.alpha - eta * g[3 * n + 3];
        t.cell.beta = x.cell.beta - eta * g[3 * n + 4];
        t.cell.gamma = x.cell.gamma - eta * g[3 * n + 5];
    }
    return t;
}

double checked_energy(const energy_oracle& oracle, const crystal& x, oracle_result& out) {
    out = oracle.evaluate(x);
    if (!std::isfinite(out.energy))
        throw non_finite_energy("non-finite energy during relaxation");
    return out.energy;
}

// Returns accepted steps; cur/E/orr updated in place.
int descend(crystal& cur, const energy_oracle& oracle, const relax_options& opts, bool cell_free,
            int budget, bool& converged) {
    oracle_result orr;
    double E = checked_energy(oracle, cur, orr);
    if (opts.trace) opts.trace->push_back(E);
    double eta = 1e-2;
    int accepted = 0;
    double last_decrease = -1.0; // negative = no step taken yet
    converged = false;
    for (;;) {
        double maxf = max_force_of(orr);
        if (maxf <= opts.force_tol && last_decrease >= 0.0 && last_decrease <= opts.energy_tol) {
            converged = true;
            break;
        }
        if (accepted >= budget) break;
        std::vector<double> g = dof_grad(cur, orr, cell_free);
        double gnorm2 = 0.0;
        for (double v : g) gnorm2 += v * v;
        if (gnorm2 == 0.0) {
            converged = maxf <= opts.force_tol;
            break;
        }
        bool moved = false;
        while (eta >= 1e-14) {
            crystal trial = apply_step(cur, g, eta, cell_free);
            oracle_result torr;
            double Et;
            try {
                Et = checked_energy(oracle, trial, torr);
            } catch (const invalid_cell&) {
                eta *= 0.5;
                continue;
            }
            if (Et <= E - 1e-4 * eta * gnorm2) {
                for (site& s : trial.sites) s.frac = wrap_frac(s.frac);
                last_decrease = E - Et;
                cur = std::move(trial);
                E = Et;
                orr = std::move(torr);
                if (opts.trace) opts.trace->push_back(E);
                ++accepted;
                eta = std::min(eta * 1.5, 1.0);
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if (!moved) {
            // Line search found no descent: numerically at a minimum.
            converged = maxf <= opts.force_tol;
            break;
        }
    }
    return accepted;
}

} // namespace

relaxation_result relax(const crystal& x, const energy_oracle& oracle,
                        const relax_options& opts) {
    if (x.sites.empty()) throw empty_input("relaxation of an empty crystal");
    if (opts.max_steps < 0) throw config_error("max_steps must be non-negative");
    if (!(opts.force_tol > 0.0) || !(opts.energy_tol > 0.0))
        throw config_error("relaxation tolerances must be positive");

    crystal cur = x;
    for (site& s : cur.sites) s.frac = wrap_frac(s.frac);

    bool converged = false;
    int used = descend(cur, oracle, opts, /*cell_free=*/false, opts.max_steps, converged);
    if (opts.relax_cell) {
        if (used < opts.max_steps)
            used += descend(cur, oracle, opts, /*cell_free=*/true, opts.max_steps - used,
                            converged);
        else
            converged = false;
    }

    oracle_result fin;
    relaxation_result res;
    res.e_total = checked_energy(oracle, cur, fin);
    res.relaxed = std::move(cur);
    res.e_f = formation_energy_from_total(res.relaxed, res.e_total);
    res.converged = converged;
    res.steps = used;
    res.max_force = max_force_of(fin);
    return res;
}

} // namespace unimat
