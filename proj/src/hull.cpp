#include "unimat/hull.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "unimat/formula.hpp"
#include "unimat/periodic_table.hpp"

namespace unimat {

using nlohmann::json;

namespace {

constexpr double lp_tol = 1e-12;
constexpr double face_tol = 1e-9;

// Partial-pivot solve of a dense square system; a and b are clobbered.
// Returns false on (near-)singularity.
bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& b) {
    std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-13) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
    return true;
}

// Lexicographic next s-combination of {0..n-1}; false when exhausted.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
    std::size_t s = idx.size();
    std::size_t i = s;
    while (i > 0) {
        --i;
        if (idx[i] != i + n - s) {
            ++idx[i];
            for (std::size_t k = i + 1; k < s; ++k) idx[k] = idx[k - 1] + 1;
            return true;
        }
    }
    return false;
}

std::vector<std::pair<int, int>> normalize_composition(std::vector<std::pair<int, int>> comp) {
    if (comp.empty()) throw schema_error("phase entry with empty composition");
    std::sort(comp.begin(), comp.end());
    std::vector<std::pair<int, int>> out;
    for (const auto& [z, count] : comp) {
        if (count < 1) throw schema_error("non-positive element count in phase entry");
        if (!out.empty() && out.back().first == z)
            out.back().second += count;
        else
            out.emplace_back(z, count);
    }
    return out;
}

} // namespace

phase_diagram phase_diagram::build(std::vector<phase_entry> entries) {
    if (entries.empty()) throw empty_input("no phase entries");
    phase_diagram pd;
    for (phase_entry& e : entries) {
        e.composition = normalize_composition(std::move(e.composition));
        if (!std::isfinite(e.e_f)) throw schema_error("non-finite e_f in phase entry: " + e.id);
        for (const auto& [z, count] : e.composition) {
            (void)count;
            if (std::find(pd.basis_.begin(), pd.basis_.end(), z) == pd.basis_.end())
                pd.basis_.push_back(z);
        }
    }
    std::sort(pd.basis_.begin(), pd.basis_.end());

    // Zero-reference endpoints anchor every corner unless an elemental entry
    // already sits at or below zero there.
    const periodic_table& pt = periodic_table::instance();
    for (int z : pd.basis_) {
        bool anchored = false;
        for (const phase_entry& e : entries)
            if (e.composition.size() == 1 && e.composition[0].first == z && e.e_f <= 0.0)
                anchored = true;
        if (anchored) continue;
        phase_entry ref;
        ref.composition = {{z, 1}};
        ref.e_f = 0.0;
        ref.id = pt.by_z(z).symbol;
        for (const phase_entry& e : entries)
            if (e.id == ref.id) ref.id += "#ref";
        entries.push_back(std::move(ref));
    }

    std::sort(entries.begin(), entries.end(), [](const phase_entry& a, const phase_entry& b) {
        std::string ka = composition_key(a.composition), kb = composition_key(b.composition);
        if (ka != kb) return ka < kb;
        if (a.e_f != b.e_f) return a.e_f < b.e_f;
        return a.id < b.id;
    });
    pd.entries_ = std::move(entries);
    pd.fractions_.reserve(pd.entries_.size());
    for (const phase_entry& e : pd.entries_) pd.fractions_.push_back(pd.fraction_of(e));

    // Stable set: on-hull entries, one representative per composition (the
    // canonical order puts the lowest e_f, then smallest id, first).
    std::string last_key;
    for (std::size_t i = 0; i < pd.entries_.size(); ++i) {
        std::string key = composition_key(pd.entries_[i].composition);
        if (key == last_key) continue;
        if (pd.entries_[i].e_f <= pd.solve(pd.fractions_[i]).value + face_tol) {
            pd.stable_.push_back(i);
            last_key = key;
        }
    }
    return pd;
}

std::vector<double> phase_diagram::fraction_of(const phase_entry& e) const {
    std::vector<double> f(basis_.size(), 0.0);
    double total = 0.0;
    for (const auto& [z, count] : e.composition) {
        auto it = std::lower_bound(basis_.begin(), basis_.end(), z);
        if (it == basis_.end() || *it != z)
            throw element_outside_basis("element Z=" + std::to_string(z) +
                                        " not in the phase diagram basis");
        f[static_cast<std::size_t>(it - basis_.begin())] += count;
        total += count;
    }
    for (double& v : f) v /= total;
    return f;
}

phase_diagram::lp_result phase_diagram::solve(const std::vector<double>& fraction) const {
    std::size_t d = basis_.size();
    std::size_t m = entries_.size();
    lp_result res;
    res.weights.assign(m, 0.0);

    if (d == 1) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < m; ++j)
            if (entries_[j].e_f < entries_[best].e_f) best = j;
        res.value = entries_[best].e_f;
        res.weights[best] = 1.0;
        for (std::size_t j = 0; j < m; ++j)
            if (entries_[j].e_f <= res.value + face_tol) res.tight.push_back(j);
        return res;
    }

    // min c.w over w >= 0 with fraction components 0..d-2 matched and the
    // weights summing to 1 (the last fraction row is redundant).
    std::size_t R = d;
    auto column = [&](std::size_t j, std::vector<double>& col) {
        for (std::size_t r = 0; r + 1 < d; ++r) col[r] = fractions_[j][r];
        col[R - 1] = 1.0;
    };
    std::vector<double> b(R);
    for (std::size_t r = 0; r + 1 < d; ++r) b[r] = fraction[r];
    b[R - 1] = 1.0;

    // Initial feasible basis: the elemental endpoints, always present and
    // affinely independent.
    std::vector<std::size_t> basic(R);
    for (std::size_t k = 0; k < d; ++k) {
        bool found = false;
        for (std::size_t j = 0; j < m && !found; ++j) {
            if (entries_[j].composition.size() == 1 &&
                entries_[j].composition[0].first == basis_[k] && entries_[j].e_f <= 0.0) {
                basic[k] = j;
                found = true;
            }
        }
        if (!found) throw error("phase diagram missing an elemental endpoint");
    }

    std::vector<double> col(R), wB(R), y(R);
    std::vector<std::vector<double>> B(R, std::vector<double>(R));
    auto refresh = [&]() {
        for (std::size_t k = 0; k < R; ++k) {
            column(basic[k], col);
            for (std::size_t r = 0; r < R; ++r) B[r][k] = col[r];
        }
    };
    auto basis_solve = [&](bool transpose, const std::vector<double>& rhs,
                           std::vector<double>& out) {
        std::vector<std::vector<double>> A(R, std::vector<double>(R));
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < R; ++c) A[r][c] = transpose ? B[c][r] : B[r][c];
        out = rhs;
        if (!solve_linear(A, out)) throw error("degenerate simplex basis");
    };

    for (int iter = 0; iter < 10000; ++iter) {
        refresh();
        basis_solve(false, b, wB);
        std::vector<double> cB(R);
        for (std::size_t k = 0; k < R; ++k) cB[k] = entries_[basic[k]].e_f;
        basis_solve(true, cB, y);

        // Bland's rule: the first improving column enters.
        std::size_t entering = m;
        for (std::size_t j = 0; j < m; ++j) {
            column(j, col);
            double r = entries_[j].e_f;
            for (std::size_t k = 0; k < R; ++k) r -= y[k] * col[k];
            if (r < -lp_tol) {
                entering = j;
                break;
            }
        }
        if (entering == m) {
            res.value = 0.0;
            for (std::size_t k = 0; k < R; ++k) {
                double w = std::max(wB[k], 0.0);
                res.weights[basic[k]] += w;
                res.value += w * entries_[basic[k]].e_f;
            }
            for (std::size_t j = 0; j < m; ++j) {
                column(j, col);
                double r = entries_[j].e_f;
                for (std::size_t k = 0; k < R; ++k) r -= y[k] * col[k];
                if (std::abs(r) <= face_tol) res.tight.push_back(j);
            }
            return res;
        }

        column(entering, col);
        std::vector<double> dz;
        basis_solve(false, col, dz);
        std::size_t leaving = R;
        double best_ratio = 0.0;
        for (std::size_t k = 0; k < R; ++k) {
            if (dz[k] <= lp_tol) continue;
            double ratio = std::max(wB[k], 0.0) / dz[k];
            if (leaving == R || ratio < best_ratio - lp_tol ||
                (ratio < best_ratio + lp_tol && basic[k] < basic[leaving])) {
                leaving = k;
                best_ratio = ratio;
            }
        }
        if (leaving == R) throw error("unbounded hull program");
        basic[leaving] = entering;
    }
    throw error("simplex iteration limit exceeded");
}

double phase_diagram::hull_energy(const std::vector<double>& fraction) const {
    if (fraction.size() != basis_.size())
        throw shape_mismatch("fraction vector size does not match the basis");
    std::vector<double> f = fraction;
    double sum = 0.0;
    for (double& v : f) {
        if (v < -1e-9) throw config_error("negative fraction component");
        v = std::max(v, 0.0);
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw config_error("fractions must sum to 1");
    for (double& v : f) v /= sum;
    return solve(f).value;
}

std::pair<double, std::vector<decomposition_term>>
phase_diagram::decomposition_energy(const phase_entry& query) const {
    phase_entry q = query;
    q.composition = normalize_composition(std::move(q.composition));
    std::vector<double> f = fraction_of(q);
    lp_result lp = solve(f);
    double e_d = q.e_f - lp.value;
    std::size_t d = basis_.size();

    // Solve the subset's convex-combination weights by normal equations;
    // true when the subset expresses f feasibly at hull value.
    auto fit_subset = [&](const std::vector<std::size_t>& sub, std::vector<double>& w) {
        std::size_t s = sub.size();
        std::vector<std::vector<double>> N(s, std::vector<double>(s));
        w.assign(s, 0.0);
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = 0; j < s; ++j) {
                double acc = 1.0; // weights-sum row folded in
                for (std::size_t r = 0; r < d; ++r)
                    acc += fractions_[sub[i]][r] * fractions_[sub[j]][r];
                N[i][j] = acc;
            }
            double acc = 1.0;
            for (std::size_t r = 0; r < d; ++r) acc += fractions_[sub[i]][r] * f[r];
            w[i] = acc;
        }
        if (!solve_linear(N, w)) return false;
        double wsum = 0.0, value = 0.0;
        std::vector<double> repro(d, 0.0);
        for (std::size_t i = 0; i < s; ++i) {
            if (w[i] < -1e-10) return false;
            wsum += w[i];
            value += w[i] * entries_[sub[i]].e_f;
            for (std::size_t r = 0; r < d; ++r) repro[r] += w[i] * fractions_[sub[i]][r];
        }
        if (std::abs(wsum - 1.0) > 1e-9) return false;
        for (std::size_t r = 0; r < d; ++r)
            if (std::abs(repro[r] - f[r]) > 1e-9) return false;
        return value <= lp.value + 1e-8;
    };

    // Tie rule: fewest products, then the lexicographically smallest id
    // sequence, searched over the optimal face.
    std::vector<std::size_t> tight = lp.tight;
    std::sort(tight.begin(), tight.end(), [&](std::size_t a, std::size_t b) {
        if (entries_[a].id != entries_[b].id) return entries_[a].id < entries_[b].id;
        return a < b;
    });
    std::vector<std::size_t> chosen;
    std::vector<double> chosen_w;
    if (tight.size() <= 24) {
        long budget = 100000;
        std::vector<std::size_t> pick;
        std::vector<double> w;
        for (std::size_t s = 1; s <= std::min(d, tight.size()) && chosen.empty() && budget > 0;
             ++s) {
            std::vector<std::size_t> idx(s);
            for (std::size_t i = 0; i < s; ++i) idx[i] = i;
            do {
                if (--budget < 0) break;
                pick.clear();
                for (std::size_t i : idx) pick.push_back(tight[i]);
                if (fit_subset(pick, w)) {
                    chosen = pick;
                    chosen_w = w;
                    break;
                }
            } while (next_combination(idx, tight.size()));
        }
    }

    std::vector<decomposition_term> terms;
    if (!chosen.empty()) {
        double sum = 0.0;
        for (double& v : chosen_w) {
            v = std::max(v, 0.0);
            sum += v;
        }
        for (std::size_t i = 0; i < chosen.size(); ++i)
            terms.push_back({entries_[chosen[i]].id, chosen_w[i] / sum});
    } else {
        double sum = 0.0;
        for (std::size_t j = 0; j < entries_.size(); ++j) sum += lp.weights[j];
        for (std::size_t j = 0; j < entries_.size(); ++j)
            if (lp.weights[j] > 1e-12) terms.push_back({entries_[j].id, lp.weights[j] / sum});
    }
    return {e_d, std::move(terms)};
}

stability_count count_stable(const phase_diagram& pd, const std::vector<phase_entry>& queries,
                             double threshold) {
    std::map<std::string, const phase_entry*> kept;
    int dropped = 0;
    for (const phase_entry& q : queries) {
        std::string key = composition_key(normalize_composition(q.composition));
        auto it = kept.find(key);
        if (it == kept.end()) {
            kept[key] = &q;
        } else {
            ++dropped;
            if (q.e_f < it->second->e_f || (q.e_f == it->second->e_f && q.id < it->second->id))
                it->second = &q;
        }
    }
    stability_count out;
    out.duplicates_dropped = dropped;
    for (const auto& [key, q] : kept) {
        (void)key;
        auto [e_d, terms] = pd.decomposition_energy(*q);
        (void)terms;
        stability_flag flag{q->id, e_d, e_d < 0.0, e_d < threshold};
        out.n_stable += flag.stable ? 1 : 0;
        out.n_metastable += flag.metastable ? 1 : 0;
        out.flags.push_back(std::move(flag));
    }
    return out;
}

std::vector<phase_entry> read_phase_entries(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    const periodic_table& pt = periodic_table::instance();
    std::vector<phase_entry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            phase_entry e;
            e.id = j.at("id").get<std::string>();
            e.e_f = j.at("e_f").get<double>();
            for (const auto& [sym, count] : j.at("composition").items())
                e.composition.emplace_back(pt.by_symbol(sym).z, count.get<int>());
            e.composition = normalize_composition(std::move(e.composition));
            out.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw parse_error(std::string("phase entry: ") + ex.what(), line_no);
        } catch (const unknown_element& ex) {
            throw parse_error(ex.what(), line_no);
        } catch (const schema_error& ex) {
            throw parse_error(ex.what(), line_no);
        }
    }
    return out;
}

void write_phase_entries(const std::vector<phase_entry>& entries, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for write: " + path);
    const periodic_table& pt = periodic_table::instance();
    for (const phase_entry& e : entries) {
        json comp = json::object();
        for (const auto& [z, count] : e.composition) comp[pt.by_z(z).symbol] = count;
        json j{{"composition", comp}, {"e_f", e.e_f}, {"id", e.id}};
        f << j.dump() << '\n';
    }
    if (!f) throw io_error("write failed: " + path);
}

phase_entry entry_of(const crystal& x, double e_f, std::string id) {
    phase_entry e;
    e.composition = composition_of(x);
    e.e_f = e_f;
    e.id = std::move(id);
    return e;
}

} // namespace unimat
