#include "unimat/compare.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "unimat/log.hpp"

namespace unimat {

energy_set make_energy_set(std::string name, std::vector<energy_item> raw) {
    for (const auto& it : raw)
        if (it.key.empty()) throw schema_error("energy item with empty composition key");
    std::sort(raw.begin(), raw.end(), [](const energy_item& x, const energy_item& y) {
        if (x.key != y.key) return x.key < y.key;
        if (x.e_f != y.e_f) return x.e_f < y.e_f;
        return x.id < y.id;
    });
    energy_set s;
    s.name = std::move(name);
    for (auto& it : raw)
        if (s.items.empty() || s.items.back().key != it.key) s.items.push_back(std::move(it));
    return s;
}

namespace {

// Calls fn(item_a, item_b) for each matched key, in sorted key order.
template <typename F>
int for_matched(const energy_set& a, const energy_set& b, F&& fn) {
    int matched = 0;
    std::size_t i = 0, j = 0;
    while (i < a.items.size() && j < b.items.size()) {
        const auto& x = a.items[i];
        const auto& y = b.items[j];
        if (x.key < y.key) {
            ++i;
        } else if (y.key < x.key) {
            ++j;
        } else {
            fn(x, y);
            ++matched;
            ++i;
            ++j;
        }
    }
    return matched;
}

}  // namespace

delta_ef_result delta_ef(const energy_set& a, const energy_set& b) {
    delta_ef_result r;
    double sum = 0.0;
    r.matched = for_matched(a, b, [&](const energy_item& x, const energy_item& y) {
        sum += x.e_f - y.e_f;
        r.pairs.emplace_back(x.key, x.e_f, y.e_f);
    });
    if (r.matched > 0) {
        r.defined = true;
        r.value = sum / r.matched;
    }
    return r;
}

rate_result ef_reduction_rate(const energy_set& a, const energy_set& b) {
    rate_result r;
    int lower = 0;
    r.matched = for_matched(a, b, [&](const energy_item& x, const energy_item& y) {
        if (x.e_f < y.e_f) ++lower;
    });
    if (r.matched > 0) {
        r.defined = true;
        r.value = static_cast<double>(lower) / r.matched;
    }
    return r;
}

eval_report assemble_report(const report_inputs& in) {
    using nlohmann::json;
    eval_report out;
    json j;
    std::vector<std::string> warnings;

    if (in.proxy) {
        const proxy_report& p = *in.proxy;
        j["validity"] = {{"structural", p.structural_validity_rate},
                         {"composition", p.composition_validity_rate},
                         {"n_generated", p.n_generated},
                         {"n_undecodable", p.n_undecodable},
                         {"n_reference", p.n_reference}};
        if (p.cov_defined) {
            j["coverage"] = {{"cov_r", p.cov.cov_r},   {"cov_p", p.cov.cov_p},
                             {"amsd_r", p.cov.amsd_r}, {"amsd_p", p.cov.amsd_p},
                             {"amcd_r", p.cov.amcd_r}, {"amcd_p", p.cov.amcd_p}};
            j["property_stats"] = {{"emd_density", p.emd_density},
                                   {"emd_energy", p.emd_energy},
                                   {"emd_nelem", p.emd_nelem}};
        } else {
            j["coverage"] = nullptr;
            j["property_stats"] = nullptr;
            warnings.push_back("coverage section absent: no valid overlap to compare");
            warnings.push_back("property_stats section absent: no valid overlap to compare");
        }
    } else {
        j["validity"] = nullptr;
        j["coverage"] = nullptr;
        j["property_stats"] = nullptr;
        warnings.push_back("validity section absent");
        warnings.push_back("coverage section absent");
        warnings.push_back("property_stats section absent");
    }

    if (in.set_a && in.set_b) {
        delta_ef_result d = delta_ef(*in.set_a, *in.set_b);
        rate_result fwd = ef_reduction_rate(*in.set_a, *in.set_b);
        rate_result rev = ef_reduction_rate(*in.set_b, *in.set_a);
        j["delta_ef"] = {{"set_a", in.set_a->name},
                         {"set_b", in.set_b->name},
                         {"matched", d.matched},
                         {"value", d.defined ? json(d.value) : json(nullptr)}};
        j["rates"] = {{"set_a", in.set_a->name},
                      {"set_b", in.set_b->name},
                      {"matched", fwd.matched},
                      {"a_lower", fwd.defined ? json(fwd.value) : json(nullptr)},
                      {"b_lower", rev.defined ? json(rev.value) : json(nullptr)}};
        if (!d.defined) warnings.push_back("delta_ef undefined: no matched compositions");

        std::string csv = "composition,delta_ef\n";
        for (const auto& [key, ea, eb] : d.pairs)
            csv += key + "," + format_double(ea - eb) + "\n";
        out.delta_ef_csv = csv;
    } else {
        j["delta_ef"] = nullptr;
        j["rates"] = nullptr;
        warnings.push_back("delta_ef section absent");
        warnings.push_back("rates section absent");
    }

    if (in.stability) {
        const stability_count& s = *in.stability;
        j["stable_counts"] = {{"n_stable", s.n_stable},
                              {"n_metastable", s.n_metastable},
                              {"n_queries", static_cast<int>(s.flags.size())},
                              {"duplicates_dropped", s.duplicates_dropped}};

        if (!s.flags.empty()) {
            // Fixed 25 meV/atom bins anchored at a multiple of the width, so
            // bin edges depend only on the data range.
            double width = 0.025;
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& f : s.flags) {
                lo = std::min(lo, f.e_d);
                hi = std::max(hi, f.e_d);
            }
            double edge0 = std::floor(lo / width) * width;
            int nbins = std::max(1, static_cast<int>(std::floor((hi - edge0) / width)) + 1);
            std::vector<int> counts(static_cast<std::size_t>(nbins), 0);
            for (const auto& f : s.flags) {
                int b = static_cast<int>(std::floor((f.e_d - edge0) / width));
                b = std::clamp(b, 0, nbins - 1);
                ++counts[static_cast<std::size_t>(b)];
            }
            std::string csv = "bin_lo,bin_hi,count\n";
            for (int b = 0; b < nbins; ++b)
                csv += format_double(edge0 + b * width) + "," +
                       format_double(edge0 + (b + 1) * width) + "," +
                       std::to_string(counts[static_cast<std::size_t>(b)]) + "\n";
            out.ed_histogram_csv = csv;
        }
    } else {
        j["stable_counts"] = nullptr;
        warnings.push_back("stable_counts section absent");
    }

    j["warnings"] = warnings;
    out.report_json = j.dump(2) + "\n";
    return out;
}

}  // namespace unimat
