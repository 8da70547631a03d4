#pragma once
#include <string>
#include <tuple>
#include <vector>

#include "unimat/hull.hpp"
#include "unimat/metrics.hpp"

namespace unimat {

struct energy_item {
    std::string key;  // canonical reduced formula
    double e_f = 0;   // eV/atom
    std::string id;
};

// One representative per composition key: lowest e_f wins, then smaller id.
// Items are kept sorted by key.
struct energy_set {
    std::string name;
    std::vector<energy_item> items;
};

energy_set make_energy_set(std::string name, std::vector<energy_item> raw);

struct delta_ef_result {
    bool defined = false;  // matched > 0
    double value = 0;      // mean of (e_f^A - e_f^B) over matched keys
    int matched = 0;
    std::vector<std::tuple<std::string, double, double>> pairs;  // key, e_f^A, e_f^B
};

// Matched keys are visited in sorted order and each term negates exactly
// under argument swap, so delta_ef(a, b).value == -delta_ef(b, a).value
// bit for bit.
delta_ef_result delta_ef(const energy_set& a, const energy_set& b);

struct rate_result {
    bool defined = false;
    double value = 0;  // fraction of matched keys with e_f^A strictly lower
    int matched = 0;
};

rate_result ef_reduction_rate(const energy_set& a, const energy_set& b);

struct report_inputs {
    const proxy_report* proxy = nullptr;        // validity/coverage/property sections
    const stability_count* stability = nullptr; // #stable section and E_d histogram
    const energy_set* set_a = nullptr;          // delta/rate sections need both sets
    const energy_set* set_b = nullptr;
};

struct eval_report {
    std::string report_json;       // absent sections are null, listed in "warnings"
    std::string ed_histogram_csv;  // empty string when the section is absent
    std::string delta_ef_csv;      // composition key, per-composition delta
};

// Byte-deterministic given inputs; absent inputs yield absent sections, never
// fabricated zeros.  Histogram bin counts sum to the number of query flags.
eval_report assemble_report(const report_inputs& in);

}  // namespace unimat
