#include "unimat/formula.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include "unimat/periodic_table.hpp"

namespace unimat {

std::vector<std::pair<int, int>> parse_formula(const std::string& formula) {
    const auto& pt = periodic_table::instance();
    std::map<int, int> counts;
    std::size_t i = 0, n = formula.size();
    while (i < n) {
        if (!std::isupper(static_cast<unsigned char>(formula[i])))
            throw schema_error("malformed formula '" + formula + "' at position " +
                               std::to_string(i));
        std::string sym(1, formula[i++]);
        while (i < n && std::islower(static_cast<unsigned char>(formula[i]))) sym += formula[i++];
        long count = 1;
        if (i < n && std::isdigit(static_cast<unsigned char>(formula[i]))) {
            count = 0;
            while (i < n && std::isdigit(static_cast<unsigned char>(formula[i]))) {
                count = count * 10 + (formula[i++] - '0');
                if (count > 1000000) throw schema_error("formula count too large");
            }
            if (count == 0) throw schema_error("zero count in formula '" + formula + "'");
        }
        counts[pt.by_symbol(sym).z] += static_cast<int>(count);
    }
    if (counts.empty()) throw schema_error("empty formula");
    return {counts.begin(), counts.end()};
}

namespace {

std::string render(const std::vector<std::pair<int, int>>& composition, bool always_count,
                   int divisor) {
    const auto& pt = periodic_table::instance();
    std::vector<std::pair<std::string, int>> parts;
    parts.reserve(composition.size());
    for (auto [z, c] : composition) parts.emplace_back(pt.by_z(z).symbol, c / divisor);
    std::sort(parts.begin(), parts.end());
    std::string out;
    for (const auto& [sym, c] : parts) {
        out += sym;
        if (always_count || c != 1) out += std::to_string(c);
    }
    return out;
}

} // namespace

std::string composition_key(const std::vector<std::pair<int, int>>& composition) {
    if (composition.empty()) throw empty_input("empty composition");
    int g = 0;
    for (auto [z, c] : composition) {
        if (c <= 0) throw schema_error("non-positive count in composition");
        g = std::gcd(g, c);
    }
    return render(composition, true, g);
}

std::string composition_key(const crystal& x) { return composition_key(composition_of(x)); }

std::string composition_key(const std::string& formula) {
    return composition_key(parse_formula(formula));
}

std::string format_formula(const std::vector<std::pair<int, int>>& composition) {
    return render(composition, false, 1);
}

} // namespace unimat
