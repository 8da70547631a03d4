#include "unimat/periodic_table.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>

namespace unimat::embedded {
extern const char* const periodic_table_tsv;
}

namespace unimat {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

periodic_table periodic_table::from_text(const std::string& text) {
    periodic_table pt;
    pt.grid_.assign(grid_rows * grid_cols, 0);
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split(line, '\t');
        if (cols.size() != 8) throw parse_error("element table: expected 8 columns", line_no);
        element e;
        try {
            e.z = std::stoi(cols[0]);
            e.symbol = cols[1];
            e.h = std::stoi(cols[2]);
            e.w = std::stoi(cols[3]);
            e.covalent_radius = std::stod(cols[4]);
            e.atomic_sphere_volume = std::stod(cols[5]);
            if (cols[6] != "-")
                for (const auto& tok : split(cols[6], ','))
                    e.oxidation_states.push_back(std::stoi(tok));
            e.reference_energy = std::stod(cols[7]);
        } catch (const std::exception&) {
            throw parse_error("element table: malformed number", line_no);
        }
        if (e.z < 1 || e.z > max_z) throw parse_error("element table: Z out of range", line_no);
        if (e.h < 0 || e.h >= grid_rows || e.w < 0 || e.w >= grid_cols)
            throw parse_error("element table: grid cell out of range", line_no);
        if (e.covalent_radius <= 0 || e.atomic_sphere_volume <= 0)
            throw parse_error("element table: non-positive constant", line_no);
        int& slot = pt.grid_[e.h * grid_cols + e.w];
        if (slot != 0) throw parse_error("element table: duplicate grid cell", line_no);
        pt.elements_.push_back(std::move(e));
        slot = static_cast<int>(pt.elements_.size());
    }
    std::vector<int> order(pt.elements_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<int>(i)] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return pt.elements_[a].z < pt.elements_[b].z; });
    std::vector<element> sorted;
    sorted.reserve(pt.elements_.size());
    std::vector<int> remap(pt.elements_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        sorted.push_back(std::move(pt.elements_[order[i]]));
    }
    for (int& slot : pt.grid_)
        if (slot != 0) slot = remap[slot - 1] + 1;
    pt.elements_ = std::move(sorted);
    for (std::size_t i = 1; i < pt.elements_.size(); ++i)
        if (pt.elements_[i].z == pt.elements_[i - 1].z)
            throw parse_error("element table: duplicate Z", 0);
    return pt;
}

periodic_table periodic_table::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open element table: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_text(buf.str());
}

namespace {
std::unique_ptr<periodic_table>& instance_slot() {
    static std::unique_ptr<periodic_table> slot;
    return slot;
}
} // namespace

const periodic_table& periodic_table::instance() {
    auto& slot = instance_slot();
    if (!slot)
        slot = std::make_unique<periodic_table>(from_text(embedded::periodic_table_tsv));
    return *slot;
}

void periodic_table::load_override(const std::string& path) {
    instance_slot() = std::make_unique<periodic_table>(from_file(path));
}

const element& periodic_table::by_z(int z) const {
    if (z < 1 || static_cast<std::size_t>(z) > elements_.size() || elements_[z - 1].z != z) {
        for (const auto& e : elements_)
            if (e.z == z) return e;
        throw unsupported_element("unsupported atomic number " + std::to_string(z));
    }
    return elements_[z - 1];
}

const element& periodic_table::by_symbol(std::string_view symbol) const {
    for (const auto& e : elements_)
        if (e.symbol == symbol) return e;
    throw unknown_element("unknown element symbol '" + std::string(symbol) + "'");
}

bool periodic_table::has_symbol(std::string_view symbol) const {
    for (const auto& e : elements_)
        if (e.symbol == symbol) return true;
    return false;
}

const element* periodic_table::cell(int h, int w) const {
    if (h < 0 || h >= grid_rows || w < 0 || w >= grid_cols)
        throw index_error("grid cell out of range");
    int slot = grid_[h * grid_cols + w];
    return slot == 0 ? nullptr : &elements_[slot - 1];
}

std::pair<int, int> element_to_cell(const element& e) { return {e.h, e.w}; }

std::optional<std::reference_wrapper<const element>> cell_to_element(const periodic_table& pt,
                                                                     int h, int w) {
    const element* e = pt.cell(h, w);
    if (!e) return std::nullopt;
    return std::cref(*e);
}

std::optional<std::reference_wrapper<const element>> cell_to_element(int h, int w) {
    return cell_to_element(periodic_table::instance(), h, w);
}

std::string normalize_symbol(std::string_view raw) {
    std::size_t end = raw.size();
    while (end > 0 && (std::isdigit(static_cast<unsigned char>(raw[end - 1])) ||
                       raw[end - 1] == '+' || raw[end - 1] == '-'))
        --end;
    return std::string(raw.substr(0, end));
}

} // namespace unimat
