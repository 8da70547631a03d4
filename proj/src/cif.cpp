#include "unimat/cif.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "unimat/periodic_table.hpp"

namespace unimat {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::size_t i = 0, n = line.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= n) break;
        if (line[i] == '#') break; // comment to end of line
        if (line[i] == '\'' || line[i] == '"') {
            char q = line[i++];
            std::string tok;
            while (i < n && line[i] != q) tok += line[i++];
            if (i < n) ++i;
            toks.push_back(tok);
        } else {
            std::string tok;
            while (i < n && !std::isspace(static_cast<unsigned char>(line[i]))) tok += line[i++];
            toks.push_back(tok);
        }
    }
    return toks;
}

double parse_number(const std::string& tok, int line_no) {
    // Standard-uncertainty suffixes like "1.234(5)" are stripped.
    std::string s = tok;
    auto paren = s.find('(');
    if (paren != std::string::npos) s.resize(paren);
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw parse_error("malformed number '" + tok + "'", line_no);
    }
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

crystal parse_cif(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int line_no = 0;

    std::map<std::string, double> cell_tags;
    std::vector<site> sites;

    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);

    std::size_t i = 0;
    while (i < lines.size()) {
        ++line_no;
        auto toks = tokenize(lines[i]);
        if (toks.empty()) {
            ++i;
            continue;
        }
        std::string head = lower(toks[0]);
        if (head == "loop_") {
            int loop_line = line_no;
            ++i;
            std::vector<std::string> headers;
            while (i < lines.size()) {
                auto t = tokenize(lines[i]);
                if (t.size() == 1 && !t[0].empty() && t[0][0] == '_') {
                    headers.push_back(lower(t[0]));
                    ++i;
                    ++line_no;
                } else {
                    break;
                }
            }
            int sym_col = -1, x_col = -1, y_col = -1, z_col = -1;
            for (std::size_t c = 0; c < headers.size(); ++c) {
                if (headers[c] == "_atom_site_type_symbol") sym_col = static_cast<int>(c);
                if (headers[c] == "_atom_site_fract_x") x_col = static_cast<int>(c);
                if (headers[c] == "_atom_site_fract_y") y_col = static_cast<int>(c);
                if (headers[c] == "_atom_site_fract_z") z_col = static_cast<int>(c);
            }
            bool is_atom_loop = sym_col >= 0 || x_col >= 0 || y_col >= 0 || z_col >= 0;
            if (is_atom_loop && (sym_col < 0 || x_col < 0 || y_col < 0 || z_col < 0))
                throw parse_error("atom loop missing a required _atom_site column", loop_line);
            // Data rows run until the next tag, loop, or block header.
            while (i < lines.size()) {
                auto t = tokenize(lines[i]);
                if (t.empty()) {
                    ++i;
                    ++line_no;
                    continue;
                }
                std::string h0 = lower(t[0]);
                if (h0[0] == '_' || h0 == "loop_" || h0.rfind("data_", 0) == 0) break;
                ++line_no;
                if (is_atom_loop) {
                    if (t.size() != headers.size())
                        throw parse_error("atom loop row has " + std::to_string(t.size()) +
                                              " fields, expected " +
                                              std::to_string(headers.size()),
                                          line_no);
                    std::string sym = normalize_symbol(t[sym_col]);
                    const auto& pt = periodic_table::instance();
                    if (!pt.has_symbol(sym))
                        throw parse_error("unknown element symbol '" + t[sym_col] + "'", line_no);
                    site s;
                    s.z = pt.by_symbol(sym).z;
                    s.frac = {parse_number(t[x_col], line_no), parse_number(t[y_col], line_no),
                              parse_number(t[z_col], line_no)};
                    sites.push_back(s);
                }
                ++i;
            }
            continue;
        }
        if (!head.empty() && head[0] == '_') {
            static const char* wanted[] = {"_cell_length_a",    "_cell_length_b",
                                           "_cell_length_c",    "_cell_angle_alpha",
                                           "_cell_angle_beta",  "_cell_angle_gamma"};
            for (const char* tag : wanted) {
                if (head == tag) {
                    if (toks.size() < 2) throw parse_error(std::string(tag) + " has no value", line_no);
                    cell_tags[tag] = parse_number(toks[1], line_no);
                }
            }
        }
        ++i;
    }

    static const char* required[] = {"_cell_length_a",   "_cell_length_b",  "_cell_length_c",
                                     "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma"};
    for (const char* tag : required)
        if (!cell_tags.count(tag)) throw parse_error(std::string("missing ") + tag, line_no);

    crystal out;
    out.cell = {cell_tags["_cell_length_a"],    cell_tags["_cell_length_b"],
                cell_tags["_cell_length_c"],    cell_tags["_cell_angle_alpha"],
                cell_tags["_cell_angle_beta"],  cell_tags["_cell_angle_gamma"]};
    try {
        out.cell.validate();
    } catch (const invalid_cell& e) {
        throw parse_error(e.what(), line_no);
    }
    out.sites = std::move(sites);
    return out;
}

std::string emit_cif(const crystal& x, const std::string& block_name) {
    const auto& pt = periodic_table::instance();
    char buf[64];
    std::string out = "data_" + block_name + "\n";
    auto tag = [&](const char* name, double v) {
        std::snprintf(buf, sizeof buf, "%s %.6f\n", name, v);
        out += buf;
    };
    tag("_cell_length_a", x.cell.a);
    tag("_cell_length_b", x.cell.b);
    tag("_cell_length_c", x.cell.c);
    tag("_cell_angle_alpha", x.cell.alpha);
    tag("_cell_angle_beta", x.cell.beta);
    tag("_cell_angle_gamma", x.cell.gamma);
    out += "loop_\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n";
    for (const auto& s : x.sites) {
        std::snprintf(buf, sizeof buf, " %.6f %.6f %.6f\n", s.frac[0], s.frac[1], s.frac[2]);
        out += pt.by_z(s.z).symbol;
        out += buf;
    }
    return out;
}

} // namespace unimat
