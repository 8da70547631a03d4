// Regenerates the reference_energy column of the element table: each element's
// close-packed primitive cell (one atom, rhombohedral, 60-degree angles) is
// relaxed under the pair potential and the resulting per-atom energy replaces
// the last column.  All other columns and comments pass through unchanged.
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "unimat/energy.hpp"
#include "unimat/relax.hpp"

using namespace unimat;

namespace {

// Per-atom energy of the relaxed close-packed elemental reference.
double reference_energy_of(int z, const soft_sphere_oracle& oracle) {
    double d0 = 2.0 * oracle.params().of(z).radius;
    crystal x;
    x.cell = {d0, d0, d0, 60.0, 60.0, 60.0};
    x.sites = {{z, {0.0, 0.0, 0.0}}};
    relax_options opts;
    opts.relax_cell = true;
    relaxation_result res = relax(x, oracle, opts);
    if (!res.converged)
        throw relax_error("elemental reference did not converge for z=" + std::to_string(z));
    return res.e_total / x.natoms();
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regenerate elemental reference energies in the element table"};
    std::string table_path = "data/periodic_table.tsv";
    std::string potential_path;
    app.add_option("--table", table_path, "element table to rewrite in place");
    app.add_option("--potential", potential_path, "pair-potential table override");
    CLI11_PARSE(app, argc, argv);

    try {
        soft_sphere_oracle oracle(potential_path.empty()
                                      ? pair_potential_params::defaults()
                                      : pair_potential_params::from_file(potential_path));

        std::ifstream in(table_path);
        if (!in) throw io_error("cannot open: " + table_path);
        std::string line, out_text;
        int rewritten = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') {
                out_text += line + "\n";
                continue;
            }
            auto cols = split_tabs(line);
            if (cols.size() != 8) throw schema_error("expected 8 columns: " + line);
            int z = std::stoi(cols[0]);
            double e_ref = reference_energy_of(z, oracle);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.9f", e_ref);
            cols[7] = buf;
            std::string joined = cols[0];
            for (std::size_t i = 1; i < cols.size(); ++i) joined += "\t" + cols[i];
            out_text += joined + "\n";
            ++rewritten;
            std::fprintf(stderr, "z=%-3d %-3s e_ref=%s\n", z, cols[1].c_str(), buf);
        }
        in.close();

        std::ofstream out(table_path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open for writing: " + table_path);
        out << out_text;
        if (!out) throw io_error("write failed: " + table_path);
        std::fprintf(stderr, "rewrote %d reference energies in %s\n", rewritten,
                     table_path.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
