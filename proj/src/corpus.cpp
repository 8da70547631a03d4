#include "unimat/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "unimat/periodic_table.hpp"

namespace unimat {

using nlohmann::json;

std::string record_to_json(const structure_record& rec) {
    const auto& pt = periodic_table::instance();
    json j;
    j["id"] = rec.id;
    j["cell"] = {rec.structure.cell.a,     rec.structure.cell.b,    rec.structure.cell.c,
                 rec.structure.cell.alpha, rec.structure.cell.beta, rec.structure.cell.gamma};
    json sites = json::array();
    for (const auto& s : rec.structure.sites)
        sites.push_back({pt.by_z(s.z).symbol, s.frac[0], s.frac[1], s.frac[2]});
    j["sites"] = std::move(sites);
    j["tags"] = rec.tags;
    return j.dump();
}

structure_record record_from_json(const std::string& line, int line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw schema_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
        structure_record rec;
        rec.id = j.at("id").get<std::string>();
        if (rec.id.empty()) throw schema_error("empty id");
        auto cell = j.at("cell");
        if (!cell.is_array() || cell.size() != 6) throw schema_error("cell must have 6 entries");
        rec.structure.cell = {cell[0].get<double>(), cell[1].get<double>(), cell[2].get<double>(),
                              cell[3].get<double>(), cell[4].get<double>(), cell[5].get<double>()};
        const auto& pt = periodic_table::instance();
        for (const auto& sj : j.at("sites")) {
            if (!sj.is_array() || sj.size() != 4) throw schema_error("site must be [symbol,x,y,z]");
            site s;
            s.z = pt.by_symbol(sj[0].get<std::string>()).z;
            s.frac = {sj[1].get<double>(), sj[2].get<double>(), sj[3].get<double>()};
            rec.structure.sites.push_back(s);
        }
        if (j.contains("tags"))
            for (auto& [k, v] : j.at("tags").items()) rec.tags[k] = v.get<std::string>();
        return rec;
    } catch (const schema_error&) {
        throw;
    } catch (const std::exception& e) {
        throw schema_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
}

std::vector<structure_record> read_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open corpus file: " + path);
    std::vector<structure_record> out;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        structure_record rec = record_from_json(line, line_no);
        if (!ids.insert(rec.id).second)
            throw duplicate_id("duplicate record id '" + rec.id + "' at line " +
                               std::to_string(line_no));
        out.push_back(std::move(rec));
    }
    return out;
}

void write_corpus(const std::vector<structure_record>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write corpus file: " + path);
    for (const auto& rec : records) f << record_to_json(rec) << '\n';
    if (!f) throw io_error("write failed: " + path);
}

} // namespace unimat
