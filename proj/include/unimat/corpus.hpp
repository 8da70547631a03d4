#pragma once
#include <map>
#include <string>
#include <vector>

#include "unimat/crystal.hpp"

namespace unimat {

struct structure_record {
    std::string id;
    crystal structure;
    std::map<std::string, std::string> tags;
};

// JSON-lines corpus: one record per line,
// {"id": str, "cell": [a,b,c,alpha,beta,gamma], "sites": [[symbol,x,y,z],...], "tags": {str: str}}.
std::vector<structure_record> read_corpus(const std::string& path);
void write_corpus(const std::vector<structure_record>& records, const std::string& path);

std::string record_to_json(const structure_record& rec);
structure_record record_from_json(const std::string& line, int line_no);

} // namespace unimat
