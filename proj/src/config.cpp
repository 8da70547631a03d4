#include "unimat/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace unimat {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

settings::settings(std::map<std::string, std::string> schema_defaults)
    : values_(std::move(schema_defaults)) {
    for (const auto& [key, _] : values_) {
        auto dot = key.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
            throw config_error("schema key '" + key + "' must be section.key");
        if (key.find('_') != std::string::npos && key.find('_') < dot)
            throw config_error("section name in '" + key + "' must not contain '_'");
    }
}

void settings::assign(const std::string& key, const std::string& value,
                      const std::string& origin) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw config_error(origin + ": unknown config key '" + key + "'");
    it->second = value;
}

void settings::load_text(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw config_error(origin + ":" + std::to_string(line_no) + ": malformed section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw config_error(origin + ":" + std::to_string(line_no) + ": empty section");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(line_no) + ": empty key");
        if (section.empty())
            throw config_error(origin + ":" + std::to_string(line_no) +
                               ": key outside any [section]");
        assign(section + "." + key, value, origin + ":" + std::to_string(line_no));
    }
}

void settings::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    load_text(buf.str(), path);
}

void settings::load_env() {
    const std::string prefix = "UNIMAT_";
    for (char** e = environ; e && *e; ++e) {
        std::string entry(*e);
        if (entry.rfind(prefix, 0) != 0) continue;
        auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string name = entry.substr(prefix.size(), eq - prefix.size());
        std::string value = entry.substr(eq + 1);
        auto us = name.find('_');
        if (us == std::string::npos) continue;
        std::string key = name.substr(0, us) + "." + name.substr(us + 1);
        for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (values_.count(key)) assign(key, value, "environment");
    }
}

void settings::set_flag(const std::string& key, const std::string& value) {
    assign(key, value, "flag");
}

const std::string& settings::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error("unknown config key '" + key + "'");
    return it->second;
}

long settings::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        long r = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': '" + v + "' is not an integer");
    }
}

double settings::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': '" + v + "' is not a number");
    }
}

bool settings::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::string> settings::get_list(const std::string& key) const {
    const std::string& v = get(key);
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

std::string settings::echo() const {
    std::string out, section;
    for (const auto& [key, value] : values_) {
        auto dot = key.find('.');
        std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

} // namespace unimat
