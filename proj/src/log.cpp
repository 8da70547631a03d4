#include "unimat/log.hpp"

#include <charconv>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "unimat/errors.hpp"

namespace unimat {

namespace {

log_level& level_slot() {
    static log_level lvl = log_level::info;
    return lvl;
}

std::ofstream& file_slot() {
    static std::ofstream f;
    return f;
}

const char* level_name(log_level l) {
    switch (l) {
        case log_level::debug: return "DEBUG";
        case log_level::info: return "INFO";
        case log_level::warn: return "WARN";
        default: return "ERROR";
    }
}

std::string timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

void set_log_level(log_level level) { level_slot() = level; }

void set_log_file(const std::string& path) {
    auto& f = file_slot();
    if (f.is_open()) f.close();
    if (!path.empty()) {
        f.open(path, std::ios::app);
        if (!f) throw io_error("cannot open log file: " + path);
    }
}

void log_line(log_level level, const std::string& event, const log_fields& fields) {
    if (static_cast<int>(level) < static_cast<int>(level_slot())) return;
    std::string line = timestamp();
    line += ' ';
    line += level_name(level);
    line += ' ';
    line += event;
    for (const auto& [k, v] : fields) {
        line += ' ';
        line += k;
        line += '=';
        if (v.find(' ') != std::string::npos) {
            line += '"';
            line += v;
            line += '"';
        } else {
            line += v;
        }
    }
    std::cerr << line << '\n';
    auto& f = file_slot();
    if (f.is_open()) f << line << '\n' << std::flush;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

} // namespace unimat
