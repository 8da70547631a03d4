#pragma once
#include <string>
#include <utility>
#include <vector>

namespace unimat {

enum class log_level { debug = 0, info = 1, warn = 2, error = 3 };

using log_fields = std::vector<std::pair<std::string, std::string>>;

// "2026-01-01T00:00:00Z INFO event key=value ..." to stderr and, when set,
// to a log file.  Values with spaces are quoted.
void log_line(log_level level, const std::string& event, const log_fields& fields = {});

void set_log_level(log_level level);
void set_log_file(const std::string& path); // empty disables the file sink

std::string format_double(double v); // shortest round-trip formatting

} // namespace unimat
