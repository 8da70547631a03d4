#pragma once
#include <map>
#include <string>
#include <vector>

#include "unimat/errors.hpp"

namespace unimat {

// Layered key=value settings under "section.key" names.  A schema fixes the
// known keys and their defaults; anything outside it is rejected.  Precedence:
// flag overrides > environment > config file > schema defaults.
class settings {
  public:
    explicit settings(std::map<std::string, std::string> schema_defaults);

    // INI-style text: [section] headers, key = value lines, '#'/';' comments.
    void load_text(const std::string& text, const std::string& origin = "<config>");
    void load_file(const std::string& path);
    // Applies UNIMAT_<SECTION>_<KEY> environment variables (section gives the
    // first underscore split, so section names must not contain '_').
    void load_env();
    void set_flag(const std::string& key, const std::string& value);

    bool known(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const; // comma-separated

    // Deterministic INI echo of every resolved key.
    std::string echo() const;

  private:
    void assign(const std::string& key, const std::string& value, const std::string& origin);
    std::map<std::string, std::string> values_;
};

} // namespace unimat
