#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace softctrl::cfg {

// Flat key=value text config with dotted section prefixes:
//
//   # full-line comments and blank lines are skipped
//   seed = 0
//   sac.variant = imkl
//   rl.total_steps = 50000
//
// Keys are unique (a duplicate is a ConfigError) and every getter records the
// key it touched, so commands can reject unknown keys after assembling their
// settings — typos fail loudly instead of silently keeping a default.
class Config {
  public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    // Getters with a fallback for absent keys. Malformed values throw
    // ConfigError naming the key and the raw text.
    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    bool flag(const std::string& key, bool fallback) const;

    std::string require(const std::string& key) const;

    // Inserts or overwrites; used for command-line overrides and sweep points.
    void set(const std::string& key, const std::string& value);

    // Keys present in the file but never read by any getter.
    std::vector<std::string> unused() const;

    // Canonical text form: sorted "key = value" lines. Writing this into the
    // output directory is what makes a run reproducible from its artifacts.
    std::string serialize() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    std::string origin_ = "<empty>";
    mutable std::set<std::string> used_;
};

}  // namespace softctrl::cfg
