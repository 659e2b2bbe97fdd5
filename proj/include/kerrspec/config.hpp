// config.hpp - sectioned key = value configuration with presets and provenance tracking.
//
//   # comment
//   command = one-tone
//   preset = f_039
//   [device]
//   kerr_mhz = -11.2
//   [axes]
//   detuning_mhz = -15, 5, 150     ; start, stop, count
//
// Every value read through Resolver is recorded with its origin (config, preset, cli or
// default) so the run manifest lists each default that was applied.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kerrspec/core.hpp"
#include "kerrspec/spectrum.hpp"

namespace kerrspec::config {

class ConfigError : public InvalidParameter {
public:
    using InvalidParameter::InvalidParameter;
};

struct Entry {
    std::string value;
    int line{0};            // 0 when not from a file
    std::string origin;     // "config", "preset" or "cli"
};

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>") {
        Config c;
        c.origin_ = origin;
        std::istringstream in(text);
        std::string raw, section;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = raw;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(c.where(line_no) + "unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw ConfigError(c.where(line_no) + "empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(c.where(line_no) + "expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(c.where(line_no) + "missing key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (c.entries_.count(full)) throw ConfigError(c.where(line_no) + "duplicate key '" + full + "'");
            c.entries_[full] = Entry{trim(line.substr(eq + 1)), line_no, "config"};
        }
        return c;
    }

    /// Sets `key` unless the file already defines it.
    void set_default(const std::string& key, const std::string& value, const std::string& origin) {
        entries_.try_emplace(key, Entry{value, 0, origin});
    }

    /// Sets `key`, overriding the file.
    void set(const std::string& key, const std::string& value, const std::string& origin) {
        entries_[key] = Entry{value, 0, origin};
    }

    const Entry* find(const std::string& key) const {
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::string where(int line) const { return origin_ + ":" + std::to_string(line) + ": "; }
    std::string where(const Entry& e, const std::string& key) const {
        return e.line > 0 ? where(e.line) + key + ": " : key + " (" + e.origin + "): ";
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    std::string origin_;
    std::map<std::string, Entry> entries_;
};

struct Axis {
    double start{0.0};
    double stop{0.0};
    std::size_t count{0};

    std::vector<double> values() const { return linspace(start, stop, count); }
    std::string str() const {
        std::ostringstream s;
        s.precision(12);
        s << start << ", " << stop << ", " << count;
        return s.str();
    }
};

/// Typed access with provenance. Values are recorded in `manifest()` as
/// {"value": ..., "source": ...}.
class Resolver {
public:
    explicit Resolver(const Config& c) : cfg_(c) {}

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const Entry* e = lookup(key, fallback ? std::optional<std::string>(fmt(*fallback)) : std::nullopt);
        const double v = to_number(*e, key, e->value);
        record(key, v, e->origin);
        return v;
    }

    long integer(const std::string& key, std::optional<long> fallback = std::nullopt) {
        const Entry* e = lookup(key, fallback ? std::optional<std::string>(std::to_string(*fallback)) : std::nullopt);
        const double v = to_number(*e, key, e->value);
        if (v != std::floor(v)) throw ConfigError(cfg_.where(*e, key) + "expected an integer");
        record(key, static_cast<long>(v), e->origin);
        return static_cast<long>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const Entry* e = lookup(key, fallback);
        record(key, e->value, e->origin);
        return e->value;
    }

    bool flag(const std::string& key, std::optional<bool> fallback = std::nullopt) {
        const Entry* e = lookup(key, fallback ? std::optional<std::string>(*fallback ? "true" : "false") : std::nullopt);
        const std::string v = e->value;
        bool out;
        if (v == "true" || v == "yes" || v == "1" || v == "on") out = true;
        else if (v == "false" || v == "no" || v == "0" || v == "off") out = false;
        else throw ConfigError(cfg_.where(*e, key) + "expected a boolean, got '" + v + "'");
        record(key, out, e->origin);
        return out;
    }

    /// "start, stop, count" or a single value (count 1). Count must be >= 1 and values finite.
    Axis axis(const std::string& key, std::optional<Axis> fallback = std::nullopt) {
        const Entry* e = lookup(key, fallback ? std::optional<std::string>(fallback->str()) : std::nullopt);
        std::vector<double> parts;
        std::stringstream ss(e->value);
        std::string item;
        while (std::getline(ss, item, ',')) parts.push_back(to_number(*e, key, trim(item)));
        Axis a;
        if (parts.size() == 1) {
            a = Axis{parts[0], parts[0], 1};
        } else if (parts.size() == 3) {
            if (parts[2] != std::floor(parts[2]) || parts[2] < 1.0)
                throw ConfigError(cfg_.where(*e, key) + "axis count must be a positive integer (empty axis)");
            a = Axis{parts[0], parts[1], static_cast<std::size_t>(parts[2])};
            if (a.count > 1 && a.start == a.stop) throw ConfigError(cfg_.where(*e, key) + "axis has zero span");
            if (a.count > 100000) throw ConfigError(cfg_.where(*e, key) + "axis count exceeds 100000");
        } else {
            throw ConfigError(cfg_.where(*e, key) + "expected 'start, stop, count' or a single value");
        }
        record(key, a.str(), e->origin);
        return a;
    }

    /// Keys present in the configuration that were never read. Preset keys are exempt since
    /// a preset serves every command.
    void reject_unused() const {
        for (const auto& [key, e] : cfg_.entries())
            if (!used_.count(key) && e.origin != "preset") throw ConfigError(cfg_.where(e, key) + "unknown key for this command");
    }

    nlohmann::ordered_json& manifest() { return manifest_; }
    const Config& config() const { return cfg_; }

private:
    const Entry* lookup(const std::string& key, const std::optional<std::string>& fallback) {
        used_.insert(key);
        if (const Entry* e = cfg_.find(key)) return e;
        if (!fallback) throw ConfigError("missing required key '" + key + "'");
        defaults_[key] = Entry{*fallback, 0, "default"};
        return &defaults_[key];
    }

    double to_number(const Entry& e, const std::string& key, const std::string& s) const {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || std::isnan(v))
            throw ConfigError(cfg_.where(e, key) + "expected a number, got '" + s + "'");
        return v;
    }

    template <typename T>
    void record(const std::string& key, const T& v, const std::string& origin) {
        manifest_[key] = {{"value", v}, {"source", origin}};
    }

    static std::string fmt(double v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        return s.str();
    }

    const Config& cfg_;
    std::set<std::string> used_;
    std::map<std::string, Entry> defaults_;
    nlohmann::ordered_json manifest_ = nlohmann::ordered_json::object();
};

// Presets ---------------------------------------------------------------------------------------

struct Preset {
    const char* name;
    double flux;
    double omega_r_ghz;
    double kerr_mhz;
    double kappa_e_mhz;
    double kappa_i_mhz;
};

/// Device parameters at the three bias points discussed in the measurements.
inline const std::vector<Preset>& presets() {
    static const std::vector<Preset> p{
        {"f_m001", -0.01, 11.742, -0.45, 0.85, 1.01},
        {"f_031", 0.31, 11.019, -2.8, 0.57, 0.34},
        {"f_039", 0.39, 10.015, -11.0, 0.74, 0.72},
    };
    return p;
}

inline const Preset& find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (name == p.name) return p;
    std::string known;
    for (const auto& p : presets()) known += std::string(known.empty() ? "" : ", ") + p.name;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

inline void apply_preset(Config& c, const std::string& name, const std::string& origin = "preset") {
    const Preset& p = find_preset(name);
    auto num = [](double v) {
        std::ostringstream s;
        s.precision(12);
        s << v;
        return s.str();
    };
    c.set_default("device.omega_r_ghz", num(p.omega_r_ghz), origin);
    c.set_default("device.kerr_mhz", num(p.kerr_mhz), origin);
    c.set_default("device.kappa_e_mhz", num(p.kappa_e_mhz), origin);
    c.set_default("device.kappa_i_mhz", num(p.kappa_i_mhz), origin);
    c.set_default("device.flux", num(p.flux), origin);
}

} // namespace kerrspec::config
