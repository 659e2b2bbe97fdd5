// csv.hpp - versioned CSV emission and import for spectra, traces and flux curves.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kerrspec/circuit.hpp"
#include "kerrspec/fitting.hpp"
#include "kerrspec/spectrum.hpp"

namespace kerrspec::csv {

inline constexpr const char* version_line = "# kerrspec v1";
inline constexpr const char* spectrum_header = "detuning_hz,power_dbm,re_gamma,im_gamma,abs_gamma,converged";
inline constexpr const char* trace_header = "frequency_hz,power_dbm,re_gamma,im_gamma,abs_gamma";
inline constexpr const char* flux_header = "f,omega_r_hz,kerr_hz";

/// 12 significant digits, locale-independent.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class Table {
public:
    explicit Table(std::string header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& values) {
        std::string line;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) line += ',';
            line += format_number(values[i]);
        }
        rows_.push_back(std::move(line));
    }

    std::string str() const {
        std::string out = std::string(version_line) + '\n' + header_ + '\n';
        for (const auto& r : rows_) out += r + '\n';
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    std::string header_;
    std::vector<std::string> rows_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parsed numeric rows of a kerrspec CSV; checks the version line and column header.
inline std::vector<std::vector<double>> parse(const std::string& text, const std::string& header,
                                              const std::string& origin = "<string>") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != version_line) throw IoError(origin + ": missing '# kerrspec v1' line");
    if (!std::getline(in, line) || line != header) throw IoError(origin + ": expected header '" + header + "'");
    const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
    std::vector<std::vector<double>> rows;
    int line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw IoError(origin + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            row.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (row.size() != columns)
            throw IoError(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

// Spectra --------------------------------------------------------------------------------------

inline std::string spectrum_to_string(const SpectrumGrid& g) {
    if (g.gamma.empty()) throw InvalidParameter("cannot emit an empty spectrum");
    Table t(spectrum_header);
    for (std::size_t ip = 0; ip < g.n_pow(); ++ip)
        for (std::size_t id = 0; id < g.n_det(); ++id) {
            const cplx v = g.at(id, ip);
            t.add_row({to_hz(g.detunings[id]), g.powers[ip], v.real(), v.imag(), std::abs(v),
                       g.converged[g.flat(id, ip)] ? 1.0 : 0.0});
        }
    return t.str();
}

/// Rebuilds the grid; both axes are recovered in order of first appearance.
inline SpectrumGrid spectrum_from_string(const std::string& text, const std::string& origin = "<string>") {
    const auto rows = parse(text, spectrum_header, origin);
    if (rows.empty()) throw IoError(origin + ": no data rows");
    SpectrumGrid g;
    std::map<double, std::size_t> det_index, pow_index;
    for (const auto& r : rows) {
        if (det_index.emplace(r[0], g.detunings.size()).second) g.detunings.push_back(r[0] * constants::two_pi);
        if (pow_index.emplace(r[1], g.powers.size()).second) g.powers.push_back(r[1]);
    }
    if (g.n_det() * g.n_pow() != rows.size()) throw IoError(origin + ": rows do not form a full grid");
    g.resize();
    for (const auto& r : rows) {
        const std::size_t k = g.flat(det_index[r[0]], pow_index[r[1]]);
        g.gamma[k] = cplx(r[2], r[3]);
        g.converged[k] = r[5] != 0.0 ? 1 : 0;
    }
    g.method = "imported";
    return g;
}

inline void write_spectrum(const SpectrumGrid& g, const std::string& path) { write_file(path, spectrum_to_string(g)); }
inline SpectrumGrid read_spectrum(const std::string& path) { return spectrum_from_string(read_file(path), path); }

// Traces ---------------------------------------------------------------------------------------

inline std::string trace_to_string(const ReflectionTrace& tr) {
    tr.validate();
    Table t(trace_header);
    for (std::size_t i = 0; i < tr.omega.size(); ++i)
        t.add_row({to_hz(tr.omega[i]), tr.power_dbm, tr.gamma[i].real(), tr.gamma[i].imag(), std::abs(tr.gamma[i])});
    return t.str();
}

inline ReflectionTrace trace_from_string(const std::string& text, const std::string& origin = "<string>") {
    const auto rows = parse(text, trace_header, origin);
    ReflectionTrace tr;
    for (const auto& r : rows) {
        tr.omega.push_back(r[0] * constants::two_pi);
        tr.gamma.emplace_back(r[2], r[3]);
        tr.power_dbm = r[1];
    }
    tr.validate();
    return tr;
}

inline void write_trace(const ReflectionTrace& t, const std::string& path) { write_file(path, trace_to_string(t)); }
inline ReflectionTrace read_trace(const std::string& path) { return trace_from_string(read_file(path), path); }

// Flux curves ----------------------------------------------------------------------------------

inline std::string flux_to_string(const FluxCurve& c) {
    if (c.f.empty()) throw InvalidParameter("cannot emit an empty flux curve");
    Table t(flux_header);
    for (std::size_t i = 0; i < c.f.size(); ++i) t.add_row({c.f[i], to_hz(c.omega_r[i]), to_hz(c.kerr[i])});
    return t.str();
}

inline FluxCurve flux_from_string(const std::string& text, const std::string& origin = "<string>") {
    FluxCurve c;
    for (const auto& r : parse(text, flux_header, origin)) {
        c.f.push_back(r[0]);
        c.omega_r.push_back(r[1] * constants::two_pi);
        c.kerr.push_back(r[2] * constants::two_pi);
    }
    return c;
}

inline void write_flux(const FluxCurve& c, const std::string& path) { write_file(path, flux_to_string(c)); }
inline FluxCurve read_flux(const std::string& path) { return flux_from_string(read_file(path), path); }

} // namespace kerrspec::csv
