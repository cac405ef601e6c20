#pragma once

// Machine description for the simulator. The text format is one
// `key = value` per line in SI units (Hz, bytes, bytes/s, watts); `#` starts
// a comment and unknown keys are rejected.

#include <bts/error.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace bts {

struct HardwareConfig {
    int rows = 32;
    int cols = 64;

    double freq_nttu = 1.2e9; // also the simulator clock
    double freq_mmau = 1.2e9;
    double freq_bconv_modmult = 0.3e9;
    double freq_modmult = 0.6e9;
    double freq_modadd = 0.6e9;

    double scratchpad_bytes = 512.0 * 1024 * 1024;
    double scratchpad_bw = 38.4e12;
    double rf_bytes = 22e6;
    double rf_bw = 292e12;

    int hbm_stacks = 2;
    int hbm_pseudo_channels = 32;
    double hbm_bw = 1e12;
    double hbm_efficiency = 1.0;

    int noc_port_bits = 12;
    double noc_freq = 1.2e9;
    double noc_bisection_bw = 3.6e12;

    int l_sub = 4;
    /// Bytes of evaluation key that may sit in the scratchpad ahead of use.
    double evk_prefetch_bytes = 64.0 * 1024 * 1024;

    // Peak power. Per-PE components in watts per PE, chip components in watts.
    double pw_scratchpad = 9.86e-3;
    double pw_rf = 2.29e-3;
    double pw_nttu = 12.17e-3;
    double pw_bconv_modmult = 0.56e-3;
    double pw_mmau = 8.42e-3;
    double pw_exchange = 1.03e-3;
    double pw_modmult = 1.35e-3;
    double pw_modadd = 0.08e-3;
    double pw_noc = 45.93;
    double pw_global_bru = 0.10;
    double pw_local_bru = 0.04;
    double pw_hbm_noc = 6.81;
    double pw_hbm = 31.76;
    double pw_pcie = 5.37;

    int n_pe() const { return rows * cols; }
    double scratchpad_per_pe() const { return scratchpad_bytes / n_pe(); }
    double clock() const { return freq_nttu; }

    /// Sum of every component at full activity, PCIe included.
    double peak_power() const
    {
        const double pe = pw_scratchpad + pw_rf + pw_nttu + pw_bconv_modmult + pw_mmau + pw_exchange + pw_modmult +
                          pw_modadd;
        return pe * n_pe() + pw_noc + pw_global_bru + pw_local_bru + pw_hbm_noc + pw_hbm + pw_pcie;
    }

    void validate() const
    {
        if (rows <= 0 || cols <= 0 || hbm_stacks <= 0 || hbm_pseudo_channels <= 0 || noc_port_bits <= 0 || l_sub <= 0)
            throw Error(ErrorCode::ParseError, "integer hardware fields must be positive");
        for (double v : {freq_nttu, freq_mmau, freq_bconv_modmult, freq_modmult, freq_modadd, scratchpad_bytes,
                         scratchpad_bw, rf_bytes, rf_bw, hbm_bw, hbm_efficiency, noc_freq, noc_bisection_bw,
                         evk_prefetch_bytes})
            if (!(v > 0) || !std::isfinite(v))
                throw Error(ErrorCode::ParseError, "bandwidth, frequency and capacity fields must be positive");
        for (double v : {pw_scratchpad, pw_rf, pw_nttu, pw_bconv_modmult, pw_mmau, pw_exchange, pw_modmult, pw_modadd,
                         pw_noc, pw_global_bru, pw_local_bru, pw_hbm_noc, pw_hbm, pw_pcie})
            if (!(v >= 0) || !std::isfinite(v))
                throw Error(ErrorCode::ParseError, "power fields must be nonnegative");
    }
};

namespace detail {

using HwField = std::variant<int HardwareConfig::*, double HardwareConfig::*>;

inline const std::vector<std::pair<std::string, HwField>>& hw_fields()
{
    static const std::vector<std::pair<std::string, HwField>> fields = {
        {"rows", &HardwareConfig::rows},
        {"cols", &HardwareConfig::cols},
        {"freq_nttu", &HardwareConfig::freq_nttu},
        {"freq_mmau", &HardwareConfig::freq_mmau},
        {"freq_bconv_modmult", &HardwareConfig::freq_bconv_modmult},
        {"freq_modmult", &HardwareConfig::freq_modmult},
        {"freq_modadd", &HardwareConfig::freq_modadd},
        {"scratchpad_bytes", &HardwareConfig::scratchpad_bytes},
        {"scratchpad_bw", &HardwareConfig::scratchpad_bw},
        {"rf_bytes", &HardwareConfig::rf_bytes},
        {"rf_bw", &HardwareConfig::rf_bw},
        {"hbm_stacks", &HardwareConfig::hbm_stacks},
        {"hbm_pseudo_channels", &HardwareConfig::hbm_pseudo_channels},
        {"hbm_bw", &HardwareConfig::hbm_bw},
        {"hbm_efficiency", &HardwareConfig::hbm_efficiency},
        {"noc_port_bits", &HardwareConfig::noc_port_bits},
        {"noc_freq", &HardwareConfig::noc_freq},
        {"noc_bisection_bw", &HardwareConfig::noc_bisection_bw},
        {"l_sub", &HardwareConfig::l_sub},
        {"evk_prefetch_bytes", &HardwareConfig::evk_prefetch_bytes},
        {"pw_scratchpad", &HardwareConfig::pw_scratchpad},
        {"pw_rf", &HardwareConfig::pw_rf},
        {"pw_nttu", &HardwareConfig::pw_nttu},
        {"pw_bconv_modmult", &HardwareConfig::pw_bconv_modmult},
        {"pw_mmau", &HardwareConfig::pw_mmau},
        {"pw_exchange", &HardwareConfig::pw_exchange},
        {"pw_modmult", &HardwareConfig::pw_modmult},
        {"pw_modadd", &HardwareConfig::pw_modadd},
        {"pw_noc", &HardwareConfig::pw_noc},
        {"pw_global_bru", &HardwareConfig::pw_global_bru},
        {"pw_local_bru", &HardwareConfig::pw_local_bru},
        {"pw_hbm_noc", &HardwareConfig::pw_hbm_noc},
        {"pw_hbm", &HardwareConfig::pw_hbm},
        {"pw_pcie", &HardwareConfig::pw_pcie},
    };
    return fields;
}

} // namespace detail

/// Keys not present keep their defaults.
inline HardwareConfig parse_hardware_config(const std::string& text)
{
    HardwareConfig c;
    std::map<std::string, const detail::HwField*> index;
    for (const auto& [k, f] : detail::hw_fields())
        index[k] = &f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            continue;
        const auto eq = line.find('=');
        auto where = [&] { return "hardware config line " + std::to_string(lineno) + ": "; };
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, where() + "expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto it = index.find(key);
        if (it == index.end())
            throw Error(ErrorCode::ParseError, where() + "unknown key '" + key + "'");
        double v = 0;
        try {
            std::size_t used = 0;
            v = std::stod(val, &used);
            if (used != val.size())
                throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ParseError, where() + "bad number '" + val + "'");
        }
        if (auto ip = std::get_if<int HardwareConfig::*>(it->second)) {
            if (v != std::floor(v) || std::abs(v) > 1e9)
                throw Error(ErrorCode::ParseError, where() + key + " must be an integer");
            c.*(*ip) = static_cast<int>(v);
        } else {
            c.*std::get<double HardwareConfig::*>(*it->second) = v;
        }
    }
    c.validate();
    return c;
}

inline std::string print_hardware_config(const HardwareConfig& c)
{
    // Shortest of 15 or 17 significant digits that reads back exactly.
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.15g", v);
        if (std::strtod(buf, nullptr) != v)
            std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream out;
    for (const auto& [k, f] : detail::hw_fields())
        std::visit([&, key = k](auto member) { out << key << " = " << num(static_cast<double>(c.*member)) << "\n"; },
                   f);
    return out.str();
}

inline HardwareConfig load_hardware_config(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ParseError, "cannot open hardware config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_hardware_config(ss.str());
}

} // namespace bts
