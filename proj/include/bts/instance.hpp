#pragma once

#include <bts/arith.hpp>
#include <bts/error.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace bts {

/// A CKKS parameter tuple. Prime sizes are per prime: q0 is the base prime,
/// q1..qL the rescaling primes and p0..p(k-1) the special primes.
struct CkksInstance {
    std::string name;
    u64 n = 0;
    int L = 0;
    int dnum = 1;
    int log_q0_bits = 60;
    int log_q_bits = 50;
    int log_p_bits = 60;
    double lambda = 0.0; // 0 means "not pinned"; callers interpolate
    int l_boot = 19;

    int k() const { return (L + 1) / dnum; }
    int limbs_at(int level) const { return level + 1; }
    int log_pq() const { return log_q0_bits + L * log_q_bits + k() * log_p_bits; }
    unsigned log_n() const { return log2_exact(n); }

    /// Structural checks every instance must pass.
    void validate() const
    {
        if (!is_power_of_two(n) || n < 4)
            throw Error(ErrorCode::InvalidInstance, "N must be a power of two >= 4");
        if (L < 0 || dnum < 1)
            throw Error(ErrorCode::InvalidInstance, "L must be >= 0 and dnum >= 1");
        if ((L + 1) % dnum != 0)
            throw Error(ErrorCode::InvalidInstance,
                        "L+1=" + std::to_string(L + 1) + " not divisible by dnum=" + std::to_string(dnum));
    }

    /// Checks that only make sense for bootstrappable, secure parameter sets.
    /// Toy test instances skip these on purpose.
    void validate_deployable() const
    {
        validate();
        if (L <= l_boot)
            throw Error(ErrorCode::InvalidInstance, "L must exceed L_boot");
        if (log_pq() > 500 && n < (u64(1) << 14))
            throw Error(ErrorCode::InvalidInstance, "log PQ > 500 needs N >= 2^14");
    }
};

inline CkksInstance make_instance(std::string name, u64 n, int L, int dnum, double lambda = 0.0)
{
    CkksInstance c;
    c.name = std::move(name);
    c.n = n;
    c.L = L;
    c.dnum = dnum;
    c.lambda = lambda;
    c.validate();
    return c;
}

/// Small instance for functional tests: 40-bit rescaling primes so a 2^40
/// scale survives rescaling, 60-bit base and special primes.
inline CkksInstance toy_instance(unsigned log_n = 12, int L = 4, int dnum = 1)
{
    CkksInstance c;
    c.name = "toy";
    c.n = u64(1) << log_n;
    c.L = L;
    c.dnum = dnum;
    c.log_q0_bits = 60;
    c.log_q_bits = 40;
    c.log_p_bits = 60;
    c.l_boot = 0;
    c.validate();
    return c;
}

inline CkksInstance ins1() { return make_instance("INS-1", u64(1) << 17, 27, 1, 133.4); }
inline CkksInstance ins2() { return make_instance("INS-2", u64(1) << 17, 39, 2, 128.7); }
inline CkksInstance ins3() { return make_instance("INS-3", u64(1) << 17, 44, 3, 130.8); }

inline std::vector<CkksInstance> builtin_instances() { return {ins1(), ins2(), ins3()}; }

/// `key = value` instance description. Keys: name, n, L, dnum, log_q0_bits,
/// log_q_bits, log_p_bits, lambda, l_boot; n, L and dnum are required.
inline CkksInstance parse_instance(const std::string& text)
{
    CkksInstance c;
    c.name = "custom";
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, "instance line " + std::to_string(lineno) + ": expected key = value");
        std::istringstream ks(line.substr(0, eq)), vs(line.substr(eq + 1));
        std::string k, v, extra;
        ks >> k;
        vs >> v;
        if (k.empty() || v.empty() || (vs >> extra))
            throw Error(ErrorCode::ParseError, "instance line " + std::to_string(lineno) + ": expected key = value");
        kv[k] = v;
    }
    auto num = [&](const std::string& key, auto& field) {
        auto it = kv.find(key);
        if (it == kv.end())
            return false;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size())
                throw std::invalid_argument(key);
            using T = std::remove_reference_t<decltype(field)>;
            if constexpr (std::is_integral_v<T>) {
                if (v != static_cast<double>(static_cast<long long>(v)) || v < 0)
                    throw std::invalid_argument(key);
            }
            field = static_cast<std::remove_reference_t<decltype(field)>>(v);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::ParseError, "instance key " + key + ": bad number '" + it->second + "'");
        }
        kv.erase(it);
        return true;
    };
    if (auto it = kv.find("name"); it != kv.end()) {
        c.name = it->second;
        kv.erase(it);
    }
    if (!num("n", c.n) || !num("L", c.L) || !num("dnum", c.dnum))
        throw Error(ErrorCode::ParseError, "instance needs n, L and dnum");
    num("log_q0_bits", c.log_q0_bits);
    num("log_q_bits", c.log_q_bits);
    num("log_p_bits", c.log_p_bits);
    num("lambda", c.lambda);
    num("l_boot", c.l_boot);
    if (!kv.empty())
        throw Error(ErrorCode::ParseError, "unknown instance key '" + kv.begin()->first + "'");
    c.validate();
    return c;
}

inline CkksInstance load_instance(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ParseError, "cannot open instance file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_instance(ss.str());
}

} // namespace bts
