#pragma once

// Independent reference implementations used only by the tests. They favour
// obviousness over speed: wide-integer division, schoolbook products,
// direct root evaluation and big-integer CRT.

#include <bts/arith.hpp>
#include <bts/rns.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using bts::u64;
using BigInt = boost::multiprecision::cpp_int;

inline u64 mulmod(u64 a, u64 b, u64 q)
{
    return static_cast<u64>(static_cast<unsigned __int128>(a) * b % q);
}

inline u64 powmod(u64 a, u64 e, u64 q)
{
    u64 r = 1 % q;
    while (e) {
        if (e & 1)
            r = mulmod(r, a, q);
        a = mulmod(a, a, q);
        e >>= 1;
    }
    return r;
}

/// c = a * b mod (X^N + 1, q), quadratic time.
inline std::vector<u64> negacyclic_convolution(const std::vector<u64>& a, const std::vector<u64>& b, u64 q)
{
    const std::size_t n = a.size();
    std::vector<u64> c(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const u64 p = mulmod(a[i], b[j], q);
            const std::size_t k = i + j;
            if (k < n)
                c[k] = (c[k] + p) % q;
            else
                c[k - n] = (c[k - n] + q - p) % q;
        }
    }
    return c;
}

/// Slot j = m(zeta^(5^j)), zeta = exp(i*pi/N), by direct evaluation.
inline std::vector<std::complex<long double>> slots_of(const std::vector<double>& coeffs, double scale)
{
    const std::size_t n = coeffs.size();
    const std::size_t m = 2 * n;
    std::vector<std::complex<long double>> out(n / 2);
    u64 g = 1;
    for (std::size_t j = 0; j < n / 2; ++j) {
        std::complex<long double> acc = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const u64 e = (static_cast<u64>(k) * g) % m;
            const long double ang = 2.0L * std::numbers::pi_v<long double> * e / m;
            acc += static_cast<long double>(coeffs[k]) * std::complex<long double>(std::cos(ang), std::sin(ang));
        }
        out[j] = acc / static_cast<long double>(scale);
        g = (g * 5) % m;
    }
    return out;
}

inline BigInt product(const std::vector<u64>& moduli)
{
    BigInt p = 1;
    for (u64 q : moduli)
        p *= q;
    return p;
}

/// The integer in [0, Q) with the given residues.
inline BigInt crt(const std::vector<u64>& residues, const std::vector<u64>& moduli)
{
    const BigInt Q = product(moduli);
    BigInt x = 0;
    for (std::size_t i = 0; i < moduli.size(); ++i) {
        const BigInt hat = Q / moduli[i];
        const u64 hm = static_cast<u64>(hat % moduli[i]);
        const u64 inv = powmod(hm, moduli[i] - 2, moduli[i]);
        x += hat * mulmod(residues[i], inv, moduli[i]);
    }
    return x % Q;
}

} // namespace oracle
