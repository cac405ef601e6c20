#pragma once

#include <bts/error.hpp>

#include <bit>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace bts {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

inline bool is_power_of_two(u64 x) { return x != 0 && (x & (x - 1)) == 0; }

inline unsigned log2_exact(u64 x)
{
    if (!is_power_of_two(x))
        throw Error(ErrorCode::InvalidArgument, "not a power of two: " + std::to_string(x));
    return static_cast<unsigned>(std::countr_zero(x));
}

inline u64 bit_reverse(u64 x, unsigned bits)
{
    u64 r = 0;
    for (unsigned i = 0; i < bits; ++i) {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    return r;
}

namespace detail {

inline u64 mulmod_slow(u64 a, u64 b, u64 m) { return static_cast<u64>((u128)a * b % m); }

inline u64 powmod_slow(u64 a, u64 e, u64 m)
{
    u64 r = 1 % m;
    a %= m;
    while (e) {
        if (e & 1)
            r = mulmod_slow(r, a, m);
        a = mulmod_slow(a, a, m);
        e >>= 1;
    }
    return r;
}

} // namespace detail

/// Deterministic Miller-Rabin; the first twelve primes as witnesses cover all of 2^64.
inline bool is_prime(u64 n)
{
    if (n < 2)
        return false;
    static constexpr u64 witnesses[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (u64 p : witnesses) {
        if (n % p == 0)
            return n == p;
    }
    u64 d = n - 1;
    unsigned s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (u64 a : witnesses) {
        u64 x = detail::powmod_slow(a, d, n);
        if (x == 1 || x == n - 1)
            continue;
        bool composite = true;
        for (unsigned r = 1; r < s; ++r) {
            x = detail::mulmod_slow(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite)
            return false;
    }
    return true;
}

/// Word-sized prime modulus with a Barrett constant and, when a ring degree is
/// attached, a primitive 2N-th root of unity.
class PrimeModulus {
public:
    PrimeModulus() = default;

    explicit PrimeModulus(u64 q) : q_(q)
    {
        if (q < 3 || q >= (u64(1) << 61) || !is_prime(q))
            throw Error(ErrorCode::InvalidArgument, "modulus must be an odd prime below 2^61: " + std::to_string(q));
        shift_ = static_cast<unsigned>(std::bit_width(q));
        barrett_ = static_cast<u64>((u128(1) << (2 * shift_)) / q);
    }

    PrimeModulus(u64 q, u64 degree_n) : PrimeModulus(q)
    {
        attach_degree(degree_n);
        root_ = find_root();
    }

    PrimeModulus(u64 q, u64 degree_n, u64 root) : PrimeModulus(q)
    {
        attach_degree(degree_n);
        if (root >= q || pow(root, degree_n) != q - 1)
            throw Error(ErrorCode::InvalidArgument, "root does not have order 2N");
        root_ = root;
    }

    u64 value() const { return q_; }
    u64 degree() const { return n_; }
    u64 root() const { return root_; }
    bool has_root() const { return root_ != 0; }
    u64 barrett_constant() const { return barrett_; }

    /// Barrett reduction of a double-width value z < q^2.
    u64 reduce(u128 z) const
    {
        u128 qhat = ((z >> (shift_ - 1)) * barrett_) >> (shift_ + 1);
        u64 r = static_cast<u64>(z - qhat * q_);
        if (r >= q_)
            r -= q_;
        if (r >= q_)
            r -= q_;
        return r;
    }

    u64 add(u64 a, u64 b) const
    {
        u64 s = a + b;
        return s >= q_ ? s - q_ : s;
    }
    u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + q_ - b; }
    u64 neg(u64 a) const { return a == 0 ? 0 : q_ - a; }
    u64 mul(u64 a, u64 b) const { return reduce((u128)a * b); }

    u64 pow(u64 a, u64 e) const
    {
        u64 r = 1;
        while (e) {
            if (e & 1)
                r = mul(r, a);
            a = mul(a, a);
            e >>= 1;
        }
        return r;
    }

    u64 inv(u64 a) const
    {
        if (a % q_ == 0)
            throw Error(ErrorCode::InvalidArgument, "zero has no inverse");
        return pow(a % q_, q_ - 2);
    }

    friend bool operator==(const PrimeModulus& x, const PrimeModulus& y)
    {
        return x.q_ == y.q_ && x.n_ == y.n_ && x.root_ == y.root_;
    }

private:
    void attach_degree(u64 n)
    {
        if (!is_power_of_two(n))
            throw Error(ErrorCode::InvalidArgument, "degree must be a power of two");
        if ((q_ - 1) % (2 * n) != 0)
            throw Error(ErrorCode::InvalidArgument,
                        std::to_string(q_) + " is not 1 mod 2N for N=" + std::to_string(n));
        n_ = n;
    }

    // Smallest generator candidate x whose ((q-1)/2N)-th power has order exactly 2N.
    u64 find_root() const
    {
        const u64 cofactor = (q_ - 1) / (2 * n_);
        for (u64 x = 2; x < q_; ++x) {
            u64 g = pow(x, cofactor);
            if (pow(g, n_) == q_ - 1)
                return g;
        }
        throw Error(ErrorCode::NotFound, "no primitive 2N-th root");
    }

    u64 q_ = 0;
    u64 n_ = 0;
    u64 root_ = 0;
    unsigned shift_ = 0;
    u64 barrett_ = 0;
};

inline u64 mod_add(u64 a, u64 b, const PrimeModulus& q) { return q.add(a, b); }
inline u64 mod_sub(u64 a, u64 b, const PrimeModulus& q) { return q.sub(a, b); }
inline u64 mod_mul(u64 a, u64 b, const PrimeModulus& q) { return q.mul(a, b); }
inline u64 mod_pow(u64 a, u64 e, const PrimeModulus& q) { return q.pow(a, e); }

/// Largest prime below 2^bit_length that is 1 mod 2N and not excluded.
inline PrimeModulus find_ntt_prime(int bit_length, u64 degree_n, const std::set<u64>& exclude = {})
{
    if (bit_length < 2 || bit_length > 61)
        throw Error(ErrorCode::InvalidArgument, "bit length out of range");
    if (!is_power_of_two(degree_n))
        throw Error(ErrorCode::InvalidArgument, "degree must be a power of two");
    const u64 step = 2 * degree_n;
    const u64 top = u64(1) << bit_length;
    const u64 floor = u64(1) << (bit_length - 1);
    if (top <= step)
        throw Error(ErrorCode::NotFound, "window too small for 2N");
    u64 c = ((top - 2) / step) * step + 1;
    for (; c > floor; c -= step) {
        if (!exclude.count(c) && is_prime(c))
            return PrimeModulus(c, degree_n);
        if (c < step)
            break;
    }
    throw Error(ErrorCode::NotFound,
                "no NTT prime of " + std::to_string(bit_length) + " bits for N=" + std::to_string(degree_n));
}

/// Powers of the 2N-th root in bit-reversed order, as consumed by the
/// in-place Cooley-Tukey forward and Gentleman-Sande inverse transforms.
class TwiddleTable {
public:
    TwiddleTable() = default;

    explicit TwiddleTable(const PrimeModulus& q) : modulus_(q)
    {
        if (!q.has_root())
            throw Error(ErrorCode::InvalidArgument, "modulus has no root attached");
        const u64 n = q.degree();
        const unsigned logn = log2_exact(n);
        const u64 psi = q.root();
        const u64 psi_inv = q.inv(psi);
        factors_.resize(n);
        inverse_.resize(n);
        u64 p = 1, pi = 1;
        std::vector<u64> pw(n), pwi(n);
        for (u64 i = 0; i < n; ++i) {
            pw[i] = p;
            pwi[i] = pi;
            p = q.mul(p, psi);
            pi = q.mul(pi, psi_inv);
        }
        for (u64 i = 0; i < n; ++i) {
            u64 r = bit_reverse(i, logn);
            factors_[i] = pw[r];
            inverse_[i] = pwi[r];
        }
        n_inverse_ = q.inv(n % q.value());
    }

    const PrimeModulus& modulus() const { return modulus_; }
    u64 degree() const { return modulus_.degree(); }
    const std::vector<u64>& factors() const { return factors_; }
    const std::vector<u64>& inverse_factors() const { return inverse_; }
    u64 n_inverse() const { return n_inverse_; }

    /// Test hook for negative controls: overwrite a single forward factor.
    void corrupt_factor(std::size_t i, u64 value) { factors_.at(i) = value; }

private:
    PrimeModulus modulus_;
    std::vector<u64> factors_;
    std::vector<u64> inverse_;
    u64 n_inverse_ = 0;
};

/// On-the-fly twiddling: xi^k = higher[k / m] * lower[k % m], with the upper
/// half of the exponent range folded through xi^N = -1.
class OtTables {
public:
    OtTables(const PrimeModulus& q, u64 m = 64) : modulus_(q), m_(m)
    {
        if (!q.has_root())
            throw Error(ErrorCode::InvalidArgument, "modulus has no root attached");
        if (!is_power_of_two(m) || m > q.degree())
            throw Error(ErrorCode::InvalidArgument, "digit split must be a power of two <= N");
        const u64 n = q.degree();
        const u64 xi = q.root();
        lower_.resize(m);
        u64 p = 1;
        for (u64 i = 0; i < m; ++i) {
            lower_[i] = p;
            p = q.mul(p, xi);
        }
        const u64 xm = p;
        higher_.resize(n / m);
        p = 1;
        for (u64 j = 0; j < n / m; ++j) {
            higher_[j] = p;
            p = q.mul(p, xm);
        }
    }

    u64 m() const { return m_; }
    const std::vector<u64>& higher() const { return higher_; }
    const std::vector<u64>& lower() const { return lower_; }
    std::size_t stored_entries() const { return higher_.size() + lower_.size(); }

    u64 compose(u64 k) const
    {
        const u64 n = modulus_.degree();
        if (k >= 2 * n)
            throw Error(ErrorCode::InvalidArgument, "exponent out of range");
        if (k >= n)
            return modulus_.neg(compose(k - n));
        return modulus_.mul(higher_[k / m_], lower_[k % m_]);
    }

private:
    PrimeModulus modulus_;
    u64 m_;
    std::vector<u64> higher_;
    std::vector<u64> lower_;
};

inline u64 ot_compose(const OtTables& t, u64 k) { return t.compose(k); }

} // namespace bts
