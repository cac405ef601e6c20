#pragma once

#include <bts/arith.hpp>
#include <bts/error.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace bts {

using Complex = std::complex<double>;

/// Canonical-embedding encoder over the 5^j-ordered roots of X^N + 1.
/// Slot j is m(zeta^(5^j)) with zeta = exp(i*pi/N); the packed real
/// coefficient vector stores real parts in [0, N/2) and imaginary parts in
/// [N/2, N).
class Encoder {
public:
    explicit Encoder(u64 n) : n_(n), m_(2 * n), rot_group_(n / 2), ksi_(2 * n + 1)
    {
        log2_exact(n);
        u64 g = 1;
        for (u64 j = 0; j < n / 2; ++j) {
            rot_group_[j] = g;
            g = (g * 5) % m_;
        }
        for (u64 j = 0; j <= m_; ++j) {
            double ang = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m_);
            ksi_[j] = {std::cos(ang), std::sin(ang)};
        }
    }

    u64 degree() const { return n_; }
    u64 slots() const { return n_ / 2; }

    /// Real coefficients (already rounded) encoding `values` at `scale`.
    std::vector<double> encode(const std::vector<Complex>& values, double scale) const
    {
        const u64 slots = n_ / 2;
        if (values.size() > slots)
            throw Error(ErrorCode::InvalidArgument, "more values than slots");
        std::vector<Complex> u(slots, Complex(0, 0));
        std::copy(values.begin(), values.end(), u.begin());
        special_inverse(u);
        std::vector<double> coeffs(n_, 0.0);
        for (u64 i = 0; i < slots; ++i) {
            coeffs[i] = std::round(u[i].real() * scale);
            coeffs[i + slots] = std::round(u[i].imag() * scale);
        }
        return coeffs;
    }

    /// Slots of the real polynomial with the given (centered) coefficients.
    std::vector<Complex> decode(const std::vector<double>& coeffs, double scale) const
    {
        const u64 slots = n_ / 2;
        std::vector<Complex> u(slots);
        for (u64 i = 0; i < slots; ++i)
            u[i] = {coeffs[i] / scale, coeffs[i + slots] / scale};
        special_forward(u);
        return u;
    }

private:
    static void bit_reverse_array(std::vector<Complex>& v)
    {
        const u64 n = v.size();
        for (u64 i = 1, j = 0; i < n; ++i) {
            u64 bit = n >> 1;
            for (; j & bit; bit >>= 1)
                j ^= bit;
            j ^= bit;
            if (i < j)
                std::swap(v[i], v[j]);
        }
    }

    void special_forward(std::vector<Complex>& v) const
    {
        const u64 size = v.size();
        bit_reverse_array(v);
        for (u64 len = 2; len <= size; len <<= 1) {
            for (u64 i = 0; i < size; i += len) {
                const u64 lenh = len >> 1, lenq = len << 2, gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    const u64 idx = (rot_group_[j] % lenq) * gap;
                    Complex a = v[i + j];
                    Complex b = v[i + j + lenh] * ksi_[idx];
                    v[i + j] = a + b;
                    v[i + j + lenh] = a - b;
                }
            }
        }
    }

    void special_inverse(std::vector<Complex>& v) const
    {
        const u64 size = v.size();
        for (u64 len = size; len >= 1; len >>= 1) {
            for (u64 i = 0; i < size; i += len) {
                const u64 lenh = len >> 1, lenq = len << 2, gap = m_ / lenq;
                for (u64 j = 0; j < lenh; ++j) {
                    const u64 idx = (lenq - (rot_group_[j] % lenq)) * gap;
                    Complex a = v[i + j] + v[i + j + lenh];
                    Complex b = (v[i + j] - v[i + j + lenh]) * ksi_[idx];
                    v[i + j] = a;
                    v[i + j + lenh] = b;
                }
            }
        }
        bit_reverse_array(v);
        for (auto& x : v)
            x /= static_cast<double>(size);
    }

    u64 n_;
    u64 m_;
    std::vector<u64> rot_group_;
    std::vector<Complex> ksi_;
};

} // namespace bts
