#include <bts/arith.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bts;

TEST(ModArith, SmallCases)
{
    PrimeModulus q7(7);
    EXPECT_EQ(mod_add(3, 5, q7), 1u);
    EXPECT_EQ(mod_mul(3, 5, q7), 1u);
    EXPECT_EQ(mod_add(4, 0, q7), 4u);
    EXPECT_EQ(mod_mul(6, 1, q7), 6u);
    EXPECT_EQ(mod_sub(2, 5, q7), 4u);
    EXPECT_EQ(mod_pow(2, 8, PrimeModulus(17)), 1u);
    EXPECT_EQ(mod_pow(2, 4, PrimeModulus(17)), 16u);
    EXPECT_EQ(mod_pow(5, 0, q7), 1u);
}

TEST(ModArith, FermatOnRandomResidues)
{
    PrimeModulus q = find_ntt_prime(60, 1 << 12);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        u64 a = rng() % (q.value() - 1) + 1;
        EXPECT_EQ(mod_pow(a, q.value() - 1, q), 1u);
        EXPECT_EQ(q.mul(a, q.inv(a)), 1u);
    }
}

TEST(ModArith, ExhaustiveBarrettFor12289)
{
    PrimeModulus q(12289);
    u64 mismatches = 0;
    for (u64 a = 0; a < 12289; ++a)
        for (u64 b = 0; b < 12289; ++b)
            mismatches += q.mul(a, b) != (a * b) % 12289;
    EXPECT_EQ(mismatches, 0u);
}

TEST(ModArith, RandomBarrettAgainstWideDivision)
{
    std::mt19937_64 rng(2024);
    const std::vector<u64> primes = {find_ntt_prime(40, 1 << 10).value(), find_ntt_prime(50, 1 << 17).value(),
                                     find_ntt_prime(60, 1 << 17).value(), find_ntt_prime(61, 1 << 4).value()};
    u64 mismatches = 0, total = 0;
    for (u64 p : primes) {
        PrimeModulus q(p);
        for (int i = 0; i < 300000; ++i) {
            u64 a = rng() % p, b = rng() % p;
            mismatches += q.mul(a, b) != oracle::mulmod(a, b, p);
            mismatches += q.add(a, b) != static_cast<u64>((static_cast<unsigned __int128>(a) + b) % p);
            ++total;
        }
        // Edge operands.
        for (u64 a : {u64(0), u64(1), p - 1, p / 2})
            for (u64 b : {u64(0), u64(1), p - 1, p / 2})
                mismatches += q.mul(a, b) != oracle::mulmod(a, b, p);
    }
    EXPECT_GE(total, 1000000u);
    EXPECT_EQ(mismatches, 0u);
}

TEST(ModArith, RejectsBadModuli)
{
    EXPECT_THROW(PrimeModulus(15), Error);
    EXPECT_THROW(PrimeModulus(2), Error);
    EXPECT_THROW(PrimeModulus(17, 16), Error); // 17 is not 1 mod 32
    EXPECT_THROW(PrimeModulus(17, 8, 3 * 3), Error);
}

TEST(PrimeSearch, KnownSmallPrime)
{
    PrimeModulus q = find_ntt_prime(14, 2048);
    EXPECT_EQ(q.value(), 12289u);
    EXPECT_EQ((q.value() - 1) % 4096, 0u);
    EXPECT_EQ(q.pow(q.root(), 2048), 12288u);
    EXPECT_EQ(q.pow(q.root(), 4096), 1u);
}

TEST(PrimeSearch, OutputsAreNttFriendlyPrimes)
{
    for (int bits : {40, 45, 50, 55, 60}) {
        for (u64 n : {u64(1) << 10, u64(1) << 12, u64(1) << 17}) {
            PrimeModulus q = find_ntt_prime(bits, n);
            EXPECT_TRUE(is_prime(q.value()));
            EXPECT_EQ(q.value() % (2 * n), 1u);
            EXPECT_LT(q.value(), u64(1) << bits);
            EXPECT_GT(q.value(), u64(1) << (bits - 1));
            EXPECT_EQ(q.pow(q.root(), n), q.value() - 1);
            EXPECT_TRUE(oracle::powmod(q.root(), 2 * n, q.value()) == 1);
        }
    }
}

TEST(PrimeSearch, ExclusionPicksNextCandidate)
{
    PrimeModulus a = find_ntt_prime(50, 1 << 12);
    PrimeModulus b = find_ntt_prime(50, 1 << 12, {a.value()});
    EXPECT_LT(b.value(), a.value());
    EXPECT_EQ(b.value() % (1 << 13), 1u);
}

TEST(PrimeSearch, EmptyWindowIsNotFound)
{
    try {
        find_ntt_prime(12, 2048);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
}

TEST(PrimeSearch, MillerRabinAgreesWithTrialDivision)
{
    auto slow = [](u64 n) {
        if (n < 2)
            return false;
        for (u64 d = 2; d * d <= n; ++d)
            if (n % d == 0)
                return false;
        return true;
    };
    for (u64 n = 0; n < 20000; ++n)
        ASSERT_EQ(is_prime(n), slow(n)) << n;
    EXPECT_FALSE(is_prime(3215031751ULL)); // strong pseudoprime to bases 2, 3, 5, 7
    EXPECT_TRUE(is_prime((u64(1) << 61) - 1));
}

TEST(Twiddles, TableInvariants)
{
    PrimeModulus q = find_ntt_prime(50, 1 << 10);
    TwiddleTable t(q);
    EXPECT_EQ(t.factors()[0], 1u);
    for (u64 i = 0; i < t.degree(); ++i) {
        EXPECT_EQ(q.mul(t.factors()[i], t.inverse_factors()[i]), 1u);
        EXPECT_EQ(t.factors()[i], q.pow(q.root(), bit_reverse(i, 10)));
    }
    EXPECT_EQ(q.mul(t.n_inverse(), 1024), 1u);
}

TEST(Twiddles, OnTheFlyCompositionExhaustive)
{
    for (unsigned logn : {4u, 8u, 12u}) {
        const u64 n = u64(1) << logn;
        PrimeModulus q = find_ntt_prime(45, n);
        const u64 m = std::min<u64>(64, n);
        OtTables ot(q, m);
        EXPECT_EQ(ot.stored_entries(), n / m + m);
        EXPECT_EQ(ot.compose(0), 1u);
        if (m < n) {
            EXPECT_EQ(ot.compose(m), ot.higher()[1]);
        }
        u64 direct = 1, bad = 0;
        for (u64 k = 0; k < 2 * n; ++k) {
            bad += ot_compose(ot, k) != direct;
            direct = q.mul(direct, q.root());
        }
        EXPECT_EQ(bad, 0u) << "N=" << n;
    }
}
