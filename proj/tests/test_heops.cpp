#include <bts/heops.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bts;

namespace {

std::vector<Complex> random_values(std::mt19937_64& rng, std::size_t count, double range = 1.0)
{
    std::uniform_real_distribution<double> d(-range, range);
    std::vector<Complex> v(count);
    for (auto& x : v)
        x = Complex(d(rng), d(rng));
    return v;
}

double max_error(const std::vector<Complex>& got, const std::vector<Complex>& want)
{
    double e = 0;
    for (std::size_t i = 0; i < want.size(); ++i)
        e = std::max(e, std::abs(got[i] - want[i]));
    return e;
}

RnsPolynomial constant_residues(const std::vector<u64>& residues, const std::vector<PrimeModulus>& moduli)
{
    RnsPolynomial p(4, moduli, Domain::Coefficient);
    for (std::size_t i = 0; i < moduli.size(); ++i)
        for (auto& v : p.limb(i))
            v = residues[i];
    return p;
}

std::vector<u64> values_of(const std::vector<PrimeModulus>& m)
{
    std::vector<u64> v;
    for (const auto& q : m)
        v.push_back(q.value());
    return v;
}

} // namespace

// ---------------------------------------------------------------------------
// Encoding

TEST(Encoding, SlotsMatchDirectEvaluation)
{
    std::mt19937_64 rng(1);
    for (u64 n : {u64(16), u64(64), u64(256)}) {
        Encoder enc(n);
        auto values = random_values(rng, n / 2);
        const double scale = std::ldexp(1.0, 30);
        auto coeffs = enc.encode(values, scale);
        auto slots = oracle::slots_of(coeffs, scale);
        for (std::size_t j = 0; j < values.size(); ++j) {
            EXPECT_NEAR(static_cast<double>(slots[j].real()), values[j].real(), 1e-6);
            EXPECT_NEAR(static_cast<double>(slots[j].imag()), values[j].imag(), 1e-6);
        }
        auto back = enc.decode(coeffs, scale);
        EXPECT_LT(max_error(back, values), 1e-6);
    }
}

TEST(Encoding, RoundTripThroughRnsAndAdditivity)
{
    CkksContext ctx(toy_instance(10, 2, 1));
    std::mt19937_64 rng(2);
    auto x = random_values(rng, 512);
    auto y = random_values(rng, 512);
    Plaintext px = encode(ctx, x), py = encode(ctx, y);
    EXPECT_LT(max_error(decode(ctx, px), x), std::ldexp(1.0, -20));
    Plaintext sum{detail::add(px.m, py.m), px.level, px.scale};
    std::vector<Complex> want(512);
    for (std::size_t i = 0; i < 512; ++i)
        want[i] = x[i] + y[i];
    EXPECT_LT(max_error(decode(ctx, sum), want), std::ldexp(1.0, -20));
}

TEST(Encoding, OverflowIsRejected)
{
    CkksContext ctx(toy_instance(10, 0, 1));
    try {
        encode(ctx, std::vector<Complex>(512, Complex(1.0, 0)), std::ldexp(1.0, 62), 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ScaleOverflow);
    }
}

// ---------------------------------------------------------------------------
// Encryption

TEST(Encryption, RoundTripAndNoiseDistribution)
{
    CkksContext ctx(toy_instance(12, 3, 1));
    KeySet keys = keygen(ctx, 7);
    std::mt19937_64 rng(3);
    auto values = random_values(rng, 2048);
    Plaintext pt = encode(ctx, values);

    Ciphertext pk_ct = encrypt(ctx, pt, keys.pk, 9);
    EXPECT_LT(max_error(decode(ctx, decrypt(ctx, pk_ct, keys.sk)), values), std::ldexp(1.0, -20));

    // With the symmetric encryption the residual is exactly the Gaussian e.
    Ciphertext sk_ct = encrypt(ctx, pt, keys.sk, 10);
    auto got = centered_lift(ctx, decrypt(ctx, sk_ct, keys.sk).m);
    auto ref = centered_lift(ctx, pt.m);
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double e = got[i] - ref[i];
        sum += e;
        sq += e * e;
    }
    const double n = static_cast<double>(got.size());
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.3);
    EXPECT_NEAR(sd, 3.2, 0.3);
}

TEST(Encryption, DeterministicInSeed)
{
    CkksContext ctx(toy_instance(10, 1, 1));
    KeySet a = keygen(ctx, 5), b = keygen(ctx, 5);
    EXPECT_EQ(a.sk, b.sk);
    Plaintext pt = encode(ctx, {Complex(0.25, 0)});
    EXPECT_EQ(encrypt(ctx, pt, a.pk, 1), encrypt(ctx, pt, b.pk, 1));
}

// ---------------------------------------------------------------------------
// Base conversion

TEST(Bconv, HandWorkedExamples)
{
    {
        std::vector<PrimeModulus> s = {PrimeModulus(3), PrimeModulus(5)}, t = {PrimeModulus(7)};
        auto out = bconv(constant_residues({1, 2}, s), make_bconv_table(s, t));
        EXPECT_EQ(out.limb(0)[0], 1u); // 7 + 15 = 22 = 1 mod 7
    }
    {
        std::vector<PrimeModulus> s = {PrimeModulus(5)}, t = {PrimeModulus(7)};
        auto out = bconv(constant_residues({3}, s), make_bconv_table(s, t));
        EXPECT_EQ(out.limb(0)[0], 3u);
    }
}

TEST(Bconv, AgreesWithBigIntegerOracle)
{
    std::mt19937_64 rng(4);
    std::set<u64> used;
    std::vector<PrimeModulus> s, t;
    for (int i = 0; i < 6; ++i) {
        s.push_back(find_ntt_prime(50, 16, used));
        used.insert(s.back().value());
    }
    for (int i = 0; i < 3; ++i) {
        t.push_back(find_ntt_prime(60, 16, used));
        used.insert(t.back().value());
    }
    const auto sv = values_of(s), tv = values_of(t);
    const oracle::BigInt Q = oracle::product(sv);
    BconvTable table = make_bconv_table(s, t);
    RnsPolynomial in(16, s, Domain::Coefficient);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (auto& v : in.limb(i))
            v = rng() % sv[i];
    RnsPolynomial out = bconv(in, table);
    for (u64 c = 0; c < 16; ++c) {
        std::vector<u64> res;
        for (std::size_t i = 0; i < s.size(); ++i)
            res.push_back(in.limb(i)[c]);
        const oracle::BigInt x = oracle::crt(res, sv);
        for (std::size_t i = 0; i < t.size(); ++i) {
            // The result is x + e*Q reduced mod t_i for a small e in [0, |S|).
            bool found = false;
            for (std::size_t e = 0; e < s.size() && !found; ++e)
                found = static_cast<u64>((x + e * Q) % tv[i]) == out.limb(i)[c];
            EXPECT_TRUE(found) << "coefficient " << c << " target " << i;
        }
    }
    for (std::size_t l_sub : {1u, 2u, 4u, 6u})
        EXPECT_EQ(bconv_partial(in, table, l_sub), out) << "l_sub=" << l_sub;
}

TEST(Bconv, StreamingGroupRules)
{
    std::vector<PrimeModulus> s = {PrimeModulus(3), PrimeModulus(5), PrimeModulus(11)}, t = {PrimeModulus(7)};
    BconvTable table = make_bconv_table(s, t);
    RnsPolynomial in = constant_residues({1, 2, 4}, s);
    {
        BconvAccumulator acc(table, 4, 2);
        acc.feed(in.select({0, 1}));
        EXPECT_THROW(acc.finish(), Error);
        acc.feed(in.select({2}));
        EXPECT_EQ(acc.finish(), bconv(in, table));
    }
    {
        BconvAccumulator acc(table, 4, 2);
        acc.feed(in.select({0}));
        try {
            acc.feed(in.select({1, 2}));
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::IncompleteGroup);
        }
    }
    RnsPolynomial ntt_in = in;
    ntt_in.set_domain(Domain::Ntt);
    try {
        bconv(ntt_in, table);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainError);
    }
}

// ---------------------------------------------------------------------------
// Fused subtract-scale-add

TEST(Ssa, MatchesUnfusedComputation)
{
    CkksContext ctx(toy_instance(10, 3, 2));
    Sampler smp(12);
    const auto moduli = ctx.level_moduli(3);
    auto a = smp.uniform(1024, moduli, Domain::Ntt);
    auto b = smp.uniform(1024, moduli, Domain::Ntt);
    auto c = smp.uniform(1024, moduli, Domain::Ntt);
    auto fused = ssa(ctx, a, b, c);
    for (std::size_t i = 0; i < moduli.size(); ++i) {
        const auto& q = moduli[i];
        const u64 pinv = ctx.key_switch().p_inv(static_cast<int>(i));
        for (u64 k = 0; k < 1024; ++k)
            ASSERT_EQ(fused.limb(i)[k], q.add(q.mul(q.sub(a.limb(i)[k], b.limb(i)[k]), pinv), c.limb(i)[k]));
    }
}

// ---------------------------------------------------------------------------
// Homomorphic operations

class HeOps : public ::testing::TestWithParam<int> {};

TEST_P(HeOps, MultiplyRotateRescale)
{
    const int dnum = GetParam();
    CkksContext ctx(toy_instance(12, 4, dnum));
    KeySet keys = keygen(ctx, 21, {1, 3});
    std::mt19937_64 rng(22);
    const std::size_t slots = 2048;
    auto x = random_values(rng, slots), y = random_values(rng, slots);
    Ciphertext cx = encrypt(ctx, encode(ctx, x), keys.pk, 1);
    Ciphertext cy = encrypt(ctx, encode(ctx, y), keys.pk, 2);
    const double tol = std::ldexp(1.0, -15);

    Ciphertext prod = hmult(ctx, cx, cy, keys);
    EXPECT_EQ(prod.level, 4);
    EXPECT_DOUBLE_EQ(prod.scale, cx.scale * cy.scale);
    Ciphertext r = hrescale(ctx, prod);
    EXPECT_EQ(r.level, 3);
    EXPECT_EQ(r.b.limb_count(), 4u);
    std::vector<Complex> want(slots);
    for (std::size_t i = 0; i < slots; ++i)
        want[i] = x[i] * y[i];
    EXPECT_LT(max_error(decode(ctx, decrypt(ctx, r, keys.sk)), want), tol);

    for (long long k : {1LL, 3LL}) {
        Ciphertext rot = hrot(ctx, cx, k, keys);
        std::vector<Complex> shifted(slots);
        for (std::size_t i = 0; i < slots; ++i)
            shifted[i] = x[(i + k) % slots];
        EXPECT_LT(max_error(decode(ctx, decrypt(ctx, rot, keys.sk)), shifted), tol) << "r=" << k;
    }

    // A second multiplication at a lower level exercises truncated slices.
    Ciphertext cx3 = hrescale(ctx, cmult(ctx, cx, Complex(1, 0), cx.scale));
    Ciphertext sq = hrescale(ctx, hmult(ctx, r, cx3, keys));
    EXPECT_EQ(sq.level, 2);
    std::vector<Complex> want2(slots);
    for (std::size_t i = 0; i < slots; ++i)
        want2[i] = want[i] * x[i];
    EXPECT_LT(max_error(decode(ctx, decrypt(ctx, sq, keys.sk)), want2), tol * 4);
}

INSTANTIATE_TEST_SUITE_P(Dnum, HeOps, ::testing::Values(1, 5));

TEST(HeOpsPlain, AddAndConstantOps)
{
    CkksContext ctx(toy_instance(11, 2, 1));
    KeySet keys = keygen(ctx, 31);
    std::mt19937_64 rng(32);
    auto x = random_values(rng, 1024), y = random_values(rng, 1024);
    Ciphertext cx = encrypt(ctx, encode(ctx, x), keys.pk, 1);
    Ciphertext cy = encrypt(ctx, encode(ctx, y), keys.pk, 2);
    Plaintext py = encode(ctx, y);
    auto dec = [&](const Ciphertext& c) { return decode(ctx, decrypt(ctx, c, keys.sk)); };
    const double tol = std::ldexp(1.0, -18);
    const Complex c(0.5, -1.25);

    std::vector<Complex> sum(1024), prod(1024), shifted(1024), scaled(1024), cprod(1024), trip(1024);
    for (std::size_t i = 0; i < 1024; ++i) {
        sum[i] = x[i] + y[i];
        prod[i] = x[i] * y[i];
        shifted[i] = x[i] + c;
        cprod[i] = x[i] * c;
        trip[i] = x[i] * 3.0;
    }
    EXPECT_LT(max_error(dec(hadd(cx, cy)), sum), tol);
    EXPECT_LT(max_error(dec(padd(cx, py)), sum), tol);
    EXPECT_LT(max_error(dec(hrescale(ctx, pmult(cx, py))), prod), tol);
    EXPECT_LT(max_error(dec(cadd(ctx, cx, c)), shifted), tol);
    EXPECT_LT(max_error(dec(hrescale(ctx, cmult(ctx, cx, c, ctx.default_scale()))), cprod), tol);
    Ciphertext t3 = cmult(cx, 3);
    EXPECT_EQ(t3.scale, cx.scale);
    EXPECT_LT(max_error(dec(t3), trip), tol);
}

TEST(HeOpsErrors, ReportsTypedErrors)
{
    CkksContext ctx(toy_instance(10, 2, 1));
    KeySet keys = keygen(ctx, 41, {1});
    Ciphertext ct = encrypt(ctx, encode(ctx, {Complex(1, 0)}), keys.pk, 1);
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of([&] { hrot(ctx, ct, 2, keys); }), ErrorCode::MissingEvk);
    EXPECT_EQ(code_of([&] { hmult(ctx, ct, ct, keys.rot.at(1)); }), ErrorCode::MissingEvk);
    Ciphertext low = drop_last_limb(ct);
    EXPECT_EQ(code_of([&] { hadd(ct, low); }), ErrorCode::LevelMismatch);
    EXPECT_EQ(code_of([&] { hmult(ctx, ct, low, keys); }), ErrorCode::LevelMismatch);
    Ciphertext other = ct;
    other.scale *= 2;
    EXPECT_EQ(code_of([&] { hadd(ct, other); }), ErrorCode::ScaleMismatch);
    Ciphertext bottom = drop_last_limb(low);
    EXPECT_EQ(code_of([&] { hrescale(ctx, bottom); }), ErrorCode::LevelExhausted);
    EXPECT_EQ(code_of([&] { hmult(ctx, bottom, bottom, keys); }), ErrorCode::LevelExhausted);
}
