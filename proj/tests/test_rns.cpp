#include <bts/heops.hpp>
#include <bts/rns.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace bts;

TEST(Basis, Ins1SingleFactor)
{
    RnsBasis b = build_basis(ins1());
    EXPECT_EQ(b.dnum(), 1);
    EXPECT_EQ(b.k(), 28);
    EXPECT_EQ(b.data_primes().size(), 28u);
    EXPECT_EQ(b.special_primes().size(), 28u);
    EXPECT_EQ(b.factor_range(0), std::make_pair(0, 28));
    EXPECT_GE(b.special_product(), b.factor_product(0));
}

TEST(Basis, Ins2TwoFactors)
{
    RnsBasis b = build_basis(ins2());
    EXPECT_EQ(b.k(), 20);
    EXPECT_EQ(b.factor_range(0), std::make_pair(0, 20));
    EXPECT_EQ(b.factor_range(1), std::make_pair(20, 40));
    for (int j = 0; j < 2; ++j)
        EXPECT_GE(b.special_product(), b.factor_product(j));
}

TEST(Basis, ToyLayoutAndDistinctPrimes)
{
    RnsBasis b = build_basis(toy_instance(10, 3, 2));
    EXPECT_EQ(b.k(), 2);
    EXPECT_EQ(b.factor_range(0), std::make_pair(0, 2));
    EXPECT_EQ(b.factor_range(1), std::make_pair(2, 4));
    std::set<u64> seen;
    for (const auto& q : b.data_primes()) {
        EXPECT_EQ(q.value() % 2048, 1u);
        seen.insert(q.value());
    }
    for (const auto& p : b.special_primes())
        seen.insert(p.value());
    EXPECT_EQ(seen.size(), 6u);
}

TEST(Basis, RejectsBadInstances)
{
    CkksInstance c = toy_instance(10, 3, 1);
    c.dnum = 3;
    EXPECT_THROW(build_basis(c), Error);
    // One 60-bit special prime cannot cover a factor of two 60-bit primes.
    CkksInstance d = toy_instance(10, 3, 2);
    d.log_q_bits = 60;
    d.log_p_bits = 40;
    try {
        build_basis(d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidInstance);
    }
}

TEST(Sizes, PublishedFigures)
{
    Sizes s = sizes(ins1(), 27);
    EXPECT_EQ(s.ct_bytes, 56u << 20);
    EXPECT_EQ(s.evk_bytes, 112u << 20);
    EXPECT_EQ(sizes(ins1(), 0).ct_bytes, 2u << 20);
    EXPECT_EQ(sizes(toy_instance(12, 3, 1), 3).ct_bytes, 256u << 10);
    EXPECT_THROW(sizes(ins1(), 28), Error);
}

TEST(Sizes, EvkMatchesAggregateFormula)
{
    std::mt19937 rng(3);
    for (int t = 0; t < 500; ++t) {
        const int L = 1 + static_cast<int>(rng() % 60);
        std::vector<int> divisors;
        for (int d = 1; d <= L + 1; ++d)
            if ((L + 1) % d == 0)
                divisors.push_back(d);
        const int dnum = divisors[rng() % divisors.size()];
        CkksInstance c = make_instance("r", u64(1) << (10 + rng() % 8), L, dnum);
        Sizes s = sizes(c, L);
        EXPECT_EQ(s.evk_bytes, s.aggregate_evk_bytes);
        EXPECT_EQ(s.aggregate_evk_bytes, 2 * c.n * u64(L + 1) * u64(dnum + 1) * 8);
    }
}

TEST(Ciphertexts, DropLastLimb)
{
    CkksContext ctx(toy_instance(10, 3, 1));
    KeySet keys = keygen(ctx, 1);
    Ciphertext ct = encrypt(ctx, encode(ctx, {Complex(1, 0)}), keys.pk, 2);
    std::size_t bytes = ct.byte_size();
    for (int l = 3; l >= 1; --l) {
        Ciphertext next = drop_last_limb(ct);
        EXPECT_EQ(next.level, l - 1);
        EXPECT_EQ(next.b.limb_count(), static_cast<std::size_t>(l));
        EXPECT_EQ(bytes - next.byte_size(), 2u * 1024 * 8);
        for (std::size_t i = 0; i < next.b.limb_count(); ++i)
            EXPECT_EQ(next.b.modulus(i), ctx.basis().data_primes()[i]);
        bytes = next.byte_size();
        ct = next;
    }
    EXPECT_EQ(ct.b.limb_count(), 1u);
    try {
        drop_last_limb(ct);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LevelExhausted);
    }
}

TEST(Serialization, RoundTripsAreBitExact)
{
    CkksContext ctx(toy_instance(10, 3, 2));
    KeySet keys = keygen(ctx, 11, {1});
    Plaintext pt = encode(ctx, {Complex(0.5, -0.25), Complex(2, 0)});
    Ciphertext ct = encrypt(ctx, pt, keys.pk, 5);
    ct.scale = 1234.5678;

    EXPECT_EQ(deserialize_ciphertext(serialize(ct)), ct);
    EXPECT_EQ(deserialize_plaintext(serialize(pt)), pt);
    EXPECT_EQ(deserialize_polynomial(serialize(ct.a)), ct.a);
    EXPECT_EQ(deserialize_secret_key(serialize(keys.sk)), keys.sk);
    EXPECT_EQ(deserialize_evaluation_key(serialize(keys.mult)), keys.mult);
    EXPECT_EQ(deserialize_evaluation_key(serialize(keys.rot.at(1))), keys.rot.at(1));
    EXPECT_EQ(keys.mult.byte_size(), sizes(ctx.instance(), 3).evk_bytes);
}

TEST(Serialization, HeaderLayoutIsLittleEndian)
{
    RnsPolynomial p(4, {PrimeModulus(17, 4)}, Domain::Ntt);
    p.limb(0)[0] = 3;
    auto bytes = serialize(p);
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 8 + 4 + 4 + 8 + 4 + 4 + 8 + 4 * 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BTSF");
    EXPECT_EQ(bytes[12], 4); // N
    EXPECT_EQ(bytes[20], 1); // limb count
    EXPECT_EQ(bytes[28], 1); // NTT domain
    EXPECT_EQ(bytes[52], 17); // modulus
    EXPECT_EQ(bytes[60], 3); // first residue
}

TEST(Serialization, RejectsCorruptInput)
{
    RnsPolynomial p(4, {PrimeModulus(17, 4)});
    auto bytes = serialize(p);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(deserialize_polynomial(truncated), Error);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_polynomial(bad), Error);
    EXPECT_THROW(deserialize_ciphertext(bytes), Error);
    auto unreduced = bytes;
    unreduced[60] = 200;
    EXPECT_THROW(deserialize_polynomial(unreduced), Error);
}
