#pragma once

// Built-in property suite run by `bts selftest`. It carries its own small
// reference implementations (schoolbook products, 128-bit reductions) so it
// can run on an installed binary without the unit tests.

#include <bts/heops.hpp>
#include <bts/transform.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace bts {

enum class SelftestScale { Toy, Flagship };

struct SelftestOptions {
    SelftestScale scale = SelftestScale::Toy;
    bool corrupt_twiddle = false;
    u64 seed = 1;
};

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

/// Max relative slot error of each functional op over `messages` random
/// inputs: |got - want|_inf / |want|_inf.
struct FunctionalErrors {
    double encrypt = 0;
    double hadd = 0;
    double hmult = 0;
    double hrot = 0;
    double pmult = 0;
    int messages = 0;

    double worst() const { return std::max({encrypt, hadd, hmult, hrot, pmult}); }
};

inline FunctionalErrors functional_errors(const CkksInstance& inst, int messages, u64 seed)
{
    CkksContext ctx(inst);
    KeySet keys = keygen(ctx, seed, {1});
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    const std::size_t slots = inst.n / 2;
    auto rel = [](const std::vector<Complex>& got, const std::vector<Complex>& want) {
        double e = 0, m = 0;
        for (std::size_t i = 0; i < want.size(); ++i) {
            e = std::max(e, std::abs(got[i] - want[i]));
            m = std::max(m, std::abs(want[i]));
        }
        return m > 0 ? e / m : e;
    };
    auto dec = [&](const Ciphertext& c) { return decode(ctx, decrypt(ctx, c, keys.sk)); };
    FunctionalErrors fe;
    fe.messages = messages;
    for (int m = 0; m < messages; ++m) {
        std::vector<Complex> x(slots), y(slots);
        for (std::size_t i = 0; i < slots; ++i) {
            x[i] = Complex(d(rng), d(rng));
            y[i] = Complex(d(rng), d(rng));
        }
        const u64 s = seed * 1000 + static_cast<u64>(m) * 2;
        Ciphertext cx = encrypt(ctx, encode(ctx, x), keys.pk, s);
        Ciphertext cy = encrypt(ctx, encode(ctx, y), keys.pk, s + 1);
        std::vector<Complex> sum(slots), prod(slots), rot(slots);
        for (std::size_t i = 0; i < slots; ++i) {
            sum[i] = x[i] + y[i];
            prod[i] = x[i] * y[i];
            rot[i] = x[(i + 1) % slots];
        }
        fe.encrypt = std::max(fe.encrypt, rel(dec(cx), x));
        fe.hadd = std::max(fe.hadd, rel(dec(hadd(cx, cy)), sum));
        fe.hmult = std::max(fe.hmult, rel(dec(hrescale(ctx, hmult(ctx, cx, cy, keys))), prod));
        fe.hrot = std::max(fe.hrot, rel(dec(hrot(ctx, cx, 1, keys)), rot));
        fe.pmult = std::max(fe.pmult, rel(dec(hrescale(ctx, pmult(cx, encode(ctx, y)))), prod));
    }
    return fe;
}

namespace detail {

inline std::vector<u64> schoolbook_negacyclic(const std::vector<u64>& a, const std::vector<u64>& b, u64 q)
{
    const std::size_t n = a.size();
    std::vector<u64> c(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const u64 p = static_cast<u64>(static_cast<u128>(a[i]) * b[j] % q);
            const std::size_t k = (i + j) % n;
            c[k] = i + j < n ? (c[k] + p) % q : (c[k] + q - p) % q;
        }
    return c;
}

inline TwiddleTable selftest_twiddles(const PrimeModulus& q, bool corrupt)
{
    TwiddleTable tw(q);
    if (corrupt)
        tw.corrupt_factor(q.degree() / 2 + 1, 2);
    return tw;
}

} // namespace detail

inline std::vector<PropertyResult> run_selftest(const SelftestOptions& opt)
{
    std::vector<PropertyResult> out;
    auto run = [&](const std::string& name, const std::function<std::string()>& body) {
        PropertyResult r;
        r.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            r.detail = body();
            r.pass = r.detail.empty();
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(r);
    };
    std::mt19937_64 rng(opt.seed);

    run("modular multiply matches 128-bit reduction", [&]() -> std::string {
        const PrimeModulus q = find_ntt_prime(60, 1 << 12);
        std::uniform_int_distribution<u64> d(0, q.value() - 1);
        for (int i = 0; i < 20000; ++i) {
            const u64 a = d(rng), b = d(rng);
            if (q.mul(a, b) != static_cast<u64>(static_cast<u128>(a) * b % q.value()))
                return "mismatch at a=" + std::to_string(a) + " b=" + std::to_string(b);
        }
        return {};
    });

    run("intt(ntt(a)) == a for N = 2^4 .. 2^12", [&]() -> std::string {
        for (unsigned logn = 4; logn <= 12; ++logn) {
            const PrimeModulus q = find_ntt_prime(50, u64(1) << logn);
            const TwiddleTable tw = detail::selftest_twiddles(q, opt.corrupt_twiddle);
            std::uniform_int_distribution<u64> d(0, q.value() - 1);
            std::vector<u64> a(q.degree());
            for (auto& v : a)
                v = d(rng);
            auto b = a;
            ntt_inplace(b, tw);
            intt_inplace(b, tw);
            if (a != b)
                return "round trip failed at N=2^" + std::to_string(logn);
        }
        return {};
    });

    run("pointwise NTT product equals negacyclic convolution", [&]() -> std::string {
        for (unsigned logn : {4u, 8u}) {
            const PrimeModulus q = find_ntt_prime(40, u64(1) << logn);
            const TwiddleTable tw = detail::selftest_twiddles(q, opt.corrupt_twiddle);
            std::uniform_int_distribution<u64> d(0, q.value() - 1);
            std::vector<u64> a(q.degree()), b(q.degree());
            for (u64 i = 0; i < q.degree(); ++i) {
                a[i] = d(rng);
                b[i] = d(rng);
            }
            auto fa = ntt(a, tw), fb = ntt(b, tw);
            for (u64 i = 0; i < q.degree(); ++i)
                fa[i] = q.mul(fa[i], fb[i]);
            if (intt(fa, tw) != detail::schoolbook_negacyclic(a, b, q.value()))
                return "convolution mismatch at N=2^" + std::to_string(logn);
        }
        return {};
    });

    run("3D-NTT equals flat NTT", [&]() -> std::string {
        const PrimeModulus q = find_ntt_prime(50, u64(1) << 12);
        const TwiddleTable tw = detail::selftest_twiddles(q, opt.corrupt_twiddle);
        const TwiddleTable clean(q);
        std::uniform_int_distribution<u64> d(0, q.value() - 1);
        std::vector<u64> a(q.degree());
        for (auto& v : a)
            v = d(rng);
        // The flat reference uses untouched twiddles so a corrupted table is
        // caught here as well.
        if (ntt_3d(a, GridMap(16, 8, 32), tw) != ntt(a, clean))
            return "3D-NTT differs from flat NTT";
        return {};
    });

    run("automorphism route composes to the index map", [&]() -> std::string {
        const GridMap g(16, 8, 32);
        std::uniform_int_distribution<long long> d(1, 1 << 20);
        for (int t = 0; t < 20; ++t) {
            const long long r = d(rng);
            const PermutationRoute route = decompose_permutation(r, g);
            for (u64 i = 0; i < g.degree(); ++i)
                if (route.apply(i) != automorphism_index(i, r, g.degree()))
                    return "route mismatch for r=" + std::to_string(r);
        }
        return {};
    });

    run("bconv_partial equals bconv", [&]() -> std::string {
        std::vector<PrimeModulus> src, dst;
        std::set<u64> used;
        for (int i = 0; i < 6; ++i) {
            auto p = find_ntt_prime(40 + i, 256, used);
            used.insert(p.value());
            (i < 4 ? src : dst).push_back(p);
        }
        const BconvTable table = make_bconv_table(src, dst);
        RnsPolynomial in(256, src, Domain::Coefficient);
        for (std::size_t l = 0; l < src.size(); ++l) {
            std::uniform_int_distribution<u64> d(0, src[l].value() - 1);
            for (auto& v : in.limb(l))
                v = d(rng);
        }
        const RnsPolynomial full = bconv(in, table);
        for (std::size_t l_sub : {1u, 2u, 4u})
            if (!(bconv_partial(in, table, l_sub) == full))
                return "l_sub=" + std::to_string(l_sub) + " differs";
        return {};
    });

    run("HE ops match plaintext within 2^-10 at N=2^12", [&]() -> std::string {
        const FunctionalErrors fe = functional_errors(toy_instance(12, 4, 1), 4, opt.seed);
        if (fe.worst() >= std::ldexp(1.0, -10))
            return "worst relative error " + std::to_string(fe.worst());
        return {};
    });

    if (opt.scale == SelftestScale::Flagship) {
        run("intt(ntt(a)) == a at N=2^17 over 28 limbs", [&]() -> std::string {
            const RnsBasis basis = build_basis(ins1());
            for (int l = 0; l < 28; ++l) {
                const PrimeModulus& q = basis.data_primes().at(l);
                const TwiddleTable tw = detail::selftest_twiddles(q, opt.corrupt_twiddle);
                std::uniform_int_distribution<u64> d(0, q.value() - 1);
                std::vector<u64> a(q.degree());
                for (auto& v : a)
                    v = d(rng);
                auto b = a;
                ntt_inplace(b, tw);
                intt_inplace(b, tw);
                if (a != b)
                    return "round trip failed on limb " + std::to_string(l);
            }
            return {};
        });
    }
    return out;
}

} // namespace bts
