#pragma once

#include <bts/arith.hpp>
#include <bts/encoder.hpp>
#include <bts/error.hpp>
#include <bts/instance.hpp>
#include <bts/rns.hpp>
#include <bts/transform.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

namespace bts {

// ---------------------------------------------------------------------------
// Base conversion

/// Constants for converting residues on source base S to target base T:
/// qhat_inv[j] = [(Q_S/q_j)^-1]_{q_j}, qhat_mod[j*|T|+i] = [Q_S/q_j]_{t_i}.
struct BconvTable {
    std::vector<PrimeModulus> source;
    std::vector<PrimeModulus> target;
    std::vector<u64> qhat_inv;
    std::vector<u64> qhat_mod;

    u64 hat_mod(std::size_t j, std::size_t i) const { return qhat_mod[j * target.size() + i]; }
};

inline BconvTable make_bconv_table(std::vector<PrimeModulus> source, std::vector<PrimeModulus> target)
{
    BconvTable t;
    t.source = std::move(source);
    t.target = std::move(target);
    const std::size_t s = t.source.size(), r = t.target.size();
    t.qhat_inv.resize(s);
    t.qhat_mod.resize(s * r);
    for (std::size_t j = 0; j < s; ++j) {
        const PrimeModulus& qj = t.source[j];
        u64 hat = 1;
        for (std::size_t m = 0; m < s; ++m)
            if (m != j)
                hat = qj.mul(hat, t.source[m].value() % qj.value());
        t.qhat_inv[j] = qj.inv(hat);
        for (std::size_t i = 0; i < r; ++i) {
            const PrimeModulus& ti = t.target[i];
            u64 h = 1;
            for (std::size_t m = 0; m < s; ++m)
                if (m != j)
                    h = ti.mul(h, t.source[m].value() % ti.value());
            t.qhat_mod[j * r + i] = h;
        }
    }
    return t;
}

namespace detail {

inline void require_coefficient(const RnsPolynomial& p)
{
    if (p.domain() != Domain::Coefficient)
        throw Error(ErrorCode::DomainError, "base conversion needs coefficient-domain input");
}

/// Adds sum_{j in [first, first+count)} y_j * qhat_j into out (per target limb).
inline void bconv_accumulate(const BconvTable& t, const RnsPolynomial& in, std::size_t in_offset, std::size_t first,
                             std::size_t count, RnsPolynomial& out)
{
    const u64 n = in.degree();
    std::vector<u64> y(count);
    for (u64 c = 0; c < n; ++c) {
        for (std::size_t g = 0; g < count; ++g) {
            const std::size_t j = first + g;
            y[g] = t.source[j].mul(in.limb(in_offset + g)[c], t.qhat_inv[j]);
        }
        for (std::size_t i = 0; i < t.target.size(); ++i) {
            const PrimeModulus& ti = t.target[i];
            u64 inner = 0;
            for (std::size_t g = 0; g < count; ++g)
                inner = ti.add(inner, ti.mul(y[g] % ti.value(), t.hat_mod(first + g, i)));
            auto o = out.limb(i);
            o[c] = ti.add(o[c], inner);
        }
    }
}

} // namespace detail

/// Fast base conversion; per coefficient the result equals the exact CRT
/// value of (a + e*Q_S) modulo each target prime for some 0 <= e < |S|.
inline RnsPolynomial bconv(const RnsPolynomial& in, const BconvTable& t)
{
    detail::require_coefficient(in);
    if (in.limb_count() != t.source.size())
        throw Error(ErrorCode::InvalidArgument, "input limbs do not match source base");
    RnsPolynomial out(in.degree(), t.target, Domain::Coefficient);
    detail::bconv_accumulate(t, in, 0, 0, t.source.size(), out);
    return out;
}

/// Streaming form: source limbs arrive in groups of l_sub and each group's
/// inner sum is folded into the running accumulator.
class BconvAccumulator {
public:
    BconvAccumulator(const BconvTable& t, u64 n, std::size_t l_sub)
        : table_(&t), l_sub_(l_sub), acc_(n, t.target, Domain::Coefficient)
    {
        if (l_sub == 0)
            throw Error(ErrorCode::InvalidArgument, "l_sub must be positive");
    }

    /// Feed the next group of source limbs, in source order.
    void feed(const RnsPolynomial& group)
    {
        detail::require_coefficient(group);
        if (short_seen_)
            throw Error(ErrorCode::IncompleteGroup, "a short group may only be the final one");
        const std::size_t g = group.limb_count();
        if (g == 0 || g > l_sub_ || fed_ + g > table_->source.size())
            throw Error(ErrorCode::InvalidArgument, "group size out of range");
        if (g < l_sub_)
            short_seen_ = true;
        detail::bconv_accumulate(*table_, group, 0, fed_, g, acc_);
        fed_ += g;
        ++groups_;
    }

    std::size_t groups() const { return groups_; }

    RnsPolynomial finish() const
    {
        if (fed_ != table_->source.size())
            throw Error(ErrorCode::IncompleteGroup, "stream ended before every source limb arrived");
        return acc_;
    }

private:
    const BconvTable* table_;
    std::size_t l_sub_;
    RnsPolynomial acc_;
    std::size_t fed_ = 0;
    std::size_t groups_ = 0;
    bool short_seen_ = false;
};

/// Convenience driver for bconv_partial over a whole polynomial.
inline RnsPolynomial bconv_partial(const RnsPolynomial& in, const BconvTable& t, std::size_t l_sub)
{
    BconvAccumulator acc(t, in.degree(), l_sub);
    for (std::size_t first = 0; first < in.limb_count(); first += l_sub) {
        std::vector<std::size_t> idx;
        for (std::size_t j = first; j < std::min(first + l_sub, in.limb_count()); ++j)
            idx.push_back(j);
        acc.feed(in.select(idx));
    }
    return acc.finish();
}

// ---------------------------------------------------------------------------
// Contexts

/// BConv tables for every level and slice used by key switching, plus the
/// P-related constants for ModDown.
class KeySwitchContext {
public:
    KeySwitchContext() = default;
    explicit KeySwitchContext(const RnsBasis& basis) : basis_(basis)
    {
        const int L = basis.max_level();
        const auto& data = basis.data_primes();
        const auto& special = basis.special_primes();
        modup_.resize(L + 1);
        moddown_.resize(L + 1);
        for (int level = 0; level <= L; ++level) {
            for (int j = 0; j < basis.dnum(); ++j) {
                auto [lo, hi] = basis.factor_range(j);
                if (lo > level) {
                    modup_[level].emplace_back();
                    continue;
                }
                hi = std::min(hi, level + 1);
                std::vector<PrimeModulus> src(data.begin() + lo, data.begin() + hi), dst;
                for (int i = 0; i <= level; ++i)
                    if (i < lo || i >= hi)
                        dst.push_back(data[i]);
                dst.insert(dst.end(), special.begin(), special.end());
                modup_[level].push_back(make_bconv_table(std::move(src), std::move(dst)));
            }
            moddown_[level] = make_bconv_table(special, std::vector<PrimeModulus>(data.begin(), data.begin() + level + 1));
        }
        p_mod_.resize(L + 1);
        p_inv_.resize(L + 1);
        for (int i = 0; i <= L; ++i) {
            const PrimeModulus& q = data[i];
            u64 p = 1;
            for (const auto& s : special)
                p = q.mul(p, s.value() % q.value());
            p_mod_[i] = p;
            p_inv_[i] = q.inv(p);
        }
    }

    const RnsBasis& basis() const { return basis_; }
    const BconvTable& modup_table(int level, int slice) const { return modup_.at(level).at(slice); }
    const BconvTable& moddown_table(int level) const { return moddown_.at(level); }
    u64 p_mod(int i) const { return p_mod_.at(i); }
    u64 p_inv(int i) const { return p_inv_.at(i); }

private:
    RnsBasis basis_;
    std::vector<std::vector<BconvTable>> modup_;
    std::vector<BconvTable> moddown_;
    std::vector<u64> p_mod_;
    std::vector<u64> p_inv_;
};

class CkksContext {
public:
    explicit CkksContext(CkksInstance inst, double default_scale = std::ldexp(1.0, 40))
        : inst_(std::move(inst)), basis_(build_basis(inst_)), ks_(basis_), encoder_(inst_.n),
          default_scale_(default_scale)
    {
        for (const auto& q : basis_.data_primes())
            twiddles_.emplace(q.value(), TwiddleTable(q));
        for (const auto& p : basis_.special_primes())
            twiddles_.emplace(p.value(), TwiddleTable(p));
    }

    const CkksInstance& instance() const { return inst_; }
    const RnsBasis& basis() const { return basis_; }
    const KeySwitchContext& key_switch() const { return ks_; }
    const Encoder& encoder() const { return encoder_; }
    u64 degree() const { return inst_.n; }
    int max_level() const { return inst_.L; }
    double default_scale() const { return default_scale_; }

    const TwiddleTable& twiddle(u64 q) const
    {
        auto it = twiddles_.find(q);
        if (it == twiddles_.end())
            throw Error(ErrorCode::NotFound, "no twiddle table for modulus " + std::to_string(q));
        return it->second;
    }

    std::vector<PrimeModulus> level_moduli(int level) const
    {
        const auto& d = basis_.data_primes();
        return {d.begin(), d.begin() + level + 1};
    }

    /// Data primes q_0..q_level followed by all special primes.
    std::vector<PrimeModulus> extended_moduli(int level) const
    {
        auto m = level_moduli(level);
        m.insert(m.end(), basis_.special_primes().begin(), basis_.special_primes().end());
        return m;
    }

    void to_ntt(RnsPolynomial& p) const
    {
        if (p.domain() == Domain::Ntt)
            return;
        for (std::size_t i = 0; i < p.limb_count(); ++i)
            ntt_inplace(p.limb(i), twiddle(p.modulus(i).value()));
        p.set_domain(Domain::Ntt);
    }

    void to_coeff(RnsPolynomial& p) const
    {
        if (p.domain() == Domain::Coefficient)
            return;
        for (std::size_t i = 0; i < p.limb_count(); ++i)
            intt_inplace(p.limb(i), twiddle(p.modulus(i).value()));
        p.set_domain(Domain::Coefficient);
    }

private:
    CkksInstance inst_;
    RnsBasis basis_;
    KeySwitchContext ks_;
    Encoder encoder_;
    double default_scale_;
    std::unordered_map<u64, TwiddleTable> twiddles_;
};

// ---------------------------------------------------------------------------
// Sampling

/// Seeded sampler: uniform residues, ternary secrets and rounded Gaussians.
class Sampler {
public:
    explicit Sampler(u64 seed, double sigma = 3.2) : rng_(seed), sigma_(sigma) {}

    std::vector<std::int64_t> ternary(u64 n)
    {
        std::uniform_int_distribution<int> d(-1, 1);
        std::vector<std::int64_t> v(n);
        for (auto& x : v)
            x = d(rng_);
        return v;
    }

    std::vector<std::int64_t> gaussian(u64 n)
    {
        std::normal_distribution<double> d(0.0, sigma_);
        std::vector<std::int64_t> v(n);
        for (auto& x : v)
            x = static_cast<std::int64_t>(std::llround(d(rng_)));
        return v;
    }

    RnsPolynomial uniform(u64 n, const std::vector<PrimeModulus>& moduli, Domain d)
    {
        RnsPolynomial p(n, moduli, d);
        for (std::size_t i = 0; i < moduli.size(); ++i) {
            std::uniform_int_distribution<u64> dist(0, moduli[i].value() - 1);
            for (auto& x : p.limb(i))
                x = dist(rng_);
        }
        return p;
    }

    double sigma() const { return sigma_; }

private:
    std::mt19937_64 rng_;
    double sigma_;
};

/// Signed small integers lifted onto every limb.
inline RnsPolynomial lift_small(const std::vector<std::int64_t>& v, const std::vector<PrimeModulus>& moduli)
{
    RnsPolynomial p(v.size(), moduli, Domain::Coefficient);
    for (std::size_t i = 0; i < moduli.size(); ++i) {
        const u64 q = moduli[i].value();
        auto l = p.limb(i);
        for (std::size_t c = 0; c < v.size(); ++c) {
            std::int64_t x = v[c];
            l[c] = x >= 0 ? static_cast<u64>(x) % q : (q - static_cast<u64>(-x) % q) % q;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Polynomial arithmetic helpers (shape-checked, limb-wise)

namespace detail {

inline void check_same_shape(const RnsPolynomial& x, const RnsPolynomial& y)
{
    if (x.limb_count() != y.limb_count() || x.degree() != y.degree())
        throw Error(ErrorCode::LevelMismatch, "polynomials differ in limb count");
    if (x.domain() != y.domain())
        throw Error(ErrorCode::DomainError, "polynomials differ in domain");
}

inline RnsPolynomial add(const RnsPolynomial& x, const RnsPolynomial& y)
{
    check_same_shape(x, y);
    RnsPolynomial r = x;
    for (std::size_t i = 0; i < r.limb_count(); ++i) {
        auto a = r.limb(i);
        auto b = y.limb(i);
        const auto& q = r.modulus(i);
        for (u64 c = 0; c < r.degree(); ++c)
            a[c] = q.add(a[c], b[c]);
    }
    return r;
}

inline RnsPolynomial sub(const RnsPolynomial& x, const RnsPolynomial& y)
{
    check_same_shape(x, y);
    RnsPolynomial r = x;
    for (std::size_t i = 0; i < r.limb_count(); ++i) {
        auto a = r.limb(i);
        auto b = y.limb(i);
        const auto& q = r.modulus(i);
        for (u64 c = 0; c < r.degree(); ++c)
            a[c] = q.sub(a[c], b[c]);
    }
    return r;
}

inline RnsPolynomial mul(const RnsPolynomial& x, const RnsPolynomial& y)
{
    check_same_shape(x, y);
    if (x.domain() != Domain::Ntt)
        throw Error(ErrorCode::DomainError, "element-wise product needs NTT domain");
    RnsPolynomial r = x;
    for (std::size_t i = 0; i < r.limb_count(); ++i) {
        auto a = r.limb(i);
        auto b = y.limb(i);
        const auto& q = r.modulus(i);
        for (u64 c = 0; c < r.degree(); ++c)
            a[c] = q.mul(a[c], b[c]);
    }
    return r;
}

inline RnsPolynomial negate(const RnsPolynomial& x)
{
    RnsPolynomial r = x;
    for (std::size_t i = 0; i < r.limb_count(); ++i)
        for (auto& v : r.limb(i))
            v = r.modulus(i).neg(v);
    return r;
}

inline void check_scales(double s0, double s1)
{
    if (std::abs(s0 - s1) > 1e-9 * std::max(std::abs(s0), std::abs(s1)))
        throw Error(ErrorCode::ScaleMismatch, "operand scales differ");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Keys

struct KeySet {
    SecretKey sk;
    PublicKey pk;
    EvaluationKey mult;
    std::map<long long, EvaluationKey> rot;
};

namespace detail {

/// Slice j: b_j = a_j*s + e_j + [P]_{q_i} * s' on the limbs of factor Q_j.
inline EvaluationKey make_evk(const CkksContext& ctx, Sampler& smp, const RnsPolynomial& s_full,
                              const RnsPolynomial& s_prime_data, int rotation)
{
    const auto& basis = ctx.basis();
    const int L = ctx.max_level();
    const auto moduli = ctx.extended_moduli(L);
    const u64 n = ctx.degree();
    EvaluationKey evk;
    evk.rotation = rotation;
    for (int j = 0; j < basis.dnum(); ++j) {
        RnsPolynomial a = smp.uniform(n, moduli, Domain::Ntt);
        RnsPolynomial e = lift_small(smp.gaussian(n), moduli);
        ctx.to_ntt(e);
        RnsPolynomial b = add(mul(a, s_full), e);
        auto [lo, hi] = basis.factor_range(j);
        for (int i = lo; i < hi; ++i) {
            const auto& q = b.modulus(i);
            const u64 pm = ctx.key_switch().p_mod(i);
            auto bl = b.limb(i);
            auto sl = s_prime_data.limb(i);
            for (u64 c = 0; c < n; ++c)
                bl[c] = q.add(bl[c], q.mul(pm, sl[c]));
        }
        evk.b.push_back(std::move(b));
        evk.a.push_back(std::move(a));
    }
    return evk;
}

} // namespace detail

/// Ternary secret, public key and the relinearization / rotation keys.
/// Deterministic in the seed.
inline KeySet keygen(const CkksContext& ctx, u64 seed, const std::vector<long long>& rotations = {})
{
    Sampler smp(seed);
    const u64 n = ctx.degree();
    const int L = ctx.max_level();
    KeySet ks;
    auto full = ctx.extended_moduli(L);
    ks.sk.s = lift_small(smp.ternary(n), full);
    ctx.to_ntt(ks.sk.s);

    auto data = ctx.level_moduli(L);
    RnsPolynomial s_data = ks.sk.s.prefix(L + 1);
    ks.pk.a = smp.uniform(n, data, Domain::Ntt);
    RnsPolynomial e = lift_small(smp.gaussian(n), data);
    ctx.to_ntt(e);
    ks.pk.b = detail::add(detail::mul(ks.pk.a, s_data), e);

    ks.mult = detail::make_evk(ctx, smp, ks.sk.s, detail::mul(s_data, s_data), -1);
    for (long long r : rotations) {
        RnsPolynomial s_rot = detail::negate(apply_automorphism(s_data, r));
        ks.rot.emplace(r, detail::make_evk(ctx, smp, ks.sk.s, s_rot, static_cast<int>(r)));
    }
    return ks;
}

// ---------------------------------------------------------------------------
// Encoding

/// Encode slot values at `scale` into a plaintext at `level` (NTT domain).
inline Plaintext encode(const CkksContext& ctx, const std::vector<Complex>& values, double scale, int level)
{
    if (level < 0 || level > ctx.max_level())
        throw Error(ErrorCode::InvalidArgument, "level out of range");
    const auto coeffs = ctx.encoder().encode(values, scale);
    const auto moduli = ctx.level_moduli(level);
    double log2_q = 0;
    for (const auto& q : moduli)
        log2_q += std::log2(static_cast<double>(q.value()));
    RnsPolynomial m(ctx.degree(), moduli, Domain::Coefficient);
    for (u64 c = 0; c < coeffs.size(); ++c) {
        const double x = coeffs[c];
        if (x != 0 && std::log2(std::abs(x)) >= log2_q - 1)
            throw Error(ErrorCode::ScaleOverflow, "encoded coefficient exceeds Q/2");
        int exp = 0;
        const double mant = std::frexp(std::abs(x), &exp);
        // |x| = M * 2^(exp-53) with M a 53-bit integer; reduce exactly.
        const u64 M = static_cast<u64>(std::ldexp(mant, 53));
        const int shift = exp - 53;
        for (std::size_t i = 0; i < moduli.size(); ++i) {
            const auto& q = moduli[i];
            u64 v;
            if (shift >= 0)
                v = q.mul(M % q.value(), q.pow(2, static_cast<u64>(shift)));
            else
                v = (M >> -shift) % q.value(); // x is an integer, so the low bits are zero
            m.limb(i)[c] = x < 0 ? q.neg(v) : v;
        }
    }
    ctx.to_ntt(m);
    return Plaintext{std::move(m), level, scale};
}

inline Plaintext encode(const CkksContext& ctx, const std::vector<Complex>& values)
{
    return encode(ctx, values, ctx.default_scale(), ctx.max_level());
}

/// Centered CRT lift of every coefficient, as doubles.
inline std::vector<double> centered_lift(const CkksContext& ctx, RnsPolynomial p)
{
    ctx.to_coeff(p);
    const std::size_t limbs = p.limb_count();
    BigInt Q = 1;
    for (std::size_t i = 0; i < limbs; ++i)
        Q *= p.modulus(i).value();
    std::vector<BigInt> hat(limbs);
    std::vector<u64> hat_inv(limbs);
    for (std::size_t i = 0; i < limbs; ++i) {
        hat[i] = Q / p.modulus(i).value();
        const u64 r = static_cast<u64>(hat[i] % p.modulus(i).value());
        hat_inv[i] = p.modulus(i).inv(r);
    }
    const BigInt half = Q / 2;
    std::vector<double> out(p.degree());
    for (u64 c = 0; c < p.degree(); ++c) {
        BigInt x = 0;
        for (std::size_t i = 0; i < limbs; ++i)
            x += hat[i] * p.modulus(i).mul(p.limb(i)[c], hat_inv[i]);
        x %= Q;
        if (x > half)
            x -= Q;
        out[c] = x.convert_to<double>();
    }
    return out;
}

inline std::vector<Complex> decode(const CkksContext& ctx, const Plaintext& pt)
{
    return ctx.encoder().decode(centered_lift(ctx, pt.m), pt.scale);
}

// ---------------------------------------------------------------------------
// Encryption

inline Ciphertext encrypt(const CkksContext& ctx, const Plaintext& pt, const PublicKey& pk, u64 seed)
{
    Sampler smp(seed);
    const u64 n = ctx.degree();
    const auto moduli = ctx.level_moduli(pt.level);
    RnsPolynomial v = lift_small(smp.ternary(n), moduli);
    RnsPolynomial e0 = lift_small(smp.gaussian(n), moduli);
    RnsPolynomial e1 = lift_small(smp.gaussian(n), moduli);
    ctx.to_ntt(v);
    ctx.to_ntt(e0);
    ctx.to_ntt(e1);
    RnsPolynomial pb = pk.b.prefix(moduli.size());
    RnsPolynomial pa = pk.a.prefix(moduli.size());
    Ciphertext ct;
    ct.b = detail::add(detail::add(detail::mul(v, pb), pt.m), e0);
    ct.a = detail::add(detail::mul(v, pa), e1);
    ct.level = pt.level;
    ct.scale = pt.scale;
    return ct;
}

inline Ciphertext encrypt(const CkksContext& ctx, const Plaintext& pt, const SecretKey& sk, u64 seed)
{
    Sampler smp(seed);
    const auto moduli = ctx.level_moduli(pt.level);
    Ciphertext ct;
    ct.a = smp.uniform(ctx.degree(), moduli, Domain::Ntt);
    RnsPolynomial e = lift_small(smp.gaussian(ctx.degree()), moduli);
    ctx.to_ntt(e);
    ct.b = detail::add(detail::add(detail::mul(ct.a, sk.s.prefix(moduli.size())), pt.m), e);
    ct.level = pt.level;
    ct.scale = pt.scale;
    return ct;
}

/// b - a*s.
inline Plaintext decrypt(const CkksContext&, const Ciphertext& ct, const SecretKey& sk)
{
    RnsPolynomial s = sk.s.prefix(ct.a.limb_count());
    return Plaintext{detail::sub(ct.b, detail::mul(ct.a, s)), ct.level, ct.scale};
}

// ---------------------------------------------------------------------------
// Homomorphic operations

inline Ciphertext hadd(const Ciphertext& x, const Ciphertext& y)
{
    if (x.level != y.level)
        throw Error(ErrorCode::LevelMismatch, "hadd operands at different levels");
    detail::check_scales(x.scale, y.scale);
    return Ciphertext{detail::add(x.b, y.b), detail::add(x.a, y.a), x.level, x.scale};
}

struct TensorResult {
    RnsPolynomial d0, d1, d2;
};

inline TensorResult tensor_product(const Ciphertext& x, const Ciphertext& y)
{
    if (x.level != y.level)
        throw Error(ErrorCode::LevelMismatch, "tensor operands at different levels");
    TensorResult t;
    t.d0 = detail::mul(x.b, y.b);
    t.d1 = detail::add(detail::mul(x.a, y.b), detail::mul(y.a, x.b));
    t.d2 = detail::mul(x.a, y.a);
    return t;
}

/// Fused d2_q * P^-1 - d2_p_converted * P^-1 + d1 over C_level, NTT domain.
inline RnsPolynomial ssa(const CkksContext& ctx, const RnsPolynomial& d2_q, const RnsPolynomial& d2_p_conv,
                         const RnsPolynomial& d1)
{
    detail::check_same_shape(d2_q, d2_p_conv);
    detail::check_same_shape(d2_q, d1);
    RnsPolynomial out(d2_q.degree(), d2_q.moduli(), d2_q.domain());
    for (std::size_t i = 0; i < out.limb_count(); ++i) {
        const auto& q = out.modulus(i);
        const u64 pinv = ctx.key_switch().p_inv(static_cast<int>(i));
        const u64 neg_pinv = q.neg(pinv);
        auto o = out.limb(i);
        auto a = d2_q.limb(i);
        auto b = d2_p_conv.limb(i);
        auto c = d1.limb(i);
        for (u64 k = 0; k < out.degree(); ++k) {
            u128 acc = (u128)a[k] * pinv + (u128)b[k] * neg_pinv + c[k];
            o[k] = static_cast<u64>(acc % q.value());
        }
    }
    return out;
}

struct KeySwitchOutput {
    RnsPolynomial u0; // pairs with b
    RnsPolynomial u1; // pairs with a
};

namespace detail {

/// Inner-product accumulators over C_level followed by B, before ModDown.
inline std::pair<RnsPolynomial, RnsPolynomial> mod_up_and_multiply(const CkksContext& ctx, const RnsPolynomial& d2,
                                                                   const EvaluationKey& evk, int level)
{
    const auto& basis = ctx.basis();
    const int L = ctx.max_level();
    const int k = basis.k();
    const auto ext = ctx.extended_moduli(level);
    const u64 n = ctx.degree();
    RnsPolynomial acc_b(n, ext, Domain::Ntt), acc_a(n, ext, Domain::Ntt);

    // Limb indices into the evk (data 0..L, then special) for this level.
    std::vector<std::size_t> evk_idx;
    for (int i = 0; i <= level; ++i)
        evk_idx.push_back(i);
    for (int i = 0; i < k; ++i)
        evk_idx.push_back(static_cast<std::size_t>(L + 1 + i));

    for (int j = 0; j < basis.dnum(); ++j) {
        auto [lo, hi] = basis.factor_range(j);
        if (lo > level)
            break;
        hi = std::min(hi, level + 1);
        std::vector<std::size_t> own;
        for (int i = lo; i < hi; ++i)
            own.push_back(i);
        RnsPolynomial part = d2.select(own);
        ctx.to_coeff(part);
        RnsPolynomial conv = bconv(part, ctx.key_switch().modup_table(level, j));
        ctx.to_ntt(conv);
        // Reassemble the slice over the extended base.
        RnsPolynomial extd(n, ext, Domain::Ntt);
        std::size_t ci = 0;
        for (std::size_t i = 0; i < ext.size(); ++i) {
            const bool mine = static_cast<int>(i) >= lo && static_cast<int>(i) < hi;
            auto src = mine ? d2.limb(i) : conv.limb(ci++);
            std::copy(src.begin(), src.end(), extd.limb(i).begin());
        }
        RnsPolynomial eb = evk.b.at(j).select(evk_idx);
        RnsPolynomial ea = evk.a.at(j).select(evk_idx);
        acc_b = add(acc_b, mul(extd, eb));
        acc_a = add(acc_a, mul(extd, ea));
    }
    return {std::move(acc_b), std::move(acc_a)};
}

/// ModDown of one accumulator: iNTT of the P part, BConv to C_level, NTT.
inline RnsPolynomial convert_special_part(const CkksContext& ctx, const RnsPolynomial& acc, int level)
{
    std::vector<std::size_t> sp;
    for (std::size_t i = level + 1; i < acc.limb_count(); ++i)
        sp.push_back(i);
    RnsPolynomial p = acc.select(sp);
    ctx.to_coeff(p);
    RnsPolynomial c = bconv(p, ctx.key_switch().moddown_table(level));
    ctx.to_ntt(c);
    return c;
}

} // namespace detail

/// Generalized key switching of d2 at its level; the result (u0, u1)
/// satisfies u0 - u1*s ~= d2 * s' for the key's target s'.
inline KeySwitchOutput key_switch(const CkksContext& ctx, const RnsPolynomial& d2, const EvaluationKey& evk)
{
    if (evk.slices() == 0)
        throw Error(ErrorCode::MissingEvk, "empty evaluation key");
    if (static_cast<int>(evk.slices()) != ctx.basis().dnum())
        throw Error(ErrorCode::MissingEvk, "evaluation key slice count does not match dnum");
    if (d2.domain() != Domain::Ntt)
        throw Error(ErrorCode::DomainError, "key switching input must be in NTT domain");
    const int level = static_cast<int>(d2.limb_count()) - 1;
    if (level < 0 || level > ctx.max_level())
        throw Error(ErrorCode::LevelMismatch, "input level out of range");
    auto [acc_b, acc_a] = detail::mod_up_and_multiply(ctx, d2, evk, level);
    RnsPolynomial zero(d2.degree(), d2.moduli(), Domain::Ntt);
    KeySwitchOutput out;
    out.u0 = ssa(ctx, acc_b.prefix(level + 1), detail::convert_special_part(ctx, acc_b, level), zero);
    out.u1 = ssa(ctx, acc_a.prefix(level + 1), detail::convert_special_part(ctx, acc_a, level), zero);
    return out;
}

inline Ciphertext hmult(const CkksContext& ctx, const Ciphertext& x, const Ciphertext& y, const EvaluationKey& evk)
{
    if (x.level != y.level)
        throw Error(ErrorCode::LevelMismatch, "hmult operands at different levels");
    if (x.level < 1)
        throw Error(ErrorCode::LevelExhausted, "no level left to rescale a product");
    if (evk.rotation != -1)
        throw Error(ErrorCode::MissingEvk, "hmult needs the relinearization key");
    TensorResult t = tensor_product(x, y);
    const int level = x.level;
    auto [acc_b, acc_a] = detail::mod_up_and_multiply(ctx, t.d2, evk, level);
    Ciphertext out;
    out.b = ssa(ctx, acc_b.prefix(level + 1), detail::convert_special_part(ctx, acc_b, level), t.d0);
    out.a = ssa(ctx, acc_a.prefix(level + 1), detail::convert_special_part(ctx, acc_a, level), t.d1);
    out.level = level;
    out.scale = x.scale * y.scale;
    return out;
}

inline Ciphertext hmult(const CkksContext& ctx, const Ciphertext& x, const Ciphertext& y, const KeySet& keys)
{
    return hmult(ctx, x, y, keys.mult);
}

/// Left rotation of the slot vector by r.
inline Ciphertext hrot(const CkksContext& ctx, const Ciphertext& ct, long long r, const KeySet& keys)
{
    auto it = keys.rot.find(r);
    if (it == keys.rot.end())
        throw Error(ErrorCode::MissingEvk, "no rotation key for r=" + std::to_string(r));
    const EvaluationKey& evk = it->second;
    const int level = ct.level;
    RnsPolynomial b = apply_automorphism(ct.b, r);
    RnsPolynomial a = apply_automorphism(ct.a, r);
    auto [acc_b, acc_a] = detail::mod_up_and_multiply(ctx, a, evk, level);
    RnsPolynomial zero(b.degree(), b.moduli(), Domain::Ntt);
    Ciphertext out;
    out.b = ssa(ctx, acc_b.prefix(level + 1), detail::convert_special_part(ctx, acc_b, level), b);
    out.a = ssa(ctx, acc_a.prefix(level + 1), detail::convert_special_part(ctx, acc_a, level), zero);
    out.level = level;
    out.scale = ct.scale;
    return out;
}

namespace detail {

inline RnsPolynomial rescale_poly(const CkksContext& ctx, const RnsPolynomial& x)
{
    const std::size_t last = x.limb_count() - 1;
    const PrimeModulus& ql = x.modulus(last);
    std::vector<u64> top(x.limb(last).begin(), x.limb(last).end());
    intt_inplace(top, ctx.twiddle(ql.value()));
    RnsPolynomial out = x.prefix(last);
    for (std::size_t i = 0; i < last; ++i) {
        const PrimeModulus& q = out.modulus(i);
        std::vector<u64> r(top.size());
        for (std::size_t c = 0; c < top.size(); ++c) {
            // Centered remainder of the dropped limb, carried into q_i.
            const u64 v = top[c];
            r[c] = v > ql.value() / 2 ? q.neg((ql.value() - v) % q.value()) : v % q.value();
        }
        ntt_inplace(r, ctx.twiddle(q.value()));
        const u64 inv = q.inv(ql.value() % q.value());
        auto o = out.limb(i);
        for (std::size_t c = 0; c < r.size(); ++c)
            o[c] = q.mul(q.sub(o[c], r[c]), inv);
    }
    return out;
}

} // namespace detail

inline Ciphertext hrescale(const CkksContext& ctx, const Ciphertext& ct)
{
    if (ct.level < 1)
        throw Error(ErrorCode::LevelExhausted, "cannot rescale at level 0");
    const double ql = static_cast<double>(ct.b.modulus(ct.b.limb_count() - 1).value());
    return Ciphertext{detail::rescale_poly(ctx, ct.b), detail::rescale_poly(ctx, ct.a), ct.level - 1, ct.scale / ql};
}

inline Ciphertext padd(const Ciphertext& ct, const Plaintext& pt)
{
    if (ct.level != pt.level)
        throw Error(ErrorCode::LevelMismatch, "plaintext level differs");
    detail::check_scales(ct.scale, pt.scale);
    return Ciphertext{detail::add(ct.b, pt.m), ct.a, ct.level, ct.scale};
}

inline Ciphertext pmult(const Ciphertext& ct, const Plaintext& pt)
{
    if (ct.level != pt.level)
        throw Error(ErrorCode::LevelMismatch, "plaintext level differs");
    return Ciphertext{detail::mul(ct.b, pt.m), detail::mul(ct.a, pt.m), ct.level, ct.scale * pt.scale};
}

namespace detail {

/// NTT image of c_re + c_im * X^(N/2): the constant that places c in every slot.
inline RnsPolynomial constant_poly(const CkksContext& ctx, const std::vector<PrimeModulus>& moduli, Complex c,
                                   double scale)
{
    const u64 n = ctx.degree();
    std::vector<std::int64_t> v(n, 0);
    v[0] = std::llround(c.real() * scale);
    v[n / 2] = std::llround(c.imag() * scale);
    RnsPolynomial p = lift_small(v, moduli);
    ctx.to_ntt(p);
    return p;
}

} // namespace detail

/// Adds the scalar c to every slot at the ciphertext's scale.
inline Ciphertext cadd(const CkksContext& ctx, const Ciphertext& ct, Complex c)
{
    RnsPolynomial k = detail::constant_poly(ctx, ct.b.moduli(), c, ct.scale);
    return Ciphertext{detail::add(ct.b, k), ct.a, ct.level, ct.scale};
}

/// Multiplies by an integer constant; the scale is unchanged.
inline Ciphertext cmult(const Ciphertext& ct, std::int64_t c)
{
    auto scale_poly = [c](const RnsPolynomial& p) {
        RnsPolynomial r = p;
        for (std::size_t i = 0; i < r.limb_count(); ++i) {
            const auto& q = r.modulus(i);
            const u64 cc = c >= 0 ? static_cast<u64>(c) % q.value() : q.neg(static_cast<u64>(-c) % q.value());
            for (auto& v : r.limb(i))
                v = q.mul(v, cc);
        }
        return r;
    };
    return Ciphertext{scale_poly(ct.b), scale_poly(ct.a), ct.level, ct.scale};
}

/// Multiplies by a complex constant encoded at `scale`; the result scale is ct.scale * scale.
inline Ciphertext cmult(const CkksContext& ctx, const Ciphertext& ct, Complex c, double scale)
{
    RnsPolynomial k = detail::constant_poly(ctx, ct.b.moduli(), c, scale);
    return Ciphertext{detail::mul(ct.b, k), detail::mul(ct.a, k), ct.level, ct.scale * scale};
}

} // namespace bts
