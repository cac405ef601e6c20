#pragma once

#include <bts/arith.hpp>
#include <bts/error.hpp>
#include <bts/instance.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <bit>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace bts {

using BigInt = boost::multiprecision::cpp_int;

/// Data primes q_0..q_L split into dnum consecutive factors, plus k special primes.
class RnsBasis {
public:
    RnsBasis() = default;
    RnsBasis(std::vector<PrimeModulus> data, std::vector<PrimeModulus> special, int dnum)
        : data_(std::move(data)), special_(std::move(special)), dnum_(dnum)
    {
        if (dnum_ < 1 || data_.empty() || data_.size() % dnum_ != 0)
            throw Error(ErrorCode::InvalidInstance, "data primes not divisible into dnum factors");
        k_ = static_cast<int>(data_.size()) / dnum_;
    }

    const std::vector<PrimeModulus>& data_primes() const { return data_; }
    const std::vector<PrimeModulus>& special_primes() const { return special_; }
    int dnum() const { return dnum_; }
    int k() const { return k_; }
    int max_level() const { return static_cast<int>(data_.size()) - 1; }
    u64 degree() const { return data_.front().degree(); }

    /// First and one-past-last data-prime index of factor Q_j.
    std::pair<int, int> factor_range(int j) const { return {j * k_, (j + 1) * k_}; }
    int factor_of(int data_index) const { return data_index / k_; }

    BigInt factor_product(int j) const
    {
        BigInt p = 1;
        auto [lo, hi] = factor_range(j);
        for (int i = lo; i < hi; ++i)
            p *= data_[i].value();
        return p;
    }

    BigInt special_product() const
    {
        BigInt p = 1;
        for (const auto& m : special_)
            p *= m.value();
        return p;
    }

    BigInt data_product(int level) const
    {
        BigInt p = 1;
        for (int i = 0; i <= level; ++i)
            p *= data_[i].value();
        return p;
    }

private:
    std::vector<PrimeModulus> data_;
    std::vector<PrimeModulus> special_;
    int dnum_ = 1;
    int k_ = 0;
};

/// Special primes are drawn first so they sit above a same-sized q0, which
/// keeps P >= Q_j when a factor holds a single base prime.
inline RnsBasis build_basis(const CkksInstance& inst)
{
    inst.validate();
    std::set<u64> used;
    auto take = [&](int bits) {
        PrimeModulus p = find_ntt_prime(bits, inst.n, used);
        used.insert(p.value());
        return p;
    };
    std::vector<PrimeModulus> special, data;
    for (int i = 0; i < inst.k(); ++i)
        special.push_back(take(inst.log_p_bits));
    data.push_back(take(inst.log_q0_bits));
    for (int i = 1; i <= inst.L; ++i)
        data.push_back(take(inst.log_q_bits));
    RnsBasis basis(std::move(data), std::move(special), inst.dnum);
    const BigInt P = basis.special_product();
    for (int j = 0; j < inst.dnum; ++j) {
        if (P < basis.factor_product(j))
            throw Error(ErrorCode::InvalidInstance, "special product P smaller than factor Q_" + std::to_string(j));
    }
    return basis;
}

enum class Domain { Coefficient = 0, Ntt = 1 };

/// Residue matrix stored limb-major: limb i is an N-vector modulo moduli[i].
class RnsPolynomial {
public:
    RnsPolynomial() = default;
    RnsPolynomial(u64 n, std::vector<PrimeModulus> moduli, Domain d = Domain::Coefficient)
        : n_(n), moduli_(std::move(moduli)), data_(n * moduli_.size(), 0), domain_(d)
    {
    }

    u64 degree() const { return n_; }
    std::size_t limb_count() const { return moduli_.size(); }
    Domain domain() const { return domain_; }
    void set_domain(Domain d) { domain_ = d; }
    const std::vector<PrimeModulus>& moduli() const { return moduli_; }
    const PrimeModulus& modulus(std::size_t i) const { return moduli_[i]; }

    std::span<u64> limb(std::size_t i) { return {data_.data() + i * n_, n_}; }
    std::span<const u64> limb(std::size_t i) const { return {data_.data() + i * n_, n_}; }
    std::vector<u64>& raw() { return data_; }
    const std::vector<u64>& raw() const { return data_; }

    std::size_t byte_size() const { return data_.size() * sizeof(u64); }

    /// Polynomial restricted to the first `count` limbs.
    RnsPolynomial prefix(std::size_t count) const
    {
        RnsPolynomial r(n_, std::vector<PrimeModulus>(moduli_.begin(), moduli_.begin() + count), domain_);
        std::copy(data_.begin(), data_.begin() + count * n_, r.data_.begin());
        return r;
    }

    /// Polynomial made of the selected limbs, in the given order.
    RnsPolynomial select(const std::vector<std::size_t>& idx) const
    {
        std::vector<PrimeModulus> m;
        for (auto i : idx)
            m.push_back(moduli_.at(i));
        RnsPolynomial r(n_, std::move(m), domain_);
        for (std::size_t t = 0; t < idx.size(); ++t)
            std::copy(limb(idx[t]).begin(), limb(idx[t]).end(), r.limb(t).begin());
        return r;
    }

    bool all_reduced() const
    {
        for (std::size_t i = 0; i < limb_count(); ++i)
            for (u64 v : limb(i))
                if (v >= moduli_[i].value())
                    return false;
        return true;
    }

    friend bool operator==(const RnsPolynomial& x, const RnsPolynomial& y)
    {
        return x.n_ == y.n_ && x.domain_ == y.domain_ && x.data_ == y.data_ && x.moduli_ == y.moduli_;
    }

private:
    u64 n_ = 0;
    std::vector<PrimeModulus> moduli_;
    std::vector<u64> data_;
    Domain domain_ = Domain::Coefficient;
};

struct Ciphertext {
    RnsPolynomial b;
    RnsPolynomial a;
    int level = 0;
    double scale = 1.0;

    std::size_t byte_size() const { return b.byte_size() + a.byte_size(); }
    friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

struct Plaintext {
    RnsPolynomial m;
    int level = 0;
    double scale = 1.0;
    friend bool operator==(const Plaintext&, const Plaintext&) = default;
};

/// Ternary secret held over every data and special prime, NTT domain.
struct SecretKey {
    RnsPolynomial s;
    friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

struct PublicKey {
    RnsPolynomial b;
    RnsPolynomial a;
};

/// dnum key slices (b_j, a_j) over data primes q_0..q_L followed by the
/// special primes, NTT domain. rotation < 0 marks the relinearization key.
struct EvaluationKey {
    std::vector<RnsPolynomial> b;
    std::vector<RnsPolynomial> a;
    int rotation = -1;

    std::size_t slices() const { return b.size(); }
    std::size_t byte_size() const
    {
        std::size_t s = 0;
        for (std::size_t j = 0; j < b.size(); ++j)
            s += b[j].byte_size() + a[j].byte_size();
        return s;
    }
    friend bool operator==(const EvaluationKey&, const EvaluationKey&) = default;
};

inline Ciphertext drop_last_limb(const Ciphertext& ct)
{
    if (ct.level < 1)
        throw Error(ErrorCode::LevelExhausted, "cannot drop the last remaining limb");
    Ciphertext r;
    r.b = ct.b.prefix(ct.b.limb_count() - 1);
    r.a = ct.a.prefix(ct.a.limb_count() - 1);
    r.level = ct.level - 1;
    r.scale = ct.scale;
    return r;
}

struct Sizes {
    u64 ct_bytes = 0;
    u64 evk_bytes = 0;
    u64 aggregate_evk_bytes = 0;
};

inline Sizes sizes(const CkksInstance& inst, int level)
{
    if (level < 0 || level > inst.L)
        throw Error(ErrorCode::InvalidArgument, "level out of range");
    const u64 n = inst.n, L = inst.L, d = inst.dnum, k = inst.k();
    Sizes s;
    s.ct_bytes = 2 * n * u64(level + 1) * 8;
    s.evk_bytes = 2 * d * n * (k + L + 1) * 8;
    s.aggregate_evk_bytes = 2 * n * (L + 1) * (d + 1) * 8;
    return s;
}

// ---------------------------------------------------------------------------
// Binary container format. All fields little-endian:
//   "BTSF" | u32 version | u32 kind | u64 N | u64 limb_count | u32 domain |
//   i32 level | f64 scale | u32 poly_count | i32 aux | u64 moduli[limb_count] |
//   poly_count * limb_count * N u64 residues
// aux carries the rotation index of an evaluation key and is 0 elsewhere.

enum class ContainerKind : std::uint32_t { Polynomial = 1, Plaintext = 2, Ciphertext = 3, SecretKey = 4, EvaluationKey = 5 };

namespace detail {

class ByteWriter {
public:
    template <class T>
    void put(T v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(buf, buf + sizeof(T));
        out_.insert(out_.end(), buf, buf + sizeof(T));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
    template <class T>
    T get()
    {
        if (pos_ + sizeof(T) > in_.size())
            throw Error(ErrorCode::ParseError, "truncated container");
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, in_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(buf, buf + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

struct Header {
    ContainerKind kind{};
    u64 n = 0;
    u64 limbs = 0;
    Domain domain = Domain::Coefficient;
    std::int32_t level = 0;
    double scale = 0;
    std::uint32_t polys = 0;
    std::int32_t aux = 0;
    std::vector<u64> moduli;
};

inline void write_polys(ByteWriter& w, ContainerKind kind, std::int32_t level, double scale, std::int32_t aux,
                        const std::vector<const RnsPolynomial*>& polys)
{
    const RnsPolynomial& p0 = *polys.front();
    w.put<std::uint32_t>(0x46535442u); // "BTSF"
    w.put<std::uint32_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(kind));
    w.put<u64>(p0.degree());
    w.put<u64>(p0.limb_count());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p0.domain()));
    w.put<std::int32_t>(level);
    w.put<double>(scale);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(polys.size()));
    w.put<std::int32_t>(aux);
    for (const auto& m : p0.moduli())
        w.put<u64>(m.value());
    for (const RnsPolynomial* p : polys) {
        if (p->limb_count() != p0.limb_count() || p->domain() != p0.domain())
            throw Error(ErrorCode::InvalidArgument, "polynomials in one container must share shape");
        for (u64 v : p->raw())
            w.put<u64>(v);
    }
}

inline std::vector<RnsPolynomial> read_polys(ByteReader& r, Header& h, ContainerKind expect)
{
    if (r.get<std::uint32_t>() != 0x46535442u)
        throw Error(ErrorCode::ParseError, "bad magic");
    if (r.get<std::uint32_t>() != 1)
        throw Error(ErrorCode::ParseError, "unsupported version");
    h.kind = static_cast<ContainerKind>(r.get<std::uint32_t>());
    if (h.kind != expect)
        throw Error(ErrorCode::ParseError, "container kind mismatch");
    h.n = r.get<u64>();
    h.limbs = r.get<u64>();
    h.domain = static_cast<Domain>(r.get<std::uint32_t>());
    h.level = r.get<std::int32_t>();
    h.scale = r.get<double>();
    h.polys = r.get<std::uint32_t>();
    h.aux = r.get<std::int32_t>();
    if (!is_power_of_two(h.n) || h.limbs == 0 || h.limbs > 4096)
        throw Error(ErrorCode::ParseError, "implausible header");
    std::vector<PrimeModulus> moduli;
    for (u64 i = 0; i < h.limbs; ++i) {
        u64 q = r.get<u64>();
        h.moduli.push_back(q);
        moduli.emplace_back(q, h.n);
    }
    std::vector<RnsPolynomial> out;
    for (std::uint32_t p = 0; p < h.polys; ++p) {
        RnsPolynomial poly(h.n, moduli, h.domain);
        for (u64& v : poly.raw())
            v = r.get<u64>();
        if (!poly.all_reduced())
            throw Error(ErrorCode::ParseError, "residue not reduced");
        out.push_back(std::move(poly));
    }
    if (!r.done())
        throw Error(ErrorCode::ParseError, "trailing bytes");
    return out;
}

} // namespace detail

inline std::vector<std::uint8_t> serialize(const RnsPolynomial& p)
{
    detail::ByteWriter w;
    detail::write_polys(w, ContainerKind::Polynomial, 0, 0.0, 0, {&p});
    return w.take();
}

inline std::vector<std::uint8_t> serialize(const Plaintext& pt)
{
    detail::ByteWriter w;
    detail::write_polys(w, ContainerKind::Plaintext, pt.level, pt.scale, 0, {&pt.m});
    return w.take();
}

inline std::vector<std::uint8_t> serialize(const Ciphertext& ct)
{
    detail::ByteWriter w;
    detail::write_polys(w, ContainerKind::Ciphertext, ct.level, ct.scale, 0, {&ct.b, &ct.a});
    return w.take();
}

inline std::vector<std::uint8_t> serialize(const SecretKey& sk)
{
    detail::ByteWriter w;
    detail::write_polys(w, ContainerKind::SecretKey, 0, 0.0, 0, {&sk.s});
    return w.take();
}

inline std::vector<std::uint8_t> serialize(const EvaluationKey& evk)
{
    detail::ByteWriter w;
    std::vector<const RnsPolynomial*> polys;
    for (std::size_t j = 0; j < evk.slices(); ++j) {
        polys.push_back(&evk.b[j]);
        polys.push_back(&evk.a[j]);
    }
    detail::write_polys(w, ContainerKind::EvaluationKey, 0, 0.0, evk.rotation, polys);
    return w.take();
}

inline RnsPolynomial deserialize_polynomial(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    detail::Header h;
    auto polys = detail::read_polys(r, h, ContainerKind::Polynomial);
    if (polys.size() != 1)
        throw Error(ErrorCode::ParseError, "expected one polynomial");
    return std::move(polys.front());
}

inline Plaintext deserialize_plaintext(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    detail::Header h;
    auto polys = detail::read_polys(r, h, ContainerKind::Plaintext);
    if (polys.size() != 1)
        throw Error(ErrorCode::ParseError, "expected one polynomial");
    return Plaintext{std::move(polys.front()), h.level, h.scale};
}

inline Ciphertext deserialize_ciphertext(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    detail::Header h;
    auto polys = detail::read_polys(r, h, ContainerKind::Ciphertext);
    if (polys.size() != 2)
        throw Error(ErrorCode::ParseError, "expected two polynomials");
    return Ciphertext{std::move(polys[0]), std::move(polys[1]), h.level, h.scale};
}

inline SecretKey deserialize_secret_key(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    detail::Header h;
    auto polys = detail::read_polys(r, h, ContainerKind::SecretKey);
    if (polys.size() != 1)
        throw Error(ErrorCode::ParseError, "expected one polynomial");
    return SecretKey{std::move(polys.front())};
}

inline EvaluationKey deserialize_evaluation_key(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    detail::Header h;
    auto polys = detail::read_polys(r, h, ContainerKind::EvaluationKey);
    if (polys.empty() || polys.size() % 2 != 0)
        throw Error(ErrorCode::ParseError, "evaluation key needs slice pairs");
    EvaluationKey evk;
    evk.rotation = h.aux;
    for (std::size_t j = 0; j < polys.size(); j += 2) {
        evk.b.push_back(std::move(polys[j]));
        evk.a.push_back(std::move(polys[j + 1]));
    }
    return evk;
}

} // namespace bts
