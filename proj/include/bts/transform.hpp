#pragma once

#include <bts/arith.hpp>
#include <bts/error.hpp>
#include <bts/rns.hpp>

#include <map>
#include <span>
#include <vector>

namespace bts {

// ---------------------------------------------------------------------------
// Negacyclic NTT. Forward is decimation-in-time Cooley-Tukey over bit-reversed
// twiddles (natural in, bit-reversed out); inverse is the matching
// Gentleman-Sande pass followed by the 1/N scaling. Output slot k holds the
// evaluation at xi^(2*bitrev(k)+1).

inline void ntt_inplace(std::span<u64> a, const TwiddleTable& tw)
{
    const PrimeModulus& q = tw.modulus();
    const u64 n = a.size();
    if (n != tw.degree())
        throw Error(ErrorCode::InvalidArgument, "limb length does not match twiddle table");
    const auto& w = tw.factors();
    u64 t = n;
    for (u64 m = 1; m < n; m <<= 1) {
        t >>= 1;
        for (u64 i = 0; i < m; ++i) {
            const u64 j1 = 2 * i * t;
            const u64 s = w[m + i];
            for (u64 j = j1; j < j1 + t; ++j) {
                u64 u = a[j];
                u64 v = q.mul(a[j + t], s);
                a[j] = q.add(u, v);
                a[j + t] = q.sub(u, v);
            }
        }
    }
}

inline void intt_inplace(std::span<u64> a, const TwiddleTable& tw)
{
    const PrimeModulus& q = tw.modulus();
    const u64 n = a.size();
    if (n != tw.degree())
        throw Error(ErrorCode::InvalidArgument, "limb length does not match twiddle table");
    const auto& w = tw.inverse_factors();
    u64 t = 1;
    for (u64 m = n; m > 1; m >>= 1) {
        const u64 h = m >> 1;
        u64 j1 = 0;
        for (u64 i = 0; i < h; ++i) {
            const u64 s = w[h + i];
            for (u64 j = j1; j < j1 + t; ++j) {
                u64 u = a[j];
                u64 v = a[j + t];
                a[j] = q.add(u, v);
                a[j + t] = q.mul(q.sub(u, v), s);
            }
            j1 += 2 * t;
        }
        t <<= 1;
    }
    const u64 ninv = tw.n_inverse();
    for (auto& v : a)
        v = q.mul(v, ninv);
}

inline std::vector<u64> ntt(std::span<const u64> limb, const TwiddleTable& tw)
{
    std::vector<u64> a(limb.begin(), limb.end());
    ntt_inplace(a, tw);
    return a;
}

inline std::vector<u64> intt(std::span<const u64> limb, const TwiddleTable& tw)
{
    std::vector<u64> a(limb.begin(), limb.end());
    intt_inplace(a, tw);
    return a;
}

// ---------------------------------------------------------------------------
// Coefficient-level data mapping over the PE grid.

/// Coefficient i = x + nx*y + nx*ny*z lives on PE (x, y) at slot z.
/// PE ids are x + nx*y; nx is the grid column count and ny the row count.
struct GridMap {
    u64 nx = 64;
    u64 ny = 32;
    u64 nz = 64;

    GridMap() = default;
    GridMap(u64 x, u64 y, u64 z) : nx(x), ny(y), nz(z)
    {
        if (!is_power_of_two(nx) || !is_power_of_two(ny) || !is_power_of_two(nz))
            throw Error(ErrorCode::InvalidArgument, "grid extents must be powers of two");
    }

    /// Grid for degree n on a rows x cols PE array.
    static GridMap for_degree(u64 n, u64 rows = 32, u64 cols = 64)
    {
        if (n % (rows * cols) != 0)
            throw Error(ErrorCode::InvalidArgument, "degree not divisible by PE count");
        return GridMap(cols, rows, n / (rows * cols));
    }

    u64 degree() const { return nx * ny * nz; }
    u64 n_pe() const { return nx * ny; }
    u64 x_of(u64 i) const { return i % nx; }
    u64 y_of(u64 i) const { return (i / nx) % ny; }
    u64 z_of(u64 i) const { return i / (nx * ny); }
    u64 pe_of(u64 i) const { return i % (nx * ny); }
    u64 slot_of(u64 i) const { return z_of(i); }
    u64 index(u64 x, u64 y, u64 z) const { return x + nx * y + nx * ny * z; }
};

/// Placement of one coefficient during the 3D-NTT.
struct PeSlot {
    u64 pe;
    u64 slot;
};

/// Three layouts the 3D-NTT cycles through. Z is the resting layout; Y
/// gathers each column's y-lines into single PEs; X gathers each row's x-lines.
enum class Layout3d { Z, Y, X };

inline PeSlot locate(const GridMap& g, u64 i, Layout3d layout)
{
    const u64 x = g.x_of(i), y = g.y_of(i), z = g.z_of(i);
    if (layout == Layout3d::Z)
        return {x + g.nx * y, z};
    const u64 p = z * g.ny + y;
    const u64 row = p / g.nz;
    if (layout == Layout3d::Y)
        return {x + g.nx * row, p % g.nz};
    const u64 q = p - row * g.nz;
    const u64 pp = q * g.nx + x;
    return {pp / g.nz + g.nx * row, pp % g.nz};
}

struct Transfer {
    u64 src_pe;
    u64 dst_pe;
    u64 count; // residues moved
};

struct Ntt3dTrace {
    std::vector<u64> butterflies_per_pe;
    std::vector<Transfer> vertical;   // yz-plane transpose
    std::vector<Transfer> horizontal; // xz-plane transpose
};

namespace detail {

inline void check_3d_grid(const GridMap& g, u64 n)
{
    if (g.degree() != n)
        throw Error(ErrorCode::InvalidArgument, "grid does not cover the limb");
    if (g.nz % g.nx != 0 || g.nz % g.ny != 0)
        throw Error(ErrorCode::InvalidArgument, "3D-NTT needs nx | nz and ny | nz");
}

/// Per-PE storage with a movable layout; butterflies refuse cross-PE pairs.
class PeStore {
public:
    PeStore(const GridMap& g, Layout3d layout) : g_(g), layout_(layout), data_(g.n_pe(), std::vector<u64>(g.nz)) {}

    void scatter(std::span<const u64> v)
    {
        for (u64 i = 0; i < v.size(); ++i) {
            auto [pe, s] = locate(g_, i, layout_);
            data_[pe][s] = v[i];
        }
    }

    std::vector<u64> gather() const
    {
        std::vector<u64> v(g_.degree());
        for (u64 i = 0; i < v.size(); ++i) {
            auto [pe, s] = locate(g_, i, layout_);
            v[i] = data_[pe][s];
        }
        return v;
    }

    std::vector<Transfer> move_to(Layout3d next)
    {
        std::map<std::pair<u64, u64>, u64> counts;
        std::vector<std::vector<u64>> out(g_.n_pe(), std::vector<u64>(g_.nz));
        for (u64 i = 0; i < g_.degree(); ++i) {
            auto a = locate(g_, i, layout_);
            auto b = locate(g_, i, next);
            out[b.pe][b.slot] = data_[a.pe][a.slot];
            if (a.pe != b.pe)
                ++counts[{a.pe, b.pe}];
        }
        data_ = std::move(out);
        layout_ = next;
        std::vector<Transfer> t;
        for (auto& [k, c] : counts)
            t.push_back({k.first, k.second, c});
        return t;
    }

    std::pair<u64*, u64*> pair(u64 i, u64 j, std::vector<u64>* bf)
    {
        auto a = locate(g_, i, layout_);
        auto b = locate(g_, j, layout_);
        if (a.pe != b.pe)
            throw Error(ErrorCode::ContentionError, "butterfly operands on different PEs");
        if (bf)
            ++(*bf)[a.pe];
        return {&data_[a.pe][a.slot], &data_[b.pe][b.slot]};
    }

private:
    GridMap g_;
    Layout3d layout_;
    std::vector<std::vector<u64>> data_;
};

} // namespace detail

/// Forward NTT executed as NTT_z, yz transpose, NTT_y, xz transpose, NTT_x on
/// per-PE storage. Output matches ntt() bit for bit.
inline std::vector<u64> ntt_3d(std::span<const u64> limb, const GridMap& g, const TwiddleTable& tw,
                               Ntt3dTrace* trace = nullptr)
{
    const u64 n = limb.size();
    detail::check_3d_grid(g, n);
    const PrimeModulus& q = tw.modulus();
    const auto& w = tw.factors();
    std::vector<u64> bf(g.n_pe(), 0);
    detail::PeStore st(g, Layout3d::Z);
    st.scatter(limb);
    const u64 z_stages = log2_exact(g.nz), y_stages = log2_exact(g.ny);
    u64 t = n, stage = 0;
    for (u64 m = 1; m < n; m <<= 1, ++stage) {
        if (stage == z_stages) {
            auto v = st.move_to(Layout3d::Y);
            if (trace)
                trace->vertical = std::move(v);
        }
        if (stage == z_stages + y_stages) {
            auto h = st.move_to(Layout3d::X);
            if (trace)
                trace->horizontal = std::move(h);
        }
        t >>= 1;
        for (u64 i = 0; i < m; ++i) {
            const u64 j1 = 2 * i * t;
            const u64 s = w[m + i];
            for (u64 j = j1; j < j1 + t; ++j) {
                auto [x, y] = st.pair(j, j + t, &bf);
                u64 u = *x;
                u64 v = q.mul(*y, s);
                *x = q.add(u, v);
                *y = q.sub(u, v);
            }
        }
    }
    if (trace)
        trace->butterflies_per_pe = std::move(bf);
    return st.gather();
}

/// Inverse of ntt_3d: NTT_x^-1, xz transpose, NTT_y^-1, yz transpose, NTT_z^-1.
inline std::vector<u64> intt_3d(std::span<const u64> limb, const GridMap& g, const TwiddleTable& tw,
                                Ntt3dTrace* trace = nullptr)
{
    const u64 n = limb.size();
    detail::check_3d_grid(g, n);
    const PrimeModulus& q = tw.modulus();
    const auto& w = tw.inverse_factors();
    std::vector<u64> bf(g.n_pe(), 0);
    detail::PeStore st(g, Layout3d::X);
    st.scatter(limb);
    const u64 x_stages = log2_exact(g.nx), y_stages = log2_exact(g.ny);
    u64 t = 1, stage = 0;
    for (u64 m = n; m > 1; m >>= 1, ++stage) {
        if (stage == x_stages) {
            auto h = st.move_to(Layout3d::Y);
            if (trace)
                trace->horizontal = std::move(h);
        }
        if (stage == x_stages + y_stages) {
            auto v = st.move_to(Layout3d::Z);
            if (trace)
                trace->vertical = std::move(v);
        }
        const u64 h = m >> 1;
        u64 j1 = 0;
        for (u64 i = 0; i < h; ++i) {
            const u64 s = w[h + i];
            for (u64 j = j1; j < j1 + t; ++j) {
                auto [x, y] = st.pair(j, j + t, &bf);
                u64 u = *x;
                u64 v = *y;
                *x = q.add(u, v);
                *y = q.mul(q.sub(u, v), s);
            }
            j1 += 2 * t;
        }
        t <<= 1;
    }
    if (trace)
        trace->butterflies_per_pe = std::move(bf);
    auto out = st.gather();
    for (auto& v : out)
        v = q.mul(v, tw.n_inverse());
    return out;
}

/// Residues each PE sends during one transpose (vertical: Z->Y, horizontal: Y->X).
inline std::vector<u64> transpose_sends(const GridMap& g, bool vertical)
{
    std::vector<u64> sent(g.n_pe(), 0);
    const Layout3d from = vertical ? Layout3d::Z : Layout3d::Y;
    const Layout3d to = vertical ? Layout3d::Y : Layout3d::X;
    for (u64 i = 0; i < g.degree(); ++i) {
        auto a = locate(g, i, from);
        auto b = locate(g, i, to);
        if (a.pe != b.pe)
            ++sent[a.pe];
    }
    return sent;
}

// ---------------------------------------------------------------------------
// Automorphisms.

/// Galois element 5^r mod 2N; negative r rotates right.
inline u64 galois_element(long long r, u64 n)
{
    const long long slots = static_cast<long long>(n / 2);
    long long rr = ((r % slots) + slots) % slots;
    const u64 m = 2 * n;
    u64 g = 1, base = 5 % m;
    for (u64 e = static_cast<u64>(rr); e; e >>= 1) {
        if (e & 1)
            g = static_cast<u64>((u128)g * base % m);
        base = static_cast<u64>((u128)base * base % m);
    }
    return g;
}

/// i * 5^r mod N.
inline u64 automorphism_index(u64 i, long long r, u64 n)
{
    const u64 g = galois_element(r, n) % n;
    return static_cast<u64>((u128)i * g % n);
}

/// Coefficient-domain X -> X^g on one limb, with the negacyclic sign fold.
inline std::vector<u64> automorphism_coeff(std::span<const u64> a, u64 g, const PrimeModulus& q)
{
    const u64 n = a.size();
    std::vector<u64> out(n);
    for (u64 i = 0; i < n; ++i) {
        u64 e = static_cast<u64>((u128)i * g % (2 * n));
        if (e >= n)
            out[e - n] = q.neg(a[i]);
        else
            out[e] = a[i];
    }
    return out;
}

/// NTT-domain X -> X^g: a pure slot permutation of the evaluation points.
inline std::vector<u64> automorphism_ntt(std::span<const u64> a, u64 g)
{
    const u64 n = a.size();
    const unsigned logn = log2_exact(n);
    std::vector<u64> out(n);
    for (u64 k = 0; k < n; ++k) {
        u64 e = 2 * bit_reverse(k, logn) + 1;
        u64 e2 = static_cast<u64>((u128)e * g % (2 * n));
        out[k] = a[bit_reverse((e2 - 1) / 2, logn)];
    }
    return out;
}

inline RnsPolynomial apply_automorphism(const RnsPolynomial& p, long long r)
{
    const u64 g = galois_element(r, p.degree());
    RnsPolynomial out(p.degree(), p.moduli(), p.domain());
    for (std::size_t i = 0; i < p.limb_count(); ++i) {
        auto v = p.domain() == Domain::Ntt ? automorphism_ntt(p.limb(i), g)
                                           : automorphism_coeff(p.limb(i), g, p.modulus(i));
        std::copy(v.begin(), v.end(), out.limb(i).begin());
    }
    return out;
}

/// Automorphism split into an intra-PE z permutation, a per-column vertical
/// permutation and a per-row horizontal permutation.
struct PermutationRoute {
    long long rotation = 0;
    GridMap map;
    std::vector<std::vector<u64>> intra_pe;       // [pe][z] -> destination z
    std::vector<std::vector<std::uint8_t>> sign;  // [pe][z] -> 1 when negated
    std::vector<std::vector<u64>> vertical;       // [column x][row y] -> destination row
    std::vector<std::vector<u64>> horizontal;     // [row y][column x] -> destination column

    u64 apply(u64 i) const
    {
        const u64 x = map.x_of(i), y = map.y_of(i), z = map.z_of(i);
        const u64 pe = x + map.nx * y;
        const u64 z2 = intra_pe[pe][z];
        const u64 y2 = vertical[x][y];
        const u64 x2 = horizontal[y2][x];
        return map.index(x2, y2, z2);
    }
};

inline PermutationRoute decompose_permutation(long long r, const GridMap& g)
{
    const u64 n = g.degree();
    const u64 g2n = galois_element(r, n);
    const u64 gn = g2n % n;
    const u64 plane = g.nx * g.ny;
    PermutationRoute route;
    route.rotation = r;
    route.map = g;
    route.intra_pe.assign(g.n_pe(), std::vector<u64>(g.nz));
    route.sign.assign(g.n_pe(), std::vector<std::uint8_t>(g.nz));
    route.vertical.assign(g.nx, std::vector<u64>(g.ny));
    route.horizontal.assign(g.ny, std::vector<u64>(g.nx));
    for (u64 y = 0; y < g.ny; ++y) {
        for (u64 x = 0; x < g.nx; ++x) {
            const u64 a = static_cast<u64>((u128)(x + g.nx * y) * gn % n);
            const u64 lo = a % plane, hi = a / plane;
            const u64 pe = x + g.nx * y;
            for (u64 z = 0; z < g.nz; ++z) {
                route.intra_pe[pe][z] = (hi + z * gn) % g.nz;
                const u64 i = g.index(x, y, z);
                route.sign[pe][z] = static_cast<u64>((u128)i * g2n % (2 * n)) >= n;
            }
            route.vertical[x][y] = lo / g.nx;
        }
    }
    for (u64 y = 0; y < g.ny; ++y)
        for (u64 x = 0; x < g.nx; ++x)
            route.horizontal[y][x] = (x * gn) % g.nx;
    return route;
}

inline bool is_permutation(const std::vector<u64>& m)
{
    std::vector<bool> seen(m.size(), false);
    for (u64 v : m) {
        if (v >= m.size() || seen[v])
            return false;
        seen[v] = true;
    }
    return true;
}

} // namespace bts
