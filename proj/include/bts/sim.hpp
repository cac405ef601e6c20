#pragma once

// Epoch-granular performance model of the accelerator. HE ops are expanded
// into tasks on exclusive resources (NTTU pipeline, the two NoC directions,
// BConv ModMult, MMAU, elementwise units, HBM, exchange unit) and replayed by
// a deterministic list scheduler. Time is in cycles of the NTTU clock.
//
// Memory model: every task touches a set of buffers. Temporaries and
// prefetched evk limbs live until their last reader completes. Named
// ciphertexts are cached in the scratchpad with LRU replacement; an op pins
// the ciphertexts it is using, misses are loaded from HBM and dirty victims
// are written back before their space is reused.

#include <bts/hwconfig.hpp>
#include <bts/instance.hpp>
#include <bts/params.hpp>
#include <bts/schedule.hpp>
#include <bts/trace.hpp>
#include <bts/transform.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace bts {

enum class Resource { Nttu, NocV, NocH, BconvMul, Mmau, ModMult, ModAdd, Hbm, Exchange, None };
inline constexpr int kResourceCount = 9; // excludes None

inline const char* resource_name(Resource r)
{
    switch (r) {
    case Resource::Nttu: return "NTTU";
    case Resource::NocV: return "NOC_V";
    case Resource::NocH: return "NOC_H";
    case Resource::BconvMul: return "BCONV_MODMULT";
    case Resource::Mmau: return "MMAU";
    case Resource::ModMult: return "MODMULT";
    case Resource::ModAdd: return "MODADD";
    case Resource::Hbm: return "HBM";
    case Resource::Exchange: return "EXCHANGE";
    case Resource::None: return "NONE";
    }
    return "?";
}

enum class MemCategory { Temp, Evk, Ct };

struct SimTask {
    int op = 0;
    Resource res = Resource::None;
    u64 cycles = 0;
    const char* kind = "";
    std::vector<int> deps;
    std::vector<int> buffers; // touched buffers, allocated on first touch
    u64 hbm_bytes = 0;
    u64 spad_bytes = 0;
};

struct SimBuffer {
    u64 bytes = 0;
    MemCategory cat = MemCategory::Temp;
    bool cache_hold = false;   // final version of a named ciphertext: kept after its last reader
    bool starts_in_hbm = false;
    bool starts_resident = false;
};

struct OpInfo {
    TraceOpKind kind = TraceOpKind::Decl;
    int level = 0;
    int trace_line = 0;
    bool in_boot = false;
};

struct OpGraph {
    std::vector<SimTask> tasks;
    std::vector<SimBuffer> buffers;
    std::vector<OpInfo> ops;
};

// ---------------------------------------------------------------------------
// Per-limb costs

/// Cycles for a NoC stage that moves `bytes_per_pe` through each port.
inline u64 noc_transfer_cycles(double bytes_per_pe, const HardwareConfig& hw)
{
    if (bytes_per_pe <= 0)
        return 0;
    return static_cast<u64>(std::ceil(bytes_per_pe * 8.0 / hw.noc_port_bits * hw.clock() / hw.noc_freq - 1e-9));
}

/// Cycles of one 3D-NTT transpose stage: every PE keeps 1/extent of its
/// residues and sends the rest through its row or column crossbar.
inline u64 noc_transpose_cycles(u64 n, const HardwareConfig& hw, bool vertical)
{
    const double per_pe = static_cast<double>(n) / hw.n_pe();
    const int extent = vertical ? hw.rows : hw.cols;
    return noc_transfer_cycles(per_pe * 8.0 * (1.0 - 1.0 / extent), hw);
}

struct PermutationCost {
    u64 exchange = 0;
    u64 vertical = 0;
    u64 horizontal = 0;
};

/// Cost of one limb of an automorphism. Each stage moves a PE's whole
/// residue set or nothing, so a stage costs one full-PE transfer if any PE
/// moves. The route is validated to be a permutation.
inline PermutationCost noc_permutation_cost(long long r, u64 n, const HardwareConfig& hw)
{
    PermutationCost c;
    if (r % static_cast<long long>(n / 2) == 0)
        return c;
    const double per_pe = static_cast<double>(n) / hw.n_pe();
    const u64 full = noc_transfer_cycles(per_pe * 8.0, hw);
    c.exchange = static_cast<u64>(std::ceil(per_pe));
    try {
        const GridMap g = GridMap::for_degree(n, hw.rows, hw.cols);
        const PermutationRoute route = decompose_permutation(r, g);
        bool v = false, h = false;
        for (const auto& col : route.vertical) {
            if (!is_permutation(col))
                throw Error(ErrorCode::ContentionError, "vertical stage is not a permutation");
            for (u64 y = 0; y < col.size(); ++y)
                v = v || col[y] != y;
        }
        for (const auto& row : route.horizontal) {
            if (!is_permutation(row))
                throw Error(ErrorCode::ContentionError, "horizontal stage is not a permutation");
            for (u64 x = 0; x < row.size(); ++x)
                h = h || row[x] != x;
        }
        c.vertical = v ? full : 0;
        c.horizontal = h ? full : 0;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ContentionError)
            throw;
        c.vertical = c.horizontal = full; // grid does not tile this degree
    }
    return c;
}

struct LimbCosts {
    u64 ntt_z = 0, ntt_y = 0, ntt_x = 0;
    u64 noc_v = 0, noc_h = 0;
    u64 modmult = 0, modadd = 0;
    u64 bconv_mul = 0;
    u64 mmau = 0; // one output limb of a BConv group, or one SSA limb
    u64 limb_bytes = 0;

    u64 epoch() const { return ntt_z + ntt_y + ntt_x; }

    static LimbCosts make(u64 n, const HardwareConfig& hw)
    {
        if (n < static_cast<u64>(hw.n_pe()) || n % hw.n_pe() != 0)
            throw Error(ErrorCode::InvalidInstance, "N must be a multiple of the PE count");
        const double per_pe = static_cast<double>(n) / hw.n_pe();
        auto cyc = [&](double work, double freq) { return static_cast<u64>(std::ceil(work * hw.clock() / freq - 1e-9)); };
        LimbCosts c;
        const double half = per_pe / 2.0;
        c.ntt_z = cyc(half * std::log2(per_pe), hw.freq_nttu);
        c.ntt_y = cyc(half * std::log2(hw.rows), hw.freq_nttu);
        c.ntt_x = cyc(half * std::log2(hw.cols), hw.freq_nttu);
        c.noc_v = noc_transpose_cycles(n, hw, true);
        c.noc_h = noc_transpose_cycles(n, hw, false);
        c.modmult = cyc(per_pe, hw.freq_modmult);
        c.modadd = cyc(per_pe, hw.freq_modadd);
        c.bconv_mul = cyc(per_pe, hw.freq_bconv_modmult);
        c.mmau = cyc(per_pe, hw.freq_mmau);
        c.limb_bytes = n * 8;
        return c;
    }
};

inline u64 hbm_cycles(double bytes, const HardwareConfig& hw)
{
    return static_cast<u64>(std::ceil(bytes / (hw.hbm_bw * hw.hbm_efficiency) * hw.clock() - 1e-9));
}

// ---------------------------------------------------------------------------
// Expansion

namespace detail {

class GraphBuilder {
public:
    GraphBuilder(const CkksInstance& inst, const HardwareConfig& hw, const BootSchedule& sched)
        : inst_(inst), hw_(hw), sched_(sched), c_(LimbCosts::make(inst.n, hw))
    {
    }

    struct Value {
        int buf = -1;
        int ready = -1; // task after which the value is complete; -1 when it exists at start
        int level = 0;
    };

    OpGraph build(const Trace& trace)
    {
        const auto levels = check_trace(trace, inst_, sched_.l_boot);
        // The last write of each name is kept in the cache after its readers.
        std::map<std::string, std::size_t> last_write;
        for (std::size_t i = 0; i < trace.size(); ++i)
            last_write[trace[i].output] = i;

        for (std::size_t i = 0; i < trace.size(); ++i) {
            const TraceOp& op = trace[i];
            line_ = op.line;
            Value out;
            if (op.kind == TraceOpKind::Decl) {
                out.buf = buffer(ct_bytes(op.level), MemCategory::Ct);
                g_.buffers[out.buf].starts_resident = op.resident;
                g_.buffers[out.buf].starts_in_hbm = !op.resident;
                out.level = op.level;
            } else if (op.kind == TraceOpKind::Boot) {
                out = boot(values_.at(op.inputs[0]));
            } else {
                std::vector<Value> in;
                for (const auto& n : op.inputs)
                    in.push_back(values_.at(n));
                out = he_op(op.kind, in, op.rotation, false);
            }
            (void)levels;
            g_.buffers[out.buf].cache_hold = last_write[op.output] == i;
            values_[op.output] = out;
        }
        return std::move(g_);
    }

    /// Expand one op on resident operands at `level`.
    OpGraph build_single(TraceOpKind kind, int level, long long rotation)
    {
        if (kind == TraceOpKind::Decl || kind == TraceOpKind::Boot)
            throw Error(ErrorCode::UnsupportedOp, std::string(trace_op_name(kind)) + " is not a single HE op");
        if (level < 0 || level > inst_.L)
            throw Error(ErrorCode::InvalidArgument, "level out of range");
        Value a{buffer(ct_bytes(level), MemCategory::Ct), -1, level};
        Value b{buffer(ct_bytes(level), MemCategory::Ct), -1, level};
        g_.buffers[a.buf].starts_resident = g_.buffers[b.buf].starts_resident = true;
        std::vector<Value> in = {a};
        if (kind == TraceOpKind::HMult || kind == TraceOpKind::HAdd)
            in.push_back(b);
        Value out = he_op(kind, in, rotation, false);
        g_.buffers[out.buf].cache_hold = true;
        return std::move(g_);
    }

private:
    const CkksInstance& inst_;
    const HardwareConfig& hw_;
    const BootSchedule& sched_;
    LimbCosts c_;
    OpGraph g_;
    std::map<std::string, Value> values_;
    std::map<long long, PermutationCost> perm_cache_;
    int op_ = -1;
    int line_ = 0;
    int last_evk_load_ = -1;
    long long boot_rot_counter_ = 0;

    u64 ct_bytes(int level) const { return 2 * c_.limb_bytes * static_cast<u64>(level + 1); }

    int buffer(u64 bytes, MemCategory cat)
    {
        SimBuffer b;
        b.bytes = bytes;
        b.cat = cat;
        g_.buffers.push_back(b);
        return static_cast<int>(g_.buffers.size()) - 1;
    }

    int limb_buffer() { return buffer(c_.limb_bytes, MemCategory::Temp); }

    int task(Resource r, u64 cycles, const char* kind, std::vector<int> deps, std::vector<int> bufs,
             u64 spad_limbs = 0)
    {
        SimTask t;
        t.op = op_;
        t.res = r;
        t.cycles = cycles;
        t.kind = kind;
        for (int d : deps)
            if (d >= 0)
                t.deps.push_back(d);
        std::sort(t.deps.begin(), t.deps.end());
        t.deps.erase(std::unique(t.deps.begin(), t.deps.end()), t.deps.end());
        t.buffers = std::move(bufs);
        std::sort(t.buffers.begin(), t.buffers.end());
        t.buffers.erase(std::unique(t.buffers.begin(), t.buffers.end()), t.buffers.end());
        t.spad_bytes = spad_limbs * c_.limb_bytes;
        g_.tasks.push_back(std::move(t));
        return static_cast<int>(g_.tasks.size()) - 1;
    }

    int begin_op(TraceOpKind kind, int level, bool in_boot)
    {
        g_.ops.push_back(OpInfo{kind, level, line_, in_boot});
        op_ = static_cast<int>(g_.ops.size()) - 1;
        return op_;
    }

    /// (i)NTT of one limb at epoch granularity: one epoch of NTTU time (the
    /// limb's share of the z/y/x butterfly stages that the pipeline
    /// interleaves with neighbouring limbs) followed by its two transposes on
    /// the column and row crossbars. Returns the last task.
    int ntt_job(std::vector<int> deps, std::vector<int> bufs, bool inverse)
    {
        int t = task(Resource::Nttu, c_.epoch(), inverse ? "intt.epoch" : "ntt.epoch", deps, bufs, 1);
        if (inverse) {
            t = task(Resource::NocH, c_.noc_h, "noc.h", {t}, {});
            return task(Resource::NocV, c_.noc_v, "noc.v", {t}, bufs);
        }
        t = task(Resource::NocV, c_.noc_v, "noc.v", {t}, {});
        return task(Resource::NocH, c_.noc_h, "noc.h", {t}, bufs);
    }

    int evk_load(int buf)
    {
        const u64 bytes = g_.buffers[buf].bytes;
        const int t = task(Resource::Hbm, hbm_cycles(static_cast<double>(bytes), hw_), "evk.load", {last_evk_load_},
                           {buf});
        g_.tasks[t].hbm_bytes = bytes;
        g_.tasks[t].spad_bytes = bytes;
        last_evk_load_ = t;
        return t;
    }

    int pt_load(int level)
    {
        const int buf = buffer(c_.limb_bytes * static_cast<u64>(level + 1), MemCategory::Temp);
        const u64 bytes = g_.buffers[buf].bytes;
        const int t = task(Resource::Hbm, hbm_cycles(static_cast<double>(bytes), hw_), "pt.load", {}, {buf});
        g_.tasks[t].hbm_bytes = bytes;
        g_.tasks[t].spad_bytes = bytes;
        return t;
    }

    struct Limb {
        int task = -1;
        int buf = -1;
    };

    /// BConv of `src` limbs into `out_count` fresh limbs: part 1 per input
    /// limb, part 2 per group of l_sub inputs (groups accumulate in order).
    /// Returns the last group task and the output buffers.
    std::pair<int, std::vector<int>> bconv(const std::vector<Limb>& src, int out_count)
    {
        std::vector<int> outs;
        for (int m = 0; m < out_count; ++m)
            outs.push_back(limb_buffer());
        int prev = -1;
        const std::size_t l_sub = static_cast<std::size_t>(hw_.l_sub);
        for (std::size_t first = 0; first < src.size(); first += l_sub) {
            std::vector<int> deps = {prev};
            std::vector<int> bufs = outs;
            for (std::size_t i = first; i < std::min(first + l_sub, src.size()); ++i) {
                deps.push_back(task(Resource::BconvMul, c_.bconv_mul, "bconv.mul", {src[i].task}, {src[i].buf}, 2));
                bufs.push_back(src[i].buf);
            }
            const u64 group = std::min(first + l_sub, src.size()) - first;
            prev = task(Resource::Mmau, c_.mmau * static_cast<u64>(out_count), "bconv.mac", deps, bufs,
                        group + static_cast<u64>(out_count));
        }
        return {prev, outs};
    }

    struct KsResult {
        std::vector<int> ip_last[2];     // per data limb: final accumulation task (b, a)
        std::vector<int> acc[2];         // per data limb: accumulator buffer
        std::vector<Limb> moddown[2];    // per data limb: converted special part
        int moddown_start[2] = {-1, -1}; // first BConv group of each ModDown
    };

    /// ModUp, inner product with the evk and ModDown of d2 at `level`.
    KsResult key_switch(const std::vector<Limb>& d2, int level)
    {
        const int nl = level + 1;
        const int k = inst_.k();
        const int alpha = k;
        const int dnum = inst_.dnum;
        const int ext = nl + k;

        // Evk limb pairs, specials first so ModDown can start early.
        std::vector<std::vector<int>> evk_buf(dnum, std::vector<int>(ext, -1)), evk_task = evk_buf;
        auto load = [&](int j, int e) {
            evk_buf[j][e] = buffer(2 * c_.limb_bytes, MemCategory::Evk);
            evk_task[j][e] = evk_load(evk_buf[j][e]);
        };
        for (int e = nl; e < ext; ++e)
            for (int j = 0; j < dnum; ++j)
                load(j, e);
        for (int e = 0; e < nl; ++e)
            for (int j = 0; j < dnum; ++j)
                load(j, e);

        KsResult r;
        std::vector<int> acc_b(ext), acc_a(ext), last_ip(ext, -1);
        for (int e = 0; e < ext; ++e) {
            acc_b[e] = limb_buffer();
            acc_a[e] = limb_buffer();
        }
        for (int j = 0; j < dnum; ++j) {
            const int lo = j * alpha;
            if (lo > level) {
                // Loaded with the rest of the key but unused at this level.
                for (int e = 0; e < ext; ++e)
                    task(Resource::None, 0, "evk.drop", {evk_task[j][e]}, {evk_buf[j][e]});
                continue;
            }
            const int hi = std::min(lo + alpha, nl);
            std::vector<Limb> own_coeff;
            for (int i = lo; i < hi; ++i) {
                const int cb = limb_buffer();
                own_coeff.push_back({ntt_job({d2[i].task}, {d2[i].buf, cb}, true), cb});
            }
            const int out_count = ext - (hi - lo);
            auto [group_last, targets] = bconv(own_coeff, out_count);
            std::vector<Limb> conv(ext);
            int m = 0;
            for (int e = 0; e < ext; ++e) {
                if (e >= lo && e < hi) {
                    conv[e] = d2[e];
                } else {
                    conv[e] = {ntt_job({group_last}, {targets[m]}, false), targets[m]};
                    ++m;
                }
            }
            for (int e = 0; e < ext; ++e) {
                int t = task(Resource::ModMult, 2 * c_.modmult, "ip.mult", {conv[e].task, evk_task[j][e], last_ip[e]},
                             {conv[e].buf, evk_buf[j][e], acc_b[e], acc_a[e]}, 7);
                if (last_ip[e] >= 0)
                    t = task(Resource::ModAdd, 2 * c_.modadd, "ip.acc", {t}, {acc_b[e], acc_a[e]}, 4);
                last_ip[e] = t;
            }
        }

        for (int p = 0; p < 2; ++p) {
            const std::vector<int>& acc = p == 0 ? acc_b : acc_a;
            std::vector<Limb> special;
            for (int e = nl; e < ext; ++e)
                special.push_back({ntt_job({last_ip[e]}, {acc[e]}, true), acc[e]});
            auto [group_last, outs] = bconv(special, nl);
            // The first BConv group marks when ModDown output space is live.
            r.moddown_start[p] = group_last;
            for (int i = 0; i < nl; ++i)
                r.moddown[p].push_back({ntt_job({group_last}, {outs[i]}, false), outs[i]});
            for (int i = 0; i < nl; ++i) {
                r.ip_last[p].push_back(last_ip[i]);
                r.acc[p].push_back(acc[i]);
            }
        }
        return r;
    }

    /// Final SSA per limb into a fresh ciphertext; returns the value.
    Value ssa_output(const KsResult& ks, const std::vector<Limb> addend[2], int level)
    {
        const int nl = level + 1;
        Value out;
        out.buf = buffer(ct_bytes(level), MemCategory::Ct);
        out.level = level;
        std::vector<int> ends;
        for (int p = 0; p < 2; ++p) {
            for (int i = 0; i < nl; ++i) {
                std::vector<int> bufs = {ks.acc[p][i], ks.moddown[p][i].buf, out.buf};
                std::vector<int> deps = {ks.ip_last[p][i], ks.moddown[p][i].task};
                if (!addend[p].empty()) {
                    bufs.push_back(addend[p][i].buf);
                    deps.push_back(addend[p][i].task);
                }
                ends.push_back(task(Resource::Mmau, c_.mmau, "ssa", deps, bufs, 4));
            }
        }
        out.ready = task(Resource::None, 0, "op.done", ends, {});
        return out;
    }

    Value he_op(TraceOpKind kind, const std::vector<Value>& in, long long rotation, bool in_boot)
    {
        const int level = in[0].level;
        begin_op(kind, level, in_boot);
        const int nl = level + 1;
        const Value& x = in[0];
        switch (kind) {
        case TraceOpKind::HMult: {
            const Value& y = in[1];
            std::vector<Limb> d2;
            for (int i = 0; i < nl; ++i) {
                const int b = limb_buffer();
                d2.push_back({task(Resource::ModMult, c_.modmult, "tensor.d2", {x.ready, y.ready}, {x.buf, y.buf, b}, 3),
                              b});
            }
            KsResult ks = key_switch(d2, level);
            std::vector<Limb> addend[2];
            for (int i = 0; i < nl; ++i) {
                const int b0 = limb_buffer(), b1 = limb_buffer();
                addend[0].push_back({task(Resource::ModMult, c_.modmult, "tensor.d0",
                                          {x.ready, y.ready, ks.moddown_start[0]}, {x.buf, y.buf, b0}, 3),
                                     b0});
                int t = task(Resource::ModMult, 2 * c_.modmult, "tensor.d1", {x.ready, y.ready, ks.moddown_start[1]},
                             {x.buf, y.buf, b1}, 4);
                addend[1].push_back({task(Resource::ModAdd, c_.modadd, "tensor.d1add", {t}, {b1}, 3), b1});
            }
            return ssa_output(ks, addend, level);
        }
        case TraceOpKind::HRot: {
            const long long n2 = static_cast<long long>(inst_.n / 2);
            const long long r = ((rotation % n2) + n2) % n2;
            auto it = perm_cache_.find(r);
            if (it == perm_cache_.end())
                it = perm_cache_.emplace(r, noc_permutation_cost(r, inst_.n, hw_)).first;
            const PermutationCost pc = it->second;
            std::vector<Limb> permuted[2];
            for (int p = 0; p < 2; ++p) {
                for (int i = 0; i < nl; ++i) {
                    if (r == 0) {
                        permuted[p].push_back({x.ready, x.buf});
                        continue;
                    }
                    const int b = limb_buffer();
                    int t = task(Resource::Exchange, pc.exchange, "perm.local", {x.ready}, {x.buf, b}, 2);
                    if (pc.vertical)
                        t = task(Resource::NocV, pc.vertical, "perm.v", {t}, {});
                    if (pc.horizontal)
                        t = task(Resource::NocH, pc.horizontal, "perm.h", {t}, {b});
                    permuted[p].push_back({t, b});
                }
            }
            KsResult ks = key_switch(permuted[1], level);
            std::vector<Limb> addend[2] = {permuted[0], {}};
            return ssa_output(ks, addend, level);
        }
        case TraceOpKind::Rescale: {
            if (level < 1)
                throw Error(ErrorCode::TraceError, "RESCALE at level 0");
            Value out;
            out.buf = buffer(ct_bytes(level - 1), MemCategory::Ct);
            out.level = level - 1;
            std::vector<int> ends;
            for (int p = 0; p < 2; ++p) {
                const int top = limb_buffer();
                const int inv = ntt_job({x.ready}, {x.buf, top}, true);
                for (int i = 0; i < level; ++i) {
                    const int tmp = limb_buffer();
                    int t = ntt_job({inv}, {top, tmp}, false);
                    t = task(Resource::ModAdd, c_.modadd, "rescale.sub", {t}, {x.buf, tmp}, 3);
                    ends.push_back(task(Resource::ModMult, c_.modmult, "rescale.scale", {t}, {tmp, out.buf}, 2));
                }
            }
            out.ready = task(Resource::None, 0, "op.done", ends, {});
            return out;
        }
        case TraceOpKind::HAdd:
        case TraceOpKind::PAdd:
        case TraceOpKind::PMult:
        case TraceOpKind::CAdd:
        case TraceOpKind::CMult: {
            Value out;
            out.buf = buffer(ct_bytes(level), MemCategory::Ct);
            out.level = level;
            const bool plain = kind == TraceOpKind::PAdd || kind == TraceOpKind::PMult;
            int pt = -1, pt_buf = -1;
            if (plain) {
                pt = pt_load(level);
                pt_buf = g_.tasks[pt].buffers[0];
            }
            const bool mult = kind == TraceOpKind::PMult || kind == TraceOpKind::CMult;
            // Additions of a plaintext or constant touch only the b polynomial.
            const int polys = (kind == TraceOpKind::PAdd || kind == TraceOpKind::CAdd) ? 1 : 2;
            std::vector<int> ends;
            for (int p = 0; p < polys; ++p) {
                for (int i = 0; i < nl; ++i) {
                    std::vector<int> bufs = {x.buf, out.buf};
                    std::vector<int> deps = {x.ready};
                    if (kind == TraceOpKind::HAdd) {
                        bufs.push_back(in[1].buf);
                        deps.push_back(in[1].ready);
                    }
                    if (plain) {
                        bufs.push_back(pt_buf);
                        deps.push_back(pt);
                    }
                    ends.push_back(task(mult ? Resource::ModMult : Resource::ModAdd, mult ? c_.modmult : c_.modadd,
                                        mult ? "elem.mult" : "elem.add", deps, bufs, 3));
                }
            }
            if (polys == 1) // the a polynomial is carried over
                ends.push_back(task(Resource::None, 0, "elem.copy", {x.ready}, {x.buf, out.buf}));
            out.ready = task(Resource::None, 0, "op.done", ends, {});
            return out;
        }
        default:
            throw Error(ErrorCode::UnsupportedOp, std::string(trace_op_name(kind)) + " cannot be expanded");
        }
    }

    /// Bootstrapping as the schedule's op census on a running ciphertext,
    /// starting at level L after modulus raising.
    Value boot(Value cur)
    {
        cur.level = inst_.L;
        const int log_slots = static_cast<int>(inst_.log_n()) - 1;
        for (int off = 0; off < sched_.l_boot; ++off) {
            static constexpr HeOpKind order[] = {HeOpKind::HRot, HeOpKind::HMult, HeOpKind::PMult, HeOpKind::PAdd,
                                                 HeOpKind::CMult, HeOpKind::HAdd,  HeOpKind::CAdd,  HeOpKind::Rescale};
            for (HeOpKind k : order) {
                const int count = sched_.count_at(off, k);
                for (int c = 0; c < count; ++c) {
                    const TraceOpKind tk = *to_trace_kind(k);
                    std::vector<Value> in = {cur};
                    if (tk == TraceOpKind::HMult || tk == TraceOpKind::HAdd)
                        in.push_back(cur);
                    long long rot = 0;
                    if (tk == TraceOpKind::HRot)
                        rot = 1LL << (boot_rot_counter_++ % log_slots);
                    if (tk == TraceOpKind::HMult && cur.level < 1)
                        throw Error(ErrorCode::TraceError, "bootstrapping schedule multiplies at level 0");
                    cur = he_op(tk, in, rot, true);
                }
            }
        }
        return cur;
    }
};

} // namespace detail

inline OpGraph expand_trace(const Trace& trace, const CkksInstance& inst, const HardwareConfig& hw,
                            const BootSchedule& sched)
{
    return detail::GraphBuilder(inst, hw, sched).build(trace);
}

/// Graph of one HE op on scratchpad-resident operands.
inline OpGraph expand(TraceOpKind kind, int level, const CkksInstance& inst, const HardwareConfig& hw,
                      long long rotation = 1)
{
    const BootSchedule sched = default_schedule();
    return detail::GraphBuilder(inst, hw, sched).build_single(kind, level, rotation);
}

// ---------------------------------------------------------------------------
// Scheduling

enum class SchedulePolicy {
    /// Older ops first, then declaration order: temporaries of the op that
    /// started first are released first.
    OldestOpFirst,
    /// Pure declaration order of tasks.
    DeclarationOrder,
};

struct TimelineRecord {
    u64 start = 0;
    u64 end = 0;
    Resource res = Resource::None;
    int op = 0;
    const char* kind = "";
    int task = 0;
};

struct MemEvent {
    u64 time = 0;
    u64 temp = 0;
    u64 evk = 0;
    u64 ct = 0;
    u64 total() const { return temp + evk + ct; }
};

struct SimReport {
    u64 total_cycles = 0;
    double seconds = 0;
    std::array<u64, kResourceCount> busy_cycles{};
    u64 hbm_bytes = 0;
    u64 spad_bytes = 0;
    u64 peak_bytes = 0;
    u64 peak_temp = 0;
    u64 peak_evk = 0;
    u64 peak_ct = 0;
    u64 capacity = 0;
    u64 ct_hits = 0;
    u64 ct_misses = 0;
    u64 ct_writebacks = 0;
    int he_ops = 0;
    int hmult_outside_boot = 0;
    int boots = 0;
    u64 degree = 0;
    std::vector<std::pair<std::string, double>> energy; // joules per component
    std::vector<TimelineRecord> timeline;
    std::vector<MemEvent> memory;
    std::vector<u64> task_end; // per task

    double busy_fraction(Resource r) const
    {
        return total_cycles ? static_cast<double>(busy_cycles[static_cast<int>(r)]) / total_cycles : 0.0;
    }
    double energy_total() const
    {
        double e = 0;
        for (const auto& [k, v] : energy)
            e += v;
        return e;
    }
    std::optional<double> tmult_a_slot() const
    {
        if (hmult_outside_boot == 0)
            return std::nullopt;
        return seconds / hmult_outside_boot * 2.0 / static_cast<double>(degree);
    }
};

namespace detail {

class Scheduler {
public:
    Scheduler(const OpGraph& g, const HardwareConfig& hw, SchedulePolicy policy)
        : g_(g), hw_(hw), policy_(policy), capacity_(static_cast<u64>(hw.scratchpad_bytes))
    {
    }

    SimReport run()
    {
        tasks_.assign(g_.tasks.begin(), g_.tasks.end());
        init();
        u64 now = 0;
        while (true) {
            dispatch(now);
            if (running_.empty()) {
                if (done_count_ == tasks_.size())
                    break;
                throw Error(ErrorCode::CapacityError,
                            "scheduler stalled: live data does not fit in the scratchpad (" + std::to_string(used()) +
                                " of " + std::to_string(capacity_) + " bytes in use)");
            }
            now = running_.top().first;
            while (!running_.empty() && running_.top().first == now) {
                const int t = running_.top().second;
                running_.pop();
                complete(t, now);
            }
        }
        report_.total_cycles = 0;
        for (u64 e : report_.task_end)
            report_.total_cycles = std::max(report_.total_cycles, e);
        report_.seconds = static_cast<double>(report_.total_cycles) / hw_.clock();
        report_.capacity = capacity_;
        audit();
        return std::move(report_);
    }

private:
    enum class BufState { Absent, InHbm, Loading, Resident, Storing };

    struct BufRt {
        BufState state = BufState::Absent;
        int refs_left = 0;
        bool dirty = false;
        u64 last_use = 0;
        u64 lru_seq = 0;
        int pins = 0;
        bool load_pending = false;
        std::map<int, std::pair<bool, int>> op_refs; // op -> (started, remaining)
    };

    using Key = std::tuple<long long, long long, int>;

    const OpGraph& g_;
    const HardwareConfig& hw_;
    SchedulePolicy policy_;
    u64 capacity_;
    std::deque<SimTask> tasks_; // stable references while loads and stores are appended
    std::vector<int> deps_left_;
    std::vector<std::vector<int>> dependents_;
    std::vector<bool> started_, done_;
    std::vector<BufRt> bufs_;
    std::array<std::set<std::pair<Key, int>>, kResourceCount + 1> ready_;
    std::array<bool, kResourceCount + 1> busy_{};
    std::vector<u64> ready_time_;
    std::priority_queue<std::pair<u64, int>, std::vector<std::pair<u64, int>>, std::greater<>> running_;
    std::size_t done_count_ = 0;
    std::array<u64, 3> used_{}; // per MemCategory
    u64 lru_clock_ = 0;
    std::vector<int> waiting_loads_;
    SimReport report_;

    u64 used() const { return used_[0] + used_[1] + used_[2]; }

    // Ciphertext loads and writebacks go ahead of everything else on HBM:
    // they gate work that is already due.
    Key key(int t) const
    {
        const std::string_view kind(tasks_[t].kind);
        const bool ct_traffic = kind == "ct.load" || kind == "ct.store";
        if (policy_ == SchedulePolicy::DeclarationOrder)
            return {ct_traffic ? -1 : t, 0, t};
        return {tasks_[t].op, ct_traffic ? -1 : t, t};
    }

    void init()
    {
        const std::size_t n = tasks_.size();
        deps_left_.assign(n, 0);
        dependents_.assign(n, {});
        started_.assign(n, false);
        done_.assign(n, false);
        ready_time_.assign(n, 0);
        report_.task_end.assign(n, 0);
        bufs_.assign(g_.buffers.size(), {});
        for (std::size_t t = 0; t < n; ++t) {
            deps_left_[t] = static_cast<int>(tasks_[t].deps.size());
            for (int d : tasks_[t].deps)
                dependents_[d].push_back(static_cast<int>(t));
            for (int b : tasks_[t].buffers) {
                ++bufs_[b].refs_left;
                ++bufs_[b].op_refs[tasks_[t].op].second;
            }
        }
        for (std::size_t b = 0; b < g_.buffers.size(); ++b) {
            const SimBuffer& sb = g_.buffers[b];
            if (sb.starts_resident) {
                bufs_[b].state = BufState::Resident;
                touch(static_cast<int>(b), 0);
                change(sb.cat, static_cast<long long>(sb.bytes), 0);
            } else if (sb.starts_in_hbm) {
                bufs_[b].state = BufState::InHbm;
            }
        }
        if (used() > capacity_)
            throw Error(ErrorCode::CapacityError, "resident inputs exceed the scratchpad");
        for (std::size_t t = 0; t < n; ++t)
            if (deps_left_[t] == 0)
                make_ready(static_cast<int>(t), 0);
        report_.memory.push_back(MemEvent{0, used_[0], used_[1], used_[2]});
    }

    void touch(int b, u64 now)
    {
        bufs_[b].last_use = now;
        bufs_[b].lru_seq = ++lru_clock_;
    }

    void change(MemCategory c, long long delta, u64 now)
    {
        used_[static_cast<int>(c)] = static_cast<u64>(static_cast<long long>(used_[static_cast<int>(c)]) + delta);
        if (!report_.memory.empty() && report_.memory.back().time == now)
            report_.memory.back() = MemEvent{now, used_[0], used_[1], used_[2]};
        else
            report_.memory.push_back(MemEvent{now, used_[0], used_[1], used_[2]});
        report_.peak_bytes = std::max(report_.peak_bytes, used());
        report_.peak_temp = std::max(report_.peak_temp, used_[0]);
        report_.peak_evk = std::max(report_.peak_evk, used_[1]);
        report_.peak_ct = std::max(report_.peak_ct, used_[2]);
    }

    void make_ready(int t, u64 now)
    {
        ready_time_[t] = now;
        ready_[static_cast<int>(tasks_[t].res)].insert({key(t), t});
    }

    int add_task(SimTask t, u64 now)
    {
        tasks_.push_back(std::move(t));
        const int id = static_cast<int>(tasks_.size()) - 1;
        deps_left_.push_back(0);
        dependents_.emplace_back();
        started_.push_back(false);
        done_.push_back(false);
        ready_time_.push_back(now);
        report_.task_end.push_back(0);
        make_ready(id, now);
        return id;
    }

    bool pinned(int b) const { return bufs_[b].pins > 0; }

    /// Frees unpinned cached ciphertexts in LRU order until `need` more
    /// bytes fit once pending writebacks finish. Returns false if impossible.
    bool make_room(u64 need, u64 now, int requester_op)
    {
        u64 storing = 0;
        for (std::size_t b = 0; b < bufs_.size(); ++b)
            if (bufs_[b].state == BufState::Storing)
                storing += g_.buffers[b].bytes;
        while (used() - storing + need > capacity_) {
            int victim = -1;
            for (std::size_t b = 0; b < bufs_.size(); ++b) {
                const BufRt& r = bufs_[b];
                if (g_.buffers[b].cat != MemCategory::Ct || r.state != BufState::Resident || pinned(static_cast<int>(b)))
                    continue;
                if (victim < 0 || r.lru_seq < bufs_[victim].lru_seq)
                    victim = static_cast<int>(b);
            }
            if (victim < 0)
                return false;
            BufRt& r = bufs_[victim];
            const u64 bytes = g_.buffers[victim].bytes;
            if (r.dirty) {
                SimTask st;
                st.op = requester_op;
                st.res = Resource::Hbm;
                st.cycles = hbm_cycles(static_cast<double>(bytes), hw_);
                st.kind = "ct.store";
                st.hbm_bytes = bytes;
                st.spad_bytes = bytes;
                st.buffers = {victim};
                r.state = BufState::Storing;
                ++report_.ct_writebacks;
                storing += bytes;
                const int id = add_task(st, now);
                // The store references the buffer only to keep it alive.
                ++r.refs_left;
                ++r.op_refs[requester_op].second;
                (void)id;
            } else {
                r.state = BufState::InHbm;
                change(MemCategory::Ct, -static_cast<long long>(bytes), now);
            }
        }
        return used() + need <= capacity_;
    }

    enum class Gate { Go, Wait, NoRoom };

    /// Can task t start now? Wait means an input is not in the scratchpad
    /// yet or the evk window is full; NoRoom means allocation failed even
    /// after evicting. May schedule loads or evictions as a side effect.
    Gate startable(int t, u64 now)
    {
        const SimTask& task = tasks_[t];
        u64 need = 0;
        bool missing = false;
        for (int b : task.buffers) {
            BufRt& r = bufs_[b];
            switch (r.state) {
            case BufState::Absent:
                need += g_.buffers[b].bytes;
                break;
            case BufState::Resident:
                break;
            case BufState::Storing:
                if (std::string_view(task.kind) != "ct.store")
                    missing = true; // wait for the writeback, then reload
                break;
            case BufState::Loading:
                missing = true;
                break;
            case BufState::InHbm:
                missing = true;
                if (!r.load_pending && std::string_view(task.kind) != "ct.load") {
                    r.load_pending = true;
                    SimTask ld;
                    ld.op = task.op;
                    ld.res = Resource::Hbm;
                    ld.cycles = hbm_cycles(static_cast<double>(g_.buffers[b].bytes), hw_);
                    ld.kind = "ct.load";
                    ld.hbm_bytes = g_.buffers[b].bytes;
                    ld.spad_bytes = g_.buffers[b].bytes;
                    ld.buffers = {b};
                    ++r.refs_left;
                    ++r.op_refs[task.op].second;
                    add_task(ld, now);
                }
                break;
            }
        }
        if (std::string_view(task.kind) == "ct.load") {
            need = g_.buffers[task.buffers[0]].bytes;
            missing = false;
        }
        if (missing)
            return Gate::Wait;
        if (task.res == Resource::Hbm && std::string_view(task.kind) == "evk.load") {
            const double window = hw_.evk_prefetch_bytes;
            if (used_[1] > 0 && static_cast<double>(used_[1] + need) > window)
                return Gate::Wait;
        }
        if (need == 0 || used() + need <= capacity_)
            return Gate::Go;
        make_room(need, now, task.op);
        return used() + need <= capacity_ ? Gate::Go : Gate::NoRoom;
    }

    void start(int t, u64 now)
    {
        SimTask& task = tasks_[t];
        started_[t] = true;
        const bool is_load = std::string_view(task.kind) == "ct.load";
        for (int b : task.buffers) {
            BufRt& r = bufs_[b];
            const SimBuffer& sb = g_.buffers[b];
            if (is_load) {
                r.state = BufState::Loading;
                change(sb.cat, static_cast<long long>(sb.bytes), now);
                ++report_.ct_misses;
            } else if (r.state == BufState::Absent) {
                r.state = BufState::Resident;
                r.dirty = sb.cat == MemCategory::Ct;
                change(sb.cat, static_cast<long long>(sb.bytes), now);
            }
            auto& [op_started, remaining] = r.op_refs[task.op];
            if (!op_started) {
                op_started = true;
                ++r.pins;
                if (sb.cat == MemCategory::Ct && !is_load && r.state == BufState::Resident &&
                    std::string_view(task.kind) != "ct.store")
                    ++report_.ct_hits;
            }
            (void)remaining;
            touch(b, now);
        }
        const u64 end = now + task.cycles;
        if (task.res != Resource::None) {
            busy_[static_cast<int>(task.res)] = true;
            if (task.cycles > 0) {
                report_.busy_cycles[static_cast<int>(task.res)] += task.cycles;
                report_.timeline.push_back(TimelineRecord{now, end, task.res, task.op, task.kind, t});
            }
        }
        report_.hbm_bytes += task.hbm_bytes;
        report_.spad_bytes += task.spad_bytes;
        running_.push({end, t});
    }

    void release(int b, int op, u64 now)
    {
        BufRt& r = bufs_[b];
        const SimBuffer& sb = g_.buffers[b];
        auto it = r.op_refs.find(op);
        if (--it->second.second == 0) {
            if (it->second.first)
                --r.pins;
            r.op_refs.erase(it);
        }
        --r.refs_left;
        if (r.refs_left == 0 && !sb.cache_hold && (r.state == BufState::Resident || r.state == BufState::Loading)) {
            r.state = BufState::Absent;
            change(sb.cat, -static_cast<long long>(sb.bytes), now);
        }
    }

    void complete(int t, u64 now)
    {
        SimTask& task = tasks_[t];
        done_[t] = true;
        ++done_count_;
        report_.task_end[t] = now;
        if (task.res != Resource::None)
            busy_[static_cast<int>(task.res)] = false;
        const std::string_view kind(task.kind);
        for (int b : task.buffers) {
            BufRt& r = bufs_[b];
            if (kind == "ct.load") {
                r.state = BufState::Resident;
                r.dirty = false;
                r.load_pending = false;
            } else if (kind == "ct.store") {
                r.state = BufState::InHbm;
                r.dirty = false;
                change(MemCategory::Ct, -static_cast<long long>(g_.buffers[b].bytes), now);
            }
            touch(b, now);
            release(b, task.op, now);
        }
        for (int d : dependents_[t])
            if (--deps_left_[d] == 0)
                make_ready(d, now);
    }

    void dispatch(u64 now)
    {
        bool progress = true;
        while (progress) {
            progress = false;
            // Zero-cost bookkeeping tasks run immediately.
            auto& gates = ready_[kResourceCount];
            for (auto it = gates.begin(); it != gates.end();) {
                const int t = it->second;
                if (startable(t, now) != Gate::Go) {
                    ++it;
                    continue;
                }
                it = gates.erase(it);
                start(t, now);
                progress = true;
            }
            for (int r = 0; r < kResourceCount; ++r) {
                if (busy_[r])
                    continue;
                auto& q = ready_[r];
                bool memory_blocked = false;
                for (auto it = q.begin(); it != q.end(); ++it) {
                    const int t = it->second;
                    const bool allocates = allocates_memory(t);
                    if (memory_blocked && allocates)
                        continue;
                    const Gate gate = startable(t, now);
                    if (gate == Gate::Go) {
                        q.erase(it);
                        start(t, now);
                        progress = true;
                        break;
                    }
                    if (gate == Gate::NoRoom)
                        memory_blocked = true;
                }
            }
        }
    }

    bool allocates_memory(int t) const
    {
        for (int b : tasks_[t].buffers)
            if (bufs_[b].state == BufState::Absent || bufs_[b].state == BufState::InHbm)
                return true;
        return false;
    }

    void audit()
    {
        for (const auto& m : report_.memory)
            if (m.total() > capacity_)
                throw Error(ErrorCode::CapacityError, "scratchpad audit failed at cycle " + std::to_string(m.time));
        std::array<std::vector<std::pair<u64, u64>>, kResourceCount> iv;
        for (const auto& rec : report_.timeline)
            iv[static_cast<int>(rec.res)].push_back({rec.start, rec.end});
        for (auto& v : iv) {
            std::sort(v.begin(), v.end());
            for (std::size_t i = 1; i < v.size(); ++i)
                if (v[i].first < v[i - 1].second)
                    throw Error(ErrorCode::ContentionError, "overlapping intervals on an exclusive resource");
        }
    }
};

} // namespace detail

/// Peak power times activity for each component. Static power is out of scope.
inline std::vector<std::pair<std::string, double>> energy_breakdown(const SimReport& r, const HardwareConfig& hw)
{
    const double t = r.seconds;
    const double pes = hw.n_pe();
    auto busy = [&](Resource x) { return r.busy_fraction(x); };
    const double spad_util =
        t > 0 ? std::min(1.0, static_cast<double>(r.spad_bytes) / (hw.scratchpad_bw * t)) : 0.0;
    const double noc = (busy(Resource::NocV) + busy(Resource::NocH)) / 2;
    return {
        {"scratchpad", hw.pw_scratchpad * pes * spad_util * t},
        {"rf", hw.pw_rf * pes * busy(Resource::Nttu) * t},
        {"nttu", hw.pw_nttu * pes * busy(Resource::Nttu) * t},
        {"bconv_modmult", hw.pw_bconv_modmult * pes * busy(Resource::BconvMul) * t},
        {"mmau", hw.pw_mmau * pes * busy(Resource::Mmau) * t},
        {"exchange", hw.pw_exchange * pes * busy(Resource::Exchange) * t},
        {"modmult", hw.pw_modmult * pes * busy(Resource::ModMult) * t},
        {"modadd", hw.pw_modadd * pes * busy(Resource::ModAdd) * t},
        {"noc", hw.pw_noc * noc * t},
        {"global_bru", hw.pw_global_bru * busy(Resource::Nttu) * t},
        {"local_bru", hw.pw_local_bru * busy(Resource::Nttu) * t},
        {"hbm_noc", hw.pw_hbm_noc * busy(Resource::Hbm) * t},
        {"hbm", hw.pw_hbm * busy(Resource::Hbm) * t},
        {"pcie", 0.0},
    };
}

/// Power drawn when every modeled component is busy.
inline double modeled_peak_power(const HardwareConfig& hw)
{
    const double pe = hw.pw_scratchpad + hw.pw_rf + hw.pw_nttu + hw.pw_bconv_modmult + hw.pw_mmau + hw.pw_exchange +
                      hw.pw_modmult + hw.pw_modadd;
    return pe * hw.n_pe() + hw.pw_noc + hw.pw_global_bru + hw.pw_local_bru + hw.pw_hbm_noc + hw.pw_hbm;
}

inline SimReport simulate_graph(const OpGraph& g, const HardwareConfig& hw, u64 degree,
                                SchedulePolicy policy = SchedulePolicy::OldestOpFirst)
{
    SimReport r = detail::Scheduler(g, hw, policy).run();
    r.degree = degree;
    for (const auto& op : g.ops) {
        ++r.he_ops;
        if (op.kind == TraceOpKind::HMult && !op.in_boot)
            ++r.hmult_outside_boot;
    }
    r.energy = energy_breakdown(r, hw);
    return r;
}

inline SimReport simulate(const Trace& trace, const CkksInstance& inst, const HardwareConfig& hw,
                          const BootSchedule& sched, SchedulePolicy policy = SchedulePolicy::OldestOpFirst)
{
    hw.validate();
    OpGraph g = expand_trace(trace, inst, hw, sched);
    SimReport r = simulate_graph(g, hw, inst.n, policy);
    for (const auto& op : trace)
        r.boots += op.kind == TraceOpKind::Boot;
    return r;
}

/// Completion cycles of `limbs` independent forward NTTs.
inline std::vector<u64> ntt_stream_completions(u64 n, int limbs, const HardwareConfig& hw)
{
    const LimbCosts c = LimbCosts::make(n, hw);
    OpGraph g;
    g.ops.push_back(OpInfo{TraceOpKind::Rescale, 0, 0, false});
    std::vector<int> last;
    for (int l = 0; l < limbs; ++l) {
        auto add = [&](Resource r, u64 cyc, const char* kind, int dep) {
            SimTask t;
            t.res = r;
            t.cycles = cyc;
            t.kind = kind;
            if (dep >= 0)
                t.deps.push_back(dep);
            g.tasks.push_back(t);
            return static_cast<int>(g.tasks.size()) - 1;
        };
        int t = add(Resource::Nttu, c.epoch(), "ntt.epoch", -1);
        t = add(Resource::NocV, c.noc_v, "noc.v", t);
        last.push_back(add(Resource::NocH, c.noc_h, "noc.h", t));
    }
    SimReport r = detail::Scheduler(g, hw, SchedulePolicy::OldestOpFirst).run();
    std::vector<u64> out;
    for (int t : last)
        out.push_back(r.task_end[t]);
    return out;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace detail

/// Temporary footprints quoted for the built-in instances, in MB.
inline std::optional<double> reference_temp_mb(const CkksInstance& inst)
{
    if (inst.name == "INS-1")
        return 183;
    if (inst.name == "INS-2")
        return 304;
    if (inst.name == "INS-3")
        return 365;
    return std::nullopt;
}

inline std::string report_csv(const SimReport& r, const CkksInstance& inst, const HardwareConfig& hw)
{
    using detail::fmt;
    std::ostringstream out;
    out << "metric,value\n";
    out << "instance," << csv_quote(inst.name) << "\n";
    out << "total_cycles," << r.total_cycles << "\n";
    out << "total_seconds," << fmt(r.seconds) << "\n";
    out << "he_ops," << r.he_ops << "\n";
    out << "hmult_outside_boot," << r.hmult_outside_boot << "\n";
    out << "boots," << r.boots << "\n";
    if (auto t = r.tmult_a_slot())
        out << "tmult_a_slot_ns," << fmt(*t * 1e9) << "\n";
    for (int i = 0; i < kResourceCount; ++i) {
        std::string name = resource_name(static_cast<Resource>(i));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        out << "busy_" << name << "," << fmt(r.busy_fraction(static_cast<Resource>(i))) << "\n";
    }
    out << "hbm_bytes," << r.hbm_bytes << "\n";
    out << "hbm_achieved_bw," << fmt(r.seconds > 0 ? r.hbm_bytes / r.seconds : 0.0) << "\n";
    out << "hbm_utilization," << fmt(r.busy_fraction(Resource::Hbm)) << "\n";
    out << "scratchpad_bw_utilization,"
        << fmt(r.seconds > 0 ? std::min(1.0, r.spad_bytes / (hw.scratchpad_bw * r.seconds)) : 0.0) << "\n";
    out << "scratchpad_capacity_bytes," << r.capacity << "\n";
    out << "peak_scratchpad_bytes," << r.peak_bytes << "\n";
    out << "peak_temp_bytes," << r.peak_temp << "\n";
    out << "peak_evk_bytes," << r.peak_evk << "\n";
    out << "peak_ct_bytes," << r.peak_ct << "\n";
    if (auto ref = reference_temp_mb(inst))
        out << "reference_temp_mb," << fmt(*ref) << "\n";
    out << "ct_cache_hits," << r.ct_hits << "\n";
    out << "ct_cache_misses," << r.ct_misses << "\n";
    out << "ct_writebacks," << r.ct_writebacks << "\n";
    for (const auto& [k, v] : r.energy)
        out << "energy_" << k << "_j," << fmt(v) << "\n";
    out << "energy_total_j," << fmt(r.energy_total()) << "\n";
    out << "average_power_w," << fmt(r.seconds > 0 ? r.energy_total() / r.seconds : 0.0) << "\n";
    out << "energy_note,dynamic only; idle and PCIe power excluded\n";
    return out.str();
}

inline std::string timeline_csv(const SimReport& r)
{
    std::vector<TimelineRecord> recs = r.timeline;
    std::sort(recs.begin(), recs.end(), [](const TimelineRecord& a, const TimelineRecord& b) {
        return std::tie(a.start, a.res, a.task) < std::tie(b.start, b.res, b.task);
    });
    std::ostringstream out;
    out << "start_cycle,end_cycle,resource,op_id,task_kind\n";
    for (const auto& t : recs)
        out << t.start << "," << t.end << "," << resource_name(t.res) << "," << t.op << "," << t.kind << "\n";
    return out.str();
}

/// Busy fraction of every resource and the scratchpad occupancy at the end
/// of each epoch-length window.
inline std::string occupancy_csv(const SimReport& r, u64 epoch_cycles)
{
    using detail::fmt;
    std::ostringstream out;
    out << "epoch,start_cycle";
    for (int i = 0; i < kResourceCount; ++i)
        out << "," << resource_name(static_cast<Resource>(i));
    out << ",scratchpad_bytes,temp_bytes,evk_bytes,ct_bytes\n";
    if (epoch_cycles == 0 || r.total_cycles == 0)
        return out.str();
    const u64 epochs = (r.total_cycles + epoch_cycles - 1) / epoch_cycles;
    std::vector<std::array<u64, kResourceCount>> busy(epochs);
    for (const auto& t : r.timeline) {
        for (u64 e = t.start / epoch_cycles; e < epochs && e * epoch_cycles < t.end; ++e) {
            const u64 lo = std::max(t.start, e * epoch_cycles);
            const u64 hi = std::min(t.end, (e + 1) * epoch_cycles);
            if (hi > lo)
                busy[e][static_cast<int>(t.res)] += hi - lo;
        }
    }
    std::size_t m = 0;
    MemEvent cur{};
    for (u64 e = 0; e < epochs; ++e) {
        const u64 start = e * epoch_cycles;
        const u64 end = std::min(start + epoch_cycles, r.total_cycles);
        while (m < r.memory.size() && r.memory[m].time <= end)
            cur = r.memory[m++];
        out << e << "," << start;
        for (int i = 0; i < kResourceCount; ++i)
            out << "," << fmt(static_cast<double>(busy[e][i]) / static_cast<double>(end - start));
        out << "," << cur.total() << "," << cur.temp << "," << cur.evk << "," << cur.ct << "\n";
    }
    return out.str();
}

} // namespace bts
