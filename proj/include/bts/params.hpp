#pragma once

// Analytical models: security lookup, minimum NTTU count, BConv share,
// the evk-load lower bound on HMult/HRot and the amortized mult time per
// slot, plus the parameter sweep built from them.

#include <bts/instance.hpp>
#include <bts/rns.hpp>
#include <bts/schedule.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bts {

/// Monotone piecewise-linear map from N / log PQ to security bits. The
/// anchors are the three built-in instances; outside them lambda is scaled
/// proportionally to the ratio, which keeps the map strictly increasing.
class SecurityTable {
public:
    SecurityTable()
    {
        for (const auto& inst : builtin_instances())
            anchors_.emplace_back(ratio(inst.n, inst.log_pq()), inst.lambda);
        std::sort(anchors_.begin(), anchors_.end());
    }

    explicit SecurityTable(std::vector<std::pair<double, double>> anchors) : anchors_(std::move(anchors))
    {
        std::sort(anchors_.begin(), anchors_.end());
        if (anchors_.empty())
            throw Error(ErrorCode::InvalidArgument, "security table needs at least one anchor");
        for (std::size_t i = 1; i < anchors_.size(); ++i)
            if (!(anchors_[i].first > anchors_[i - 1].first && anchors_[i].second > anchors_[i - 1].second))
                throw Error(ErrorCode::InvalidArgument, "security anchors must be strictly increasing");
    }

    static double ratio(u64 n, int log_pq) { return static_cast<double>(n) / log_pq; }

    double lambda_at_ratio(double x) const
    {
        const auto& lo = anchors_.front();
        const auto& hi = anchors_.back();
        if (x <= lo.first)
            return lo.second * x / lo.first;
        if (x >= hi.first)
            return hi.second * x / hi.first;
        for (std::size_t i = 1; i < anchors_.size(); ++i) {
            const auto& a = anchors_[i - 1];
            const auto& b = anchors_[i];
            if (x <= b.first)
                return a.second + (b.second - a.second) * (x - a.first) / (b.first - a.first);
        }
        return hi.second;
    }

    double lambda(u64 n, int log_pq) const { return lambda_at_ratio(ratio(n, log_pq)); }
    double lambda(const CkksInstance& inst) const { return lambda(inst.n, inst.log_pq()); }

    const std::vector<std::pair<double, double>>& anchors() const { return anchors_; }

private:
    std::vector<std::pair<double, double>> anchors_;
};

/// Bytes of one evk as streamed at level `level`: dnum slices of two
/// polynomials over k + level + 1 limbs.
inline double evk_bytes_at(const CkksInstance& inst, int level)
{
    if (level < 0 || level > inst.L)
        throw Error(ErrorCode::InvalidArgument, "level out of range");
    return 2.0 * inst.dnum * static_cast<double>(inst.n) * (inst.k() + level + 1) * 8.0;
}

/// NTTUs needed so that HMult compute keeps pace with the evk stream.
inline double min_nttu(const CkksInstance& inst, int level, double freq_hz, double mem_bw)
{
    if (freq_hz <= 0 || mem_bw <= 0)
        throw Error(ErrorCode::InvalidArgument, "frequency and bandwidth must be positive");
    const double n = static_cast<double>(inst.n);
    const double limbs = inst.k() + level + 1;
    const double ntt_time = (inst.dnum + 2) * limbs * (n * inst.log_n() / 2) / freq_hz;
    const double load_time = evk_bytes_at(inst, level) / mem_bw;
    return ntt_time / load_time;
}

/// BConv share of HMult compute. BConv work scales as (1 + 2/dnum) relative
/// to the rest of HMult, so share = c(1+2/d) / (c(1+2/d) + 1). The constant c
/// is a least-squares fit to the two reported operating points (34% at
/// dnum=1 and 12% at the largest dnum).
inline constexpr double kBconvWeight = 0.155;

inline double complexity_share_bconv(int dnum)
{
    if (dnum < 1)
        throw Error(ErrorCode::InvalidArgument, "dnum must be >= 1");
    const double b = kBconvWeight * (1.0 + 2.0 / dnum);
    return b / (b + 1.0);
}

/// Seconds to stream one evk at `level`: the lower bound for HMult/HRot.
inline double tmult_min_bound(const CkksInstance& inst, int level, double mem_bw)
{
    if (mem_bw <= 0)
        throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    return evk_bytes_at(inst, level) / mem_bw;
}

/// Seconds to stream one ciphertext at `level`, the bound used for ops
/// without key switching.
inline double ct_stream_time(const CkksInstance& inst, int level, double mem_bw)
{
    return static_cast<double>(sizes(inst, level).ct_bytes) / mem_bw;
}

/// Minimum-bound bootstrapping time: key-switching ops cost their evk load,
/// every other op costs one ciphertext stream at its level.
inline double boot_time_min_bound(const CkksInstance& inst, const BootSchedule& sched, double mem_bw)
{
    double t = 0;
    for (int off = 0; off < sched.l_boot; ++off) {
        const int level = inst.L - off;
        if (level < 0)
            throw Error(ErrorCode::InvalidInstance, "bootstrapping runs below level 0");
        for (HeOpKind k : kAllOpKinds) {
            const int c = sched.count_at(off, k);
            if (c == 0)
                continue;
            t += c * (is_key_switching(k) ? tmult_min_bound(inst, level, mem_bw) : ct_stream_time(inst, level, mem_bw));
        }
    }
    return t;
}

/// (T_boot + sum over usable levels of T_mult(l)) / (L - L_boot) * 2/N.
inline double amortized_mult_per_slot(const CkksInstance& inst, const BootSchedule& sched, double mem_bw)
{
    if (sched.segments.empty())
        throw Error(ErrorCode::EmptySchedule, "bootstrapping schedule has no segments");
    const int usable = inst.L - sched.l_boot;
    if (usable <= 0)
        throw Error(ErrorCode::InvalidInstance, "L must exceed L_boot");
    double t = boot_time_min_bound(inst, sched, mem_bw);
    for (int l = 1; l <= usable; ++l)
        t += tmult_min_bound(inst, l, mem_bw);
    return t / usable * 2.0 / static_cast<double>(inst.n);
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRange {
    std::vector<u64> degrees = {u64(1) << 16, u64(1) << 17};
    int l_min = 20;
    int l_max = 64;
    int dnum_min = 1;
    int dnum_max = 65;
    double mem_bw = 1e12;
};

struct SweepRow {
    u64 n = 0;
    int L = 0;
    int dnum = 0;
    int log_pq = 0;
    double lambda = 0;
    std::optional<double> tmult_ns;
    bool valid = false;
    std::string note;
};

/// Every (N, L, dnum) point of the grid in N, L, dnum order. Rows that are
/// not valid instances keep an empty time and carry the reason in `note`.
inline std::vector<SweepRow> sweep(const SweepRange& r, const BootSchedule& sched = default_schedule(),
                                   const SecurityTable& table = SecurityTable())
{
    if (r.degrees.empty() || r.l_min > r.l_max || r.dnum_min > r.dnum_max)
        throw Error(ErrorCode::InvalidArgument, "empty sweep range");
    if (r.mem_bw <= 0)
        throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    std::vector<SweepRow> rows;
    for (u64 n : r.degrees) {
        if (!is_power_of_two(n))
            throw Error(ErrorCode::InvalidArgument, "N must be a power of two");
        for (int L = r.l_min; L <= r.l_max; ++L) {
            for (int d = r.dnum_min; d <= r.dnum_max; ++d) {
                SweepRow row;
                row.n = n;
                row.L = L;
                row.dnum = d;
                CkksInstance inst;
                inst.name = "sweep";
                inst.n = n;
                inst.L = L;
                inst.dnum = d;
                inst.l_boot = sched.l_boot;
                if ((L + 1) % d != 0) {
                    row.note = "dnum does not divide L+1";
                    // k is undefined; report the modulus without special primes.
                    row.log_pq = inst.log_q0_bits + L * inst.log_q_bits;
                    row.lambda = table.lambda(n, row.log_pq);
                    rows.push_back(row);
                    continue;
                }
                row.log_pq = inst.log_pq();
                row.lambda = table.lambda(n, row.log_pq);
                inst.lambda = row.lambda;
                try {
                    inst.validate_deployable();
                    row.tmult_ns = amortized_mult_per_slot(inst, sched, r.mem_bw) * 1e9;
                    row.valid = true;
                    row.note = "interpolated";
                    for (const auto& b : builtin_instances())
                        if (b.n == n && b.L == L && b.dnum == d)
                            row.note = b.name;
                } catch (const Error& e) {
                    row.note = e.what();
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + "\"";
}

/// CSV with header N,L,dnum,logPQ,lambda,tmult_a_slot_ns,valid. `annotate`
/// appends a note column naming built-in instances and invalidity reasons.
inline std::string sweep_csv(const std::vector<SweepRow>& rows, bool annotate = false)
{
    std::ostringstream out;
    out << "N,L,dnum,logPQ,lambda,tmult_a_slot_ns,valid" << (annotate ? ",note" : "") << "\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.n << "," << r.L << "," << r.dnum << "," << r.log_pq << ",";
        std::snprintf(buf, sizeof buf, "%.2f", r.lambda);
        out << buf << ",";
        if (r.tmult_ns) {
            std::snprintf(buf, sizeof buf, "%.4f", *r.tmult_ns);
            out << buf;
        }
        out << "," << (r.valid ? 1 : 0);
        if (annotate)
            out << "," << csv_quote(r.note);
        out << "\n";
    }
    return out.str();
}

/// The fastest valid row per degree among rows with lambda >= min_lambda.
inline std::optional<SweepRow> best_row(const std::vector<SweepRow>& rows, u64 n, double min_lambda = 128.0)
{
    std::optional<SweepRow> best;
    for (const auto& r : rows)
        if (r.n == n && r.valid && r.lambda >= min_lambda && (!best || *r.tmult_ns < *best->tmult_ns))
            best = r;
    return best;
}

} // namespace bts
