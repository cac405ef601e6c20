// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Every check computes its numbers fresh; nothing here is
// read back from a cache or a previous run.

#include <bts/cli.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace bts;
namespace fs = std::filesystem;
using BigInt = boost::multiprecision::cpp_int;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<u64> random_limb(std::mt19937_64& rng, u64 n, u64 q)
{
    std::vector<u64> a(n);
    for (auto& v : a)
        v = rng() % q;
    return a;
}

u64 mulmod(u64 a, u64 b, u64 q) { return static_cast<u64>(static_cast<u128>(a) * b % q); }

u64 powmod(u64 a, u64 e, u64 q)
{
    u64 r = 1;
    for (a %= q; e; e >>= 1, a = mulmod(a, a, q))
        if (e & 1)
            r = mulmod(r, a, q);
    return r;
}

std::vector<u64> schoolbook(const std::vector<u64>& a, const std::vector<u64>& b, u64 q)
{
    const std::size_t n = a.size();
    std::vector<u64> c(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const u64 p = mulmod(a[i], b[j], q);
            const std::size_t k = i + j;
            if (k < n)
                c[k] = (c[k] + p) % q;
            else
                c[k - n] = (c[k - n] + q - p) % q;
        }
    return c;
}

// ---------------------------------------------------------------------------

Outcome min_nttu_value()
{
    Outcome o;
    const double v = min_nttu(ins1(), 27, 1.2e9, 1e12);
    o.require(std::abs(v - 1328.0) <= 1.0, "out of 1328 +/- 1");
    o.note("min_NTTU = " + fmt("%.3f", v));
    return o;
}

Outcome sizes_match()
{
    Outcome o;
    const Sizes s = sizes(ins1(), ins1().L);
    o.require(s.ct_bytes == 56ull * 1024 * 1024, "ct bytes " + std::to_string(s.ct_bytes));
    o.require(s.evk_bytes == 112ull * 1024 * 1024, "evk bytes " + std::to_string(s.evk_bytes));
    for (const auto& inst : builtin_instances()) {
        const u64 want = 2 * inst.n * u64(inst.L + 1) * u64(inst.dnum + 1) * 8;
        o.require(sizes(inst, inst.L).aggregate_evk_bytes == want, inst.name + " aggregate evk");
    }
    o.note("ct = " + fmt("%.0f", s.ct_bytes / 1048576.0) + " MB, evk = " + fmt("%.0f", s.evk_bytes / 1048576.0) +
           " MB");
    return o;
}

Outcome functional()
{
    Outcome o;
    const CkksInstance toy = toy_instance(12, 4, 1);
    const FunctionalErrors fe = functional_errors(toy, 100, 2024);
    const double limit = std::ldexp(1.0, -10);
    const std::pair<const char*, double> ops[] = {
        {"encrypt", fe.encrypt}, {"hadd", fe.hadd}, {"hmult", fe.hmult}, {"hrot", fe.hrot}, {"pmult", fe.pmult}};
    for (const auto& [name, e] : ops)
        o.require(e < limit, std::string(name) + " error " + fmt("%.3e", e));
    o.require(fe.messages == 100, "message count");
    o.note("worst relative error " + fmt("%.3e", fe.worst()) + " over 100 messages");
    return o;
}

Outcome ntt_suite()
{
    Outcome o;
    std::mt19937_64 rng(11);
    for (unsigned logn : {4u, 5u, 6u, 7u, 8u, 9u, 10u, 11u, 12u, 17u}) {
        const u64 n = u64(1) << logn;
        const PrimeModulus q = find_ntt_prime(60, n);
        const TwiddleTable tw(q);
        const auto a = random_limb(rng, n, q.value());
        o.require(intt(ntt(a, tw), tw) == a, "round trip at 2^" + std::to_string(logn));
        if (logn <= 10) {
            const auto b = random_limb(rng, n, q.value());
            auto fa = ntt(a, tw);
            const auto fb = ntt(b, tw);
            for (u64 i = 0; i < n; ++i)
                fa[i] = q.mul(fa[i], fb[i]);
            o.require(intt(fa, tw) == schoolbook(a, b, q.value()), "convolution at 2^" + std::to_string(logn));
        }
        if (logn == 12)
            o.require(ntt_3d(a, GridMap(16, 8, 32), tw) == ntt(a, tw), "3D-NTT at 2^12");
        if (logn == 17)
            o.require(ntt_3d(a, GridMap(64, 32, 64), tw) == ntt(a, tw), "3D-NTT at 2^17");
    }
    if (o.pass)
        o.note("10 sizes round trip, 7 convolutions, 2 grids bit-exact");
    return o;
}

Outcome bconv_oracle()
{
    Outcome o;
    std::mt19937_64 rng(5);
    int cases = 0;
    for (int trial = 0; trial < 8; ++trial) {
        const u64 n = u64(1) << (4 + trial % 5); // 16 .. 256
        const int src_count = 1 + trial % 6;
        const int dst_count = 1 + (trial * 7) % 5;
        std::set<u64> used;
        std::vector<PrimeModulus> src, dst;
        for (int i = 0; i < src_count + dst_count; ++i) {
            const PrimeModulus p = find_ntt_prime(30 + static_cast<int>(rng() % 30), n, used);
            used.insert(p.value());
            (i < src_count ? src : dst).push_back(p);
        }
        BigInt qs = 1;
        for (const auto& p : src)
            qs *= p.value();
        const BconvTable table = make_bconv_table(src, dst);
        RnsPolynomial in(n, src, Domain::Coefficient);
        for (std::size_t l = 0; l < src.size(); ++l) {
            const auto v = random_limb(rng, n, src[l].value());
            std::copy(v.begin(), v.end(), in.limb(l).begin());
        }
        const RnsPolynomial out = bconv(in, table);
        for (u64 c = 0; c < n; ++c) {
            // Exact CRT lift of the source residues.
            BigInt x = 0;
            for (std::size_t l = 0; l < src.size(); ++l) {
                const u64 q = src[l].value();
                const BigInt hat = qs / q;
                const u64 inv = powmod(static_cast<u64>(hat % q), q - 2, q);
                x += hat * mulmod(in.limb(l)[c], inv, q);
            }
            x %= qs;
            for (std::size_t t = 0; t < dst.size(); ++t) {
                const u64 p = dst[t].value();
                bool found = false;
                for (int e = 0; e <= src_count && !found; ++e)
                    found = static_cast<u64>((x + e * qs) % p) == out.limb(t)[c];
                if (!found) {
                    o.require(false, "coefficient " + std::to_string(c) + " outside x + e*Q_S");
                    return o;
                }
                ++cases;
            }
        }
        std::vector<std::size_t> subs = {1, 2, 4, src.size()};
        for (std::size_t l_sub : subs)
            o.require(bconv_partial(in, table, l_sub) == out,
                      "bconv_partial l_sub=" + std::to_string(l_sub) + " trial " + std::to_string(trial));
    }
    o.note(std::to_string(cases) + " coefficients checked against the CRT lift");
    return o;
}

Outcome automorphism_route()
{
    Outcome o;
    const GridMap g(64, 32, 64);
    const u64 n = g.degree();
    std::mt19937_64 rng(6);
    std::vector<u64> dest_pe(g.n_pe());
    for (int t = 0; t < 1000; ++t) {
        const long long r = static_cast<long long>(rng() % (n / 2));
        const PermutationRoute route = decompose_permutation(r, g);
        std::fill(dest_pe.begin(), dest_pe.end(), ~u64(0));
        for (u64 i = 0; i < n; ++i) {
            const u64 want = automorphism_index(i, r, n);
            if (route.apply(i) != want) {
                o.require(false, "route differs from the index map at r=" + std::to_string(r));
                return o;
            }
            u64& d = dest_pe[g.pe_of(i)];
            if (d == ~u64(0))
                d = g.pe_of(want);
            else if (d != g.pe_of(want)) {
                o.require(false, "PE fans out at r=" + std::to_string(r));
                return o;
            }
        }
    }
    o.note("1000 rotations, every PE has a single destination");
    return o;
}

Outcome sim_hmult()
{
    Outcome o;
    const SimReport r = simulate(parse_trace("DECL a LEVEL 27 RESIDENT\nDECL b LEVEL 27 RESIDENT\nHMULT a b -> c\n"),
                                 ins1(), HardwareConfig{}, default_schedule());
    const double bound = tmult_min_bound(ins1(), 27, 1e12);
    const double busy = r.busy_fraction(Resource::Hbm);
    o.require(r.seconds >= 117.4e-6 && r.seconds >= bound, "faster than the evk-load bound");
    o.require(r.seconds <= 1.15 * bound, "slower than 1.15x bound");
    o.require(busy >= 0.90, "HBM busy below 0.90");
    o.note(fmt("%.2f us", r.seconds * 1e6) + " vs bound " + fmt("%.2f us", bound * 1e6) + ", HBM busy " +
           fmt("%.3f", busy));
    return o;
}

Outcome epoch_stream()
{
    Outcome o;
    const auto done = ntt_stream_completions(u64(1) << 17, 64, HardwareConfig{});
    const u64 epoch = LimbCosts::make(u64(1) << 17, HardwareConfig{}).epoch();
    o.require(epoch == 544, "epoch " + std::to_string(epoch));
    // Skip the pipeline fill, then every gap must be one epoch.
    for (std::size_t i = 8; i < done.size(); ++i)
        if (done[i] - done[i - 1] != 544) {
            o.require(false, "gap " + std::to_string(done[i] - done[i - 1]) + " at limb " + std::to_string(i));
            break;
        }
    const double rate = double(done.back() - done[8]) / double(done.size() - 1 - 8);
    o.note("steady state " + fmt("%.1f", rate) + " cycles per limb");
    return o;
}

Outcome sweep_trends()
{
    Outcome o;
    SweepRange range;
    range.l_min = 15;
    const auto rows = sweep(range);

    // (a) min_NTTU peaks at a single slice for every (N, L).
    std::map<std::pair<u64, int>, std::pair<double, double>> peak; // (at dnum 1, max over dnum)
    int max_dnum = 1;
    for (const auto& row : rows) {
        if ((row.L + 1) % row.dnum != 0)
            continue;
        max_dnum = std::max(max_dnum, row.dnum);
        const double v = min_nttu(make_instance("s", row.n, row.L, row.dnum), row.L, 1.2e9, range.mem_bw);
        auto& p = peak[{row.n, row.L}];
        if (row.dnum == 1)
            p.first = v;
        p.second = std::max(p.second, v);
    }
    for (const auto& [key, p] : peak)
        o.require(p.first == p.second, "min_NTTU not maximal at dnum=1 for L=" + std::to_string(key.second));

    // (b) BConv share at both ends of the dnum range.
    const double s1 = complexity_share_bconv(1), smax = complexity_share_bconv(max_dnum);
    o.require(std::abs(s1 - 0.34) <= 0.03, "BConv share at dnum=1 " + fmt("%.3f", s1));
    o.require(std::abs(smax - 0.12) <= 0.03, "BConv share at dnum=max " + fmt("%.3f", smax));

    // (c) best secure point improves from N=2^16 to N=2^17.
    const auto b16 = best_row(rows, u64(1) << 16), b17 = best_row(rows, u64(1) << 17);
    double ratio = 0;
    if (b16 && b17)
        ratio = *b16->tmult_ns / *b17->tmult_ns;
    o.require(std::abs(ratio - 3.8) <= 0.2 * 3.8, "N=2^16/2^17 ratio " + fmt("%.2f", ratio));
    o.note("share " + fmt("%.3f", s1) + " -> " + fmt("%.3f", smax) + " (dnum " + std::to_string(max_dnum) +
           "), 2^16/2^17 ratio " + fmt("%.2f", ratio));
    return o;
}

Outcome calibrated_ordering()
{
    Outcome o;
    const BootSchedule s = default_schedule();
    const double t1 = amortized_mult_per_slot(ins1(), s, 1e12) * 1e9;
    const double t2 = amortized_mult_per_slot(ins2(), s, 1e12) * 1e9;
    const double t3 = amortized_mult_per_slot(ins3(), s, 1e12) * 1e9;
    o.require(std::abs(t1 - 27.7) <= 0.01 * 27.7, "INS-1 off its calibration point");
    o.require(t2 < t3 && t3 < t1, "ordering INS-2 < INS-3 < INS-1 violated");
    o.require(std::abs(t2 - 19.9) <= 0.25 * 19.9, "INS-2 outside 19.9 ns +/- 25%");
    o.note("INS-1 " + fmt("%.2f", t1) + " ns, INS-2 " + fmt("%.2f", t2) + " ns, INS-3 " + fmt("%.2f", t3) + " ns");
    return o;
}

Outcome simulate_determinism()
{
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "bts_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "micro.trace") << print_trace(gen_microbench(ins1()));
    }
    std::ostringstream sink;
    for (const char* dir : {"a", "b"}) {
        const int code = run_cli({"simulate", "--trace", (root / "micro.trace").string(), "--instance", "ins1",
                                  "--out", (root / dir).string(), "--seed", "1"},
                                 sink, sink);
        o.require(code == 0, std::string("simulate exited ") + std::to_string(code));
    }
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    };
    std::size_t bytes = 0;
    for (const char* f : {"report.csv", "timeline.csv", "occupancy.csv"}) {
        const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
        o.require(!a.empty() && a == b, std::string(f) + " differs");
        bytes += a.size();
    }
    o.note("3 CSVs identical, " + std::to_string(bytes) + " bytes");
    fs::remove_all(root);
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"min_NTTU formula", min_nttu_value},
        {"ciphertext and key sizes", sizes_match},
        {"functional correctness at N=2^12", functional},
        {"NTT suite", ntt_suite},
        {"BConv against big-integer CRT", bconv_oracle},
        {"automorphism dataflow", automorphism_route},
        {"simulated HMULT lower bound", sim_hmult},
        {"NTT epoch throughput", epoch_stream},
        {"parameter sweep trends", sweep_trends},
        {"calibrated headline ordering", calibrated_ordering},
        {"simulate determinism", simulate_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
