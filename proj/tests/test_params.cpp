#include <bts/params.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace bts;

namespace {

constexpr double kTb = 1e12;

std::vector<int> divisors(int x)
{
    std::vector<int> d;
    for (int i = 1; i <= x; ++i)
        if (x % i == 0)
            d.push_back(i);
    return d;
}

} // namespace

TEST(Instances, BuiltinTable)
{
    auto all = builtin_instances();
    ASSERT_EQ(all.size(), 3u);
    const int L[] = {27, 39, 44}, dnum[] = {1, 2, 3}, logpq[] = {3090, 3210, 3160}, k[] = {28, 20, 15};
    const double lambda[] = {133.4, 128.7, 130.8};
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(all[i].n, u64(1) << 17);
        EXPECT_EQ(all[i].L, L[i]);
        EXPECT_EQ(all[i].dnum, dnum[i]);
        EXPECT_EQ(all[i].log_pq(), logpq[i]);
        EXPECT_EQ(all[i].k(), k[i]);
        EXPECT_DOUBLE_EQ(all[i].lambda, lambda[i]);
        EXPECT_GE(all[i].lambda, 128.0);
        EXPECT_NO_THROW(all[i].validate_deployable());
    }
}

TEST(Instances, DeployabilityRules)
{
    EXPECT_THROW(make_instance("x", u64(1) << 17, 19, 1).validate_deployable(), Error);
    EXPECT_THROW(make_instance("x", u64(1) << 13, 27, 1).validate_deployable(), Error);
    EXPECT_THROW(make_instance("x", u64(1) << 17, 27, 5), Error);
}

TEST(Security, AnchorsAndMonotonicity)
{
    SecurityTable t;
    for (const auto& inst : builtin_instances())
        EXPECT_NEAR(t.lambda(inst), inst.lambda, 1e-9);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(20.0, 80.0);
    for (int i = 0; i < 2000; ++i) {
        double a = d(rng), b = d(rng);
        if (a > b)
            std::swap(a, b);
        if (a < b) {
            EXPECT_LT(t.lambda_at_ratio(a), t.lambda_at_ratio(b));
        }
    }
    EXPECT_THROW(SecurityTable({{1.0, 2.0}, {2.0, 1.0}}), Error);
}

TEST(MinNttu, PublishedValueAndShape)
{
    // (dnum+2) logN bw / (32 dnum freq) with dnum=1, logN=17.
    EXPECT_NEAR(min_nttu(ins1(), 27, 1.2e9, kTb), 1328.125, 1e-9);
    EXPECT_NEAR(min_nttu(ins1(), 27, 1.2e9, kTb), 1328.0, 1.0);
    CkksInstance max_d = make_instance("max", u64(1) << 17, 27, 28);
    EXPECT_NEAR(min_nttu(max_d, 27, 1.2e9, kTb), 30.0 * 17 * 1e12 / (32.0 * 28 * 1.2e9), 1e-9);
    EXPECT_NEAR(min_nttu(max_d, 27, 1.2e9, kTb), 474.0, 1.0);
    EXPECT_NEAR(min_nttu(ins1(), 27, 1.2e9, 2 * kTb), 2 * min_nttu(ins1(), 27, 1.2e9, kTb), 1e-9);
}

TEST(MinNttu, MaximizedAtSingleSlice)
{
    for (int L = 20; L <= 64; ++L) {
        for (u64 n : {u64(1) << 16, u64(1) << 17}) {
            double at1 = 0, best = 0;
            for (int d : divisors(L + 1)) {
                const double v = min_nttu(make_instance("s", n, L, d), L, 1.2e9, kTb);
                if (d == 1)
                    at1 = v;
                best = std::max(best, v);
            }
            EXPECT_DOUBLE_EQ(at1, best) << "L=" << L;
        }
    }
}

TEST(BconvShare, OperatingPointsAndMonotone)
{
    EXPECT_NEAR(complexity_share_bconv(1), 0.34, 0.03);
    EXPECT_NEAR(complexity_share_bconv(63), 0.12, 0.03);
    for (int d = 1; d < 63; ++d)
        EXPECT_GT(complexity_share_bconv(d), complexity_share_bconv(d + 1));
    EXPECT_THROW(complexity_share_bconv(0), Error);
}

TEST(TmultBound, EvkLoadTime)
{
    EXPECT_DOUBLE_EQ(tmult_min_bound(ins1(), 27, kTb), 117440512.0 / 1e12);
    EXPECT_DOUBLE_EQ(tmult_min_bound(ins1(), 0, kTb), 2.0 * (1 << 17) * 29 * 8 / 1e12);
    EXPECT_DOUBLE_EQ(tmult_min_bound(ins2(), 10, 2 * kTb), tmult_min_bound(ins2(), 10, kTb) / 2);
    EXPECT_EQ(evk_bytes_at(ins1(), 27), double(sizes(ins1(), 27).evk_bytes));
}

TEST(TmultBound, AggregateEvkLinearInDnum)
{
    const u64 n = u64(1) << 17;
    const int L = 59;
    std::vector<std::pair<int, double>> pts;
    for (int d : divisors(L + 1))
        pts.emplace_back(d, double(sizes(make_instance("a", n, L, d), L).aggregate_evk_bytes));
    const double slope = (pts[1].second - pts[0].second) / (pts[1].first - pts[0].first);
    for (const auto& [d, b] : pts)
        EXPECT_DOUBLE_EQ(b, pts[0].second + slope * (d - pts[0].first));
}

// Frozen outputs of an independent evaluation of the minimum-bound model
// with the default census at 1 TB/s.
TEST(Amortized, FrozenHeadlineValues)
{
    const BootSchedule s = default_schedule();
    EXPECT_NEAR(amortized_mult_per_slot(ins1(), s, kTb) * 1e9, 27.712, 1e-6);
    EXPECT_NEAR(amortized_mult_per_slot(ins2(), s, kTb) * 1e9, 23.4096, 1e-6);
    EXPECT_NEAR(amortized_mult_per_slot(ins3(), s, kTb) * 1e9, 27.20256, 1e-6);
    EXPECT_NEAR(amortized_mult_per_slot(ins1(), s, kTb) * 1e9, 27.7, 27.7 * 0.01);
}

TEST(Amortized, DegenerateAndEmptySchedules)
{
    BootSchedule zero = parse_schedule("L_BOOT 19\nSEGMENT 0 18\n");
    const CkksInstance inst = ins2();
    double mean = 0;
    for (int l = 1; l <= inst.L - 19; ++l)
        mean += tmult_min_bound(inst, l, kTb) * 2 / double(inst.n);
    mean /= inst.L - 19;
    EXPECT_NEAR(amortized_mult_per_slot(inst, zero, kTb), mean, 1e-18);
    try {
        amortized_mult_per_slot(inst, parse_schedule("L_BOOT 19\n"), kTb);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptySchedule);
    }
}

TEST(Schedule, DefaultMatchesShippedFileAndRoundTrips)
{
    const BootSchedule s = default_schedule();
    EXPECT_EQ(s.l_boot, 19);
    EXPECT_EQ(s.total(HeOpKind::Rescale), 19);
    EXPECT_EQ(s.total(HeOpKind::HRot), 12 * 4 + 5 * 3);
    EXPECT_EQ(s.total(HeOpKind::HMult), 36);
    EXPECT_EQ(load_schedule(std::string(BTS_SOURCE_DIR) + "/data/boot_schedule_default.txt"), s);
    EXPECT_EQ(parse_schedule(print_schedule(s)), s);
}

TEST(Schedule, RejectsMalformedInput)
{
    for (const char* bad : {"SEGMENT 0 18 HMULT=1\n", "L_BOOT 19\nSEGMENT 0 19 RESCALE=1\n",
                            "L_BOOT 2\nSEGMENT 0 1 RESCALE=1\nSEGMENT 1 1 HADD=1\n", "L_BOOT 2\nSEGMENT 0 1 FOO=1\n",
                            "L_BOOT 2\nSEGMENT 0 1 RESCALE=x\n", "L_BOOT 2\nSEGMENT 0 1 RESCALE=2\n",
                            "L_BOOT 2\nSEGMENT 0 1 RESCALE=1 HADD=-1\n", "L_BOOT 2\nBOGUS\n"}) {
        try {
            parse_schedule(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ParseError) << bad;
        }
    }
}

TEST(Sweep, GridTotalityAndHighlightedRows)
{
    SweepRange r;
    auto rows = sweep(r);
    EXPECT_EQ(rows.size(), 2u * 45 * 65);
    int found = 0;
    for (const auto& row : rows) {
        if (row.note.rfind("INS-", 0) == 0) {
            ++found;
            EXPECT_TRUE(row.valid);
            EXPECT_GE(row.lambda, 128.0);
            EXPECT_LE(row.lambda, 134.0);
        }
        EXPECT_EQ(row.valid, row.tmult_ns.has_value());
        if (row.valid) {
            EXPECT_EQ((row.L + 1) % row.dnum, 0);
        }
    }
    EXPECT_EQ(found, 3);
    EXPECT_EQ(sweep_csv(rows), sweep_csv(sweep(r)));
    const std::string csv = sweep_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,L,dnum,logPQ,lambda,tmult_a_slot_ns,valid");
    EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST(Sweep, TrendsAndInvalidRows)
{
    SweepRange r;
    r.l_min = 15;
    auto rows = sweep(r);
    for (const auto& row : rows)
        if (row.L <= 19) {
            EXPECT_FALSE(row.valid);
        }
    auto b16 = best_row(rows, u64(1) << 16);
    auto b17 = best_row(rows, u64(1) << 17);
    ASSERT_TRUE(b16 && b17);
    EXPECT_NEAR(*b16->tmult_ns / *b17->tmult_ns, 3.8, 3.8 * 0.2);
    // Lambda falls as log PQ grows at fixed N.
    for (const auto& a : rows)
        for (const auto& b : rows)
            if (a.n == b.n && a.log_pq < b.log_pq && a.dnum == 1 && b.dnum == 1) {
                EXPECT_GT(a.lambda, b.lambda);
            }
}

TEST(Sweep, BandwidthScaling)
{
    SweepRange a, b;
    a.degrees = b.degrees = {u64(1) << 17};
    a.l_max = b.l_max = 40;
    b.mem_bw = 2e12;
    auto ra = sweep(a), rb = sweep(b);
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i)
        if (ra[i].valid) {
            EXPECT_NEAR(*rb[i].tmult_ns, *ra[i].tmult_ns / 2, 1e-9);
        }
}
