#include <bts/sim.hpp>

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace bts;

namespace {

SimReport run(const std::string& text, const CkksInstance& inst = ins1(), const HardwareConfig& hw = {})
{
    return simulate(parse_trace(text), inst, hw, default_schedule());
}

void expect_report_invariants(const SimReport& r)
{
    for (int i = 0; i < kResourceCount; ++i) {
        EXPECT_GE(r.busy_fraction(static_cast<Resource>(i)), 0.0);
        EXPECT_LE(r.busy_fraction(static_cast<Resource>(i)), 1.0);
    }
    EXPECT_GE(r.energy_total(), 0.0);
    for (const auto& m : r.memory)
        EXPECT_LE(m.total(), r.capacity);
    std::map<Resource, std::vector<std::pair<u64, u64>>> by_res;
    for (const auto& t : r.timeline)
        by_res[t.res].push_back({t.start, t.end});
    for (auto& [res, v] : by_res) {
        std::sort(v.begin(), v.end());
        for (std::size_t i = 1; i < v.size(); ++i)
            ASSERT_LE(v[i - 1].second, v[i].first) << resource_name(res);
    }
}

} // namespace

TEST(Costs, EpochAndTransposeTraffic)
{
    HardwareConfig hw;
    const LimbCosts c = LimbCosts::make(u64(1) << 17, hw);
    EXPECT_EQ(c.epoch(), 544u);
    // 64 residues per PE, 8 bytes each, 1/rows of them stay put.
    EXPECT_EQ(c.noc_v, noc_transfer_cycles(64 * 8 * (1.0 - 1.0 / 32), hw));
    EXPECT_EQ(c.noc_h, noc_transfer_cycles(64 * 8 * (1.0 - 1.0 / 64), hw));
    EXPECT_LE(c.noc_v, c.epoch());
    EXPECT_LE(c.noc_h, c.epoch());
    EXPECT_THROW(LimbCosts::make(1024, hw), Error);
}

TEST(Costs, EvkLoadOfOneHmult)
{
    HardwareConfig hw;
    const OpGraph g = expand(TraceOpKind::HMult, 27, ins1(), hw);
    u64 evk = 0, other = 0;
    for (const auto& t : g.tasks)
        (std::string_view(t.kind) == "evk.load" ? evk : other) += t.hbm_bytes;
    EXPECT_EQ(evk, 117440512u); // 112 MiB
    EXPECT_EQ(other, 0u);
}

TEST(Costs, HaddHasOnlyElementwiseTasks)
{
    HardwareConfig hw;
    const OpGraph g = expand(TraceOpKind::HAdd, 27, ins1(), hw);
    for (const auto& t : g.tasks) {
        EXPECT_TRUE(t.res == Resource::ModAdd || t.res == Resource::None) << t.kind;
        EXPECT_EQ(t.hbm_bytes, 0u);
    }
    EXPECT_THROW(expand(TraceOpKind::Boot, 27, ins1(), hw), Error);
    EXPECT_THROW(expand(TraceOpKind::Decl, 27, ins1(), hw), Error);
}

TEST(Noc, IdentityIsFreeAndWidthScalesCycles)
{
    HardwareConfig hw;
    const PermutationCost id = noc_permutation_cost(0, u64(1) << 17, hw);
    EXPECT_EQ(id.exchange + id.vertical + id.horizontal, 0u);
    const PermutationCost rot = noc_permutation_cost(1, u64(1) << 17, hw);
    EXPECT_GT(rot.vertical + rot.horizontal, 0u);

    HardwareConfig wide = hw;
    wide.noc_port_bits = 24;
    for (double bytes : {96.0, 480.0, 1536.0, 3072.0})
        EXPECT_EQ(noc_transfer_cycles(bytes, wide) * 2, noc_transfer_cycles(bytes, hw)) << bytes;
    EXPECT_EQ(noc_transfer_cycles(0, hw), 0u);
}

TEST(Sim, SingleHmultMeetsEvkLoadBound)
{
    const SimReport r = run("DECL a LEVEL 27 RESIDENT\nDECL b LEVEL 27 RESIDENT\nHMULT a b -> c\n");
    const double bound = tmult_min_bound(ins1(), 27, 1e12);
    EXPECT_GE(r.seconds, 117.4e-6);
    EXPECT_GE(r.seconds, bound);
    EXPECT_LE(r.seconds, 1.15 * bound);
    EXPECT_GE(r.busy_fraction(Resource::Hbm), 0.90);
    expect_report_invariants(r);
}

TEST(Sim, KeySwitchingOpsStayNearTheirBound)
{
    HardwareConfig hw;
    for (const auto& inst : builtin_instances()) {
        for (TraceOpKind k : {TraceOpKind::HMult, TraceOpKind::HRot}) {
            for (int level : {inst.L, inst.L / 2}) {
                const SimReport r = simulate_graph(expand(k, level, inst, hw, 3), hw, inst.n);
                const double bound = tmult_min_bound(inst, level, hw.hbm_bw);
                EXPECT_GE(r.seconds, bound) << inst.name << " " << trace_op_name(k) << " l=" << level;
                EXPECT_LE(r.seconds, 1.15 * bound) << inst.name << " " << trace_op_name(k) << " l=" << level;
            }
        }
    }
}

TEST(Sim, HaddChainNeedsNoHbm)
{
    std::string t = "DECL a LEVEL 27 RESIDENT\nDECL b LEVEL 27 RESIDENT\n";
    for (int i = 0; i < 100; ++i)
        t += "HADD a b -> a\n";
    const SimReport r = run(t);
    EXPECT_EQ(r.hbm_bytes, 0u);
    EXPECT_EQ(r.ct_misses, 0u);
    EXPECT_EQ(r.he_ops, 100);
    EXPECT_GT(r.total_cycles, 0u);
    expect_report_invariants(r);
}

TEST(Sim, EmptyTraceIsZeroDurationAndZeroEnergy)
{
    const SimReport r = run("");
    EXPECT_EQ(r.total_cycles, 0u);
    EXPECT_EQ(r.energy_total(), 0.0);
    const SimReport d = run("DECL a LEVEL 3 RESIDENT\n");
    EXPECT_EQ(d.total_cycles, 0u);
    EXPECT_EQ(d.energy_total(), 0.0);
}

TEST(Sim, DeterministicOutputs)
{
    HardwareConfig hw;
    const std::string text = "DECL x LEVEL 20\nHROT x 1 -> t\nHADD x t -> x\nHMULT x x -> y\nRESCALE y -> y\nBOOT y -> z\n";
    const SimReport a = run(text), b = run(text);
    EXPECT_EQ(report_csv(a, ins1(), hw), report_csv(b, ins1(), hw));
    EXPECT_EQ(timeline_csv(a), timeline_csv(b));
    EXPECT_EQ(occupancy_csv(a, 544), occupancy_csv(b, 544));
    expect_report_invariants(a);
}

TEST(Sim, NtttStreamCompletesOneLimbPerEpoch)
{
    HardwareConfig hw;
    const auto done = ntt_stream_completions(u64(1) << 17, 28, hw);
    ASSERT_EQ(done.size(), 28u);
    for (std::size_t i = 5; i < done.size(); ++i)
        EXPECT_EQ(done[i] - done[i - 1], 544u) << i;
}

TEST(Sim, NonResidentInputsAreLoadedOnce)
{
    const SimReport r = run("DECL x LEVEL 10\nCMULT x -> y\nCADD x -> z\n");
    const u64 ct = 2 * (u64(1) << 17) * 11 * 8;
    EXPECT_EQ(r.ct_misses, 1u);
    EXPECT_EQ(r.hbm_bytes, ct);
}

TEST(Sim, EvictionWritesBackDirtyCiphertexts)
{
    HardwareConfig hw;
    hw.scratchpad_bytes = 128.0 * 1024 * 1024;
    std::string t;
    for (int i = 0; i < 8; ++i)
        t += "DECL a" + std::to_string(i) + " LEVEL 10\n";
    for (int i = 0; i < 8; ++i)
        t += "CMULT a" + std::to_string(i) + " -> b" + std::to_string(i) + "\n";
    for (int i = 0; i < 8; ++i)
        t += "HADD b" + std::to_string(i) + " a" + std::to_string(i) + " -> c" + std::to_string(i) + "\n";
    const SimReport r = run(t, ins1(), hw);
    EXPECT_GT(r.ct_writebacks, 0u);
    EXPECT_GT(r.ct_misses, 8u);
    EXPECT_LE(r.peak_bytes, r.capacity);
    expect_report_invariants(r);
}

TEST(Sim, MicrobenchmarkReportsAmortizedTime)
{
    const SimReport r = simulate(gen_microbench(ins1()), ins1(), HardwareConfig{}, default_schedule());
    ASSERT_TRUE(r.tmult_a_slot().has_value());
    EXPECT_EQ(r.hmult_outside_boot, 8);
    EXPECT_EQ(r.boots, 1);
    // Every key-switching op pays at least its evk stream.
    double floor = 0;
    for (int l = 1; l <= 8; ++l)
        floor += tmult_min_bound(ins1(), l, 1e12);
    const BootSchedule s = default_schedule();
    for (int off = 0; off < s.l_boot; ++off)
        floor += (s.count_at(off, HeOpKind::HMult) + s.count_at(off, HeOpKind::HRot)) *
                 tmult_min_bound(ins1(), ins1().L - off, 1e12);
    EXPECT_GE(r.seconds, floor);
    EXPECT_LE(r.seconds, 1.15 * floor);
    expect_report_invariants(r);
}

TEST(Sim, CapacityErrors)
{
    HardwareConfig hw;
    hw.scratchpad_bytes = 64.0 * 1024 * 1024;
    try {
        run("DECL a LEVEL 27 RESIDENT\nDECL b LEVEL 27 RESIDENT\nHMULT a b -> c\n", ins1(), hw);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CapacityError);
    }
    // Inputs fit, but key-switching temporaries do not.
    hw.scratchpad_bytes = 96.0 * 1024 * 1024;
    try {
        run("DECL a LEVEL 27\nHMULT a a -> c\n", ins1(), hw);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CapacityError);
    }
}

TEST(Sim, TraceErrorsSurface)
{
    for (const char* bad : {"HADD a b -> c\n", "DECL a LEVEL 30\n", "DECL a LEVEL 0\nRESCALE a -> b\n",
                            "DECL a LEVEL 3\nDECL b LEVEL 2\nHADD a b -> c\n"}) {
        try {
            run(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::TraceError) << bad;
        }
    }
}

TEST(Energy, PeakPowerAndScaling)
{
    HardwareConfig hw;
    EXPECT_LE(modeled_peak_power(hw), 163.2);
    EXPECT_NEAR(hw.peak_power() - modeled_peak_power(hw), hw.pw_pcie, 1e-9);
    SimReport idle;
    idle.total_cycles = 1200;
    idle.seconds = 1e-6;
    idle.degree = u64(1) << 17;
    for (const auto& [k, v] : energy_breakdown(idle, hw))
        EXPECT_EQ(v, 0.0) << k;
    SimReport full = idle;
    full.busy_cycles.fill(1200);
    full.spad_bytes = static_cast<u64>(hw.scratchpad_bw * 1e-6);
    double e = 0;
    for (const auto& [k, v] : energy_breakdown(full, hw))
        e += v;
    EXPECT_NEAR(e, modeled_peak_power(hw) * 1e-6, 1e-12);
}

TEST(Output, CsvShapes)
{
    const SimReport r = run("DECL a LEVEL 4 RESIDENT\nCMULT a -> b\nRESCALE b -> c\n");
    const std::string tl = timeline_csv(r);
    EXPECT_EQ(tl.substr(0, tl.find('\n')), "start_cycle,end_cycle,resource,op_id,task_kind");
    u64 prev = 0;
    std::istringstream in(tl);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const u64 start = std::stoull(line.substr(0, line.find(',')));
        EXPECT_GE(start, prev);
        prev = start;
    }
    const std::string occ = occupancy_csv(r, 544);
    EXPECT_EQ(std::count(occ.begin(), occ.end(), '\n'), 1 + static_cast<long>((r.total_cycles + 543) / 544));
    const std::string rep = report_csv(r, ins1(), HardwareConfig{});
    EXPECT_EQ(rep.substr(0, 13), "metric,value\n");
    EXPECT_NE(rep.find("energy_total_j,"), std::string::npos);
}

TEST(Policy, BothPoliciesRespectInvariants)
{
    const Trace t = parse_trace("DECL x LEVEL 20\nHROT x 1 -> t\nHADD x t -> x\nHMULT x x -> y\nRESCALE y -> y\n");
    for (SchedulePolicy p : {SchedulePolicy::OldestOpFirst, SchedulePolicy::DeclarationOrder}) {
        const SimReport r = simulate(t, ins1(), HardwareConfig{}, default_schedule(), p);
        EXPECT_GT(r.total_cycles, 0u);
        expect_report_invariants(r);
    }
}
