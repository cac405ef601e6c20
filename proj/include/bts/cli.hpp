#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.
//
// Exit codes: 0 success, 1 failed self-test or internal error, 2 usage,
// 3 input parse error, 4 semantic trace error, 5 scratchpad capacity error.

#include <bts/heops.hpp>
#include <bts/hwconfig.hpp>
#include <bts/params.hpp>
#include <bts/schedule.hpp>
#include <bts/selftest.hpp>
#include <bts/sim.hpp>
#include <bts/trace.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace bts {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitParse = 3,
    kExitTrace = 4,
    kExitCapacity = 5,
};

inline int exit_code_for(ErrorCode c)
{
    switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidInstance:
    case ErrorCode::EmptySchedule:
        return kExitParse;
    case ErrorCode::TraceError:
    case ErrorCode::UnsupportedOp:
    case ErrorCode::LevelExhausted:
    case ErrorCode::LevelMismatch:
        return kExitTrace;
    case ErrorCode::CapacityError:
        return kExitCapacity;
    case ErrorCode::InvalidArgument:
        return kExitUsage;
    default:
        return kExitFailure;
    }
}

namespace cli_detail {

/// ins1|ins2|ins3 name a built-in instance, anything else is a file path.
inline CkksInstance resolve_instance(const std::string& spec)
{
    std::string lower = spec;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "ins1" || lower == "ins-1")
        return ins1();
    if (lower == "ins2" || lower == "ins-2")
        return ins2();
    if (lower == "ins3" || lower == "ins-3")
        return ins3();
    return load_instance(spec);
}

inline void write_file(const std::filesystem::path& p, const std::string& content)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::InvalidArgument, "cannot write " + p.string());
    f << content;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::InvalidArgument, "cannot write " + p.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::string instance_summary(const CkksInstance& i)
{
    std::ostringstream s;
    s << i.name << " (N=2^" << i.log_n() << ", L=" << i.L << ", dnum=" << i.dnum << ")";
    return s.str();
}

} // namespace cli_detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"FHE accelerator model: functional CKKS core, parameter sweep and simulator", "bts"};
    app.require_subcommand(1);

    // selftest
    std::string st_scale = "toy", st_fault;
    u64 st_seed = 1;
    auto* selftest = app.add_subcommand("selftest", "Run the built-in functional property suite");
    selftest->add_option("--scale", st_scale, "toy or flagship")->check(CLI::IsMember({"toy", "flagship"}));
    selftest->add_option("--inject-fault", st_fault, "Negative control: corrupt-twiddle")
        ->check(CLI::IsMember({"corrupt-twiddle"}));
    selftest->add_option("--seed", st_seed, "Random seed");

    // sweep
    SweepRange range;
    std::vector<unsigned> sw_log_n = {16, 17};
    std::string sw_out, sw_schedule;
    bool sw_annotate = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "Minimum-bound amortized mult time over (N, L, dnum)");
    sweep_cmd->add_option("--log-n", sw_log_n, "log2 of the ring degrees")->check(CLI::Range(4u, 20u));
    sweep_cmd->add_option("--l-min", range.l_min, "Smallest L");
    sweep_cmd->add_option("--l-max", range.l_max, "Largest L");
    sweep_cmd->add_option("--dnum-min", range.dnum_min, "Smallest dnum");
    sweep_cmd->add_option("--dnum-max", range.dnum_max, "Largest dnum");
    sweep_cmd->add_option("--bw", range.mem_bw, "Memory bandwidth in bytes/s");
    sweep_cmd->add_option("--schedule", sw_schedule, "Bootstrapping schedule file");
    sweep_cmd->add_flag("--annotate", sw_annotate, "Append a note column");
    sweep_cmd->add_option("--out", sw_out, "CSV file (default stdout)");

    // simulate
    std::string sim_trace, sim_instance = "ins1", sim_hw, sim_schedule, sim_out = "sim_out", sim_policy = "oldest";
    u64 sim_seed = 0;
    auto* simulate_cmd = app.add_subcommand("simulate", "Replay an HE-op trace on the accelerator model");
    simulate_cmd->add_option("--trace", sim_trace, "Trace file")->required();
    simulate_cmd->add_option("--instance", sim_instance, "ins1, ins2, ins3 or an instance file");
    simulate_cmd->add_option("--hw", sim_hw, "Hardware config file");
    simulate_cmd->add_option("--schedule", sim_schedule, "Bootstrapping schedule file");
    simulate_cmd->add_option("--out", sim_out, "Output directory");
    simulate_cmd->add_option("--seed", sim_seed, "Recorded in the report; the model itself has no randomness");
    simulate_cmd->add_option("--policy", sim_policy, "oldest or declaration")
        ->check(CLI::IsMember({"oldest", "declaration"}));

    // gen-microbench
    std::string mb_instance = "ins1", mb_out, mb_schedule;
    int mb_rounds = 1;
    auto* microbench = app.add_subcommand("gen-microbench", "Emit the amortized-mult microbenchmark trace");
    microbench->add_option("--instance", mb_instance, "ins1, ins2, ins3 or an instance file");
    microbench->add_option("--rounds", mb_rounds, "Mult-chain plus BOOT rounds")->check(CLI::PositiveNumber);
    microbench->add_option("--schedule", mb_schedule, "Bootstrapping schedule file (for L_boot)");
    microbench->add_option("--out", mb_out, "Trace file (default stdout)");

    // keygen
    std::string kg_instance, kg_out = "keys";
    unsigned kg_log_n = 12;
    int kg_levels = 4, kg_dnum = 1;
    u64 kg_seed = 1;
    std::vector<long long> kg_rot = {1};
    auto* keygen_cmd = app.add_subcommand("keygen", "Generate and serialize secret and evaluation keys");
    keygen_cmd->add_option("--instance", kg_instance, "ins1, ins2, ins3 or an instance file (default: toy)");
    keygen_cmd->add_option("--log-n", kg_log_n, "Toy ring degree")->check(CLI::Range(4u, 17u));
    keygen_cmd->add_option("--levels", kg_levels, "Toy L")->check(CLI::Range(1, 60));
    keygen_cmd->add_option("--dnum", kg_dnum, "Toy dnum")->check(CLI::PositiveNumber);
    keygen_cmd->add_option("--rotations", kg_rot, "Rotation keys to generate");
    keygen_cmd->add_option("--seed", kg_seed, "Random seed");
    keygen_cmd->add_option("--out", kg_out, "Output directory");

    // bench-functional
    unsigned bf_log_n = 12;
    int bf_levels = 4, bf_dnum = 1, bf_messages = 10;
    u64 bf_seed = 1;
    auto* bench = app.add_subcommand("bench-functional", "Accuracy and wall time of the functional HE ops");
    bench->add_option("--log-n", bf_log_n, "Ring degree")->check(CLI::Range(4u, 17u));
    bench->add_option("--levels", bf_levels, "L")->check(CLI::Range(1, 60));
    bench->add_option("--dnum", bf_dnum, "dnum")->check(CLI::PositiveNumber);
    bench->add_option("--messages", bf_messages, "Random messages")->check(CLI::PositiveNumber);
    bench->add_option("--seed", bf_seed, "Random seed");

    // print-hw
    auto* print_hw = app.add_subcommand("print-hw", "Print the default hardware config");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*selftest) {
            SelftestOptions opt;
            opt.scale = st_scale == "flagship" ? SelftestScale::Flagship : SelftestScale::Toy;
            opt.corrupt_twiddle = st_fault == "corrupt-twiddle";
            opt.seed = st_seed;
            const auto results = run_selftest(opt);
            int failed = 0;
            for (const auto& r : results) {
                out << (r.pass ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2)
                    << r.seconds << " s)";
                if (!r.pass) {
                    out << ": " << r.detail;
                    ++failed;
                }
                out << "\n";
            }
            out << results.size() - failed << "/" << results.size() << " properties passed\n";
            return failed ? kExitFailure : kExitOk;
        }
        if (*sweep_cmd) {
            range.degrees.clear();
            for (unsigned l : sw_log_n)
                range.degrees.push_back(u64(1) << l);
            const BootSchedule sched = sw_schedule.empty() ? default_schedule() : load_schedule(sw_schedule);
            const std::string csv = sweep_csv(sweep(range, sched), sw_annotate);
            if (sw_out.empty())
                out << csv;
            else
                cli_detail::write_file(sw_out, csv);
            return kExitOk;
        }
        if (*simulate_cmd) {
            const CkksInstance inst = cli_detail::resolve_instance(sim_instance);
            const HardwareConfig hw = sim_hw.empty() ? HardwareConfig{} : load_hardware_config(sim_hw);
            const BootSchedule sched = sim_schedule.empty() ? default_schedule() : load_schedule(sim_schedule);
            const Trace trace = load_trace(sim_trace);
            const SchedulePolicy policy =
                sim_policy == "declaration" ? SchedulePolicy::DeclarationOrder : SchedulePolicy::OldestOpFirst;
            const SimReport r = simulate(trace, inst, hw, sched, policy);
            namespace fs = std::filesystem;
            fs::create_directories(sim_out);
            const LimbCosts costs = LimbCosts::make(inst.n, hw);
            cli_detail::write_file(fs::path(sim_out) / "report.csv",
                                   report_csv(r, inst, hw) + "seed," + std::to_string(sim_seed) + "\n");
            cli_detail::write_file(fs::path(sim_out) / "timeline.csv", timeline_csv(r));
            cli_detail::write_file(fs::path(sim_out) / "occupancy.csv", occupancy_csv(r, costs.epoch()));
            out << "instance      " << cli_detail::instance_summary(inst) << "\n";
            out << "HE ops        " << r.he_ops << " (" << r.boots << " BOOT)\n";
            out << "total         " << r.total_cycles << " cycles, " << std::setprecision(6) << r.seconds * 1e6
                << " us\n";
            out << "HBM busy      " << std::setprecision(4) << r.busy_fraction(Resource::Hbm) << "\n";
            out << "NTTU busy     " << std::setprecision(4) << r.busy_fraction(Resource::Nttu) << "\n";
            out << "energy        " << std::setprecision(6) << r.energy_total() << " J (dynamic)\n";
            out << "peak spad     " << std::setprecision(4) << r.peak_bytes / 1e6 << " MB\n";
            if (auto t = r.tmult_a_slot())
                out << "Tmult,a/slot  " << std::setprecision(6) << *t * 1e9 << " ns\n";
            out << "wrote " << (fs::path(sim_out) / "report.csv").string() << ", timeline.csv, occupancy.csv\n";
            return kExitOk;
        }
        if (*microbench) {
            const CkksInstance inst = cli_detail::resolve_instance(mb_instance);
            const int l_boot = mb_schedule.empty() ? default_schedule().l_boot : load_schedule(mb_schedule).l_boot;
            const std::string text = print_trace(gen_microbench(inst, mb_rounds, l_boot));
            if (mb_out.empty())
                out << text;
            else
                cli_detail::write_file(mb_out, text);
            return kExitOk;
        }
        if (*keygen_cmd) {
            const CkksInstance inst =
                kg_instance.empty() ? toy_instance(kg_log_n, kg_levels, kg_dnum) : cli_detail::resolve_instance(kg_instance);
            CkksContext ctx(inst);
            const KeySet keys = keygen(ctx, kg_seed, kg_rot);
            namespace fs = std::filesystem;
            fs::create_directories(kg_out);
            auto emit = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
                cli_detail::write_bytes(fs::path(kg_out) / name, bytes);
                out << name << " " << bytes.size() << " bytes\n";
            };
            emit("secret.key", serialize(keys.sk));
            emit("mult.evk", serialize(keys.mult));
            for (const auto& [r, evk] : keys.rot)
                emit("rot_" + std::to_string(r) + ".evk", serialize(evk));
            return kExitOk;
        }
        if (*bench) {
            const CkksInstance inst = toy_instance(bf_log_n, bf_levels, bf_dnum);
            const auto t0 = std::chrono::steady_clock::now();
            const FunctionalErrors fe = functional_errors(inst, bf_messages, bf_seed);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out << cli_detail::instance_summary(inst) << ", " << fe.messages << " messages, " << std::setprecision(3)
                << secs << " s\n";
            out << std::scientific << std::setprecision(3);
            out << "max relative error: encrypt " << fe.encrypt << ", hadd " << fe.hadd << ", hmult " << fe.hmult
                << ", hrot " << fe.hrot << ", pmult " << fe.pmult << "\n";
            return kExitOk;
        }
        if (*print_hw) {
            out << print_hardware_config(HardwareConfig{});
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace bts
