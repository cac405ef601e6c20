#pragma once

// Homomorphic op kinds shared by traces and bootstrapping schedules, and the
// BootSchedule file format:
//
//   # comment
//   L_BOOT 19
//   SEGMENT <first> <last> HROT=12 PMULT=4 HADD=4 RESCALE=1
//
// Offsets count down from the level at which bootstrapping starts: offset s
// runs at level (start - s). The counts of a SEGMENT apply to every offset in
// [first, last].

#include <bts/error.hpp>

#include <array>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace bts {

enum class HeOpKind { HMult, HRot, HAdd, PAdd, PMult, CAdd, CMult, Rescale };

inline constexpr std::array<HeOpKind, 8> kAllOpKinds = {HeOpKind::HMult, HeOpKind::HRot,  HeOpKind::HAdd,
                                                        HeOpKind::PAdd,  HeOpKind::PMult, HeOpKind::CAdd,
                                                        HeOpKind::CMult, HeOpKind::Rescale};

inline const char* op_name(HeOpKind k)
{
    switch (k) {
    case HeOpKind::HMult: return "HMULT";
    case HeOpKind::HRot: return "HROT";
    case HeOpKind::HAdd: return "HADD";
    case HeOpKind::PAdd: return "PADD";
    case HeOpKind::PMult: return "PMULT";
    case HeOpKind::CAdd: return "CADD";
    case HeOpKind::CMult: return "CMULT";
    case HeOpKind::Rescale: return "RESCALE";
    }
    return "?";
}

inline bool parse_op_name(const std::string& s, HeOpKind& out)
{
    for (HeOpKind k : kAllOpKinds)
        if (s == op_name(k)) {
            out = k;
            return true;
        }
    return false;
}

inline bool is_key_switching(HeOpKind k) { return k == HeOpKind::HMult || k == HeOpKind::HRot; }

struct ScheduleSegment {
    int first = 0;
    int last = 0;
    std::array<int, kAllOpKinds.size()> counts{};

    int& count(HeOpKind k) { return counts[static_cast<std::size_t>(k)]; }
    int count(HeOpKind k) const { return counts[static_cast<std::size_t>(k)]; }
    bool operator==(const ScheduleSegment&) const = default;
};

struct BootSchedule {
    int l_boot = 19;
    std::vector<ScheduleSegment> segments;

    /// Count of `k` ops at one offset (0 when no segment covers it).
    int count_at(int offset, HeOpKind k) const
    {
        int c = 0;
        for (const auto& s : segments)
            if (offset >= s.first && offset <= s.last)
                c += s.count(k);
        return c;
    }

    int total(HeOpKind k) const
    {
        int c = 0;
        for (const auto& s : segments)
            c += s.count(k) * (s.last - s.first + 1);
        return c;
    }

    bool has_ops() const
    {
        for (HeOpKind k : kAllOpKinds)
            if (total(k) > 0)
                return true;
        return false;
    }

    /// Segments lie in [0, l_boot), do not overlap, counts are nonnegative
    /// and the RESCALE count (levels consumed) equals l_boot. A schedule with
    /// no ops at all is accepted as the degenerate zero-cost bootstrap.
    void validate() const
    {
        if (l_boot < 0)
            throw Error(ErrorCode::ParseError, "L_BOOT must be nonnegative");
        std::vector<bool> covered(static_cast<std::size_t>(l_boot), false);
        for (const auto& s : segments) {
            if (s.first < 0 || s.last < s.first || s.last >= l_boot)
                throw Error(ErrorCode::ParseError, "segment offsets outside [0, L_BOOT)");
            for (int o = s.first; o <= s.last; ++o) {
                if (covered[o])
                    throw Error(ErrorCode::ParseError, "segments overlap at offset " + std::to_string(o));
                covered[o] = true;
            }
            for (int c : s.counts)
                if (c < 0)
                    throw Error(ErrorCode::ParseError, "negative op count");
        }
        if (has_ops() && total(HeOpKind::Rescale) != l_boot)
            throw Error(ErrorCode::ParseError, "schedule consumes " + std::to_string(total(HeOpKind::Rescale)) +
                                                   " levels, L_BOOT is " + std::to_string(l_boot));
    }

    bool operator==(const BootSchedule&) const = default;
};

inline BootSchedule parse_schedule(const std::string& text)
{
    BootSchedule s;
    s.segments.clear();
    bool have_lboot = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::ParseError, "schedule line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word))
            continue;
        if (word == "L_BOOT") {
            if (have_lboot || !(ls >> s.l_boot))
                fail("bad L_BOOT");
            have_lboot = true;
        } else if (word == "SEGMENT") {
            ScheduleSegment seg;
            if (!(ls >> seg.first >> seg.last))
                fail("SEGMENT needs <first> <last>");
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                HeOpKind k;
                if (eq == std::string::npos || !parse_op_name(kv.substr(0, eq), k))
                    fail("bad count '" + kv + "'");
                try {
                    std::size_t used = 0;
                    seg.count(k) = std::stoi(kv.substr(eq + 1), &used);
                    if (used != kv.size() - eq - 1)
                        fail("bad number in '" + kv + "'");
                } catch (const std::logic_error&) {
                    fail("bad number in '" + kv + "'");
                }
            }
            s.segments.push_back(seg);
        } else {
            fail("unknown directive '" + word + "'");
        }
    }
    if (!have_lboot)
        throw Error(ErrorCode::ParseError, "schedule has no L_BOOT line");
    s.validate();
    return s;
}

inline std::string print_schedule(const BootSchedule& s)
{
    std::ostringstream out;
    out << "L_BOOT " << s.l_boot << "\n";
    for (const auto& seg : s.segments) {
        out << "SEGMENT " << seg.first << " " << seg.last;
        for (HeOpKind k : kAllOpKinds)
            if (seg.count(k) != 0)
                out << " " << op_name(k) << "=" << seg.count(k);
        out << "\n";
    }
    return out.str();
}

inline BootSchedule load_schedule(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ParseError, "cannot open schedule file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_schedule(ss.str());
}

/// Synthetic census of one full-slot bootstrapping, fixed once so the
/// minimum-bound pipeline gives 27.7 ns on INS-1 and not tuned per instance.
/// The rotation-heavy head and tail model the linear transforms, the middle
/// models polynomial evaluation. data/boot_schedule_default.txt holds the same
/// text.
inline constexpr const char* kDefaultScheduleText = R"(# Default bootstrapping census (synthetic, frozen).
L_BOOT 19
# coefficient-to-slot
SEGMENT 0 3 HROT=12 PMULT=4 HADD=4 RESCALE=1
# modular reduction by polynomial evaluation
SEGMENT 4 15 HMULT=3 CMULT=1 CADD=1 RESCALE=1
# slot-to-coefficient
SEGMENT 16 18 HROT=5 PMULT=2 HADD=2 RESCALE=1
)";

inline BootSchedule default_schedule() { return parse_schedule(kDefaultScheduleText); }

} // namespace bts
