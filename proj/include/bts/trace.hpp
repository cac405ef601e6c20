#pragma once

// Line-oriented HE-op traces:
//
//   DECL <name> LEVEL <l> [RESIDENT]
//   HMULT <a> <b> -> <c>        HADD <a> <b> -> <c>
//   HROT <a> <r> -> <c>
//   PADD|PMULT|CADD|CMULT <a> -> <c>
//   RESCALE <a> -> <c>
//   BOOT <a> -> <c>
//
// `#` starts a comment. RESIDENT marks a ciphertext that starts in the
// scratchpad; other declared inputs start in HBM.

#include <bts/error.hpp>
#include <bts/instance.hpp>
#include <bts/schedule.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bts {

enum class TraceOpKind { Decl, HMult, HRot, HAdd, PAdd, PMult, CAdd, CMult, Rescale, Boot };

inline const char* trace_op_name(TraceOpKind k)
{
    switch (k) {
    case TraceOpKind::Decl: return "DECL";
    case TraceOpKind::HMult: return "HMULT";
    case TraceOpKind::HRot: return "HROT";
    case TraceOpKind::HAdd: return "HADD";
    case TraceOpKind::PAdd: return "PADD";
    case TraceOpKind::PMult: return "PMULT";
    case TraceOpKind::CAdd: return "CADD";
    case TraceOpKind::CMult: return "CMULT";
    case TraceOpKind::Rescale: return "RESCALE";
    case TraceOpKind::Boot: return "BOOT";
    }
    return "?";
}

inline std::optional<TraceOpKind> to_trace_kind(HeOpKind k)
{
    switch (k) {
    case HeOpKind::HMult: return TraceOpKind::HMult;
    case HeOpKind::HRot: return TraceOpKind::HRot;
    case HeOpKind::HAdd: return TraceOpKind::HAdd;
    case HeOpKind::PAdd: return TraceOpKind::PAdd;
    case HeOpKind::PMult: return TraceOpKind::PMult;
    case HeOpKind::CAdd: return TraceOpKind::CAdd;
    case HeOpKind::CMult: return TraceOpKind::CMult;
    case HeOpKind::Rescale: return TraceOpKind::Rescale;
    }
    return std::nullopt;
}

struct TraceOp {
    TraceOpKind kind = TraceOpKind::Decl;
    std::vector<std::string> inputs;
    std::string output;
    long long rotation = 0; // HROT only
    int level = 0;          // DECL only
    bool resident = false;  // DECL only
    int line = 0;

    bool operator==(const TraceOp& o) const
    {
        return kind == o.kind && inputs == o.inputs && output == o.output && rotation == o.rotation &&
               level == o.level && resident == o.resident;
    }
};

using Trace = std::vector<TraceOp>;

inline Trace parse_trace(const std::string& text)
{
    Trace t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        std::istringstream ls(line);
        std::vector<std::string> w;
        for (std::string s; ls >> s;)
            w.push_back(s);
        if (w.empty())
            continue;
        auto fail = [&](const std::string& msg) {
            throw Error(ErrorCode::ParseError, "trace line " + std::to_string(lineno) + ": " + msg);
        };
        auto to_ll = [&](const std::string& s) {
            try {
                std::size_t used = 0;
                long long v = std::stoll(s, &used);
                if (used != s.size())
                    fail("bad integer '" + s + "'");
                return v;
            } catch (const std::logic_error&) {
                fail("bad integer '" + s + "'");
            }
            return 0LL;
        };
        TraceOp op;
        op.line = lineno;
        const std::string& verb = w[0];
        if (verb == "DECL") {
            if ((w.size() != 4 && w.size() != 5) || w[2] != "LEVEL" || (w.size() == 5 && w[4] != "RESIDENT"))
                fail("expected DECL <name> LEVEL <l> [RESIDENT]");
            op.kind = TraceOpKind::Decl;
            op.output = w[1];
            const long long l = to_ll(w[3]);
            if (l < 0 || l > 1'000'000)
                fail("level out of range");
            op.level = static_cast<int>(l);
            op.resident = w.size() == 5;
        } else {
            static const std::map<std::string, std::pair<TraceOpKind, int>> shapes = {
                {"HMULT", {TraceOpKind::HMult, 2}}, {"HADD", {TraceOpKind::HAdd, 2}},
                {"HROT", {TraceOpKind::HRot, 2}},   {"PADD", {TraceOpKind::PAdd, 1}},
                {"PMULT", {TraceOpKind::PMult, 1}}, {"CADD", {TraceOpKind::CAdd, 1}},
                {"CMULT", {TraceOpKind::CMult, 1}}, {"RESCALE", {TraceOpKind::Rescale, 1}},
                {"BOOT", {TraceOpKind::Boot, 1}},
            };
            auto it = shapes.find(verb);
            if (it == shapes.end())
                fail("unknown op '" + verb + "'");
            const auto [kind, args] = it->second;
            if (w.size() != static_cast<std::size_t>(args) + 3 || w[args + 1] != "->")
                fail(std::string("expected ") + verb + (args == 2 ? " <a> <b> -> <c>" : " <a> -> <c>"));
            op.kind = kind;
            op.inputs.push_back(w[1]);
            if (kind == TraceOpKind::HRot)
                op.rotation = to_ll(w[2]);
            else if (args == 2)
                op.inputs.push_back(w[2]);
            op.output = w[args + 2];
        }
        t.push_back(std::move(op));
    }
    return t;
}

inline std::string print_trace(const Trace& t)
{
    std::ostringstream out;
    for (const auto& op : t) {
        out << trace_op_name(op.kind);
        if (op.kind == TraceOpKind::Decl) {
            out << " " << op.output << " LEVEL " << op.level << (op.resident ? " RESIDENT" : "") << "\n";
            continue;
        }
        out << " " << op.inputs[0];
        if (op.kind == TraceOpKind::HRot)
            out << " " << op.rotation;
        else if (op.inputs.size() == 2)
            out << " " << op.inputs[1];
        out << " -> " << op.output << "\n";
    }
    return out.str();
}

inline Trace load_trace(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::ParseError, "cannot open trace " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_trace(ss.str());
}

/// Levels of every op's output after semantic checks: names declared before
/// use, matching operand levels, no rescale or multiplication at level 0.
inline std::vector<int> check_trace(const Trace& t, const CkksInstance& inst, int l_boot)
{
    std::map<std::string, int> level;
    std::vector<int> out;
    for (const auto& op : t) {
        auto fail = [&](const std::string& msg) {
            throw Error(ErrorCode::TraceError, "trace line " + std::to_string(op.line) + ": " + msg);
        };
        std::vector<int> in;
        for (const auto& name : op.inputs) {
            auto it = level.find(name);
            if (it == level.end())
                fail("'" + name + "' used before declaration");
            in.push_back(it->second);
        }
        int l = 0;
        switch (op.kind) {
        case TraceOpKind::Decl:
            if (op.level > inst.L)
                fail("declared level exceeds L");
            l = op.level;
            break;
        case TraceOpKind::HMult:
        case TraceOpKind::HAdd:
            if (in[0] != in[1])
                fail("operands at different levels");
            if (op.kind == TraceOpKind::HMult && in[0] < 1)
                fail("HMULT at level 0 leaves nothing to rescale");
            l = in[0];
            break;
        case TraceOpKind::Rescale:
            if (in[0] < 1)
                fail("RESCALE at level 0");
            l = in[0] - 1;
            break;
        case TraceOpKind::Boot:
            if (inst.L - l_boot < 0)
                fail("bootstrapping consumes more than L levels");
            l = inst.L - l_boot;
            break;
        default:
            l = in[0];
        }
        level[op.output] = l;
        out.push_back(l);
    }
    return out;
}

/// Canonical amortized-mult loop: start just after a bootstrap, multiply and
/// rescale down to level 0, then bootstrap; repeated `rounds` times.
inline Trace gen_microbench(const CkksInstance& inst, int rounds = 1, int l_boot = 19)
{
    const int start = inst.L - l_boot;
    if (start < 1)
        throw Error(ErrorCode::InvalidInstance, "L must exceed L_boot");
    if (rounds < 1)
        throw Error(ErrorCode::InvalidArgument, "rounds must be positive");
    Trace t;
    TraceOp decl;
    decl.kind = TraceOpKind::Decl;
    decl.output = "x";
    decl.level = start;
    decl.resident = true;
    t.push_back(decl);
    for (int r = 0; r < rounds; ++r) {
        for (int l = start; l >= 1; --l) {
            TraceOp m;
            m.kind = TraceOpKind::HMult;
            m.inputs = {"x", "x"};
            m.output = "x";
            t.push_back(m);
            TraceOp s;
            s.kind = TraceOpKind::Rescale;
            s.inputs = {"x"};
            s.output = "x";
            t.push_back(s);
        }
        TraceOp b;
        b.kind = TraceOpKind::Boot;
        b.inputs = {"x"};
        b.output = "x";
        t.push_back(b);
    }
    return t;
}

} // namespace bts
