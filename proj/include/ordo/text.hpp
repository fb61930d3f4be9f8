#pragma once

// Line-oriented text serialization for programs. The printer is canonical
// (byte-stable for equal programs); parse(print(p)) reprints identically.
// Grammar reference: docs/format.md.

#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ordo/ir.hpp"

namespace ordo {

struct ParseError : std::runtime_error {
    int line;
    ParseError(int ln, const std::string& msg)
        : std::runtime_error("line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

namespace text_detail {

inline std::string print_value(const Program& p, const Value& v) {
    if (v.is_ref()) {
        if (v.v < 0 || v.v >= (int64_t)p.objects.size())
            throw std::runtime_error("dangling object reference in value");
        return "&" + p.objects[v.v].name;
    }
    return std::to_string(v.v);
}

inline std::string print_operand(const Program& p, const ThreadCode& t, const Operand& o) {
    if (o.is_reg()) return t.regs[o.reg];
    return print_value(p, o.cval);
}

inline std::string print_addr(const Program& p, const ThreadCode& t, const AddrExpr& a) {
    switch (a.kind) {
    case AddrExpr::Kind::Global: return a.sym;
    case AddrExpr::Kind::ObjField: return a.sym + "." + a.field;
    case AddrExpr::Kind::RegField: return t.regs[a.reg] + "->" + a.field;
    }
    return "?";
}

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline const char* binop_name(BinOp b) {
    switch (b) {
    case BinOp::Mov: return "mov";
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Eq: return "eq";
    case BinOp::Ne: return "ne";
    case BinOp::Gt: return "gt";
    case BinOp::Not: return "not";
    }
    return "?";
}

inline std::string mode_suffix(const Instr& in) {
    if (in.bp >= 0) return "^" + std::to_string(in.bp + 1);  // id == index + 1
    return std::string("@") + to_string(in.mode) + "!";
}

}  // namespace text_detail

inline std::string print_program(const Program& p) {
    using namespace text_detail;
    std::ostringstream os;
    os << "program " << p.name << "\n\n";
    for (auto& g : p.globals) os << "global " << g.name << " = " << print_value(p, g.init) << "\n";
    for (auto& o : p.objects) {
        os << "object " << o.name << " {";
        for (size_t i = 0; i < o.fields.size(); i++)
            os << (i ? ", " : " ") << o.fields[i].name << " = " << print_value(p, o.fields[i].init);
        os << " }\n";
    }
    for (size_t i = 0; i < p.numa.size(); i++) os << "numa " << i << " " << p.numa[i] << "\n";
    if (p.final_assert)
        os << "assert " << p.final_assert->global << " == " << p.final_assert->expected << "\n";
    if (!p.points.empty()) os << "\n";
    for (auto& pt : p.points) {
        os << "point " << pt.id << " " << pt.func << " " << pt.tag << " " << pt.ordinal << " "
           << to_string(pt.kind) << " " << to_string(pt.mode);
        if (pt.fixed) os << " fixed";
        if (!pt.snippet.empty()) os << " " << quote(pt.snippet);
        os << "\n";
    }
    for (auto& t : p.threads) {
        os << "\nthread " << t.id << ":\n";
        for (auto& in : t.code) {
            switch (in.op) {
            case Op::Label: os << in.label << ":\n"; continue;
            default: break;
            }
            os << "  ";
            switch (in.op) {
            case Op::Load:
                os << "load " << t.regs[in.dst] << " " << print_addr(p, t, in.addr) << " "
                   << mode_suffix(in);
                break;
            case Op::Store:
                os << "store " << print_addr(p, t, in.addr) << " " << print_operand(p, t, in.a)
                   << " " << mode_suffix(in);
                break;
            case Op::Swap:
                os << "swap " << t.regs[in.dst] << " " << print_addr(p, t, in.addr) << " "
                   << print_operand(p, t, in.a) << " " << mode_suffix(in);
                break;
            case Op::Cas:
                os << "cas " << t.regs[in.dst] << " " << print_addr(p, t, in.addr) << " "
                   << print_operand(p, t, in.a) << " " << print_operand(p, t, in.b) << " "
                   << (in.conv == CasConv::ReturnsOld ? "old" : "flag") << " " << mode_suffix(in);
                break;
            case Op::Await:
                os << "await " << t.regs[in.dst] << " " << print_addr(p, t, in.addr) << " ";
                if (in.pred == AwaitPred::NonZero)
                    os << "nonzero";
                else if (in.pred == AwaitPred::Zero)
                    os << "zero";
                else
                    os << "eq " << print_operand(p, t, in.a);
                os << " " << mode_suffix(in);
                break;
            case Op::Fence:
                os << "fence "
                   << (in.fence == FenceKind::Full
                           ? "full"
                           : in.fence == FenceKind::WriteWrite ? "ww" : "compiler")
                   << " " << mode_suffix(in);
                break;
            case Op::Compute:
                os << t.regs[in.dst] << " = ";
                if (in.bop == BinOp::Mov)
                    os << print_operand(p, t, in.a);
                else if (in.bop == BinOp::Not)
                    os << "not " << print_operand(p, t, in.a);
                else
                    os << print_operand(p, t, in.a) << " " << binop_name(in.bop) << " "
                       << print_operand(p, t, in.b);
                break;
            case Op::Branch:
                os << "br " << t.regs[in.dst] << " " << in.lt1 << " " << in.lt2;
                break;
            case Op::Jump: os << "jmp " << in.lt1; break;
            case Op::NondetBool: os << "nondet " << t.regs[in.dst]; break;
            case Op::NumaNode: os << "numanode " << t.regs[in.dst]; break;
            case Op::Return: os << "ret"; break;
            case Op::Label: break;
            }
            os << "\n";
        }
    }
    return os.str();
}

namespace text_detail {

struct Tokens {
    std::vector<std::string> toks;
    int line;
    size_t pos = 0;

    bool done() const { return pos >= toks.size(); }
    const std::string& peek() const {
        static const std::string empty;
        return done() ? empty : toks[pos];
    }
    std::string next(const char* what) {
        if (done()) throw ParseError(line, std::string("expected ") + what);
        return toks[pos++];
    }
    void expect(const std::string& tok) {
        auto t = next(tok.c_str());
        if (t != tok) throw ParseError(line, "expected '" + tok + "', got '" + t + "'");
    }
    void end() {
        if (!done()) throw ParseError(line, "unexpected trailing token '" + peek() + "'");
    }
};

// Splits a line into tokens; treats ',' '{' '}' '=' as separate tokens and
// supports one double-quoted string (escapes: \" and \\).
inline Tokens tokenize(const std::string& s, int line) {
    Tokens t;
    t.line = line;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (isspace((unsigned char)c)) {
            i++;
            continue;
        }
        if (c == '#') break;
        if (c == '"') {
            std::string out;
            i++;
            while (i < s.size() && s[i] != '"') {
                if (s[i] == '\\' && i + 1 < s.size()) i++;
                out += s[i++];
            }
            if (i >= s.size()) throw ParseError(line, "unterminated string");
            i++;
            t.toks.push_back("\"" + out);  // marker prefix distinguishes strings
            continue;
        }
        if (c == ',' || c == '{' || c == '}') {
            t.toks.push_back(std::string(1, c));
            i++;
            continue;
        }
        size_t j = i;
        while (j < s.size() && !isspace((unsigned char)s[j]) && s[j] != ',' && s[j] != '{' &&
               s[j] != '}' && s[j] != '"' && s[j] != '#')
            j++;
        t.toks.push_back(s.substr(i, j - i));
        i = j;
    }
    return t;
}

inline bool is_int(const std::string& s) {
    if (s.empty()) return false;
    size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); i++)
        if (!isdigit((unsigned char)s[i])) return false;
    return true;
}

inline int64_t parse_int(const std::string& tok, int line, const char* what) {
    if (!is_int(tok)) throw ParseError(line, std::string("expected ") + what + ", got '" + tok + "'");
    return std::stoll(tok);
}

inline Value parse_value(const Program& p, const std::string& tok, int line) {
    if (tok == "null") return Value::integer(0);
    if (is_int(tok)) return Value::integer(std::stoll(tok));
    if (tok.size() > 1 && tok[0] == '&') {
        int oi = p.find_object(tok.substr(1));
        if (oi < 0) throw ParseError(line, "unknown object " + tok.substr(1));
        return Value::ref(oi);
    }
    throw ParseError(line, "expected value, got '" + tok + "'");
}

inline Mode parse_mode(const std::string& s, int line) {
    if (s == "rlx") return Mode::Rlx;
    if (s == "acq") return Mode::Acq;
    if (s == "rel") return Mode::Rel;
    if (s == "sc") return Mode::Sc;
    throw ParseError(line, "unknown mode '" + s + "'");
}

inline OpKind parse_kind(const std::string& s, int line) {
    if (s == "load") return OpKind::Load;
    if (s == "store") return OpKind::Store;
    if (s == "rmw") return OpKind::Rmw;
    if (s == "fence") return OpKind::Fence;
    if (s == "await") return OpKind::Await;
    throw ParseError(line, "unknown operation kind '" + s + "'");
}

struct ThreadParse {
    ThreadCode tc;
    std::unordered_map<std::string, int> regmap;
    std::unordered_map<std::string, int> labels;
    std::vector<int> fixups;

    int reg(const std::string& n) {
        auto it = regmap.find(n);
        if (it != regmap.end()) return it->second;
        int id = (int)tc.regs.size();
        tc.regs.push_back(n);
        regmap[n] = id;
        return id;
    }
};

inline Operand parse_operand(const Program& p, ThreadParse& tp, const std::string& tok,
                             int line) {
    if (tok == "null" || is_int(tok) || (!tok.empty() && tok[0] == '&'))
        return Operand::constant(parse_value(p, tok, line));
    return Operand::of_reg(tp.reg(tok));
}

inline AddrExpr parse_addr(const Program& p, ThreadParse& tp, const std::string& tok, int line) {
    auto arrow = tok.find("->");
    if (arrow != std::string::npos)
        return AddrExpr::via(tp.reg(tok.substr(0, arrow)), tok.substr(arrow + 2));
    auto dot = tok.find('.');
    if (dot != std::string::npos) return AddrExpr::obj(tok.substr(0, dot), tok.substr(dot + 1));
    (void)p;
    return AddrExpr::global(tok);
}

// Mode suffix of a shared access: "^ID" (point reference) or "@mode!" (pinned).
inline void parse_mode_ref(Program& p, Instr& in, Tokens& t) {
    auto tok = t.next("mode or point reference");
    if (tok.size() > 1 && tok[0] == '^') {
        if (!is_int(tok.substr(1))) throw ParseError(t.line, "bad point reference " + tok);
        int id = (int)std::stoll(tok.substr(1));
        if (id < 1 || id > (int)p.points.size())
            throw ParseError(t.line, "point id " + std::to_string(id) + " out of range");
        in.bp = id - 1;
        if (p.points[in.bp].kind != in.op_kind())
            throw ParseError(t.line, "point " + std::to_string(id) + " is a " +
                                         to_string(p.points[in.bp].kind) + ", not a " +
                                         to_string(in.op_kind()));
        return;
    }
    if (tok.size() > 1 && tok[0] == '@' && tok.back() == '!') {
        in.mode = parse_mode(tok.substr(1, tok.size() - 2), t.line);
        in.pinned = true;
        return;
    }
    throw ParseError(t.line, "expected ^ID or @mode!, got '" + tok + "'");
}

}  // namespace text_detail

inline Program parse_program(const std::string& src) {
    using namespace text_detail;
    Program p;
    std::istringstream is(src);
    std::string raw;
    int line = 0;
    ThreadParse* cur = nullptr;
    std::vector<ThreadParse> tps;
    bool seen_program = false;

    auto flush_threads = [&]() {
        for (auto& tp : tps) {
            for (int i : tp.fixups) {
                Instr& in = tp.tc.code[i];
                auto it1 = tp.labels.find(in.lt1);
                if (it1 == tp.labels.end())
                    throw ParseError(line, "undefined label " + in.lt1);
                in.t1 = it1->second;
                if (in.op == Op::Branch) {
                    auto it2 = tp.labels.find(in.lt2);
                    if (it2 == tp.labels.end())
                        throw ParseError(line, "undefined label " + in.lt2);
                    in.t2 = it2->second;
                }
            }
            p.threads.push_back(std::move(tp.tc));
        }
        tps.clear();
    };

    while (std::getline(is, raw)) {
        line++;
        Tokens t = tokenize(raw, line);
        if (t.done()) continue;
        std::string head = t.next("directive");

        if (head == "program") {
            p.name = t.next("program name");
            t.end();
            seen_program = true;
            continue;
        }
        if (!seen_program) throw ParseError(line, "file must start with a program directive");

        if (head == "global") {
            std::string n = t.next("global name");
            t.expect("=");
            p.globals.push_back({n, parse_value(p, t.next("value"), line)});
            t.end();
            continue;
        }
        if (head == "object") {
            ObjectDecl o;
            o.name = t.next("object name");
            t.expect("{");
            // Object may be self-referential only via later objects; field refs
            // resolve against objects declared so far plus this one.
            p.objects.push_back(o);
            auto& decl = p.objects.back();
            while (true) {
                if (t.peek() == "}") {
                    t.next("}");
                    break;
                }
                std::string fn = t.next("field name");
                t.expect("=");
                decl.fields.push_back({fn, parse_value(p, t.next("value"), line)});
                if (t.peek() == ",") t.next(",");
            }
            t.end();
            continue;
        }
        if (head == "numa") {
            int tid = (int)parse_int(t.next("thread id"), line, "thread id");
            int node = (int)parse_int(t.next("numa node"), line, "numa node");
            if ((int)p.numa.size() != tid)
                throw ParseError(line, "numa lines must appear in thread order");
            p.numa.push_back(node);
            t.end();
            continue;
        }
        if (head == "assert") {
            std::string g = t.next("global name");
            t.expect("==");
            std::string v = t.next("integer");
            if (!is_int(v)) throw ParseError(line, "assert expects an integer");
            p.final_assert = {{g, std::stoll(v)}};
            t.end();
            continue;
        }
        if (head == "point") {
            BarrierPoint pt;
            pt.id = (int)parse_int(t.next("point id"), line, "point id");
            if (pt.id != (int)p.points.size() + 1)
                throw ParseError(line, "point ids must be consecutive from 1");
            pt.func = t.next("function");
            pt.tag = t.next("source tag");
            pt.ordinal = (int)parse_int(t.next("ordinal"), line, "ordinal");
            pt.kind = parse_kind(t.next("kind"), line);
            pt.mode = parse_mode(t.next("mode"), line);
            if (t.peek() == "fixed") {
                t.next("fixed");
                pt.fixed = true;
            }
            if (!t.done()) {
                auto s = t.next("snippet");
                if (s.empty() || s[0] != '"') throw ParseError(line, "expected quoted snippet");
                pt.snippet = s.substr(1);
            }
            t.end();
            int fi = -1;
            for (size_t i = 0; i < p.functions.size(); i++)
                if (p.functions[i] == pt.func) fi = (int)i;
            if (fi < 0) {
                fi = (int)p.functions.size();
                p.functions.push_back(pt.func);
            }
            pt.func_index = fi;
            pt.seq = (int)p.points.size();
            p.points.push_back(pt);
            continue;
        }
        if (head == "thread") {
            auto idtok = t.next("thread id");
            if (!idtok.empty() && idtok.back() == ':') idtok.pop_back();
            else if (!t.done()) t.expect(":");
            int id = (int)parse_int(idtok, line, "thread id");
            if (id != (int)tps.size()) throw ParseError(line, "thread ids must be consecutive");
            tps.emplace_back();
            cur = &tps.back();
            cur->tc.id = id;
            continue;
        }

        if (!cur) throw ParseError(line, "instruction outside a thread block");
        auto& tp = *cur;
        Instr in;

        if (head.size() > 1 && head.back() == ':' && t.done()) {
            in.op = Op::Label;
            in.label = head.substr(0, head.size() - 1);
            tp.labels[in.label] = (int)tp.tc.code.size();
            tp.tc.code.push_back(in);
            continue;
        }
        if (head == "load") {
            in.op = Op::Load;
            in.dst = tp.reg(t.next("destination register"));
            in.addr = parse_addr(p, tp, t.next("address"), line);
            parse_mode_ref(p, in, t);
        } else if (head == "store") {
            in.op = Op::Store;
            in.addr = parse_addr(p, tp, t.next("address"), line);
            in.a = parse_operand(p, tp, t.next("value"), line);
            parse_mode_ref(p, in, t);
        } else if (head == "swap") {
            in.op = Op::Swap;
            in.dst = tp.reg(t.next("destination register"));
            in.addr = parse_addr(p, tp, t.next("address"), line);
            in.a = parse_operand(p, tp, t.next("value"), line);
            parse_mode_ref(p, in, t);
        } else if (head == "cas") {
            in.op = Op::Cas;
            in.dst = tp.reg(t.next("destination register"));
            in.addr = parse_addr(p, tp, t.next("address"), line);
            in.a = parse_operand(p, tp, t.next("expected"), line);
            in.b = parse_operand(p, tp, t.next("desired"), line);
            auto cv = t.next("old|flag");
            if (cv == "old")
                in.conv = CasConv::ReturnsOld;
            else if (cv == "flag")
                in.conv = CasConv::ReturnsFlag;
            else
                throw ParseError(line, "expected old or flag, got '" + cv + "'");
            parse_mode_ref(p, in, t);
        } else if (head == "await") {
            in.op = Op::Await;
            in.dst = tp.reg(t.next("destination register"));
            in.addr = parse_addr(p, tp, t.next("address"), line);
            auto pr = t.next("predicate");
            if (pr == "nonzero") {
                in.pred = AwaitPred::NonZero;
            } else if (pr == "zero") {
                in.pred = AwaitPred::Zero;
            } else if (pr == "eq") {
                in.pred = AwaitPred::Equals;
                in.a = parse_operand(p, tp, t.next("operand"), line);
            } else {
                throw ParseError(line, "unknown await predicate '" + pr + "'");
            }
            parse_mode_ref(p, in, t);
        } else if (head == "fence") {
            in.op = Op::Fence;
            auto k = t.next("fence kind");
            if (k == "full")
                in.fence = FenceKind::Full;
            else if (k == "ww")
                in.fence = FenceKind::WriteWrite;
            else if (k == "compiler")
                in.fence = FenceKind::CompilerOnly;
            else
                throw ParseError(line, "unknown fence kind '" + k + "'");
            parse_mode_ref(p, in, t);
        } else if (head == "br") {
            in.op = Op::Branch;
            in.dst = tp.reg(t.next("condition register"));
            in.lt1 = t.next("then label");
            in.lt2 = t.next("else label");
            tp.fixups.push_back((int)tp.tc.code.size());
        } else if (head == "jmp") {
            in.op = Op::Jump;
            in.lt1 = t.next("label");
            tp.fixups.push_back((int)tp.tc.code.size());
        } else if (head == "nondet") {
            in.op = Op::NondetBool;
            in.dst = tp.reg(t.next("destination register"));
        } else if (head == "numanode") {
            in.op = Op::NumaNode;
            in.dst = tp.reg(t.next("destination register"));
        } else if (head == "ret") {
            in.op = Op::Return;
        } else {
            // Compute: DST = ...
            in.op = Op::Compute;
            in.dst = tp.reg(head);
            t.expect("=");
            auto first = t.next("operand");
            if (first == "not") {
                in.bop = BinOp::Not;
                in.a = parse_operand(p, tp, t.next("operand"), line);
            } else {
                in.a = parse_operand(p, tp, first, line);
                if (t.done()) {
                    in.bop = BinOp::Mov;
                } else {
                    auto opn = t.next("operator");
                    if (opn == "add")
                        in.bop = BinOp::Add;
                    else if (opn == "sub")
                        in.bop = BinOp::Sub;
                    else if (opn == "eq")
                        in.bop = BinOp::Eq;
                    else if (opn == "ne")
                        in.bop = BinOp::Ne;
                    else if (opn == "gt")
                        in.bop = BinOp::Gt;
                    else
                        throw ParseError(line, "unknown operator '" + opn + "'");
                    in.b = parse_operand(p, tp, t.next("operand"), line);
                }
            }
        }
        t.end();
        tp.tc.code.push_back(in);
    }
    flush_threads();
    if (!seen_program) throw ParseError(1, "empty input");
    return p;
}

}  // namespace ordo
