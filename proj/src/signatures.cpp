// SPDX-License-Identifier: Apache-2.0
#include "fbsd/signatures.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace fbsd::sig {

int Dfa::step(int state, const std::string& kind) const {
    auto it = delta.find({state, kind});
    if (it != delta.end()) return it->second;
    it = delta.find({state, kAnySymbol});
    if (it != delta.end()) return it->second;
    return state;
}

Mealy to_mealy(const Dfa& dfa) {
    Mealy m;
    m.machine = dfa;
    for (const auto& [key, to] : dfa.delta)
        if (dfa.accepting.count(to) && !dfa.accepting.count(key.first)) m.alarms.insert(key);
    return m;
}

Detection eval_dfa(const Dfa& dfa, std::span<const Packet> packets) {
    Detection d;
    int s = dfa.start;
    if (dfa.accepting.count(s)) return {true, 0};
    for (std::size_t i = 0; i < packets.size(); ++i) {
        s = dfa.step(s, packets[i].kind);
        if (dfa.accepting.count(s)) return {true, i};
    }
    return d;
}

Detection eval_mealy(const Mealy& m, std::span<const Packet> packets) {
    int s = m.machine.start;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const std::string& k = packets[i].kind;
        bool alarm = false;
        if (m.machine.delta.count({s, k}))
            alarm = m.alarms.count({s, k}) != 0;
        else if (m.machine.delta.count({s, kAnySymbol}))
            alarm = m.alarms.count({s, kAnySymbol}) != 0;
        s = m.machine.step(s, k);
        if (alarm) return {true, i};
    }
    return {};
}

namespace {

class Parser {
public:
    explicit Parser(const std::string& text) : t_(text) {}

    FormulaPtr parse() {
        auto f = parse_or();
        skip_ws();
        if (pos_ != t_.size()) fail("unexpected trailing input");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::Parse, "pltl: " + msg + " at offset " + std::to_string(pos_));
    }

    void skip_ws() {
        while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < t_.size() && t_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    // Single-letter operator not followed by an identifier character.
    bool eat_op(char c) {
        skip_ws();
        if (pos_ < t_.size() && t_[pos_] == c &&
            (pos_ + 1 == t_.size() || !(std::isalnum(static_cast<unsigned char>(t_[pos_ + 1])) || t_[pos_ + 1] == '_'))) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool eat_word(const std::string& w) {
        skip_ws();
        if (t_.compare(pos_, w.size(), w) == 0) {
            pos_ += w.size();
            return true;
        }
        return false;
    }

    std::string ident() {
        skip_ws();
        std::size_t b = pos_;
        while (pos_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[pos_])) || t_[pos_] == '_' ||
                                    t_[pos_] == '-'))
            ++pos_;
        if (b == pos_) fail("expected identifier");
        return t_.substr(b, pos_ - b);
    }

    static FormulaPtr node(Formula::Op op, FormulaPtr a = nullptr, FormulaPtr b = nullptr) {
        auto f = std::make_shared<Formula>();
        f->op = op;
        f->a = std::move(a);
        f->b = std::move(b);
        return f;
    }

    FormulaPtr parse_or() {
        auto f = parse_and();
        while (eat('|')) f = node(Formula::Op::Or, f, parse_and());
        return f;
    }

    FormulaPtr parse_and() {
        auto f = parse_since();
        while (eat('&')) f = node(Formula::Op::And, f, parse_since());
        return f;
    }

    FormulaPtr parse_since() {
        auto f = parse_unary();
        while (eat_op('S')) f = node(Formula::Op::Since, f, parse_unary());
        return f;
    }

    FormulaPtr parse_unary() {
        if (eat('!')) return node(Formula::Op::Not, parse_unary());
        if (eat_op('Y')) return node(Formula::Op::Yesterday, parse_unary());
        if (eat_op('O')) return node(Formula::Op::Once, parse_unary());
        if (eat_op('H')) return node(Formula::Op::Historically, parse_unary());
        if (eat('(')) {
            auto f = parse_or();
            if (!eat(')')) fail("expected ')'");
            return f;
        }
        return parse_atom();
    }

    FormulaPtr parse_atom() {
        if (eat_word("true")) return node(Formula::Op::True);
        if (eat_word("false")) return node(Formula::Op::False);
        if (eat_word("kind")) {
            if (!eat('=')) fail("expected '=' after kind");
            auto f = std::make_shared<Formula>();
            f->op = Formula::Op::Kind;
            f->name = ident();
            return f;
        }
        if (eat_word("field")) {
            if (!eat('[')) fail("expected '[' after field");
            auto f = std::make_shared<Formula>();
            f->op = Formula::Op::Field;
            f->name = ident();
            if (!eat(']') || !eat('=')) fail("expected ']='");
            skip_ws();
            if (eat('"')) {
                std::size_t b = pos_;
                while (pos_ < t_.size() && t_[pos_] != '"') ++pos_;
                if (pos_ == t_.size()) fail("unterminated string");
                f->value = t_.substr(b, pos_ - b);
                ++pos_;
            } else {
                std::size_t b = pos_;
                if (pos_ < t_.size() && t_[pos_] == '-') ++pos_;
                while (pos_ < t_.size() && std::isdigit(static_cast<unsigned char>(t_[pos_]))) ++pos_;
                if (b == pos_) fail("expected field value");
                f->value = std::int64_t{std::stoll(t_.substr(b, pos_ - b))};
            }
            return f;
        }
        fail("expected atom");
    }

    const std::string& t_;
    std::size_t pos_ = 0;
};

bool atom_holds(const Formula& f, const Packet& p) {
    if (f.op == Formula::Op::Kind) return p.kind == f.name;
    const FieldValue* v = p.field(f.name);
    return v && !is_absent(*v) && *v == f.value;
}

void postorder(const Formula* f, std::vector<const Formula*>& out) {
    if (f->a) postorder(f->a.get(), out);
    if (f->b) postorder(f->b.get(), out);
    out.push_back(f);
}

}  // namespace

FormulaPtr parse_pltl(const std::string& text) { return Parser(text).parse(); }

std::string to_string(const Formula& f) {
    using Op = Formula::Op;
    switch (f.op) {
        case Op::True: return "true";
        case Op::False: return "false";
        case Op::Kind: return "kind=" + f.name;
        case Op::Field: {
            if (const auto* s = std::get_if<std::string>(&f.value)) return "field[" + f.name + "]=\"" + *s + "\"";
            return "field[" + f.name + "]=" + std::to_string(std::get<std::int64_t>(f.value));
        }
        case Op::Not: return "!" + to_string(*f.a);
        case Op::Yesterday: return "Y " + to_string(*f.a);
        case Op::Once: return "O " + to_string(*f.a);
        case Op::Historically: return "H " + to_string(*f.a);
        case Op::And: return "(" + to_string(*f.a) + " & " + to_string(*f.b) + ")";
        case Op::Or: return "(" + to_string(*f.a) + " | " + to_string(*f.b) + ")";
        case Op::Since: return "(" + to_string(*f.a) + " S " + to_string(*f.b) + ")";
    }
    return {};
}

PltlResult eval_pltl(const Formula& f, std::span<const Packet> packets) {
    using Op = Formula::Op;
    std::vector<const Formula*> order;
    postorder(&f, order);
    std::map<const Formula*, std::size_t> idx;
    for (std::size_t k = 0; k < order.size(); ++k) idx[order[k]] = k;
    std::vector<char> prev(order.size(), 0), now(order.size(), 0);
    PltlResult r;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Formula& g = *order[k];
            auto A = [&] { return now[idx[g.a.get()]] != 0; };
            auto B = [&] { return now[idx[g.b.get()]] != 0; };
            bool v = false;
            switch (g.op) {
                case Op::True: v = true; break;
                case Op::False: v = false; break;
                case Op::Kind:
                case Op::Field: v = atom_holds(g, packets[i]); break;
                case Op::Not: v = !A(); break;
                case Op::And: v = A() && B(); break;
                case Op::Or: v = A() || B(); break;
                case Op::Yesterday: v = i > 0 && prev[idx[g.a.get()]]; break;
                case Op::Once: v = A() || (i > 0 && prev[k]); break;
                case Op::Historically: v = A() && (i == 0 || prev[k]); break;
                case Op::Since: v = B() || (A() && i > 0 && prev[k]); break;
            }
            now[k] = v;
        }
        bool top = now.back() != 0;
        r.steps.push_back(top);
        if (top && !r.verdict) {
            r.verdict = true;
            r.position = i;
        }
        std::swap(prev, now);
    }
    return r;
}

bool holds_at(const Formula& f, std::span<const Packet> packets, std::size_t i) {
    using Op = Formula::Op;
    switch (f.op) {
        case Op::True: return true;
        case Op::False: return false;
        case Op::Kind:
        case Op::Field: return atom_holds(f, packets[i]);
        case Op::Not: return !holds_at(*f.a, packets, i);
        case Op::And: return holds_at(*f.a, packets, i) && holds_at(*f.b, packets, i);
        case Op::Or: return holds_at(*f.a, packets, i) || holds_at(*f.b, packets, i);
        case Op::Yesterday: return i > 0 && holds_at(*f.a, packets, i - 1);
        case Op::Once:
            for (std::size_t j = 0; j <= i; ++j)
                if (holds_at(*f.a, packets, j)) return true;
            return false;
        case Op::Historically:
            for (std::size_t j = 0; j <= i; ++j)
                if (!holds_at(*f.a, packets, j)) return false;
            return true;
        case Op::Since:
            for (std::size_t j = i + 1; j-- > 0;) {
                if (holds_at(*f.b, packets, j)) {
                    bool ok = true;
                    for (std::size_t k = j + 1; k <= i && ok; ++k) ok = holds_at(*f.a, packets, k);
                    if (ok) return true;
                }
            }
            return false;
    }
    return false;
}

std::string to_string(Representation r) {
    switch (r) {
        case Representation::Dfa: return "dfa";
        case Representation::Mealy: return "mealy";
        case Representation::Pltl: return "pltl";
    }
    return {};
}

std::vector<const Signature*> SignatureSet::of(Representation r) const {
    std::vector<const Signature*> out;
    for (const auto& s : signatures)
        if (s.type == r) out.push_back(&s);
    return out;
}

std::vector<int> SignatureSet::attacks() const {
    std::vector<int> out;
    for (const auto& s : signatures)
        if (std::find(out.begin(), out.end(), s.attack) == out.end()) out.push_back(s.attack);
    return out;
}

namespace {

Dfa parse_dfa(const nlohmann::json& j) {
    Dfa d;
    d.states = j.at("states").get<int>();
    d.start = j.value("start", 0);
    for (int a : j.at("accepting")) d.accepting.insert(a);
    for (const auto& t : j.at("transitions")) {
        int from = t.at("from").get<int>(), to = t.at("to").get<int>();
        if (from < 0 || from >= d.states || to < 0 || to >= d.states)
            throw Error(ErrorKind::Parse, "dfa transition state out of range");
        for (const auto& on : t.at("on")) d.delta[{from, on.get<std::string>()}] = to;
    }
    return d;
}

}  // namespace

SignatureSet parse_signatures(const std::string& json_text) {
    SignatureSet set;
    try {
        auto j = nlohmann::json::parse(json_text);
        for (const auto& e : j.at("signatures")) {
            Signature s;
            s.name = e.at("name").get<std::string>();
            s.attack = e.at("attack").get<int>();
            if (!is_registered_attack(s.attack)) throw Error(ErrorKind::UnregisteredAttack, s.name);
            s.layer = parse_layer(e.value("layer", std::string("nas")));
            const std::string type = e.at("type").get<std::string>();
            if (type == "dfa") {
                s.type = Representation::Dfa;
                s.dfa = parse_dfa(e);
            } else if (type == "mealy") {
                s.type = Representation::Mealy;
                s.dfa = parse_dfa(e);
                s.mealy = to_mealy(s.dfa);
            } else if (type == "pltl") {
                s.type = Representation::Pltl;
                s.formula_text = e.at("formula").get<std::string>();
                s.formula = parse_pltl(s.formula_text);
            } else {
                throw Error(ErrorKind::Parse, "unknown signature type " + type);
            }
            set.signatures.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return set;
}

std::string builtin_signatures_json() {
    struct Rule {
        const char* name;
        int attack;
        const char* layer;
        const char* dfa;
        const char* pltl;
    };
    static const Rule rules[] = {
        {"Attach Reject", 2, "nas", R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["AttachReject"],"to":1}]})",
         "kind=AttachReject & field[nas_eps_emm_cause]=7"},
        {"IMSI Catching", 14, "nas",
         R"({"states":3,"accepting":[2],"transitions":[{"from":0,"on":["SecurityModeCommand"],"to":1},)"
         R"({"from":1,"on":["AttachRequest","TrackingAreaUpdateRequest","ServiceRequest"],"to":0},)"
         R"({"from":0,"on":["IdentityRequest"],"to":2}]})",
         "kind=IdentityRequest & field[nas_eps_emm_id_type2]=1 & field[nas_eps_security_header_type]=0"},
        {"Service Reject", 8, "nas",
         R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["ServiceReject"],"to":1}]})",
         "kind=ServiceReject & field[nas_eps_emm_cause]=7"},
        {"TAU Reject", 20, "nas",
         R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["TrackingAreaUpdateReject"],"to":1}]})",
         "kind=TrackingAreaUpdateReject & field[nas_eps_emm_cause]=7"},
        {"Measurement Report", 4, "rrc",
         R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["ueInformationRequest"],"to":1}]})",
         "kind=ueInformationRequest & field[lte_rrc_rach_ReportReq_r9]=1"},
        {"Paging with IMSI", 10, "nas",
         R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["PagingWithIMSI"],"to":1}]})",
         "kind=PagingWithIMSI & field[nas_eps_security_header_type]=0"},
        {"Authentication Failure", 15, "nas",
         R"({"states":2,"accepting":[1],"transitions":[{"from":0,"on":["AuthenticationFailure"],"to":1}]})",
         "kind=AuthenticationFailure & Y (kind=AuthenticationRequest & field[nas_eps_emm_nas_key_setid]=6)"},
        {"Numb Attack", 12, "nas",
         R"({"states":3,"accepting":[2],"transitions":[{"from":0,"on":["AuthenticationResponse"],"to":1},)"
         R"({"from":0,"on":["AuthenticationReject"],"to":2},{"from":1,"on":["AuthenticationResponse"],"to":1},)"
         R"({"from":1,"on":["*"],"to":0}]})",
         "kind=AuthenticationReject & !Y kind=AuthenticationResponse & field[nas_eps_security_header_type]=0"},
    };
    nlohmann::ordered_json out;
    out["format_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const char* type : {"dfa", "mealy", "pltl"}) {
        for (const auto& r : rules) {
            nlohmann::ordered_json e;
            e["name"] = r.name;
            e["attack"] = r.attack;
            e["layer"] = r.layer;
            e["type"] = type;
            if (std::string(type) == "pltl") {
                e["formula"] = r.pltl;
            } else {
                const auto body = nlohmann::ordered_json::parse(r.dfa);
                for (const auto& [k, v] : body.items()) e[k] = v;
            }
            arr.push_back(std::move(e));
        }
    }
    out["signatures"] = std::move(arr);
    return out.dump(2);
}

const SignatureSet& builtin_signatures() {
    static const SignatureSet set = parse_signatures(builtin_signatures_json());
    return set;
}

std::optional<std::size_t> fire_position(const Signature& s, const Trace& t) {
    std::vector<Packet> pk;
    std::vector<std::size_t> global;
    for (std::size_t i = 0; i < t.packets.size(); ++i)
        if (t.packets[i].layer == s.layer) {
            pk.push_back(t.packets[i]);
            global.push_back(i);
        }
    std::optional<std::size_t> pos;
    switch (s.type) {
        case Representation::Dfa: pos = eval_dfa(s.dfa, pk).position; break;
        case Representation::Mealy: pos = eval_mealy(s.mealy, pk).position; break;
        case Representation::Pltl: pos = eval_pltl(*s.formula, pk).position; break;
    }
    if (!pos) return std::nullopt;
    return global[*pos];
}

int classify(const SignatureSet& set, Representation r, const Trace& t) {
    int best = 0;
    std::optional<std::size_t> best_pos;
    for (const Signature* s : set.of(r)) {
        auto p = fire_position(*s, t);
        if (p && (!best_pos || *p < *best_pos)) {
            best_pos = p;
            best = s->attack;
        }
    }
    return best;
}

std::vector<EvasionRow> evasion_report(const SignatureSet& set, std::span<const Trace> original,
                                       std::span<const Trace> reshaped,
                                       const std::function<Label(const Trace&)>& graph_verdict) {
    std::vector<EvasionRow> rows;
    for (int attack : set.attacks()) {
        EvasionRow row;
        row.attack = attack;
        std::size_t n_orig = 0, n_resh = 0, recovered = 0;
        std::map<Representation, std::size_t> hit_o, hit_r;
        for (const auto& t : original) {
            if (t.scenario != Label::msa(attack)) continue;
            ++n_orig;
            for (auto r : kRepresentations) hit_o[r] += classify(set, r, t) == attack;
        }
        for (const auto& t : reshaped) {
            if (t.scenario != Label::msa(attack)) continue;
            ++n_resh;
            for (auto r : kRepresentations) hit_r[r] += classify(set, r, t) == attack;
            if (graph_verdict) recovered += graph_verdict(t) == Label::msa(attack);
        }
        row.traces = n_resh;
        for (auto r : kRepresentations) {
            row.original[r] = n_orig ? static_cast<double>(hit_o[r]) / n_orig : 0.0;
            row.reshaped[r] = n_resh ? static_cast<double>(hit_r[r]) / n_resh : 0.0;
        }
        if (graph_verdict && n_resh) row.graph_recovery = static_cast<double>(recovered) / n_resh;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string evasion_report_json(const std::vector<EvasionRow>& rows) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json e;
        e["attack"] = r.attack;
        e["name"] = attack_info(r.attack).name;
        e["traces"] = r.traces;
        for (const auto& [rep, v] : r.original) e["original"][to_string(rep)] = v;
        for (const auto& [rep, v] : r.reshaped) e["reshaped"][to_string(rep)] = v;
        if (r.graph_recovery >= 0) e["graph_recovery"] = r.graph_recovery;
        arr.push_back(std::move(e));
    }
    j["attacks"] = std::move(arr);
    return j.dump(2);
}

}  // namespace fbsd::sig
