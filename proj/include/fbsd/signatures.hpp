// SPDX-License-Identifier: Apache-2.0
// Signature baselines: DFA, Mealy machine and past-time LTL monitors.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbsd/core.hpp"

namespace fbsd::sig {

// Wildcard symbol for default transitions.
inline constexpr const char* kAnySymbol = "*";

struct Dfa {
    int states = 1;
    int start = 0;
    std::set<int> accepting;
    std::map<std::pair<int, std::string>, int> delta;

    // Missing symbols fall back to "*", then self-loop.
    int step(int state, const std::string& kind) const;
};

struct Mealy {
    Dfa machine;
    std::set<std::pair<int, std::string>> alarms;  // transitions that emit the alarm
};

// Alarm on every transition entering an accepting state from a non-accepting one.
Mealy to_mealy(const Dfa& dfa);

struct Detection {
    bool detected = false;
    std::optional<std::size_t> position;  // index into the evaluated packets
};

Detection eval_dfa(const Dfa& dfa, std::span<const Packet> packets);
Detection eval_mealy(const Mealy& m, std::span<const Packet> packets);

struct Formula {
    enum class Op { True, False, Kind, Field, Not, And, Or, Yesterday, Once, Historically, Since };
    Op op = Op::True;
    std::string name;  // kind or field name
    FieldValue value;  // field predicate value
    std::shared_ptr<const Formula> a, b;
};
using FormulaPtr = std::shared_ptr<const Formula>;

// Grammar: expr := and ('|' and)*; and := since ('&' since)*;
// since := unary ('S' unary)*; unary := ('!' | 'Y' | 'O' | 'H') unary | '(' expr ')' | atom;
// atom := true | false | kind=Name | field[name]=int | field[name]="text".
FormulaPtr parse_pltl(const std::string& text);
std::string to_string(const Formula& f);

struct PltlResult {
    std::vector<bool> steps;
    bool verdict = false;
    std::optional<std::size_t> position;
};

// One pass, one bit of state per subformula.
PltlResult eval_pltl(const Formula& f, std::span<const Packet> packets);
// Recomputes satisfaction from scratch at every step.
bool holds_at(const Formula& f, std::span<const Packet> packets, std::size_t i);

enum class Representation { Dfa, Mealy, Pltl };
inline constexpr Representation kRepresentations[] = {Representation::Dfa, Representation::Mealy,
                                                      Representation::Pltl};
std::string to_string(Representation r);

struct Signature {
    std::string name;
    int attack = 0;
    Layer layer = Layer::Nas;
    Representation type = Representation::Dfa;
    Dfa dfa;
    Mealy mealy;
    FormulaPtr formula;
    std::string formula_text;
};

struct SignatureSet {
    std::vector<Signature> signatures;  // table order

    std::vector<const Signature*> of(Representation r) const;
    std::vector<int> attacks() const;
};

SignatureSet parse_signatures(const std::string& json_text);
std::string builtin_signatures_json();
const SignatureSet& builtin_signatures();

// Position of the first firing on the trace (global packet index), if any.
std::optional<std::size_t> fire_position(const Signature& s, const Trace& t);

// Attack of the earliest-firing signature of a representation; ties go to
// table order. 0 when nothing fires.
int classify(const SignatureSet& set, Representation r, const Trace& t);

struct EvasionRow {
    int attack = 0;
    std::size_t traces = 0;
    std::map<Representation, double> original;  // detection rate
    std::map<Representation, double> reshaped;
    double graph_recovery = -1.0;  // -1 when no graph verdicts were supplied
};

// `graph_verdict` (optional) labels a reshaped trace with the graph model.
std::vector<EvasionRow> evasion_report(const SignatureSet& set, std::span<const Trace> original,
                                       std::span<const Trace> reshaped,
                                       const std::function<Label(const Trace&)>& graph_verdict = {});

std::string evasion_report_json(const std::vector<EvasionRow>& rows);

}  // namespace fbsd::sig
