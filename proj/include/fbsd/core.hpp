// SPDX-License-Identifier: Apache-2.0
// Trace data model: packets, labels, attack registry and validation.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fbsd/error.hpp"

namespace fbsd {

enum class Layer { Nas, Rrc };

std::string_view to_string(Layer layer);
Layer parse_layer(std::string_view text);

inline constexpr Layer kLayers[] = {Layer::Nas, Layer::Rrc};

// Message kinds per layer, in canonical (registry) order.
std::span<const std::string_view> message_kinds(Layer layer);
std::optional<std::size_t> kind_index(Layer layer, std::string_view kind);
bool is_known_kind(Layer layer, std::string_view kind);

// Absent, integer/enum code, or string.
using FieldValue = std::variant<std::monostate, std::int64_t, std::string>;
using FieldMap = std::map<std::string, FieldValue, std::less<>>;

bool is_absent(const FieldValue& v);
std::string value_text(const FieldValue& v);

enum class Category {
    DoS,
    ActivityMonitoring,
    LocationTracking,
    BatteryDrain,
    BiddingDown,
    DeviceIdentification,
    InfoLeak,
    ResourceWaste,
    Misinformation,
};

std::string_view to_string(Category c);

struct AttackInfo {
    int id;
    std::string_view name;
    std::vector<Category> categories;
};

inline constexpr int kNumAttacks = 21;
inline constexpr int kNumMsaClasses = kNumAttacks + 1;

const std::vector<AttackInfo>& attack_registry();
const AttackInfo& attack_info(int id);
bool is_registered_attack(int id);
std::optional<int> find_attack(std::string_view name_or_id);

struct Label {
    enum class Kind { Benign, Fbs, Msa };
    Kind kind = Kind::Benign;
    int attack = 0;

    static Label benign() { return {}; }
    static Label fbs() { return {Kind::Fbs, 0}; }
    static Label msa(int attack) { return {Kind::Msa, attack}; }

    bool is_benign() const { return kind == Kind::Benign; }
    friend bool operator==(const Label&, const Label&) = default;
};

std::string to_string(const Label& label);
Label parse_label(std::string_view text);

// Trace-level scenario uses the same shape as a packet label.
using Scenario = Label;

enum class DatasetKind { Fbs, Msa };

// Fbs: Benign->0, Fbs->1. Msa: Benign->0, Msa(k)->k.
int label_code(const Label& label, DatasetKind kind);
Label decode_label(int code, DatasetKind kind);
int num_classes(DatasetKind kind);

struct Packet {
    std::string trace_id;
    std::uint32_t seq = 0;
    Layer layer = Layer::Nas;
    std::string kind;
    FieldMap fields;
    Label label;

    const FieldValue* field(std::string_view name) const;
    std::optional<std::int64_t> int_field(std::string_view name) const;
};

struct Trace {
    std::string trace_id;
    Scenario scenario;
    int attacker_level = 0;
    std::uint64_t seed = 0;
    bool mobility = false;
    std::vector<Packet> packets;
};

// Class of a trace from its packet labels ("benign", "fbs", "msa:k").
std::string trace_class(const Trace& trace);

// Packets of one layer, in seq order.
std::vector<Packet> split_layer(const Trace& trace, Layer layer);

enum class ViolationRule {
    TraceIdMismatch,
    NonMonotonicSeq,
    UnknownKind,
    UnknownField,
    ScenarioLabelMismatch,
    MissingAttackLabel,
    UnregisteredAttack,
    LevelScenarioMismatch,
};

std::string_view to_string(ViolationRule rule);

struct Violation {
    std::optional<std::uint32_t> seq;
    ViolationRule rule;
    std::string detail;
};

std::vector<Violation> validate(const Trace& trace);

// JSON lines I/O. One trace per line.
std::string trace_to_json(const Trace& trace);
Trace trace_from_json(std::string_view line);
void write_traces(std::ostream& out, std::span<const Trace> traces);
std::vector<Trace> read_traces(std::istream& in);
std::vector<Trace> read_traces_file(const std::string& path);
void write_traces_file(const std::string& path, std::span<const Trace> traces);

}  // namespace fbsd
