// SPDX-License-Identifier: Apache-2.0
#include "fbsd/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "fbsd/schema.hpp"

namespace fbsd {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "ValidationError";
        case ErrorKind::Io: return "IoError";
        case ErrorKind::Parse: return "ParseError";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::MsaLabelInFbsDataset: return "MsaLabelInFbsDataset";
        case ErrorKind::NotAnAttackTrace: return "NotAnAttackTrace";
        case ErrorKind::UnregisteredAttack: return "UnregisteredAttack";
        case ErrorKind::ClassTooSmall: return "ClassTooSmall";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::AllMasked: return "AllMasked";
        case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrorKind::UntrainedModel: return "UntrainedModel";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::MissingClass: return "MissingClass";
        case ErrorKind::UnknownAttack: return "UnknownAttack";
        case ErrorKind::LabelSpaceMismatch: return "LabelSpaceMismatch";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
    }
    return "Error";
}

std::string_view to_string(Layer layer) { return layer == Layer::Nas ? "nas" : "rrc"; }

Layer parse_layer(std::string_view text) {
    if (text == "nas" || text == "NAS") return Layer::Nas;
    if (text == "rrc" || text == "RRC") return Layer::Rrc;
    throw Error(ErrorKind::Parse, "unknown layer '" + std::string(text) + "'");
}

namespace {

constexpr std::array<std::string_view, 21> kNasKinds = {
    "AttachRequest",
    "AttachAccept",
    "AttachComplete",
    "AttachReject",
    "AuthenticationRequest",
    "AuthenticationResponse",
    "AuthenticationFailure",
    "AuthenticationReject",
    "IdentityRequest",
    "IdentityResponse",
    "SecurityModeCommand",
    "SecurityModeComplete",
    "SecurityModeReject",
    "TrackingAreaUpdateRequest",
    "TrackingAreaUpdateAccept",
    "TrackingAreaUpdateReject",
    "ServiceRequest",
    "ServiceReject",
    "DetachRequest",
    "EMMInformation",
    "PagingWithIMSI",
};

constexpr std::array<std::string_view, 23> kRrcKinds = {
    "rrcConnectionRequest",
    "rrcConnectionSetup",
    "rrcConnectionSetupComplete",
    "rrcConnectionRelease",
    "rrcConnectionReconfiguration",
    "rrcConnectionReconfigurationComplete",
    "rrcConnectionReestablishmentRequest",
    "rrcConnectionReestablishment",
    "rrcConnectionReestablishmentComplete",
    "rrcConnectionReestablishmentReject",
    "securityModeCommand",
    "securityModeComplete",
    "ueCapabilityEnquiry",
    "ueCapabilityInformation",
    "ueInformationRequest",
    "ueInformationResponse",
    "systemInformation",
    "systemInformationBlockType1",
    "dlInformationTransfer",
    "ulInformationTransfer",
    "paging",
    "rrcResume",
    "rrcReject",
};

std::vector<AttackInfo> make_registry() {
    using C = Category;
    return {
        {1, "Authentication relay", {C::ActivityMonitoring, C::DoS}},
        {2, "Bidding down with AttachReject", {C::DoS}},
        {3, "Paging channel hijacking", {C::DoS}},
        {4, "Location tracking via measurement reports", {C::LocationTracking}},
        {5, "Capability Hijacking", {C::DoS, C::BiddingDown}},
        {6, "Incarceration with rrcReestablishReject", {C::DoS}},
        {7, "Lullaby with rrcReestablishRequest", {C::BatteryDrain}},
        {8, "Bidding down with ServiceReject", {C::DoS}},
        {9, "MNmap", {C::DeviceIdentification}},
        {10, "Energy Depletion", {C::BatteryDrain}},
        {11, "Lullaby with rrcResume", {C::BatteryDrain}},
        {12, "Stealthy Kickoff", {C::DoS}},
        {13, "Incarceration with rrcReject and rrcRelease", {C::DoS}},
        {14, "IMSI catching", {C::InfoLeak}},
        {15, "NAS counter Desynch", {C::DoS}},
        {16, "X2 signalling flood", {C::ResourceWaste}},
        {17, "Handover hijacking", {C::DoS, C::BatteryDrain}},
        {18, "RRC replay", {C::DoS}},
        {19, "Lullaby with rrcReconfiguration", {C::BatteryDrain}},
        {20, "Bidding down with TAUReject", {C::DoS}},
        {21, "Panic Attack", {C::Misinformation}},
    };
}

}  // namespace

std::span<const std::string_view> message_kinds(Layer layer) {
    if (layer == Layer::Nas) return {kNasKinds.data(), kNasKinds.size()};
    return {kRrcKinds.data(), kRrcKinds.size()};
}

std::optional<std::size_t> kind_index(Layer layer, std::string_view kind) {
    auto kinds = message_kinds(layer);
    auto it = std::find(kinds.begin(), kinds.end(), kind);
    if (it == kinds.end()) return std::nullopt;
    return static_cast<std::size_t>(it - kinds.begin());
}

bool is_known_kind(Layer layer, std::string_view kind) { return kind_index(layer, kind).has_value(); }

bool is_absent(const FieldValue& v) { return std::holds_alternative<std::monostate>(v); }

std::string value_text(const FieldValue& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (auto* s = std::get_if<std::string>(&v)) return "s:" + *s;
    return "";
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::DoS: return "DoS";
        case Category::ActivityMonitoring: return "ActivityMonitoring";
        case Category::LocationTracking: return "LocationTracking";
        case Category::BatteryDrain: return "BatteryDrain";
        case Category::BiddingDown: return "BiddingDown";
        case Category::DeviceIdentification: return "DeviceIdentification";
        case Category::InfoLeak: return "InfoLeak";
        case Category::ResourceWaste: return "ResourceWaste";
        case Category::Misinformation: return "Misinformation";
    }
    return "";
}

const std::vector<AttackInfo>& attack_registry() {
    static const std::vector<AttackInfo> registry = make_registry();
    return registry;
}

bool is_registered_attack(int id) { return id >= 1 && id <= kNumAttacks; }

const AttackInfo& attack_info(int id) {
    if (!is_registered_attack(id))
        throw Error(ErrorKind::UnregisteredAttack, "attack id " + std::to_string(id));
    return attack_registry()[static_cast<std::size_t>(id - 1)];
}

std::optional<int> find_attack(std::string_view name_or_id) {
    int id = 0;
    auto [ptr, ec] = std::from_chars(name_or_id.data(), name_or_id.data() + name_or_id.size(), id);
    if (ec == std::errc() && ptr == name_or_id.data() + name_or_id.size())
        return is_registered_attack(id) ? std::optional<int>(id) : std::nullopt;
    for (const auto& a : attack_registry())
        if (a.name == name_or_id) return a.id;
    return std::nullopt;
}

std::string to_string(const Label& label) {
    switch (label.kind) {
        case Label::Kind::Benign: return "benign";
        case Label::Kind::Fbs: return "fbs";
        case Label::Kind::Msa: return "msa:" + std::to_string(label.attack);
    }
    return "";
}

Label parse_label(std::string_view text) {
    if (text == "benign") return Label::benign();
    if (text == "fbs") return Label::fbs();
    if (text.starts_with("msa:")) {
        auto id = find_attack(text.substr(4));
        if (!id) throw Error(ErrorKind::UnregisteredAttack, std::string(text));
        return Label::msa(*id);
    }
    throw Error(ErrorKind::Parse, "unknown label '" + std::string(text) + "'");
}

int label_code(const Label& label, DatasetKind kind) {
    switch (label.kind) {
        case Label::Kind::Benign: return 0;
        case Label::Kind::Fbs:
            if (kind != DatasetKind::Fbs)
                throw Error(ErrorKind::LabelSpaceMismatch, "Fbs label in MSA dataset");
            return 1;
        case Label::Kind::Msa:
            if (kind != DatasetKind::Msa)
                throw Error(ErrorKind::MsaLabelInFbsDataset, to_string(label));
            if (!is_registered_attack(label.attack))
                throw Error(ErrorKind::UnregisteredAttack, to_string(label));
            return label.attack;
    }
    return 0;
}

Label decode_label(int code, DatasetKind kind) {
    if (code == 0) return Label::benign();
    if (kind == DatasetKind::Fbs) {
        if (code == 1) return Label::fbs();
        throw Error(ErrorKind::Validation, "FBS label code " + std::to_string(code));
    }
    if (!is_registered_attack(code))
        throw Error(ErrorKind::UnregisteredAttack, "label code " + std::to_string(code));
    return Label::msa(code);
}

int num_classes(DatasetKind kind) { return kind == DatasetKind::Fbs ? 2 : kNumMsaClasses; }

const FieldValue* Packet::field(std::string_view name) const {
    auto it = fields.find(name);
    return it == fields.end() ? nullptr : &it->second;
}

std::optional<std::int64_t> Packet::int_field(std::string_view name) const {
    const FieldValue* v = field(name);
    if (!v) return std::nullopt;
    if (auto* i = std::get_if<std::int64_t>(v)) return *i;
    return std::nullopt;
}

std::string trace_class(const Trace& trace) {
    for (const auto& p : trace.packets)
        if (!p.label.is_benign()) return to_string(p.label);
    return "benign";
}

std::vector<Packet> split_layer(const Trace& trace, Layer layer) {
    std::vector<Packet> out;
    for (const auto& p : trace.packets)
        if (p.layer == layer) out.push_back(p);
    return out;
}

std::string_view to_string(ViolationRule rule) {
    switch (rule) {
        case ViolationRule::TraceIdMismatch: return "TraceIdMismatch";
        case ViolationRule::NonMonotonicSeq: return "NonMonotonicSeq";
        case ViolationRule::UnknownKind: return "UnknownKind";
        case ViolationRule::UnknownField: return "UnknownField";
        case ViolationRule::ScenarioLabelMismatch: return "ScenarioLabelMismatch";
        case ViolationRule::MissingAttackLabel: return "MissingAttackLabel";
        case ViolationRule::UnregisteredAttack: return "UnregisteredAttack";
        case ViolationRule::LevelScenarioMismatch: return "LevelScenarioMismatch";
    }
    return "";
}

std::vector<Violation> validate(const Trace& trace) {
    std::vector<Violation> out;
    const Scenario& sc = trace.scenario;
    if (sc.kind == Label::Kind::Msa && !is_registered_attack(sc.attack))
        out.push_back({std::nullopt, ViolationRule::UnregisteredAttack, to_string(sc)});

    bool level_ok = true;
    switch (sc.kind) {
        case Label::Kind::Benign: level_ok = trace.attacker_level == 0; break;
        case Label::Kind::Fbs: level_ok = trace.attacker_level >= 0 && trace.attacker_level <= 2; break;
        case Label::Kind::Msa: level_ok = trace.attacker_level >= 3 && trace.attacker_level <= 4; break;
    }
    if (!level_ok)
        out.push_back({std::nullopt, ViolationRule::LevelScenarioMismatch,
                       "level " + std::to_string(trace.attacker_level) + " for " + to_string(sc)});

    bool seen_attack_label = false;
    std::optional<std::uint32_t> prev;
    for (const auto& p : trace.packets) {
        if (p.trace_id != trace.trace_id)
            out.push_back({p.seq, ViolationRule::TraceIdMismatch, p.trace_id});
        if (prev && p.seq <= *prev)
            out.push_back({p.seq, ViolationRule::NonMonotonicSeq,
                           "seq " + std::to_string(p.seq) + " after " + std::to_string(*prev)});
        prev = p.seq;
        if (!is_known_kind(p.layer, p.kind))
            out.push_back({p.seq, ViolationRule::UnknownKind,
                           std::string(to_string(p.layer)) + ":" + p.kind});
        for (const auto& [name, value] : p.fields)
            if (!field_column(p.layer, name))
                out.push_back({p.seq, ViolationRule::UnknownField, name});

        const Label& l = p.label;
        bool ok = true;
        switch (sc.kind) {
            case Label::Kind::Benign: ok = l.is_benign(); break;
            case Label::Kind::Fbs: ok = l.kind != Label::Kind::Msa; break;
            case Label::Kind::Msa: ok = l.is_benign() || l == sc; break;
        }
        if (!ok)
            out.push_back({p.seq, ViolationRule::ScenarioLabelMismatch,
                           to_string(l) + " in " + to_string(sc) + " trace"});
        if (!l.is_benign() && l.kind == sc.kind) seen_attack_label = true;
    }
    if (sc.kind == Label::Kind::Msa && !seen_attack_label)
        out.push_back({std::nullopt, ViolationRule::MissingAttackLabel, to_string(sc)});
    return out;
}

namespace {

ojson value_to_json(const FieldValue& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return nullptr;
}

FieldValue value_from_json(const ojson& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) return j.get<std::string>();
    throw Error(ErrorKind::Parse, "field value must be integer, string or null");
}

}  // namespace

std::string trace_to_json(const Trace& t) {
    ojson j;
    j["trace_id"] = t.trace_id;
    j["scenario"] = to_string(t.scenario);
    j["attacker_level"] = t.attacker_level;
    j["seed"] = t.seed;
    j["mobility"] = t.mobility;
    ojson packets = ojson::array();
    for (const auto& p : t.packets) {
        ojson pj;
        pj["seq"] = p.seq;
        pj["layer"] = to_string(p.layer);
        pj["kind"] = p.kind;
        ojson fields = ojson::object();
        for (const auto& [name, value] : p.fields) fields[name] = value_to_json(value);
        pj["fields"] = std::move(fields);
        pj["label"] = to_string(p.label);
        if (p.trace_id != t.trace_id) pj["trace_id"] = p.trace_id;
        packets.push_back(std::move(pj));
    }
    j["packets"] = std::move(packets);
    return j.dump();
}

Trace trace_from_json(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    try {
        Trace t;
        t.trace_id = j.at("trace_id").get<std::string>();
        t.scenario = parse_label(j.at("scenario").get<std::string>());
        t.attacker_level = j.value("attacker_level", 0);
        t.seed = j.value("seed", std::uint64_t{0});
        t.mobility = j.value("mobility", false);
        for (const auto& pj : j.at("packets")) {
            Packet p;
            p.trace_id = pj.contains("trace_id") ? pj["trace_id"].get<std::string>() : t.trace_id;
            p.seq = pj.at("seq").get<std::uint32_t>();
            p.layer = parse_layer(pj.at("layer").get<std::string>());
            p.kind = pj.at("kind").get<std::string>();
            for (const auto& [name, value] : pj.at("fields").items())
                p.fields.emplace(name, value_from_json(value));
            p.label = parse_label(pj.at("label").get<std::string>());
            t.packets.push_back(std::move(p));
        }
        return t;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
}

void write_traces(std::ostream& out, std::span<const Trace> traces) {
    for (const auto& t : traces) out << trace_to_json(t) << '\n';
}

std::vector<Trace> read_traces(std::istream& in) {
    std::vector<Trace> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(trace_from_json(line));
    }
    return out;
}

std::vector<Trace> read_traces_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    return read_traces(in);
}

void write_traces_file(const std::string& path, std::span<const Trace> traces) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    write_traces(out, traces);
}

}  // namespace fbsd
