// SPDX-License-Identifier: Apache-2.0
// Seeded generator of labeled benign, FBS and multi-step attack traces.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fbsd/core.hpp"

namespace fbsd::sim {

struct ScenarioSpec {
    Scenario scenario;
    int attacker_level = 0;
    bool mobility = false;
    int n_traces = 1;
    std::uint64_t master_seed = 0;
    double noise = 0.0;
};

// Throws Error(Validation) when the spec breaks level/scenario rules.
void check_spec(const ScenarioSpec& spec);

enum class StepOp {
    Rrc,       // attacker-side RRC message
    NasDown,   // NAS downlink carried in dlInformationTransfer
    NasUp,     // NAS uplink carried in ulInformationTransfer
    Connect,   // rrcConnectionRequest/Setup/SetupComplete carrying a NAS uplink
    Page,      // RRC paging carrying a NAS paging record
};

struct ScriptStep {
    StepOp op;
    std::string kind;
    FieldMap fields;
};

struct AttackScript {
    int attack = 0;
    std::vector<ScriptStep> steps;
};

const AttackScript& attack_script(int attack);

Trace gen_benign(const ScenarioSpec& spec, std::uint64_t trace_index);
Trace gen_fbs(const ScenarioSpec& spec, std::uint64_t trace_index);
Trace gen_msa(const ScenarioSpec& spec, std::uint64_t trace_index);
Trace generate(const ScenarioSpec& spec, std::uint64_t trace_index);

// Level-4 reshaping: field mutation plus benign message injection.
Trace reshape(const Trace& trace, std::uint64_t seed);

// Static table of mutable fields per message kind and their alternatives.
struct MutableField {
    std::string_view field;
    std::vector<std::int64_t> alternatives;
};
const std::vector<MutableField>& non_critical_fields(Layer layer, std::string_view kind);

struct Manifest {
    std::vector<ScenarioSpec> specs;
    std::map<std::string, int> counts;
    int total = 0;
};

struct Dataset {
    std::vector<Trace> traces;
    Manifest manifest;
};

Dataset gen_dataset(std::span<const ScenarioSpec> specs, int workers = 1);

std::string manifest_to_json(const Manifest& m);

// Key-value config: one [spec] section per ScenarioSpec.
std::vector<ScenarioSpec> parse_config(std::istream& in);
std::vector<ScenarioSpec> parse_config_file(const std::string& path);

}  // namespace fbsd::sim
