// SPDX-License-Identifier: Apache-2.0
// Small builders shared by the unit tests.
#pragma once

#include <string>
#include <vector>

#include "fbsd/core.hpp"
#include "fbsd/rng.hpp"

namespace fbsd::test {

inline Packet packet(Layer layer, const std::string& kind, std::uint32_t seq, Label label = Label::benign(),
                     FieldMap fields = {}) {
    Packet p;
    p.trace_id = "t";
    p.seq = seq;
    p.layer = layer;
    p.kind = kind;
    p.label = label;
    p.fields = std::move(fields);
    return p;
}

inline std::vector<Packet> nas_packets(const std::vector<std::string>& kinds) {
    std::vector<Packet> out;
    for (std::size_t i = 0; i < kinds.size(); ++i) out.push_back(packet(Layer::Nas, kinds[i], std::uint32_t(i)));
    return out;
}

inline std::vector<std::string> kinds_of(const std::vector<Packet>& ps) {
    std::vector<std::string> out;
    for (const auto& p : ps) out.push_back(p.kind);
    return out;
}

// Random NAS packets over a small alphabet with random MSA labels.
inline std::vector<Packet> random_nas(Rng& rng, std::size_t n, std::size_t alphabet = 21) {
    auto kinds = message_kinds(Layer::Nas);
    std::vector<Packet> out;
    for (std::size_t i = 0; i < n; ++i) {
        Label l = rng.chance(0.5) ? Label::benign() : Label::msa(int(1 + rng.index(kNumAttacks)));
        out.push_back(packet(Layer::Nas, std::string(kinds[rng.index(std::min(alphabet, kinds.size()))]),
                             std::uint32_t(i), l));
    }
    return out;
}

}  // namespace fbsd::test
