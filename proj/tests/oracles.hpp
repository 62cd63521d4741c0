// SPDX-License-Identifier: Apache-2.0
// Reference implementations written from the definitions, shared by the unit
// tests and the acceptance run.
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fbsd/core.hpp"
#include "fbsd/fbs_detect.hpp"
#include "fbsd/rng.hpp"
#include "fbsd/signatures.hpp"
#include "helpers.hpp"

namespace fbsd::oracle {

struct BruteEdge {
    int count = 0;
    std::size_t first = 0;
    std::map<int, int> labels;
};

// Every consecutive pair, enumerated independently of build_graph.
inline std::map<std::pair<std::string, std::string>, BruteEdge> brute_edges(const std::vector<Packet>& ps) {
    std::map<std::pair<std::string, std::string>, BruteEdge> out;
    for (std::size_t i = 0; i + 1 < ps.size(); ++i) {
        auto key = std::make_pair(ps[i].kind, ps[i + 1].kind);
        bool fresh = !out.count(key);
        auto& e = out[key];
        if (fresh) e.first = i + 1;
        e.count++;
        e.labels[ps[i + 1].label.is_benign() ? 0 : ps[i + 1].label.attack]++;
    }
    return out;
}

// Case formula written out directly.
inline Label fuse_label(const fbs::Prediction& n, const fbs::Prediction& r) {
    if (n.label == r.label) return n.label;
    if (n.confidence > r.confidence) return n.label;
    if (r.confidence > n.confidence) return r.label;
    return n.label;
}

// Offsets 0, s, 2s, ... until a window reaches the end of the trace.
inline std::vector<std::size_t> window_offsets(std::size_t length, std::size_t len_seq, std::size_t stride) {
    std::vector<std::size_t> out;
    if (length == 0) return out;
    for (std::size_t s = 0;; s += stride) {
        out.push_back(s);
        if (s + len_seq >= length) break;
    }
    return out;
}

// Satisfaction recomputed from the definitions at every step.
inline bool sat(const sig::Formula& f, const std::vector<Packet>& ps, std::size_t i) {
    using Op = sig::Formula::Op;
    switch (f.op) {
        case Op::True: return true;
        case Op::False: return false;
        case Op::Kind: return ps[i].kind == f.name;
        case Op::Field: {
            auto it = ps[i].fields.find(f.name);
            return it != ps[i].fields.end() && it->second == f.value;
        }
        case Op::Not: return !sat(*f.a, ps, i);
        case Op::And: return sat(*f.a, ps, i) && sat(*f.b, ps, i);
        case Op::Or: return sat(*f.a, ps, i) || sat(*f.b, ps, i);
        case Op::Yesterday: return i >= 1 && sat(*f.a, ps, i - 1);
        case Op::Once: {
            bool any = false;
            for (std::size_t j = 0; j <= i; ++j) any = any || sat(*f.a, ps, j);
            return any;
        }
        case Op::Historically: {
            bool all = true;
            for (std::size_t j = 0; j <= i; ++j) all = all && sat(*f.a, ps, j);
            return all;
        }
        case Op::Since: {
            for (std::size_t j = 0; j <= i; ++j) {
                if (!sat(*f.b, ps, j)) continue;
                bool hold = true;
                for (std::size_t k = j + 1; k <= i; ++k) hold = hold && sat(*f.a, ps, k);
                if (hold) return true;
            }
            return false;
        }
    }
    return false;
}

inline const std::vector<std::string>& pltl_alphabet() {
    static const std::vector<std::string> a = {"AuthenticationRequest", "AuthenticationResponse",
                                               "AuthenticationReject", "IdentityRequest", "AttachReject"};
    return a;
}

inline std::string random_formula(Rng& rng, int depth) {
    if (depth == 0 || rng.chance(0.25)) {
        switch (rng.index(4)) {
            case 0: return "kind=" + rng.pick(pltl_alphabet());
            case 1: return "field[nas_eps_emm_cause]=" + std::to_string(rng.index(3));
            case 2: return rng.chance(0.5) ? "true" : "false";
            default: return "field[tag]=\"" + std::string(rng.chance(0.5) ? "x" : "y") + "\"";
        }
    }
    static const char* unary[] = {"!", "Y ", "O ", "H "};
    static const char* binary[] = {" & ", " | ", " S "};
    if (rng.chance(0.4)) return std::string(unary[rng.index(4)]) + "(" + random_formula(rng, depth - 1) + ")";
    return "(" + random_formula(rng, depth - 1) + binary[rng.index(3)] + random_formula(rng, depth - 1) + ")";
}

inline std::vector<Packet> random_pltl_trace(Rng& rng) {
    std::vector<Packet> ps;
    const std::size_t n = rng.index(16);
    for (std::size_t i = 0; i < n; ++i) {
        FieldMap f;
        if (rng.chance(0.6)) f["nas_eps_emm_cause"] = std::int64_t(rng.index(3));
        if (rng.chance(0.5)) f["tag"] = std::string(rng.chance(0.5) ? "x" : "y");
        ps.push_back(test::packet(Layer::Nas, rng.pick(pltl_alphabet()), std::uint32_t(i), Label::benign(), f));
    }
    return ps;
}

}  // namespace fbsd::oracle
