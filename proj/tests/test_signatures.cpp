// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>

#include "fbsd/signatures.hpp"
#include "fbsd/simulator.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fbsd;
using fbsd::test::nas_packets;
using sig::Formula;
using sig::Representation;

namespace {

const sig::Signature& find(Representation r, int attack) {
    for (const auto* s : sig::builtin_signatures().of(r))
        if (s->attack == attack) return *s;
    throw std::runtime_error("missing signature");
}

}  // namespace

TEST_CASE("attach reject DFA fires at the reject") {
    const auto& s = find(Representation::Dfa, 2);
    auto ps = nas_packets({"AttachRequest", "AuthenticationRequest", "AttachReject", "AttachRequest"});
    auto d = sig::eval_dfa(s.dfa, ps);
    CHECK(d.detected);
    CHECK(d.position == 2u);
    auto benign = split_layer(sim::gen_benign({Label::benign(), 0, false, 1, 1, 0.0}, 0), Layer::Nas);
    CHECK_FALSE(sig::eval_dfa(s.dfa, benign).detected);
    CHECK_FALSE(sig::eval_dfa(s.dfa, std::vector<Packet>{}).detected);
}

TEST_CASE("pltl examples") {
    auto f = sig::parse_pltl("kind=AuthenticationReject & !Y kind=AuthenticationResponse");
    auto fires = sig::eval_pltl(*f, nas_packets({"AttachRequest", "AuthenticationRequest", "AuthenticationReject"}));
    CHECK(fires.verdict);
    CHECK(fires.steps.back());
    auto quiet = sig::eval_pltl(*f, nas_packets({"AuthenticationResponse", "AuthenticationReject"}));
    CHECK_FALSE(quiet.steps[1]);

    auto once = sig::eval_pltl(*sig::parse_pltl("O kind=IdentityRequest"),
                               nas_packets({"IdentityRequest", "AttachRequest", "AttachReject", "AttachRequest"}));
    for (bool b : once.steps) CHECK(b);
    CHECK_THROWS_AS(sig::parse_pltl("kind=AttachReject &"), Error);
    CHECK_THROWS_AS(sig::parse_pltl("field[x]=)"), Error);
}

TEST_CASE("formula printing round trips") {
    Rng rng(8);
    for (int it = 0; it < 200; ++it) {
        auto f = sig::parse_pltl(oracle::random_formula(rng, 4));
        CHECK(sig::to_string(*sig::parse_pltl(sig::to_string(*f))) == sig::to_string(*f));
    }
}

TEST_CASE("one-pass monitor agrees with from-scratch semantics") {
    Rng rng(1234);
    for (int it = 0; it < 500; ++it) {
        auto f = sig::parse_pltl(oracle::random_formula(rng, 4));
        auto ps = oracle::random_pltl_trace(rng);
        auto r = sig::eval_pltl(*f, ps);
        REQUIRE(r.steps.size() == ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            CHECK(r.steps[i] == oracle::sat(*f, ps, i));
            CHECK(sig::holds_at(*f, ps, i) == oracle::sat(*f, ps, i));
        }
    }
}

TEST_CASE("DFA and Mealy agree on detection") {
    Rng rng(77);
    std::vector<std::string> kinds;
    for (auto k : message_kinds(Layer::Nas)) kinds.emplace_back(k);
    for (const auto* s : sig::builtin_signatures().of(Representation::Dfa)) {
        auto mealy = sig::to_mealy(s->dfa);
        for (int it = 0; it < 300; ++it) {
            std::vector<Packet> ps;
            std::size_t n = rng.index(12);
            for (std::size_t i = 0; i < n; ++i) ps.push_back(fbsd::test::packet(s->layer, s->layer == Layer::Nas ? rng.pick(kinds) : std::string(message_kinds(Layer::Rrc)[rng.index(message_kinds(Layer::Rrc).size())]), std::uint32_t(i)));
            auto a = sig::eval_dfa(s->dfa, ps);
            auto b = sig::eval_mealy(mealy, ps);
            CHECK(a.detected == b.detected);
            if (a.detected && b.detected) CHECK(a.position == b.position);
        }
    }
}

TEST_CASE("signature DSL round trips") {
    const auto& set = sig::builtin_signatures();
    CHECK(set.signatures.size() == 24);
    CHECK(set.attacks() == std::vector<int>{2, 14, 8, 20, 4, 10, 15, 12});
    auto again = sig::parse_signatures(sig::builtin_signatures_json());
    CHECK(again.signatures.size() == set.signatures.size());
    CHECK_THROWS_AS(sig::parse_signatures("{\"format_version\":1,\"signatures\":[{\"type\":\"nfa\"}]}"), Error);
    CHECK_THROWS_AS(sig::parse_signatures("not json"), Error);
}

TEST_CASE("originals are detected and benign traces are clean") {
    const auto& set = sig::builtin_signatures();
    for (int a : set.attacks())
        for (std::uint64_t i = 0; i < 10; ++i) {
            auto t = sim::gen_msa({Label::msa(a), 3, false, 1, 12, 0.3}, i);
            for (auto r : sig::kRepresentations) CHECK_MESSAGE(sig::classify(set, r, t) == a, "attack " << a);
        }
    for (std::uint64_t i = 0; i < 30; ++i) {
        auto t = sim::gen_benign({Label::benign(), 0, false, 1, 12, 0.3}, i);
        for (auto r : sig::kRepresentations) CHECK(sig::classify(set, r, t) == 0);
    }
}

TEST_CASE("reshaping evades at least one representation") {
    const auto& set = sig::builtin_signatures();
    std::vector<Trace> orig, resh;
    for (std::uint64_t i = 0; i < 50; ++i) {
        orig.push_back(sim::gen_msa({Label::msa(2), 3, false, 1, 21, 0.3}, i));
        resh.push_back(sim::gen_msa({Label::msa(2), 4, false, 1, 21, 0.3}, i));
    }
    auto rows = sig::evasion_report(set, orig, resh);
    REQUIRE(rows.size() == 8);
    const auto& r2 = rows[0];
    CHECK(r2.attack == 2);
    CHECK(r2.original.at(Representation::Dfa) == 1.0);
    double worst = 1.0;
    for (auto r : sig::kRepresentations) worst = std::min(worst, r2.reshaped.at(r));
    CHECK(worst <= 0.5);
    CHECK(r2.graph_recovery == -1.0);
}
