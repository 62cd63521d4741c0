// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fbsd/msa_graph.hpp"
#include "fbsd/simulator.hpp"
#include "helpers.hpp"

using namespace fbsd;
using fbsd::test::kinds_of;

namespace {

std::string dump(const std::vector<Trace>& ts) {
    std::stringstream ss;
    write_traces(ss, ts);
    return ss.str();
}

std::optional<std::int64_t> first_field(const Trace& t, Label label, const char* field) {
    for (const auto& p : t.packets)
        if (p.label == label)
            if (auto v = p.int_field(field)) return v;
    return std::nullopt;
}

}  // namespace

TEST_CASE("golden benign flow") {
    sim::ScenarioSpec spec{Label::benign(), 0, false, 1, 1, 0.0};
    for (std::uint64_t i = 0; i < 5; ++i) {
        auto t = sim::gen_benign(spec, i);
        CHECK(kinds_of(split_layer(t, Layer::Nas)) ==
              std::vector<std::string>{"AttachRequest", "AuthenticationRequest", "AuthenticationResponse",
                                       "SecurityModeCommand", "SecurityModeComplete", "AttachAccept",
                                       "AttachComplete", "EMMInformation", "DetachRequest"});
    }
}

TEST_CASE("mobility adds a TAU exchange") {
    sim::ScenarioSpec spec{Label::benign(), 0, true, 1, 3, 0.0};
    for (std::uint64_t i = 0; i < 5; ++i) {
        auto k = kinds_of(split_layer(sim::gen_benign(spec, i), Layer::Nas));
        auto req = std::find(k.begin(), k.end(), "TrackingAreaUpdateRequest");
        REQUIRE(req != k.end());
        CHECK(std::find(req, k.end(), "TrackingAreaUpdateAccept") != k.end());
    }
}

TEST_CASE("generation is deterministic per seed and index") {
    sim::ScenarioSpec spec{Label::fbs(), 1, true, 1, 77, 0.2};
    CHECK(trace_to_json(sim::generate(spec, 4)) == trace_to_json(sim::generate(spec, 4)));
    CHECK(trace_to_json(sim::generate(spec, 4)) != trace_to_json(sim::generate(spec, 5)));
}

TEST_CASE("FBS levels clone or differ from the legitimate cell") {
    for (std::uint64_t i = 0; i < 10; ++i) {
        auto l2 = sim::gen_fbs({Label::fbs(), 2, false, 1, 11, 0.0}, i);
        auto legit_mcc = first_field(l2, Label::benign(), "lte_rrc_mcc");
        auto fbs_mcc = first_field(l2, Label::fbs(), "lte_rrc_mcc");
        REQUIRE(legit_mcc);
        REQUIRE(fbs_mcc);
        CHECK(*legit_mcc == *fbs_mcc);
        CHECK(first_field(l2, Label::benign(), "lte_rrc_mnc") == first_field(l2, Label::fbs(), "lte_rrc_mnc"));

        auto l0 = sim::gen_fbs({Label::fbs(), 0, false, 1, 11, 0.0}, i);
        auto legit_tac = first_field(l0, Label::benign(), "lte_rrc_trackingAreaCode");
        auto fbs_tac = first_field(l0, Label::fbs(), "lte_rrc_trackingAreaCode");
        REQUIRE(legit_tac);
        REQUIRE(fbs_tac);
        CHECK(*legit_tac != *fbs_tac);
    }
}

TEST_CASE("every FBS trace carries FBS packets") {
    for (int level = 0; level <= 2; ++level)
        for (std::uint64_t i = 0; i < 10; ++i) {
            auto t = sim::gen_fbs({Label::fbs(), level, true, 1, 5, 0.1}, i);
            CHECK(std::any_of(t.packets.begin(), t.packets.end(), [](const Packet& p) { return p.label == Label::fbs(); }));
        }
}

TEST_CASE("attack scripts contain their defining exchanges") {
    auto tau = split_layer(sim::gen_msa({Label::msa(20), 3, false, 1, 2, 0.0}, 0), Layer::Nas);
    bool found = false;
    for (std::size_t i = 1; i < tau.size(); ++i)
        if (tau[i - 1].kind == "TrackingAreaUpdateRequest" && tau[i].kind == "TrackingAreaUpdateReject" &&
            tau[i].int_field("nas_eps_emm_cause"))
            found = true;
    CHECK(found);

    auto imsi = split_layer(sim::gen_msa({Label::msa(14), 3, false, 1, 2, 0.0}, 0), Layer::Nas);
    bool asked = false;
    for (std::size_t i = 1; i < imsi.size(); ++i)
        if (imsi[i].kind == "IdentityRequest" && imsi[i].label == Label::msa(14) &&
            imsi[i].int_field("nas_eps_emm_id_type2") == 1)
            asked = true;
    CHECK(asked);

    auto meas = kinds_of(split_layer(sim::gen_msa({Label::msa(4), 3, false, 1, 2, 0.0}, 0), Layer::Rrc));
    auto req = std::find(meas.begin(), meas.end(), "ueInformationRequest");
    REQUIRE(req != meas.end());
    CHECK(std::find(req, meas.end(), "ueInformationResponse") != meas.end());
}

TEST_CASE("reshape mutates and injects but keeps attack kinds") {
    auto t = sim::gen_msa({Label::msa(20), 3, false, 1, 8, 0.0}, 0);
    auto r = sim::reshape(t, 99);
    CHECK(trace_to_json(r) == trace_to_json(sim::reshape(t, 99)));

    auto attack_kinds = [](const Trace& x) {
        std::multiset<std::string> out;
        for (const auto& p : x.packets)
            if (p.label.kind == Label::Kind::Msa) out.insert(p.kind);
        return out;
    };
    CHECK(attack_kinds(r) == attack_kinds(t));

    auto cause = [](const Trace& x) {
        for (const auto& p : x.packets)
            if (p.kind == "TrackingAreaUpdateReject") return p.int_field("nas_eps_emm_cause");
        return std::optional<std::int64_t>{};
    };
    CHECK(cause(r) != cause(t));
    auto count = [](const Trace& x, const char* k) {
        return std::count_if(x.packets.begin(), x.packets.end(), [&](const Packet& p) { return p.kind == k; });
    };
    CHECK(count(r, "IdentityRequest") > count(t, "IdentityRequest"));
    CHECK(std::any_of(r.packets.begin(), r.packets.end(), [](const Packet& p) { return p.label == Label::msa(20); }));

    auto benign = sim::gen_benign({Label::benign(), 0, false, 1, 1, 0.0}, 0);
    CHECK_THROWS_AS(sim::reshape(benign, 1), Error);
}

TEST_CASE("reshape preserves attack-labeled kinds for every attack") {
    for (int a = 1; a <= kNumAttacks; ++a)
        for (std::uint64_t i = 0; i < 3; ++i) {
            auto t = sim::gen_msa({Label::msa(a), 3, false, 1, 4, 0.3}, i);
            auto r = sim::reshape(t, 7 + i);
            std::multiset<std::string> x, y;
            for (const auto& p : t.packets)
                if (!p.label.is_benign()) x.insert(p.kind);
            for (const auto& p : r.packets)
                if (!p.label.is_benign()) y.insert(p.kind);
            CHECK_MESSAGE(x == y, "attack " << a);
        }
}

TEST_CASE("gen_dataset counts and determinism") {
    std::vector<sim::ScenarioSpec> specs = {{Label::benign(), 0, false, 10, 42, 0.0},
                                            {Label::fbs(), 2, false, 10, 42, 0.0}};
    auto a = sim::gen_dataset(specs, 1);
    auto b = sim::gen_dataset(specs, 4);
    CHECK(a.traces.size() == 20);
    CHECK(a.manifest.counts == std::map<std::string, int>{{"benign", 10}, {"fbs", 10}});
    CHECK(dump(a.traces) == dump(b.traces));

    std::map<std::string, int> recount;
    for (const auto& t : a.traces) {
        bool any_fbs = std::any_of(t.packets.begin(), t.packets.end(), [](const Packet& p) { return p.label == Label::fbs(); });
        recount[any_fbs ? "fbs" : "benign"]++;
    }
    CHECK(recount == a.manifest.counts);
}

TEST_CASE("every generated trace validates") {
    std::vector<sim::ScenarioSpec> specs = {{Label::benign(), 0, true, 5, 3, 0.3}};
    for (int l = 0; l <= 2; ++l) specs.push_back({Label::fbs(), l, true, 5, 3, 0.3});
    for (int a = 1; a <= kNumAttacks; ++a)
        for (int l = 3; l <= 4; ++l) specs.push_back({Label::msa(a), l, false, 2, 3, 0.3});
    for (const auto& t : sim::gen_dataset(specs, 4).traces) CHECK_MESSAGE(validate(t).empty(), t.trace_id);
}

TEST_CASE("spec checks reject impossible levels") {
    CHECK_THROWS_AS(sim::check_spec({Label::fbs(), 3, false, 1, 1, 0.0}), Error);
    CHECK_THROWS_AS(sim::check_spec({Label::msa(2), 1, false, 1, 1, 0.0}), Error);
    CHECK_THROWS_AS(sim::check_spec({Label::msa(40), 3, false, 1, 1, 0.0}), Error);
}

TEST_CASE("every attack has an edge outside the benign edge set") {
    std::map<Layer, std::set<msa::EdgeKey>> benign;
    for (Layer layer : kLayers)
        for (std::uint64_t i = 0; i < 20; ++i) {
            auto ps = split_layer(sim::gen_benign({Label::benign(), 0, false, 1, 6, 0.0}, i), layer);
            for (const auto& e : msa::build_graph(ps).edges) benign[layer].insert({e.src, e.dst});
        }
    for (int a = 1; a <= kNumAttacks; ++a) {
        auto t = sim::gen_msa({Label::msa(a), 3, false, 1, 6, 0.0}, 0);
        bool novel = false;
        for (Layer layer : kLayers) {
            auto ps = split_layer(t, layer);
            if (ps.empty()) continue;
            for (const auto& e : msa::build_graph(ps).edges) novel = novel || !benign[layer].count({e.src, e.dst});
        }
        CHECK_MESSAGE(novel, "attack " << a);
    }
}

TEST_CASE("config parsing") {
    std::istringstream in("seed = 5\n[spec]\nscenario = msa\nattack = 20\nlevel = 3\ntraces = 4\n");
    auto specs = sim::parse_config(in);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].scenario == Label::msa(20));
    CHECK(specs[0].n_traces == 4);
    std::istringstream bad("[spec]\nscenario = martian\n");
    CHECK_THROWS_AS(sim::parse_config(bad), Error);
}
