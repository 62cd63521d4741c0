// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fbsd/msa_graph.hpp"
#include "fbsd/pipeline.hpp"
#include "fbsd/simulator.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fbsd;
using fbsd::test::nas_packets;

namespace {

struct Desk {
    feat::Split split;
    std::vector<msa::FlowGraph> train, test;
    msa::MsaTraining nas;
};

const Desk& desk() {
    static const Desk d = [] {
        Desk x;
        auto ds = sim::gen_dataset(pipeline::msa_desk_specs(23), 4);
        x.split = feat::split(ds.traces, 0.8, 23);
        for (const auto& t : x.split.train) x.train.push_back(msa::build_graph(split_layer(t, Layer::Nas)));
        for (const auto& t : x.split.test) x.test.push_back(msa::build_graph(split_layer(t, Layer::Nas)));
        msa::SageConfig cfg;
        cfg.seed = 23;
        x.nas = msa::train_msa(Layer::Nas, x.train, cfg, msa::all_msa_classes());
        return x;
    }();
    return d;
}

}  // namespace

TEST_CASE("graph construction examples") {
    auto g = msa::build_graph(nas_packets({"AttachRequest", "AuthenticationRequest", "AuthenticationResponse"}));
    CHECK(g.nodes.size() == 3);
    CHECK(g.edges.size() == 2);
    auto one = msa::build_graph(nas_packets({"AttachRequest"}));
    CHECK(one.nodes.size() == 1);
    CHECK(one.edges.empty());
    CHECK_THROWS_AS(msa::build_graph(std::vector<Packet>{}), Error);

    auto tau = msa::build_graph(split_layer(sim::gen_msa({Label::msa(20), 3, false, 1, 1, 0.0}, 0), Layer::Nas));
    bool found = false;
    for (const auto& e : tau.edges)
        if (e.src == "TrackingAreaUpdateRequest" && e.dst == "TrackingAreaUpdateReject") found = e.label() == 20;
    CHECK(found);
}

TEST_CASE("build_graph matches brute-force pair enumeration") {
    Rng rng(404);
    for (int it = 0; it < 300; ++it) {
        auto ps = fbsd::test::random_nas(rng, 1 + rng.index(20), 1 + rng.index(8));
        auto g = msa::build_graph(ps);
        auto want = oracle::brute_edges(ps);
        std::set<std::string> nodes;
        for (const auto& p : ps) nodes.insert(p.kind);
        CHECK(std::vector<std::string>(nodes.begin(), nodes.end()) == g.nodes);
        REQUIRE(g.edges.size() == want.size());
        for (const auto& e : g.edges) {
            const auto& w = want.at({e.src, e.dst});
            CHECK(e.count == w.count);
            CHECK(e.first == w.first);
            CHECK(e.labels == w.labels);
        }
    }
}

TEST_CASE("serialized graph is canonical") {
    auto a = msa::build_graph(nas_packets({"IdentityRequest", "AttachRequest", "IdentityRequest", "DetachRequest"}));
    CHECK(std::is_sorted(a.nodes.begin(), a.nodes.end()));
    CHECK(std::is_sorted(a.edges.begin(), a.edges.end(),
                         [](const auto& x, const auto& y) { return std::tie(x.src, x.dst) < std::tie(y.src, y.dst); }));
    auto b = msa::build_graph(nas_packets({"IdentityRequest", "AttachRequest", "IdentityRequest", "DetachRequest"}));
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("mixed layers and unknown kinds are rejected") {
    auto ps = nas_packets({"AttachRequest", "AttachAccept"});
    ps[1].layer = Layer::Rrc;
    CHECK_THROWS_AS(msa::build_graph(ps), Error);
    CHECK_THROWS_AS(msa::build_graph(nas_packets({"AttachRequest", "Hello"})), Error);
}

TEST_CASE("training input errors") {
    std::vector<msa::FlowGraph> one = {msa::build_graph(nas_packets({"AttachRequest", "AttachAccept"}))};
    CHECK_THROWS_AS(msa::train_msa(Layer::Nas, one, {}, msa::all_msa_classes()), Error);
    try {
        msa::train_msa(Layer::Nas, one, {}, msa::all_msa_classes());
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingClass);
    }
    CHECK_THROWS_AS(msa::train_msa(Layer::Nas, std::vector<msa::FlowGraph>{}, {}, {}), Error);
}

TEST_CASE("held-out edge and trace accuracy") {
    const auto& d = desk();
    CHECK(msa::edge_accuracy(d.nas.model, d.test).macro_accuracy >= 0.80);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.test.size(); ++i) ok += msa::predict_attack(d.nas.model, d.test[i]).label == d.split.test[i].scenario;
    CHECK(double(ok) / double(d.test.size()) >= 0.80);
}

TEST_CASE("edge log-probabilities normalize") {
    const auto& d = desk();
    nk::ParamSet p = d.nas.model.params;
    for (const auto& g : d.test) {
        auto f = msa::sage_forward(p, g, nullptr, false);
        for (std::size_t e = 0; e < f.log_probs.rows(); ++e) {
            double s = 0;
            for (std::size_t c = 0; c < f.log_probs.cols(); ++c) s += std::exp(f.log_probs.at(e, c));
            CHECK(std::abs(std::log(s)) < 1e-9);
        }
    }
}

TEST_CASE("trace verdicts") {
    const auto& d = desk();
    for (std::size_t i = 0; i < d.test.size(); ++i)
        if (d.split.test[i].scenario.is_benign()) {
            auto p = msa::predict_attack(d.nas.model, d.test[i]);
            CHECK(p.label.is_benign());
            CHECK(p.confidence >= 0.5);
        }
    auto tau = msa::build_graph(split_layer(sim::gen_msa({Label::msa(20), 3, false, 1, 555, 0.3}, 0), Layer::Nas));
    CHECK(msa::predict_attack(d.nas.model, tau).label == Label::msa(20));
    auto lone = msa::predict_attack(d.nas.model, msa::build_graph(nas_packets({"AttachRequest"})));
    CHECK(lone.label.is_benign());
    CHECK(lone.confidence == 1.0);
    msa::SageModel untrained;
    CHECK_THROWS_AS(msa::predict_attack(untrained, tau), Error);
}

TEST_CASE("overlap scores") {
    const auto& d = desk();
    const auto& bank = d.nas.bank;
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        const auto& s = d.split.train[i].scenario;
        if (!s.is_benign()) CHECK(msa::overlap_score(d.train[i], s.attack, bank) > 0.0);
    }
    for (std::size_t i = 0; i < d.test.size(); ++i) {
        std::set<msa::EdgeKey> edges;
        for (const auto& e : d.test[i].edges) edges.insert({e.src, e.dst});
        for (const auto& [attack, path] : bank.paths) {
            std::size_t hit = 0;
            for (const auto& k : path) hit += edges.count(k);
            double want = double(hit) / double(path.size());
            CHECK(msa::overlap_score(d.test[i], attack, bank) == doctest::Approx(want));
        }
    }
    CHECK_THROWS_AS(msa::overlap_score(d.test[0], 99, bank), Error);
    CHECK(msa::AttackPathBank::from_json(bank.to_json()) == bank);
}

TEST_CASE("reshaped TAU reject keeps its nearest path") {
    const auto& d = desk();
    int good = 0;
    const int n = 50;
    for (int i = 0; i < n; ++i) {
        auto t = sim::gen_msa({Label::msa(20), 4, false, 1, 808, 0.3}, std::uint64_t(i));
        auto g = msa::build_graph(split_layer(t, Layer::Nas));
        const double own = msa::overlap_score(g, 20, d.nas.bank);
        bool strict = own >= 0.5;
        for (const auto& [attack, path] : d.nas.bank.paths)
            if (attack != 20) strict = strict && msa::overlap_score(g, attack, d.nas.bank) < own;
        good += strict;
    }
    CHECK(double(good) / n >= 0.80);
}

TEST_CASE("nearest attack contract") {
    const auto& d = desk();
    for (std::size_t i = 0; i < d.test.size(); ++i) {
        auto na = msa::nearest_attack(d.nas.model, d.test[i], d.nas.bank);
        if (na.variant) CHECK(na.overlap >= 0.5);
        auto base = msa::predict_attack(d.nas.model, d.test[i]);
        if (!base.label.is_benign()) CHECK_FALSE(na.verdict.label.is_benign());
        if (d.split.test[i].scenario.is_benign() && base.confidence >= 0.5) {
            CHECK(na.verdict.label.is_benign());
            CHECK_FALSE(na.variant);
            double mx = 0;
            for (const auto& [attack, path] : d.nas.bank.paths) mx = std::max(mx, msa::overlap_score(d.test[i], attack, d.nas.bank));
            CHECK(na.overlap == mx);
        }
    }
}

TEST_CASE("held-out attacks are not called benign") {
    auto ds = sim::gen_dataset(pipeline::msa_desk_specs(31), 4);
    for (int held : {2, 14, 20}) {
        std::vector<Trace> train, test;
        for (const auto& t : ds.traces) (t.scenario == Label::msa(held) ? test : train).push_back(t);
        std::vector<msa::FlowGraph> graphs;
        for (const auto& t : train) graphs.push_back(msa::build_graph(split_layer(t, Layer::Nas)));
        auto req = msa::all_msa_classes();
        req.erase(held);
        msa::SageConfig cfg;
        cfg.seed = 31;
        auto res = msa::train_msa(Layer::Nas, graphs, cfg, req);
        int nonbenign = 0;
        for (const auto& t : test)
            nonbenign += !msa::nearest_attack(res.model, msa::build_graph(split_layer(t, Layer::Nas)), res.bank).verdict.label.is_benign();
        CHECK_MESSAGE(double(nonbenign) / double(test.size()) >= 0.70, "held out " << held);
    }
}

TEST_CASE("sage model JSON round trip") {
    const auto& d = desk();
    auto back = msa::SageModel::from_json(d.nas.model.to_json());
    CHECK(back.to_json() == d.nas.model.to_json());
    CHECK(msa::predict_edges(back, d.test[0]) == msa::predict_edges(d.nas.model, d.test[0]));
}
