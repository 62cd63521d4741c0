// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fbsd/fbs_detect.hpp"
#include "fbsd/pipeline.hpp"
#include "fbsd/simulator.hpp"

using namespace fbsd;

namespace {

struct Desk {
    feat::Split split;
    feat::FeatureMatrix train_m, test_m;
    pipeline::FbsLayerModels models;
};

// NAS models trained once on the 200-trace desk set.
const Desk& desk() {
    static const Desk d = [] {
        Desk x;
        auto ds = sim::gen_dataset(pipeline::fbs_desk_specs(17), 4);
        x.split = feat::split(ds.traces, 0.8, 17);
        auto cfg = fbs::default_packet_config(Layer::Nas);
        cfg.seed = 17;
        x.models = pipeline::train_fbs_packet(x.split.train, Layer::Nas, cfg).models;
        x.models.trace = pipeline::train_fbs_trace(x.models, x.split.train);
        x.train_m = feat::encode(x.split.train, Layer::Nas, DatasetKind::Fbs, &x.models.codebook).first;
        x.test_m = feat::encode(x.split.test, Layer::Nas, DatasetKind::Fbs, &x.models.codebook).first;
        return x;
    }();
    return d;
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ok += a[i] == b[i];
    return double(ok) / double(a.size());
}

}  // namespace

TEST_CASE("small FBS set reaches held-out packet accuracy") {
    std::vector<sim::ScenarioSpec> specs = {{Label::benign(), 0, false, 25, 3, 0.0}, {Label::fbs(), 0, false, 25, 3, 0.0}};
    auto ds = sim::gen_dataset(specs);
    auto sp = feat::split(ds.traces, 0.8, 3);
    auto [tr, cb] = feat::encode(sp.train, Layer::Nas, DatasetKind::Fbs);
    auto [te, cb2] = feat::encode(sp.test, Layer::Nas, DatasetKind::Fbs, &cb);
    fbs::PacketConfig cfg;
    cfg.epochs = 30;
    cfg.lr = 0.05;
    auto res = fbs::train_packet_model(tr, cb, cfg);
    std::vector<int> pred;
    for (std::size_t t = 0; t < te.traces.size(); ++t)
        for (double p : fbs::predict_packets(res.model, te, t)) pred.push_back(p >= 0.5);
    CHECK(accuracy(pred, te.labels) >= 0.90);
}

TEST_CASE("constant labels drive the loss toward zero") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::benign(), 0, false, 10, 2, 0.0}});
    auto [m, cb] = feat::encode(ds.traces, Layer::Nas, DatasetKind::Fbs);
    fbs::PacketConfig cfg;
    cfg.epochs = 30;
    auto res = fbs::train_packet_model(m, cb, cfg);
    CHECK(res.loss_history.back() < 0.01);
    CHECK(res.loss_history.back() < res.loss_history.front());
    for (std::size_t t = 0; t < m.traces.size(); ++t)
        for (double p : fbs::predict_packets(res.model, m, t)) CHECK(p < 0.1);
}

TEST_CASE("training is deterministic per seed") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::benign(), 0, false, 4, 2, 0.0},
                                                              {Label::fbs(), 1, false, 4, 2, 0.0}});
    auto [m, cb] = feat::encode(ds.traces, Layer::Nas, DatasetKind::Fbs);
    fbs::PacketConfig cfg;
    cfg.epochs = 3;
    auto a = fbs::train_packet_model(m, cb, cfg);
    auto b = fbs::train_packet_model(m, cb, cfg);
    CHECK(a.model.params == b.model.params);
    CHECK(a.model.to_json() == b.model.to_json());
    CHECK(fbs::PacketModel::from_json(a.model.to_json()).to_json() == a.model.to_json());
}

TEST_CASE("predictions cover every packet and stay in range") {
    const auto& d = desk();
    for (std::size_t t = 0; t < d.test_m.traces.size(); ++t) {
        auto probs = fbs::predict_packets(d.models.packet, d.test_m, t);
        CHECK(probs.size() == d.test_m.traces[t].end - d.test_m.traces[t].begin);
        for (double p : probs) CHECK((p >= 0.0 && p <= 1.0));
    }
    // Short trace: one padded window.
    auto short_t = sim::gen_benign({Label::benign(), 0, false, 1, 9, 0.0}, 0);
    short_t.packets.resize(5);
    auto m = feat::encode(std::vector<Trace>{short_t}, Layer::Nas, DatasetKind::Fbs, &d.models.codebook).first;
    REQUIRE(m.rows() < d.models.packet.len_seq());
    CHECK(fbs::predict_packets(d.models.packet, m, 0).size() == m.rows());
}

TEST_CASE("benign traces score low") {
    const auto& d = desk();
    for (std::size_t t = 0; t < d.split.test.size(); ++t) {
        if (!d.split.test[t].scenario.is_benign()) continue;
        auto probs = fbs::predict_packets(d.models.packet, d.test_m, t);
        CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) / double(probs.size()) < 0.5);
    }
}

TEST_CASE("held-out packet and trace accuracy") {
    const auto& d = desk();
    std::vector<int> pp, pt, tp, tt;
    for (std::size_t t = 0; t < d.split.test.size(); ++t) {
        auto probs = fbs::predict_packets(d.models.packet, d.test_m, t);
        for (std::size_t k = 0; k < probs.size(); ++k) {
            pp.push_back(probs[k] >= 0.5);
            pt.push_back(d.test_m.labels[d.test_m.traces[t].begin + k]);
        }
        auto pred = fbs::predict_trace(*d.models.trace, fbs::trace_features(probs, split_layer(d.split.test[t], Layer::Nas)));
        tp.push_back(label_code(pred.label, DatasetKind::Fbs));
        tt.push_back(label_code(d.split.test[t].scenario, DatasetKind::Fbs));
    }
    CHECK(d.split.test.size() == 40);
    CHECK(accuracy(pp, pt) >= 0.90);
    CHECK(accuracy(tp, tt) >= 0.90);
}

TEST_CASE("carried state changes branch outputs") {
    const auto& d = desk();
    // Longest test trace spans several windows.
    std::size_t best = 0;
    for (std::size_t t = 0; t < d.test_m.traces.size(); ++t)
        if (d.test_m.traces[t].end - d.test_m.traces[t].begin > d.test_m.traces[best].end - d.test_m.traces[best].begin)
            best = t;
    REQUIRE(d.test_m.traces[best].end - d.test_m.traces[best].begin > d.models.packet.len_seq());
    auto with = fbs::predict_packets(d.models.packet, d.test_m, best, 0, true);
    auto without = fbs::predict_packets(d.models.packet, d.test_m, best, 0, false);
    CHECK(with != without);
    const std::size_t L = d.models.packet.len_seq();
    for (std::size_t k = 0; k < L; ++k) CHECK(with[k] == without[k]);
}

TEST_CASE("stride choice changes outputs only slightly") {
    const auto& d = desk();
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < d.test_m.traces.size(); ++t) {
        auto a = fbs::predict_packets(d.models.packet, d.test_m, t, 1);
        auto b = fbs::predict_packets(d.models.packet, d.test_m, t, d.models.packet.len_seq());
        for (std::size_t k = 0; k < a.size(); ++k, ++n) sum += std::abs(a[k] - b[k]);
    }
    CHECK(sum / double(n) < 0.15);
}

TEST_CASE("ablated packet model leaves the trace model at chance") {
    const auto& d = desk();
    auto features = [](const std::vector<Trace>& ts) {
        std::vector<fbs::TraceFeatures> xs;
        for (const auto& t : ts) {
            auto ps = split_layer(t, Layer::Nas);
            std::vector<double> flat(ps.size(), 0.5);
            xs.push_back(fbs::trace_features(flat, ps));
        }
        return xs;
    };
    std::vector<int> ytr, yte;
    for (const auto& t : d.split.train) ytr.push_back(label_code(t.scenario, DatasetKind::Fbs));
    for (const auto& t : d.split.test) yte.push_back(label_code(t.scenario, DatasetKind::Fbs));
    auto model = fbs::train_trace_model(Layer::Nas, features(d.split.train), ytr);
    std::vector<int> pred;
    for (const auto& x : features(d.split.test)) pred.push_back(label_code(fbs::predict_trace(model, x).label, DatasetKind::Fbs));
    CHECK(accuracy(pred, yte) <= 0.6);
}

TEST_CASE("trace feature edge cases") {
    auto t = sim::gen_fbs({Label::fbs(), 0, false, 1, 4, 0.0}, 0);
    auto ps = split_layer(t, Layer::Nas);
    std::vector<double> zeros(ps.size(), 0.0), ones(ps.size(), 1.0);
    auto f0 = fbs::trace_features(zeros, ps);
    for (int i = 0; i < 4; ++i) CHECK(f0[std::size_t(i)] == 0.0);
    CHECK(f0[7] == doctest::Approx(std::log1p(double(ps.size())) / std::log1p(512.0)));
    auto f1 = fbs::trace_features(ones, ps);
    for (int i = 0; i < 4; ++i) CHECK(f1[std::size_t(i)] == 1.0);

    std::vector<double> grouped = {0.9, 0.9, 0.9, 0.1, 0.1, 0.1};
    std::vector<double> spread = {0.9, 0.1, 0.9, 0.1, 0.9, 0.1};
    std::vector<Packet> six(ps.begin(), ps.begin() + 6);
    CHECK(fbs::trace_features(grouped, six)[3] != fbs::trace_features(spread, six)[3]);
    CHECK_THROWS_AS(fbs::trace_features(grouped, std::vector<Packet>(ps.begin(), ps.begin() + 2)), Error);
}

TEST_CASE("trace model contract") {
    fbs::TraceModel untrained;
    CHECK_THROWS_AS(fbs::predict_trace(untrained, {}), Error);
    const auto& d = desk();
    auto restored = fbs::TraceModel::from_json(d.models.trace->to_json());
    fbs::TraceFeatures x{0.3, 0.8, 0.2, 0.1, 0.0, 0.1, 0.1, 0.4};
    auto a = fbs::predict_trace(*d.models.trace, x), b = fbs::predict_trace(restored, x);
    CHECK(a.label == b.label);
    CHECK(a.confidence == b.confidence);
    CHECK(a.confidence >= 0.5);
    CHECK(a.label == (d.models.trace->probability(x) >= 0.5 ? Label::fbs() : Label::benign()));
}
