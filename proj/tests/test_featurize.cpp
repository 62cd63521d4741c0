// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>
#include <sstream>

#include "fbsd/featurize.hpp"
#include "fbsd/schema.hpp"
#include "fbsd/simulator.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fbsd;
using fbsd::test::packet;

namespace {

Trace trace_of(const std::string& id, std::vector<Packet> ps) {
    Trace t;
    t.trace_id = id;
    for (auto& p : ps) p.trace_id = id;
    t.packets = std::move(ps);
    return t;
}

}  // namespace

TEST_CASE("shared values share a code and novel values map to UNK") {
    FieldMap f1{{"nas_eps_emm_cause", std::int64_t{7}}};
    FieldMap f2{{"nas_eps_emm_cause", std::int64_t{9}}};
    std::vector<Trace> train = {trace_of("a", {packet(Layer::Nas, "AttachReject", 0, Label::benign(), f1),
                                               packet(Layer::Nas, "AttachReject", 1, Label::benign(), f1)})};
    auto [m, cb] = feat::encode(train, Layer::Nas, DatasetKind::Fbs);
    const std::size_t col = *field_column(Layer::Nas, "nas_eps_emm_cause");
    CHECK(m.row(0)[col] == m.row(1)[col]);
    CHECK(m.row(0)[col] >= 2);

    std::vector<Trace> test = {trace_of("b", {packet(Layer::Nas, "AttachReject", 0, Label::benign(), f2)})};
    auto [m2, cb2] = feat::encode(test, Layer::Nas, DatasetKind::Fbs, &cb);
    CHECK(m2.row(0)[col] == feat::kUnk);
    CHECK(cb2 == cb);

    const std::size_t other = *field_column(Layer::Nas, "e212_imsi");
    CHECK(m.row(0)[other] == feat::kAbsent);
}

TEST_CASE("matrix widths follow the field schemas") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::fbs(), 0, false, 2, 1, 0.0}});
    auto [nas, cb] = feat::encode(ds.traces, Layer::Nas, DatasetKind::Fbs);
    auto [rrc, cb2] = feat::encode(ds.traces, Layer::Rrc, DatasetKind::Fbs);
    CHECK(nas.width == 119);
    CHECK(rrc.width == 183);
    std::ostringstream csv;
    feat::write_csv(csv, nas);
    auto header = csv.str().substr(0, csv.str().find('\n'));
    CHECK(std::count(header.begin(), header.end(), ',') + 1 == 119 + 3);
}

TEST_CASE("re-encoding with a saved codebook is idempotent") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::fbs(), 1, true, 4, 2, 0.2}});
    auto [m, cb] = feat::encode(ds.traces, Layer::Rrc, DatasetKind::Fbs);
    auto restored = feat::Codebook::from_json(cb.to_json());
    CHECK(restored == cb);
    auto [m2, cb2] = feat::encode(ds.traces, Layer::Rrc, DatasetKind::Fbs, &restored);
    CHECK(m2.codes == m.codes);
    CHECK(m2.labels == m.labels);
    CHECK_THROWS_AS(feat::encode(ds.traces, Layer::Nas, DatasetKind::Fbs, &restored), Error);
}

TEST_CASE("codes are injective per column") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::fbs(), 2, true, 6, 4, 0.3}});
    auto [m, cb] = feat::encode(ds.traces, Layer::Rrc, DatasetKind::Fbs);
    std::vector<std::map<int, std::string>> seen(m.width);
    std::size_t r = 0;
    for (const auto& t : ds.traces)
        for (const auto& p : split_layer(t, Layer::Rrc)) {
            for (const auto& [name, v] : p.fields) {
                auto col = *field_column(Layer::Rrc, name);
                auto [it, fresh] = seen[col].emplace(m.row(r)[col], value_text(v));
                CHECK(it->second == value_text(v));
            }
            ++r;
        }
}

TEST_CASE("window examples") {
    CHECK(feat::window_offsets(10, 5, 5) == std::vector<std::size_t>{0, 5});
    auto w = feat::window_offsets(12, 5, 5);
    REQUIRE(w.size() == 3);
    CHECK(12 - w.back() == 2);  // 3 padding rows
    CHECK(feat::default_len_seq(Layer::Nas) == 12);
    CHECK(feat::default_len_seq(Layer::Rrc) == 100);
    CHECK_THROWS_AS(feat::window_offsets(10, 5, 6), Error);
    CHECK_THROWS_AS(feat::window_offsets(10, 0, 1), Error);
}

TEST_CASE("windowing matches brute-force enumeration") {
    Rng rng(2024);
    for (int it = 0; it < 2000; ++it) {
        std::size_t len = rng.index(51), L = 1 + rng.index(15), s = 1 + rng.index(L);
        auto got = feat::window_offsets(len, L, s);
        CHECK(got == oracle::window_offsets(len, L, s));
        if (len > L) CHECK(got.size() == (len - L + s - 1) / s + 1);
        std::vector<int> covered(len, 0);
        for (auto o : got)
            for (std::size_t k = o; k < std::min(len, o + L); ++k) covered[k] = 1;
        CHECK(std::count(covered.begin(), covered.end(), 0) == 0);
    }
}

TEST_CASE("window set references matrix rows") {
    auto ds = sim::gen_dataset(std::vector<sim::ScenarioSpec>{{Label::benign(), 0, true, 3, 1, 0.0}});
    auto [m, cb] = feat::encode(ds.traces, Layer::Nas, DatasetKind::Fbs);
    auto ws = feat::window(m, 5, 3);
    for (const auto& w : ws.windows) {
        const auto& tr = m.traces[w.trace];
        CHECK(w.row_begin == tr.begin + w.start);
        CHECK(w.valid == std::min<std::size_t>(5, tr.end - tr.begin - w.start));
    }
}

TEST_CASE("split keeps traces whole and stratifies classes") {
    std::vector<sim::ScenarioSpec> specs = {{Label::benign(), 0, false, 10, 1, 0.0}, {Label::fbs(), 0, false, 10, 1, 0.0}};
    auto ds = sim::gen_dataset(specs);
    auto sp = feat::split(ds.traces, 0.8, 3);
    std::map<std::string, int> tr, te;
    std::set<std::string> ids_train, ids_test;
    for (const auto& t : sp.train) {
        tr[trace_class(t)]++;
        ids_train.insert(t.trace_id);
    }
    for (const auto& t : sp.test) {
        te[trace_class(t)]++;
        ids_test.insert(t.trace_id);
    }
    CHECK(tr == std::map<std::string, int>{{"benign", 8}, {"fbs", 8}});
    CHECK(te == std::map<std::string, int>{{"benign", 2}, {"fbs", 2}});
    for (const auto& id : ids_train) CHECK_FALSE(ids_test.count(id));
    CHECK(ids_train.size() + ids_test.size() == ds.traces.size());

    auto again = feat::split(ds.traces, 0.8, 3);
    for (std::size_t i = 0; i < again.test.size(); ++i) CHECK(again.test[i].trace_id == sp.test[i].trace_id);
    std::vector<Trace> lone = {ds.traces[0]};
    CHECK_THROWS_AS(feat::split(lone, 0.8, 1), Error);
}
