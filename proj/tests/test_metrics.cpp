// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fbsd/metrics.hpp"

using namespace fbsd;

namespace {

std::pair<std::vector<int>, std::vector<int>> from_counts(int tp, int fp, int fn, int tn) {
    std::vector<int> pred, truth;
    auto add = [&](int n, int p, int t) {
        for (int i = 0; i < n; ++i) {
            pred.push_back(p);
            truth.push_back(t);
        }
    };
    add(tp, 1, 1);
    add(fp, 1, 0);
    add(fn, 0, 1);
    add(tn, 0, 0);
    return {pred, truth};
}

}  // namespace

TEST_CASE("hand-computed confusion") {
    auto [pred, truth] = from_counts(95, 3, 5, 97);
    auto m = compute_metrics(pred, truth, DatasetKind::Fbs);
    CHECK(m.fpr == doctest::Approx(0.03));
    CHECK(m.per_class[1].recall == doctest::Approx(0.95));
    CHECK(m.per_class[1].precision == doctest::Approx(95.0 / 98.0));
    CHECK(m.accuracy == doctest::Approx(192.0 / 200.0));
    CHECK(m.confusion == std::vector<std::vector<int>>{{97, 3}, {5, 95}});
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        int row = 0;
        for (int v : m.confusion[c]) row += v;
        CHECK(row == m.per_class[c].support);
    }
}

TEST_CASE("perfect and all-benign predictors") {
    std::vector<int> truth = {0, 1, 0, 1, 1, 0};
    auto perfect = compute_metrics(truth, truth, DatasetKind::Fbs);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.macro_precision == 1.0);
    CHECK(perfect.macro_recall == 1.0);
    CHECK(perfect.macro_f1 == 1.0);
    CHECK(perfect.fpr == 0.0);

    auto none = compute_metrics(std::vector<int>(6, 0), truth, DatasetKind::Fbs);
    CHECK(none.accuracy == 0.5);
    CHECK(none.per_class[1].recall == 0.0);
    CHECK(none.fpr == 0.0);
}

TEST_CASE("multi-class macro averages and errors") {
    std::vector<int> truth = {0, 0, 3, 3, 20, 20};
    std::vector<int> pred = {0, 3, 3, 3, 20, 0};
    auto m = compute_metrics(pred, truth, DatasetKind::Msa);
    CHECK(m.classes == std::vector<int>{0, 3, 20});
    CHECK(m.per_class[2].name == "msa:20");
    CHECK(m.macro_recall == doctest::Approx((0.5 + 1.0 + 0.5) / 3));
    CHECK(m.fpr == doctest::Approx(0.5));
    for (const auto& c : m.per_class) CHECK((c.f1 >= 0.0 && c.f1 <= 1.0));
    CHECK_THROWS_AS(compute_metrics({0}, {0, 1}, DatasetKind::Fbs), Error);
}
