// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <vector>

#include "fbsd/fusion.hpp"
#include "oracles.hpp"

using namespace fbsd;
using fbs::Prediction;

namespace {

Prediction P(Label l, double c, Layer layer) { return {l, c, layer}; }

}  // namespace

TEST_CASE("support score is the confidence") {
    CHECK(fusion::support_score(P(Label::fbs(), 0.9, Layer::Nas)) == 0.9);
    CHECK(fusion::support_score(P(Label::fbs(), 0.0, Layer::Nas)) == 0.0);
    CHECK(fusion::support_score(P(Label::fbs(), 0.7, Layer::Nas)) > fusion::support_score(P(Label::fbs(), 0.6, Layer::Nas)));
}

TEST_CASE("fusion cases") {
    auto a = fusion::fuse(P(Label::fbs(), 0.8, Layer::Nas), P(Label::fbs(), 0.6, Layer::Rrc));
    CHECK(a.label == Label::fbs());
    auto b = fusion::fuse(P(Label::fbs(), 0.9, Layer::Nas), P(Label::benign(), 0.7, Layer::Rrc));
    CHECK(b.label == Label::fbs());
    CHECK(b.winner == Layer::Nas);
    auto c = fusion::fuse(P(Label::benign(), 0.6, Layer::Nas), P(Label::fbs(), 0.8, Layer::Rrc));
    CHECK(c.label == Label::fbs());
    CHECK(c.winner == Layer::Rrc);
    CHECK(c.w_nas == 0.6);
    CHECK(c.w_rrc == 0.8);
    auto tie = fusion::fuse(P(Label::msa(3), 0.5, Layer::Nas), P(Label::msa(9), 0.5, Layer::Rrc));
    CHECK(tie.label == Label::msa(3));
    CHECK(tie.winner == Layer::Nas);
    CHECK_THROWS_AS(fusion::fuse(P(Label::fbs(), 0.5, Layer::Nas), P(Label::msa(2), 0.5, Layer::Rrc)), Error);
}

TEST_CASE("fuse matches the case formula over the label and weight grid") {
    std::vector<Label> labels = {Label::benign(), Label::fbs()};
    std::vector<Label> msa = {Label::benign()};
    for (int a = 1; a <= kNumAttacks; ++a) msa.push_back(Label::msa(a));
    std::size_t cases = 0, mismatches = 0;
    for (const auto* space : {&labels, &msa})
        for (const auto& ln : *space)
            for (const auto& lr : *space)
                for (int i = 0; i <= 20; ++i)
                    for (int j = 0; j <= 20; ++j) {
                        auto n = P(ln, i * 0.05, Layer::Nas), r = P(lr, j * 0.05, Layer::Rrc);
                        auto f = fusion::fuse(n, r);
                        ++cases;
                        mismatches += !(f.label == oracle::fuse_label(n, r));
                        CHECK((f.label == ln || f.label == lr));
                        if (ln == lr) CHECK(f.label == ln);
                    }
    CHECK(mismatches == 0);
    auto rep = fusion::fuse_exhaustive_check();
    CHECK(rep.cases == cases);
    CHECK(rep.mismatches == 0);
    CHECK(rep.ties > 0);
}
