// SPDX-License-Identifier: Apache-2.0
#include "fbsd/fusion.hpp"

#include <vector>

namespace fbsd::fusion {

double support_score(const fbs::Prediction& p) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
        throw Error(ErrorKind::Validation, "confidence outside [0,1]");
    return p.confidence;
}

FusedVerdict fuse(const fbs::Prediction& p_nas, const fbs::Prediction& p_rrc) {
    using K = Label::Kind;
    if ((p_nas.label.kind == K::Fbs && p_rrc.label.kind == K::Msa) ||
        (p_nas.label.kind == K::Msa && p_rrc.label.kind == K::Fbs))
        throw Error(ErrorKind::LabelSpaceMismatch, to_string(p_nas.label) + " vs " + to_string(p_rrc.label));
    FusedVerdict v;
    v.nas = p_nas;
    v.rrc = p_rrc;
    v.w_nas = support_score(p_nas);
    v.w_rrc = support_score(p_rrc);
    if (p_nas.label == p_rrc.label || v.w_nas >= v.w_rrc) {
        v.label = p_nas.label;
        v.winner = Layer::Nas;
    } else {
        v.label = p_rrc.label;
        v.winner = Layer::Rrc;
    }
    return v;
}

ExhaustiveReport fuse_exhaustive_check() {
    std::vector<std::vector<Label>> spaces(2);
    spaces[0] = {Label::benign(), Label::fbs()};
    spaces[1].push_back(Label::benign());
    for (int a = 1; a <= kNumAttacks; ++a) spaces[1].push_back(Label::msa(a));
    ExhaustiveReport r;
    for (const auto& space : spaces)
        for (const auto& ln : space)
            for (const auto& lr : space)
                for (int i = 0; i <= 20; ++i)
                    for (int j = 0; j <= 20; ++j) {
                        fbs::Prediction pn{ln, i * 0.05, Layer::Nas};
                        fbs::Prediction pr{lr, j * 0.05, Layer::Rrc};
                        Label expect;
                        if (ln == lr) {
                            expect = ln;
                        } else if (i > j) {
                            expect = ln;
                        } else if (j > i) {
                            expect = lr;
                        } else {
                            expect = ln;
                            ++r.ties;
                        }
                        ++r.cases;
                        if (fuse(pn, pr).label != expect) ++r.mismatches;
                    }
    return r;
}

}  // namespace fbsd::fusion
