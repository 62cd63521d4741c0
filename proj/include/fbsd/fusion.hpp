// SPDX-License-Identifier: Apache-2.0
// Weighted-confidence fusion of NAS and RRC trace verdicts.
#pragma once

#include <string>

#include "fbsd/fbs_detect.hpp"

namespace fbsd::fusion {

struct FusedVerdict {
    Label label;
    Layer winner = Layer::Nas;
    double w_nas = 0.0;
    double w_rrc = 0.0;
    fbs::Prediction nas;
    fbs::Prediction rrc;
};

double support_score(const fbs::Prediction& p);

// Agreement keeps the shared label; otherwise the higher weight wins and
// an exact tie goes to NAS.
FusedVerdict fuse(const fbs::Prediction& p_nas, const fbs::Prediction& p_rrc);

struct ExhaustiveReport {
    std::size_t cases = 0;
    std::size_t mismatches = 0;
    std::size_t ties = 0;
};

// Every label pair of both label spaces times a 0.05 weight grid.
ExhaustiveReport fuse_exhaustive_check();

}  // namespace fbsd::fusion
