// SPDX-License-Identifier: Apache-2.0
// Classification metrics with Benign (code 0) as the negative class.
#pragma once

#include <string>
#include <vector>

#include "fbsd/core.hpp"

namespace fbsd {

struct ClassMetrics {
    int code = 0;
    std::string name;
    int support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::size_t n = 0;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double fpr = 0.0;
    std::vector<int> classes;                 // codes in report order
    std::vector<std::vector<int>> confusion;  // [truth][prediction] over `classes`
    std::vector<ClassMetrics> per_class;

    std::string to_json() const;
};

// Macro averages run over classes present in truth or predictions.
MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                              DatasetKind kind);

}  // namespace fbsd
