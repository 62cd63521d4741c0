// SPDX-License-Identifier: Apache-2.0
#include "fbsd/metrics.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace fbsd {

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth, DatasetKind kind) {
    if (predicted.size() != truth.size())
        throw Error(ErrorKind::LengthMismatch, "predictions and labels differ in length");
    MetricsReport r;
    r.n = truth.size();
    std::set<int> codes(truth.begin(), truth.end());
    codes.insert(predicted.begin(), predicted.end());
    r.classes.assign(codes.begin(), codes.end());
    const std::size_t C = r.classes.size();
    auto at = [&](int code) {
        return static_cast<std::size_t>(std::lower_bound(r.classes.begin(), r.classes.end(), code) - r.classes.begin());
    };
    r.confusion.assign(C, std::vector<int>(C, 0));
    std::size_t correct = 0, fp = 0, tn = 0;
    for (std::size_t i = 0; i < r.n; ++i) {
        ++r.confusion[at(truth[i])][at(predicted[i])];
        correct += truth[i] == predicted[i];
        if (truth[i] == 0) (predicted[i] == 0 ? tn : fp) += 1;
    }
    if (r.n == 0) return r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
    r.fpr = fp + tn ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        ClassMetrics m;
        m.code = r.classes[c];
        m.name = to_string(decode_label(m.code, kind));
        int tp = r.confusion[c][c], col = 0;
        for (std::size_t k = 0; k < C; ++k) {
            m.support += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        m.precision = col ? static_cast<double>(tp) / col : 0.0;
        m.recall = m.support ? static_cast<double>(tp) / m.support : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
        r.per_class.push_back(std::move(m));
    }
    r.macro_precision /= static_cast<double>(C);
    r.macro_recall /= static_cast<double>(C);
    r.macro_f1 /= static_cast<double>(C);
    return r;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["n"] = n;
    j["accuracy"] = accuracy;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    j["fpr"] = fpr;
    std::vector<std::string> names;
    for (const auto& m : per_class) names.push_back(m.name);
    j["classes"] = names;
    j["confusion"] = confusion;
    auto pc = nlohmann::ordered_json::array();
    for (const auto& m : per_class)
        pc.push_back({{"class", m.name}, {"support", m.support}, {"precision", m.precision}, {"recall", m.recall},
                      {"f1", m.f1}});
    j["per_class"] = std::move(pc);
    return j.dump(2);
}

}  // namespace fbsd
