// SPDX-License-Identifier: Apache-2.0
#include "fbsd/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fbsd/rng.hpp"
#include "fbsd/schema.hpp"

namespace fbsd::feat {

Codebook::Codebook(Layer layer) : layer_(layer), columns_(field_schema(layer).size()) {}

int Codebook::code(std::size_t column, const FieldValue& value) const {
    if (is_absent(value)) return kAbsent;
    const auto& col = columns_.at(column);
    auto it = col.find(value_text(value));
    return it == col.end() ? kUnk : it->second;
}

int Codebook::intern(std::size_t column, const FieldValue& value) {
    if (is_absent(value)) return kAbsent;
    auto& col = columns_.at(column);
    auto [it, inserted] = col.emplace(value_text(value), static_cast<int>(col.size()) + 2);
    return it->second;
}

int Codebook::cardinality(std::size_t column) const { return static_cast<int>(columns_.at(column).size()) + 2; }

std::string Codebook::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["layer"] = to_string(layer_);
    nlohmann::ordered_json cols = nlohmann::ordered_json::object();
    auto names = field_schema(layer_);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        if (columns_[c].empty()) continue;
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        std::vector<std::pair<int, std::string>> by_code;
        for (const auto& [v, code] : columns_[c]) by_code.emplace_back(code, v);
        std::sort(by_code.begin(), by_code.end());
        for (const auto& [code, v] : by_code) m[v] = code;
        cols[std::string(names[c])] = std::move(m);
    }
    j["columns"] = std::move(cols);
    return j.dump();
}

Codebook Codebook::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    Codebook cb(parse_layer(j.at("layer").get<std::string>()));
    for (const auto& [name, m] : j.at("columns").items()) {
        auto col = field_column(cb.layer_, name);
        if (!col) throw Error(ErrorKind::SchemaMismatch, "codebook column '" + name + "'");
        for (const auto& [v, code] : m.items()) cb.columns_[*col][v] = code.get<int>();
    }
    return cb;
}

void Codebook::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << to_json() << '\n';
}

Codebook Codebook::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::pair<FeatureMatrix, Codebook> encode(std::span<const Trace> traces, Layer layer, DatasetKind kind,
                                          const Codebook* existing) {
    Codebook cb = existing ? *existing : Codebook(layer);
    if (existing && existing->layer() != layer)
        throw Error(ErrorKind::SchemaMismatch, "codebook layer differs from requested layer");
    const std::size_t width = field_schema(layer).size();
    const std::size_t kind_col = *field_column(layer, kind_field(layer));

    FeatureMatrix m;
    m.layer = layer;
    m.width = width;
    std::vector<int> row(width);
    for (const auto& t : traces) {
        FeatureMatrix::TraceRows tr{t.trace_id, m.rows(), m.rows()};
        for (const auto& p : t.packets) {
            if (p.layer != layer) continue;
            std::fill(row.begin(), row.end(), kAbsent);
            for (const auto& [name, value] : p.fields) {
                auto col = field_column(layer, name);
                if (!col)
                    throw Error(ErrorKind::SchemaMismatch,
                                t.trace_id + " seq " + std::to_string(p.seq) + ": unknown field '" + name + "'");
                row[*col] = existing ? cb.code(*col, value) : cb.intern(*col, value);
            }
            FieldValue kv = p.kind;
            row[kind_col] = existing ? cb.code(kind_col, kv) : cb.intern(kind_col, kv);
            m.codes.insert(m.codes.end(), row.begin(), row.end());
            m.trace_ids.push_back(t.trace_id);
            m.seqs.push_back(p.seq);
            m.labels.push_back(label_code(p.label, kind));
        }
        tr.end = m.rows();
        m.traces.push_back(std::move(tr));
    }
    return {std::move(m), std::move(cb)};
}

void write_csv(std::ostream& out, const FeatureMatrix& m) {
    out << "trace_id,seq";
    for (auto name : field_schema(m.layer)) out << ',' << name;
    out << ",label\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << m.trace_ids[r] << ',' << m.seqs[r];
        const int* x = m.row(r);
        for (std::size_t c = 0; c < m.width; ++c) out << ',' << x[c];
        out << ',' << m.labels[r] << '\n';
    }
}

std::vector<std::size_t> window_offsets(std::size_t length, std::size_t len_seq, std::size_t stride) {
    if (len_seq == 0 || stride == 0) throw Error(ErrorKind::Validation, "len_seq and stride must be positive");
    if (stride > len_seq) throw Error(ErrorKind::Validation, "stride larger than len_seq leaves packets uncovered");
    std::vector<std::size_t> out;
    if (length == 0) return out;
    std::size_t n = length <= len_seq ? 1 : (length - len_seq + stride - 1) / stride + 1;
    for (std::size_t k = 0; k < n; ++k) out.push_back(k * stride);
    return out;
}

WindowSet window(const FeatureMatrix& m, std::size_t len_seq, std::size_t stride) {
    WindowSet ws;
    ws.len_seq = len_seq;
    ws.stride = stride;
    for (std::size_t t = 0; t < m.traces.size(); ++t) {
        const auto& tr = m.traces[t];
        std::size_t len = tr.end - tr.begin;
        for (std::size_t off : window_offsets(len, len_seq, stride))
            ws.windows.push_back({t, tr.begin + off, off, std::min(len_seq, len - off)});
    }
    return ws;
}

std::size_t default_len_seq(Layer layer) { return layer == Layer::Nas ? kDefaultLenSeqNas : kDefaultLenSeqRrc; }

Split split(std::span<const Trace> traces, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::Validation, "split ratio must lie in (0,1)");
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < traces.size(); ++i) by_class[trace_class(traces[i])].push_back(i);

    Rng rng(seed);
    std::vector<bool> in_train(traces.size(), false);
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 2)
            throw Error(ErrorKind::ClassTooSmall, "class " + cls + " has " + std::to_string(idx.size()) + " trace(s)");
        rng.shuffle(idx);
        std::size_t n = idx.size();
        auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
        auto pk = [&](std::size_t i) { return static_cast<double>(traces[i].packets.size()); };
        double total = 0, in = 0;
        for (auto i : idx) total += pk(i);
        for (auto i : tr) in += pk(i);
        const double target = ratio * total;
        // Greedy swaps toward the packet-count target.
        for (std::size_t iter = 0; iter < n; ++iter) {
            double best = std::abs(in - target);
            std::size_t bi = 0, bj = 0;
            bool found = false;
            for (std::size_t a = 0; a < tr.size(); ++a)
                for (std::size_t b = 0; b < te.size(); ++b) {
                    double cand = std::abs(in - pk(tr[a]) + pk(te[b]) - target);
                    if (cand + 1e-9 < best) {
                        best = cand;
                        bi = a;
                        bj = b;
                        found = true;
                    }
                }
            if (!found) break;
            in += pk(te[bj]) - pk(tr[bi]);
            std::swap(tr[bi], te[bj]);
        }
        for (auto i : tr) in_train[i] = true;
    }
    Split s;
    for (std::size_t i = 0; i < traces.size(); ++i) (in_train[i] ? s.train : s.test).push_back(traces[i]);
    return s;
}

}  // namespace fbsd::feat
