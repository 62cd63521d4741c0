// SPDX-License-Identifier: Apache-2.0
// Field encoding, windowing and trace-preserving split.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fbsd/core.hpp"

namespace fbsd::feat {

inline constexpr int kAbsent = 0;
inline constexpr int kUnk = 1;

class Codebook {
public:
    Codebook() = default;
    explicit Codebook(Layer layer);

    Layer layer() const { return layer_; }
    std::size_t width() const { return columns_.size(); }

    // Code of a value, UNK when unseen, ABSENT for absent values.
    int code(std::size_t column, const FieldValue& value) const;
    int intern(std::size_t column, const FieldValue& value);
    // Number of codes in use for a column (reserved codes included).
    int cardinality(std::size_t column) const;

    std::string to_json() const;
    static Codebook from_json(const std::string& text);
    void save(const std::string& path) const;
    static Codebook load(const std::string& path);

    friend bool operator==(const Codebook&, const Codebook&) = default;

private:
    Layer layer_ = Layer::Nas;
    std::vector<std::map<std::string, int>> columns_;
};

struct FeatureMatrix {
    Layer layer = Layer::Nas;
    std::size_t width = 0;  // schema columns
    std::vector<std::string> trace_ids;
    std::vector<std::uint32_t> seqs;
    std::vector<int> codes;  // rows x width
    std::vector<int> labels;

    struct TraceRows {
        std::string trace_id;
        std::size_t begin = 0;
        std::size_t end = 0;
    };
    std::vector<TraceRows> traces;

    std::size_t rows() const { return seqs.size(); }
    const int* row(std::size_t r) const { return codes.data() + r * width; }
};

std::pair<FeatureMatrix, Codebook> encode(std::span<const Trace> traces, Layer layer, DatasetKind kind,
                                          const Codebook* existing = nullptr);

void write_csv(std::ostream& out, const FeatureMatrix& m);

struct Window {
    std::size_t trace = 0;      // index into FeatureMatrix::traces
    std::size_t row_begin = 0;  // first matrix row of the window
    std::size_t start = 0;      // offset within the trace
    std::size_t valid = 0;      // real rows; the rest is padding
};

struct WindowSet {
    std::size_t len_seq = 0;
    std::size_t stride = 0;
    std::vector<Window> windows;
};

// Offsets of the windows covering a trace of `length` packets.
std::vector<std::size_t> window_offsets(std::size_t length, std::size_t len_seq, std::size_t stride);

WindowSet window(const FeatureMatrix& m, std::size_t len_seq, std::size_t stride);

inline constexpr std::size_t kDefaultLenSeqNas = 12;
inline constexpr std::size_t kDefaultLenSeqRrc = 100;
std::size_t default_len_seq(Layer layer);

struct Split {
    std::vector<Trace> train;
    std::vector<Trace> test;
};

Split split(std::span<const Trace> traces, double ratio, std::uint64_t seed);

}  // namespace fbsd::feat
