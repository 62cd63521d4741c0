// SPDX-License-Identifier: Apache-2.0
// End-to-end plumbing shared by the CLI and the acceptance run: model
// directories, per-layer training, per-trace verdicts and batch evaluation.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbsd/core.hpp"
#include "fbsd/fbs_detect.hpp"
#include "fbsd/featurize.hpp"
#include "fbsd/fusion.hpp"
#include "fbsd/metrics.hpp"
#include "fbsd/msa_graph.hpp"
#include "fbsd/simulator.hpp"

namespace fbsd::pipeline {

std::string_view to_string(DatasetKind task);
DatasetKind parse_task(std::string_view text);

struct FbsLayerModels {
    feat::Codebook codebook;
    fbs::PacketModel packet;
    std::optional<fbs::TraceModel> trace;
};

struct MsaLayerModels {
    msa::SageModel sage;
    msa::AttackPathBank bank;
};

// Directory layout: models.json plus <layer>.codebook.json, <layer>.packet.json,
// <layer>.trace.json (fbs) or <layer>.sage.json, <layer>.bank.json (msa).
struct Models {
    DatasetKind task = DatasetKind::Fbs;
    std::map<Layer, FbsLayerModels> fbs;
    std::map<Layer, MsaLayerModels> msa;

    std::vector<Layer> layers() const;
    void save(const std::string& dir) const;
    static Models load(const std::string& dir);
};

// Packets of a trace on one layer with labels cleared.
std::vector<Packet> unlabeled_layer(const Trace& t, Layer layer);

struct FbsPacketTraining {
    FbsLayerModels models;
    std::vector<double> loss_history;
};

FbsPacketTraining train_fbs_packet(std::span<const Trace> train, Layer layer, const fbs::PacketConfig& config);
// Fits the trace head on the packet model's outputs over `train`.
fbs::TraceModel train_fbs_trace(const FbsLayerModels& m, std::span<const Trace> train);

msa::MsaTraining train_msa_layer(std::span<const Trace> train, Layer layer, const msa::SageConfig& config);

struct FbsLayerResult {
    fbs::Prediction prediction;
    std::vector<double> per_packet;
};

// nullopt when the trace has no packets on the layer.
std::optional<FbsLayerResult> infer_fbs(const FbsLayerModels& m, Layer layer, const Trace& t);
std::optional<msa::NearestAttack> infer_msa(const MsaLayerModels& m, Layer layer, const Trace& t, double tau = 0.5);

struct DetectOptions {
    bool fuse = true;
    Layer layer = Layer::Nas;  // verdict layer when fusion is off
    double tau = 0.5;
};

struct LayerVerdict {
    fbs::Prediction prediction;
    std::vector<double> per_packet;        // fbs only
    std::optional<msa::NearestAttack> msa;  // msa only
};

struct Verdict {
    std::string trace_id;
    DatasetKind task = DatasetKind::Fbs;
    Label label;
    double confidence = 0.0;
    Layer source = Layer::Nas;
    bool fused = false;
    std::optional<fusion::FusedVerdict> fusion;
    std::map<Layer, LayerVerdict> layers;

    // One JSON line (no trailing newline).
    std::string to_json() const;
};

Verdict detect(const Models& models, const Trace& t, const DetectOptions& options);

struct EvalResult {
    std::vector<Verdict> verdicts;
    MetricsReport trace_metrics;                    // final verdicts
    std::map<Layer, MetricsReport> layer_metrics;   // per-layer trace verdicts
    std::map<Layer, MetricsReport> packet_metrics;  // fbs only
    std::map<Layer, msa::EdgeScore> edge_scores;    // msa only

    std::string report_json() const;
};

EvalResult evaluate(const Models& models, std::span<const Trace> traces, const DetectOptions& options,
                    int workers = 1);

// 200 traces: 100 benign, FBS levels 0/1/2 with 34/33/33.
std::vector<sim::ScenarioSpec> fbs_desk_specs(std::uint64_t seed);
// Benign plus every attack at level 3, `per_class` traces each.
std::vector<sim::ScenarioSpec> msa_desk_specs(std::uint64_t seed, int per_class = 5, double noise = 0.3);
// Attacks covered by the built-in signatures.
std::vector<int> signature_attacks();

struct GradCheckRow {
    std::string component;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed() const { return max_rel_error < tolerance; }
};

// Dense, LSTM cell (tanh and sigmoid), attention, attended output,
// SAGE + edge head and the full packet-model window at toy dimensions.
std::vector<GradCheckRow> gradcheck_suite(std::uint64_t seed);

}  // namespace fbsd::pipeline
