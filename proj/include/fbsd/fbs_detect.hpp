// SPDX-License-Identifier: Apache-2.0
// Packet-level FBS classifier (stateful LSTM + attention LSTM) and the
// trace-level logistic classifier over its outputs.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbsd/core.hpp"
#include "fbsd/featurize.hpp"
#include "fbsd/numkernel.hpp"

namespace fbsd::fbs {

struct PacketConfig {
    std::size_t hidden = 64;
    std::size_t len_seq = 0;  // 0: layer default
    std::size_t stride = 0;   // 0: len_seq
    int epochs = 30;
    double lr = 0.05;
    double clip_norm = 0.0;  // 0: no clipping
    std::uint64_t seed = 1;
};

// Window loss is summed over timesteps, so one setting serves both layers.
PacketConfig default_packet_config(Layer layer);

struct LstmState {
    nk::Tensor h;
    nk::Tensor c;
};

LstmState zero_state(std::size_t hidden);

// Parameter names: a.Wx a.Wh a.b (stateful branch, sigmoid activation),
// b.Wx b.Wh b.b (attention branch, tanh), att.Wc att.bc, head.W head.b.
nk::ParamSet init_packet_params(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

struct WindowPass {
    double loss = 0.0;
    std::vector<double> probs;
    LstmState carry;  // branch-A state after `carry_steps` steps
};

// One window through the network. X is [T x d] (real rows only). With
// `backward`, parameter gradients are accumulated into params.
WindowPass run_window(nk::ParamSet& params, const nk::Tensor& X, const std::vector<double>& targets,
                      const LstmState& init, std::size_t carry_steps, bool backward);

struct PacketModel {
    Layer layer = Layer::Nas;
    PacketConfig config;
    std::vector<double> input_scale;  // per schema column
    nk::ParamSet params;
    bool trained = false;

    std::size_t len_seq() const;
    std::string to_json() const;
    static PacketModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static PacketModel load(const std::string& path);
};

// Scaled input rows [rows x width] for matrix rows [begin, begin + n).
nk::Tensor window_inputs(const PacketModel& model, const feat::FeatureMatrix& m, std::size_t begin, std::size_t n);

struct PacketTraining {
    PacketModel model;
    std::vector<double> loss_history;
};

PacketTraining train_packet_model(const feat::FeatureMatrix& train, const feat::Codebook& codebook,
                                  const PacketConfig& config);

// Per-packet probabilities for trace `trace` of the matrix. Overlapping
// windows are averaged; `carry_state=false` resets branch A per window.
std::vector<double> predict_packets(const PacketModel& model, const feat::FeatureMatrix& m, std::size_t trace,
                                    std::size_t stride = 0, bool carry_state = true);

inline constexpr std::size_t kTraceFeatures = 8;
using TraceFeatures = std::array<double, kTraceFeatures>;

// Kind of a packet for the count features; RRC packets contribute the
// NAS kind they carry, if any.
std::string counted_kind(const Packet& p);

TraceFeatures trace_features(std::span<const double> probs, std::span<const Packet> packets);

struct Prediction {
    Label label;
    double confidence = 0.0;
    Layer layer = Layer::Nas;
};

struct TraceModel {
    Layer layer = Layer::Nas;
    std::array<double, kTraceFeatures> w{};
    double b = 0.0;
    bool trained = false;

    double probability(const TraceFeatures& x) const;
    std::string to_json() const;
    static TraceModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static TraceModel load(const std::string& path);
};

struct TraceTrainConfig {
    int iterations = 4000;
    double lr = 0.5;
    double l2 = 1e-4;
};

TraceModel train_trace_model(Layer layer, std::span<const TraceFeatures> xs, std::span<const int> ys,
                             const TraceTrainConfig& config = {});

Prediction predict_trace(const TraceModel& model, const TraceFeatures& x);

}  // namespace fbsd::fbs
