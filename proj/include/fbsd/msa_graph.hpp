// SPDX-License-Identifier: Apache-2.0
// Flow graphs over message kinds, the SAGE edge classifier and
// attack-path overlap matching.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbsd/core.hpp"
#include "fbsd/fbs_detect.hpp"
#include "fbsd/numkernel.hpp"

namespace fbsd::msa {

struct GraphEdge {
    std::string src;
    std::string dst;
    int count = 0;
    std::size_t first = 0;       // index of the successor packet at first occurrence
    std::map<int, int> labels;   // class code -> occurrences
    std::map<int, int> inner;    // attack code -> occurrences with both packets in that attack
    int predicted = -1;

    // Majority class; ties go to the attack class with the lowest code.
    int label() const;
};

struct FlowGraph {
    Layer layer = Layer::Nas;
    std::size_t n_packets = 0;
    std::vector<std::string> nodes;  // sorted by kind name
    std::vector<GraphEdge> edges;    // sorted by (src, dst)

    std::optional<std::size_t> node_index(std::string_view kind) const;
    std::string to_json() const;
    friend bool operator==(const FlowGraph&, const FlowGraph&) = default;
};

// Packets must share one layer. Labels use the MSA class space.
FlowGraph build_graph(std::span<const Packet> packets);

using EdgeKey = std::pair<std::string, std::string>;

struct SageConfig {
    std::size_t hidden = 64;
    int epochs = 150;
    double lr = 0.1;
    std::uint64_t seed = 1;
};

// Node features: one-hot kind + normalized in/out/total degree.
nk::Tensor node_features(const FlowGraph& g);
// Undirected neighbour lists (indices into g.nodes).
std::vector<std::vector<std::size_t>> neighbours(const FlowGraph& g);
// Edge features: log(1 + count), first occurrence / packets.
std::pair<double, double> edge_features(const FlowGraph& g, const GraphEdge& e);

// Parameter names: sage.W [h x 2F], sage.b [h], edge.W [C x (2h + 2)], edge.b [C].
nk::ParamSet init_sage_params(Layer layer, std::size_t hidden, std::uint64_t seed);

struct SageForward {
    nk::Tensor log_probs;  // [edges x classes]
    double loss = 0.0;
};

// With `targets`, computes the mean NLL and, with `backward`, accumulates
// parameter gradients.
SageForward sage_forward(nk::ParamSet& params, const FlowGraph& g, const std::vector<int>* targets, bool backward);

struct AttackPathBank {
    Layer layer = Layer::Nas;
    std::map<int, std::set<EdgeKey>> paths;

    std::string to_json() const;
    static AttackPathBank from_json(const std::string& text);
    void save(const std::string& path) const;
    static AttackPathBank load(const std::string& path);
    friend bool operator==(const AttackPathBank&, const AttackPathBank&) = default;
};

AttackPathBank build_bank(Layer layer, std::span<const FlowGraph> graphs);

struct SageModel {
    Layer layer = Layer::Nas;
    SageConfig config;
    nk::ParamSet params;
    std::set<int> classes;  // classes seen in training
    bool trained = false;

    std::string to_json() const;
    static SageModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static SageModel load(const std::string& path);
};

struct MsaTraining {
    SageModel model;
    AttackPathBank bank;
    std::vector<double> loss_history;
};

// `required` lists class codes that must appear among edge labels.
MsaTraining train_msa(Layer layer, std::span<const FlowGraph> graphs, const SageConfig& config,
                      const std::set<int>& required);
std::set<int> all_msa_classes();

// Per-edge argmax classes.
std::vector<int> predict_edges(const SageModel& model, const FlowGraph& g);
fbs::Prediction predict_attack(const SageModel& model, const FlowGraph& g);

double overlap_score(const FlowGraph& g, int attack, const AttackPathBank& bank);

struct NearestAttack {
    fbs::Prediction verdict;
    double overlap = 0.0;
    int overlap_attack = 0;
    bool variant = false;
};

NearestAttack nearest_attack(const SageModel& model, const FlowGraph& g, const AttackPathBank& bank,
                             double tau = 0.5);

// Macro accuracy over classes present in the ground truth of the edges.
struct EdgeScore {
    double macro_accuracy = 0.0;
    std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
};
EdgeScore edge_accuracy(const SageModel& model, std::span<const FlowGraph> graphs);

}  // namespace fbsd::msa
