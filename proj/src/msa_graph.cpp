// SPDX-License-Identifier: Apache-2.0
#include "fbsd/msa_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fbsd/rng.hpp"

namespace fbsd::msa {

using nk::Tensor;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    out << text << '\n';
}

nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
}

std::size_t vocab_size(Layer layer) { return message_kinds(layer).size(); }

}  // namespace

int GraphEdge::label() const {
    int best = 0, best_n = -1;
    for (const auto& [code, n] : labels) {
        if (n > best_n || (n == best_n && best == 0)) {
            best = code;
            best_n = n;
        }
    }
    return best;
}

std::optional<std::size_t> FlowGraph::node_index(std::string_view kind) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), kind);
    if (it == nodes.end() || *it != kind) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

std::string FlowGraph::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["layer"] = to_string(layer);
    j["packets"] = n_packets;
    j["nodes"] = nodes;
    auto es = nlohmann::ordered_json::array();
    for (const auto& e : edges) {
        nlohmann::ordered_json je;
        je["src"] = e.src;
        je["dst"] = e.dst;
        je["count"] = e.count;
        je["first"] = e.first;
        je["label"] = to_string(decode_label(e.label(), DatasetKind::Msa));
        nlohmann::ordered_json ls = nlohmann::ordered_json::object();
        for (const auto& [code, n] : e.labels) ls[to_string(decode_label(code, DatasetKind::Msa))] = n;
        je["labels"] = std::move(ls);
        if (e.predicted >= 0) je["predicted"] = to_string(decode_label(e.predicted, DatasetKind::Msa));
        es.push_back(std::move(je));
    }
    j["edges"] = std::move(es);
    return j.dump();
}

FlowGraph build_graph(std::span<const Packet> packets) {
    if (packets.empty()) throw Error(ErrorKind::EmptyInput, "build_graph needs at least one packet");
    FlowGraph g;
    g.layer = packets.front().layer;
    g.n_packets = packets.size();
    std::set<std::string> nodes;
    std::map<EdgeKey, GraphEdge> edges;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& p = packets[i];
        if (p.layer != g.layer) throw Error(ErrorKind::Validation, "build_graph: packets span two layers");
        if (!is_known_kind(p.layer, p.kind)) throw Error(ErrorKind::Validation, "build_graph: unknown kind " + p.kind);
        nodes.insert(p.kind);
        if (i == 0) continue;
        EdgeKey key{packets[i - 1].kind, p.kind};
        auto [it, inserted] = edges.try_emplace(key);
        auto& e = it->second;
        if (inserted) {
            e.src = key.first;
            e.dst = key.second;
            e.first = i;
        }
        ++e.count;
        const int code = label_code(p.label, DatasetKind::Msa);
        ++e.labels[code];
        if (code != 0 && packets[i - 1].label == p.label) ++e.inner[code];
    }
    g.nodes.assign(nodes.begin(), nodes.end());
    for (auto& [k, e] : edges) g.edges.push_back(std::move(e));
    return g;
}

Tensor node_features(const FlowGraph& g) {
    const std::size_t V = vocab_size(g.layer), N = g.nodes.size();
    Tensor X({N, V + 3});
    std::vector<double> in(N, 0), out(N, 0);
    for (const auto& e : g.edges) {
        out[*g.node_index(e.src)] += 1;
        in[*g.node_index(e.dst)] += 1;
    }
    const double norm = std::max<double>(1.0, static_cast<double>(g.edges.size()));
    for (std::size_t v = 0; v < N; ++v) {
        X.at(v, *kind_index(g.layer, g.nodes[v])) = 1.0;
        X.at(v, V) = in[v] / norm;
        X.at(v, V + 1) = out[v] / norm;
        X.at(v, V + 2) = (in[v] + out[v]) / norm;
    }
    return X;
}

std::vector<std::vector<std::size_t>> neighbours(const FlowGraph& g) {
    std::vector<std::set<std::size_t>> sets(g.nodes.size());
    for (const auto& e : g.edges) {
        auto u = *g.node_index(e.src), v = *g.node_index(e.dst);
        sets[u].insert(v);
        sets[v].insert(u);
    }
    std::vector<std::vector<std::size_t>> out;
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
}

std::pair<double, double> edge_features(const FlowGraph& g, const GraphEdge& e) {
    return {std::log1p(static_cast<double>(e.count)),
            static_cast<double>(e.first) / static_cast<double>(std::max<std::size_t>(1, g.n_packets))};
}

nk::ParamSet init_sage_params(Layer layer, std::size_t hidden, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t F = vocab_size(layer) + 3;
    nk::ParamSet p;
    p.add("sage.W", nk::init_uniform({hidden, 2 * F}, 2 * F, rng));
    p.add("sage.b", Tensor({hidden}));
    p.add("edge.W", nk::init_uniform({kNumMsaClasses, 2 * hidden + 2}, 2 * hidden + 2, rng));
    p.add("edge.b", Tensor({kNumMsaClasses}));
    return p;
}

SageForward sage_forward(nk::ParamSet& P, const FlowGraph& g, const std::vector<int>* targets, bool backward) {
    const std::size_t N = g.nodes.size(), E = g.edges.size();
    const std::size_t hidden = P["sage.b"].value.size();
    const std::size_t C = P["edge.b"].value.size();
    Tensor X = node_features(g);
    const std::size_t F = X.cols();
    nk::check_shape(P["sage.W"].value.cols() == 2 * F, "sage_forward: node feature width");
    auto nb = neighbours(g);

    std::vector<Tensor> in(N), z(N), h(N);
    for (std::size_t v = 0; v < N; ++v) {
        Tensor self({F}), mean({F});
        for (std::size_t k = 0; k < F; ++k) self[k] = X.at(v, k);
        for (auto u : nb[v])
            for (std::size_t k = 0; k < F; ++k) mean[k] += X.at(u, k);
        if (!nb[v].empty())
            for (std::size_t k = 0; k < F; ++k) mean[k] /= static_cast<double>(nb[v].size());
        in[v] = nk::concat(self, mean);
        z[v] = nk::dense(P["sage.W"].value, P["sage.b"].value, in[v]);
        h[v] = nk::relu(z[v]);
    }
    SageForward out;
    out.log_probs = Tensor({E, C});
    std::vector<Tensor> q(E);
    std::vector<std::pair<std::size_t, std::size_t>> ends(E);
    for (std::size_t e = 0; e < E; ++e) {
        const auto& ge = g.edges[e];
        ends[e] = {*g.node_index(ge.src), *g.node_index(ge.dst)};
        auto [f1, f2] = edge_features(g, ge);
        q[e] = nk::concat(nk::concat(h[ends[e].first], h[ends[e].second]), Tensor::vector({f1, f2}));
        Tensor lp = nk::log_softmax(nk::dense(P["edge.W"].value, P["edge.b"].value, q[e]));
        for (std::size_t c = 0; c < C; ++c) out.log_probs.at(e, c) = lp[c];
    }
    if (!targets || E == 0) return out;
    nk::Loss loss = nk::nll_loss(out.log_probs, *targets, std::vector<int>(E, 1));
    out.loss = loss.value;
    if (!backward) return out;

    std::vector<Tensor> dh(N, Tensor({hidden}));
    for (std::size_t e = 0; e < E; ++e) {
        Tensor lp({C}), dlp({C});
        for (std::size_t c = 0; c < C; ++c) {
            lp[c] = out.log_probs.at(e, c);
            dlp[c] = loss.grad.at(e, c);
        }
        Tensor dlogits = nk::log_softmax_backward(lp, dlp);
        Tensor dq = nk::dense_backward(P["edge.W"].value, q[e], dlogits, P["edge.W"].grad, P["edge.b"].grad);
        for (std::size_t j = 0; j < hidden; ++j) {
            dh[ends[e].first][j] += dq[j];
            dh[ends[e].second][j] += dq[hidden + j];
        }
    }
    for (std::size_t v = 0; v < N; ++v) {
        Tensor dz = nk::relu_backward(z[v], dh[v]);
        nk::dense_backward(P["sage.W"].value, in[v], dz, P["sage.W"].grad, P["sage.b"].grad);
    }
    return out;
}

std::string AttackPathBank::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["layer"] = to_string(layer);
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [attack, edges] : paths) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& [s, d] : edges) arr.push_back({s, d});
        a[std::to_string(attack)] = std::move(arr);
    }
    j["attacks"] = std::move(a);
    return j.dump();
}

AttackPathBank AttackPathBank::from_json(const std::string& text) {
    auto j = parse_json(text);
    AttackPathBank b;
    try {
        b.layer = parse_layer(j.at("layer").get<std::string>());
        for (const auto& [k, arr] : j.at("attacks").items()) {
            auto& s = b.paths[std::stoi(k)];
            for (const auto& e : arr) s.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return b;
}

void AttackPathBank::save(const std::string& path) const { write_file(path, to_json()); }
AttackPathBank AttackPathBank::load(const std::string& path) { return from_json(read_file(path)); }

AttackPathBank build_bank(Layer layer, std::span<const FlowGraph> graphs) {
    AttackPathBank b;
    b.layer = layer;
    std::map<int, std::set<EdgeKey>> any;
    for (const auto& g : graphs)
        for (const auto& e : g.edges) {
            for (const auto& [code, n] : e.labels)
                if (code != 0) any[code].insert({e.src, e.dst});
            for (const auto& [code, n] : e.inner) b.paths[code].insert({e.src, e.dst});
        }
    for (auto& [code, edges] : any)
        if (!b.paths.count(code)) b.paths[code] = std::move(edges);
    return b;
}

std::string SageModel::to_json() const {
    nlohmann::ordered_json j;
    j["model_type"] = "msa_sage_v1";
    j["layer"] = to_string(layer);
    j["trained"] = trained;
    j["config"] = {{"hidden", config.hidden}, {"epochs", config.epochs}, {"lr", config.lr}, {"seed", config.seed}};
    j["classes"] = classes;
    j["params"] = nlohmann::ordered_json::parse(params.to_json());
    return j.dump();
}

SageModel SageModel::from_json(const std::string& text) {
    auto j = parse_json(text);
    if (j.value("model_type", std::string()) != "msa_sage_v1")
        throw Error(ErrorKind::Parse, "expected model_type msa_sage_v1");
    SageModel m;
    try {
        m.layer = parse_layer(j.at("layer").get<std::string>());
        m.trained = j.at("trained").get<bool>();
        const auto& c = j.at("config");
        m.config.hidden = c.at("hidden").get<std::size_t>();
        m.config.epochs = c.at("epochs").get<int>();
        m.config.lr = c.at("lr").get<double>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        for (int k : j.at("classes")) m.classes.insert(k);
        m.params = nk::ParamSet::from_json(j.at("params").dump());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return m;
}

void SageModel::save(const std::string& path) const { write_file(path, to_json()); }
SageModel SageModel::load(const std::string& path) { return from_json(read_file(path)); }

std::set<int> all_msa_classes() {
    std::set<int> s;
    for (int c = 0; c < kNumMsaClasses; ++c) s.insert(c);
    return s;
}

MsaTraining train_msa(Layer layer, std::span<const FlowGraph> graphs, const SageConfig& config,
                      const std::set<int>& required) {
    std::set<int> seen;
    std::size_t n_edges = 0;
    for (const auto& g : graphs) {
        if (g.layer != layer) throw Error(ErrorKind::Validation, "train_msa: graph layer differs");
        for (const auto& e : g.edges) seen.insert(e.label());
        n_edges += g.edges.size();
    }
    if (n_edges == 0) throw Error(ErrorKind::EmptyTrainingSet, "no edges to train on");
    for (int c : required)
        if (!seen.count(c))
            throw Error(ErrorKind::MissingClass, "class " + to_string(decode_label(c, DatasetKind::Msa)) +
                                                     " has no training edges");
    if (config.epochs <= 0 || config.hidden == 0) throw Error(ErrorKind::Validation, "epochs and hidden must be positive");

    MsaTraining out;
    out.model.layer = layer;
    out.model.config = config;
    out.model.classes = seen;
    out.model.params = init_sage_params(layer, config.hidden, config.seed);
    out.bank = build_bank(layer, graphs);

    std::vector<std::vector<int>> targets;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        std::vector<int> t;
        for (const auto& e : graphs[i].edges) t.push_back(e.label());
        targets.push_back(std::move(t));
        if (!graphs[i].edges.empty()) order.push_back(i);
    }
    Rng rng(mix_seed(config.seed, 0x5a6e));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0;
        for (auto i : order) {
            auto f = sage_forward(out.model.params, graphs[i], &targets[i], true);
            nk::sgd_step(out.model.params, config.lr);
            total += f.loss;
        }
        out.loss_history.push_back(total / static_cast<double>(order.size()));
    }
    out.model.trained = true;
    return out;
}

std::vector<int> predict_edges(const SageModel& model, const FlowGraph& g) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "MSA model is not trained");
    if (g.layer != model.layer) throw Error(ErrorKind::Validation, "graph layer differs from model layer");
    nk::ParamSet params = model.params;
    auto f = sage_forward(params, g, nullptr, false);
    std::vector<int> out;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < f.log_probs.cols(); ++c)
            if (f.log_probs.at(e, c) > f.log_probs.at(e, best)) best = c;
        out.push_back(static_cast<int>(best));
    }
    return out;
}

fbs::Prediction predict_attack(const SageModel& model, const FlowGraph& g) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "MSA model is not trained");
    if (g.layer != model.layer) throw Error(ErrorKind::Validation, "graph layer differs from model layer");
    fbs::Prediction p;
    p.layer = g.layer;
    if (g.edges.empty()) {
        p.label = Label::benign();
        p.confidence = 1.0;
        return p;
    }
    nk::ParamSet params = model.params;
    auto f = sage_forward(params, g, nullptr, false);
    const std::size_t E = g.edges.size(), C = f.log_probs.cols();
    std::vector<double> score(C, 0.0), prob_sum(C, 0.0);
    std::vector<int> support(C, 0);
    for (std::size_t e = 0; e < E; ++e) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (f.log_probs.at(e, c) > f.log_probs.at(e, best)) best = c;
        const double pr = std::exp(f.log_probs.at(e, best));
        score[best] += pr;
        prob_sum[best] += pr;
        ++support[best];
    }
    std::size_t win = 0;
    for (std::size_t c = 1; c < C; ++c)
        if (support[c] > 0 && (win == 0 || score[c] > score[win])) win = c;
    if (win == 0) {
        p.label = Label::benign();
        p.confidence = prob_sum[0] / support[0];
    } else {
        p.label = Label::msa(static_cast<int>(win));
        p.confidence = prob_sum[win] / support[win];
    }
    return p;
}

double overlap_score(const FlowGraph& g, int attack, const AttackPathBank& bank) {
    auto it = bank.paths.find(attack);
    if (it == bank.paths.end() || it->second.empty())
        throw Error(ErrorKind::UnknownAttack, "no bank entry for attack " + std::to_string(attack));
    std::size_t hit = 0;
    for (const auto& e : g.edges)
        if (it->second.count({e.src, e.dst})) ++hit;
    return static_cast<double>(hit) / static_cast<double>(it->second.size());
}

NearestAttack nearest_attack(const SageModel& model, const FlowGraph& g, const AttackPathBank& bank, double tau) {
    NearestAttack out;
    out.verdict = predict_attack(model, g);
    for (const auto& [attack, edges] : bank.paths) {
        if (edges.empty()) continue;
        double s = overlap_score(g, attack, bank);
        if (s > out.overlap) {
            out.overlap = s;
            out.overlap_attack = attack;
        }
    }
    if (out.verdict.confidence < 0.5 && out.overlap_attack != 0 && out.overlap >= tau) {
        // Confidence stays the model's probability for the emitted class,
        // averaged over the graph edges on that attack's path.
        nk::ParamSet params = model.params;
        auto f = sage_forward(params, g, nullptr, false);
        const auto& path = bank.paths.at(out.overlap_attack);
        const auto cls = static_cast<std::size_t>(out.overlap_attack);
        double sum = 0;
        int n = 0;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            if (path.count({g.edges[e].src, g.edges[e].dst}) && cls < f.log_probs.cols()) {
                sum += std::exp(f.log_probs.at(e, cls));
                ++n;
            }
        out.verdict.label = Label::msa(out.overlap_attack);
        out.verdict.confidence = n ? sum / n : 0.0;
        out.variant = true;
    }
    return out;
}

EdgeScore edge_accuracy(const SageModel& model, std::span<const FlowGraph> graphs) {
    EdgeScore s;
    for (const auto& g : graphs) {
        auto pred = predict_edges(model, g);
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            auto& [ok, total] = s.per_class[g.edges[e].label()];
            ok += pred[e] == g.edges[e].label();
            ++total;
        }
    }
    double sum = 0;
    for (const auto& [c, ct] : s.per_class) sum += static_cast<double>(ct.first) / ct.second;
    s.macro_accuracy = s.per_class.empty() ? 0.0 : sum / static_cast<double>(s.per_class.size());
    return s;
}

}  // namespace fbsd::msa
