// SPDX-License-Identifier: Apache-2.0
#include "fbsd/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fbsd/numkernel.hpp"
#include "fbsd/rng.hpp"
#include "fbsd/signatures.hpp"

namespace fbsd::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view to_string(DatasetKind task) { return task == DatasetKind::Fbs ? "fbs" : "msa"; }

DatasetKind parse_task(std::string_view text) {
    if (text == "fbs") return DatasetKind::Fbs;
    if (text == "msa") return DatasetKind::Msa;
    throw Error(ErrorKind::Validation, "unknown task '" + std::string(text) + "'");
}

namespace {

std::string layer_file(const std::string& dir, Layer layer, const char* what) {
    return (fs::path(dir) / (std::string(to_string(layer)) + "." + what + ".json")).string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Trace without_labels(const Trace& t) {
    Trace c = t;
    c.scenario = Label::benign();
    for (auto& p : c.packets) p.label = Label::benign();
    return c;
}

}  // namespace

std::vector<Layer> Models::layers() const {
    std::vector<Layer> out;
    for (Layer l : kLayers)
        if (task == DatasetKind::Fbs ? fbs.count(l) != 0 : msa.count(l) != 0) out.push_back(l);
    return out;
}

void Models::save(const std::string& dir) const {
    fs::create_directories(dir);
    ordered_json j;
    j["format_version"] = 1;
    j["task"] = to_string(task);
    auto ls = ordered_json::array();
    for (Layer l : layers()) ls.push_back(to_string(l));
    j["layers"] = std::move(ls);
    if (task == DatasetKind::Fbs) {
        auto tr = ordered_json::array();
        for (const auto& [l, m] : fbs)
            if (m.trace) tr.push_back(to_string(l));
        j["trace_heads"] = std::move(tr);
    }
    std::ofstream out(fs::path(dir) / "models.json");
    if (!out) throw Error(ErrorKind::Io, "cannot write models.json in " + dir);
    out << j.dump(2) << '\n';
    for (const auto& [l, m] : fbs) {
        m.codebook.save(layer_file(dir, l, "codebook"));
        m.packet.save(layer_file(dir, l, "packet"));
        if (m.trace) m.trace->save(layer_file(dir, l, "trace"));
    }
    for (const auto& [l, m] : msa) {
        m.sage.save(layer_file(dir, l, "sage"));
        m.bank.save(layer_file(dir, l, "bank"));
    }
}

Models Models::load(const std::string& dir) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_file((fs::path(dir) / "models.json").string()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("models.json: ") + e.what());
    }
    if (j.value("format_version", 0) != 1) throw Error(ErrorKind::SchemaMismatch, "models.json format_version");
    Models m;
    m.task = parse_task(j.at("task").get<std::string>());
    std::vector<std::string> heads;
    if (j.contains("trace_heads")) heads = j["trace_heads"].get<std::vector<std::string>>();
    for (const auto& name : j.at("layers")) {
        Layer l = parse_layer(name.get<std::string>());
        if (m.task == DatasetKind::Fbs) {
            FbsLayerModels f;
            f.codebook = feat::Codebook::load(layer_file(dir, l, "codebook"));
            f.packet = fbs::PacketModel::load(layer_file(dir, l, "packet"));
            if (std::find(heads.begin(), heads.end(), name.get<std::string>()) != heads.end())
                f.trace = fbs::TraceModel::load(layer_file(dir, l, "trace"));
            m.fbs[l] = std::move(f);
        } else {
            m.msa[l] = {msa::SageModel::load(layer_file(dir, l, "sage")),
                        msa::AttackPathBank::load(layer_file(dir, l, "bank"))};
        }
    }
    return m;
}

std::vector<Packet> unlabeled_layer(const Trace& t, Layer layer) {
    auto ps = split_layer(t, layer);
    for (auto& p : ps) p.label = Label::benign();
    return ps;
}

FbsPacketTraining train_fbs_packet(std::span<const Trace> train, Layer layer, const fbs::PacketConfig& config) {
    auto [m, cb] = feat::encode(train, layer, DatasetKind::Fbs);
    auto res = fbs::train_packet_model(m, cb, config);
    FbsPacketTraining out;
    out.models.codebook = std::move(cb);
    out.models.packet = std::move(res.model);
    out.loss_history = std::move(res.loss_history);
    return out;
}

fbs::TraceModel train_fbs_trace(const FbsLayerModels& fm, std::span<const Trace> train) {
    const Layer layer = fm.packet.layer;
    auto [m, cb] = feat::encode(train, layer, DatasetKind::Fbs, &fm.codebook);
    std::vector<fbs::TraceFeatures> xs;
    std::vector<int> ys;
    for (std::size_t t = 0; t < m.traces.size(); ++t) {
        auto packets = split_layer(train[t], layer);
        if (packets.empty()) continue;
        auto probs = fbs::predict_packets(fm.packet, m, t);
        xs.push_back(fbs::trace_features(probs, packets));
        ys.push_back(label_code(train[t].scenario, DatasetKind::Fbs));
    }
    return fbs::train_trace_model(layer, xs, ys);
}

msa::MsaTraining train_msa_layer(std::span<const Trace> train, Layer layer, const msa::SageConfig& config) {
    std::vector<msa::FlowGraph> graphs;
    for (const auto& t : train) {
        auto ps = split_layer(t, layer);
        if (!ps.empty()) graphs.push_back(msa::build_graph(ps));
    }
    return msa::train_msa(layer, graphs, config, msa::all_msa_classes());
}

std::optional<FbsLayerResult> infer_fbs(const FbsLayerModels& fm, Layer layer, const Trace& t) {
    auto packets = unlabeled_layer(t, layer);
    if (packets.empty()) return std::nullopt;
    const Trace clean = without_labels(t);
    auto [m, cb] = feat::encode(std::span<const Trace>(&clean, 1), layer, DatasetKind::Fbs, &fm.codebook);
    FbsLayerResult r;
    r.per_packet = fbs::predict_packets(fm.packet, m, 0);
    if (fm.trace) {
        r.prediction = fbs::predict_trace(*fm.trace, fbs::trace_features(r.per_packet, packets));
    } else {
        const double mx = *std::max_element(r.per_packet.begin(), r.per_packet.end());
        r.prediction = {mx >= 0.5 ? Label::fbs() : Label::benign(), mx >= 0.5 ? mx : 1.0 - mx, layer};
    }
    return r;
}

std::optional<msa::NearestAttack> infer_msa(const MsaLayerModels& mm, Layer layer, const Trace& t, double tau) {
    auto packets = unlabeled_layer(t, layer);
    if (packets.empty()) return std::nullopt;
    return msa::nearest_attack(mm.sage, msa::build_graph(packets), mm.bank, tau);
}

Verdict detect(const Models& models, const Trace& t, const DetectOptions& options) {
    Verdict v;
    v.trace_id = t.trace_id;
    v.task = models.task;
    for (Layer l : models.layers()) {
        if (models.task == DatasetKind::Fbs) {
            if (auto r = infer_fbs(models.fbs.at(l), l, t))
                v.layers[l] = {r->prediction, std::move(r->per_packet), std::nullopt};
        } else {
            if (auto r = infer_msa(models.msa.at(l), l, t, options.tau)) v.layers[l] = {r->verdict, {}, *r};
        }
    }
    if (v.layers.empty()) {
        v.label = Label::benign();
        v.confidence = 1.0;
        v.source = options.layer;
        return v;
    }
    if (options.fuse && v.layers.size() == 2) {
        auto f = fusion::fuse(v.layers.at(Layer::Nas).prediction, v.layers.at(Layer::Rrc).prediction);
        v.fused = true;
        v.label = f.label;
        v.source = f.winner;
        v.confidence = v.layers.at(f.winner).prediction.confidence;
        v.fusion = f;
        return v;
    }
    Layer pick = v.layers.count(options.layer) ? options.layer : v.layers.begin()->first;
    v.label = v.layers.at(pick).prediction.label;
    v.confidence = v.layers.at(pick).prediction.confidence;
    v.source = pick;
    return v;
}

std::string Verdict::to_json() const {
    ordered_json j;
    j["trace_id"] = trace_id;
    j["task"] = to_string(task);
    j["label"] = fbsd::to_string(label);
    j["confidence"] = confidence;
    j["source"] = fbsd::to_string(source);
    ordered_json prov;
    prov["fused"] = fused;
    if (fusion) {
        prov["winner"] = fbsd::to_string(fusion->winner);
        prov["agree"] = fusion->nas.label == fusion->rrc.label;
        prov["w_nas"] = fusion->w_nas;
        prov["w_rrc"] = fusion->w_rrc;
    }
    j["fusion"] = std::move(prov);
    ordered_json ls = ordered_json::object();
    for (const auto& [l, lv] : layers) {
        ordered_json e;
        e["trace_id"] = trace_id;
        e["layer"] = fbsd::to_string(l);
        e["label"] = fbsd::to_string(lv.prediction.label);
        e["confidence"] = lv.prediction.confidence;
        if (task == DatasetKind::Fbs) e["per_packet"] = lv.per_packet;
        if (lv.msa) {
            e["overlap"] = lv.msa->overlap;
            e["overlap_attack"] = lv.msa->overlap_attack;
            e["variant"] = lv.msa->variant;
        }
        ls[std::string(fbsd::to_string(l))] = std::move(e);
    }
    j["layers"] = std::move(ls);
    return j.dump();
}

EvalResult evaluate(const Models& models, std::span<const Trace> traces, const DetectOptions& options, int workers) {
    EvalResult r;
    r.verdicts.resize(traces.size());
    workers = std::max(1, workers);
    auto run = [&](int w) {
        for (std::size_t i = static_cast<std::size_t>(w); i < traces.size(); i += static_cast<std::size_t>(workers))
            r.verdicts[i] = detect(models, traces[i], options);
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }

    const DatasetKind task = models.task;
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        truth.push_back(label_code(traces[i].scenario, task));
        pred.push_back(label_code(r.verdicts[i].label, task));
    }
    r.trace_metrics = compute_metrics(pred, truth, task);

    for (Layer l : models.layers()) {
        std::vector<int> lt, lp, pt, pp;
        std::vector<msa::FlowGraph> graphs;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            auto it = r.verdicts[i].layers.find(l);
            if (it == r.verdicts[i].layers.end()) continue;
            lt.push_back(truth[i]);
            lp.push_back(label_code(it->second.prediction.label, task));
            if (task == DatasetKind::Fbs) {
                auto ps = split_layer(traces[i], l);
                for (std::size_t k = 0; k < ps.size(); ++k) {
                    pt.push_back(label_code(ps[k].label, task));
                    pp.push_back(it->second.per_packet[k] >= 0.5 ? 1 : 0);
                }
            } else {
                graphs.push_back(msa::build_graph(split_layer(traces[i], l)));
            }
        }
        r.layer_metrics[l] = compute_metrics(lp, lt, task);
        if (task == DatasetKind::Fbs)
            r.packet_metrics[l] = compute_metrics(pp, pt, task);
        else
            r.edge_scores[l] = msa::edge_accuracy(models.msa.at(l).sage, graphs);
    }
    return r;
}

std::string EvalResult::report_json() const {
    ordered_json j;
    j["format_version"] = 1;
    j["traces"] = verdicts.size();
    j["trace"] = ordered_json::parse(trace_metrics.to_json());
    ordered_json ls = ordered_json::object();
    for (const auto& [l, m] : layer_metrics) {
        ordered_json e;
        e["trace"] = ordered_json::parse(m.to_json());
        if (auto it = packet_metrics.find(l); it != packet_metrics.end())
            e["packet"] = ordered_json::parse(it->second.to_json());
        if (auto it = edge_scores.find(l); it != edge_scores.end()) {
            ordered_json es;
            es["macro_accuracy"] = it->second.macro_accuracy;
            ordered_json pc = ordered_json::object();
            for (const auto& [c, ct] : it->second.per_class)
                pc[fbsd::to_string(decode_label(c, DatasetKind::Msa))] = {{"correct", ct.first}, {"total", ct.second}};
            es["per_class"] = std::move(pc);
            e["edge"] = std::move(es);
        }
        ls[std::string(fbsd::to_string(l))] = std::move(e);
    }
    j["layers"] = std::move(ls);
    return j.dump(2);
}

std::vector<sim::ScenarioSpec> fbs_desk_specs(std::uint64_t seed) {
    std::vector<sim::ScenarioSpec> specs;
    specs.push_back({Label::benign(), 0, true, 100, seed, 0.0});
    const int counts[] = {34, 33, 33};
    for (int level = 0; level < 3; ++level) specs.push_back({Label::fbs(), level, true, counts[level], seed, 0.0});
    return specs;
}

std::vector<sim::ScenarioSpec> msa_desk_specs(std::uint64_t seed, int per_class, double noise) {
    std::vector<sim::ScenarioSpec> specs;
    specs.push_back({Label::benign(), 0, false, per_class, seed, noise});
    for (int a = 1; a <= kNumAttacks; ++a) specs.push_back({Label::msa(a), 3, false, per_class, seed, noise});
    return specs;
}

std::vector<int> signature_attacks() { return sig::builtin_signatures().attacks(); }

namespace {

using nk::ParamSet;
using nk::Tensor;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor lstm_row(const Tensor& t) { return Tensor::vector(t.values()); }

}  // namespace

std::vector<GradCheckRow> gradcheck_suite(std::uint64_t seed) {
    constexpr double kLayerTol = 1e-6;
    constexpr double kGraphTol = 1e-5;
    constexpr double kCompositeTol = 1e-4;
    std::vector<GradCheckRow> rows;
    Rng rng(seed);

    {
        ParamSet P;
        P.add("W", random_tensor({3, 4}, rng));
        P.add("b", random_tensor({3}, rng));
        P.add("x", random_tensor({4}, rng));
        const Tensor r = random_tensor({3}, rng);
        auto fn = [&](ParamSet& p) {
            Tensor y = nk::dense(p["W"].value, p["b"].value, p["x"].value);
            Tensor dx = nk::dense_backward(p["W"].value, p["x"].value, r, p["W"].grad, p["b"].grad);
            for (std::size_t i = 0; i < dx.size(); ++i) p["x"].grad[i] += dx[i];
            return dot(y, r);
        };
        rows.push_back({"dense", nk::grad_check(fn, P), kLayerTol});
    }

    for (auto act : {nk::Activation::Tanh, nk::Activation::Sigmoid}) {
        const std::size_t d = 3, h = 4;
        ParamSet P;
        P.add("Wx", random_tensor({4 * h, d}, rng));
        P.add("Wh", random_tensor({4 * h, h}, rng));
        P.add("b", random_tensor({4 * h}, rng));
        P.add("x", random_tensor({d}, rng));
        P.add("h", random_tensor({h}, rng));
        P.add("c", random_tensor({h}, rng));
        const Tensor rh = random_tensor({h}, rng), rc = random_tensor({h}, rng);
        auto fn = [&](ParamSet& p) {
            auto cache = nk::lstm_cell(p["x"].value, p["h"].value, p["c"].value, p["Wx"].value, p["Wh"].value,
                                       p["b"].value, act);
            auto g = nk::lstm_cell_backward(cache, rh, rc, p["Wx"].value, p["Wh"].value, p["Wx"].grad, p["Wh"].grad,
                                            p["b"].grad, act);
            for (std::size_t i = 0; i < d; ++i) p["x"].grad[i] += g.dx[i];
            for (std::size_t i = 0; i < h; ++i) {
                p["h"].grad[i] += g.dh_prev[i];
                p["c"].grad[i] += g.dc_prev[i];
            }
            return dot(lstm_row(cache.h), rh) + dot(lstm_row(cache.c), rc);
        };
        rows.push_back({act == nk::Activation::Tanh ? "lstm_cell_tanh" : "lstm_cell_sigmoid", nk::grad_check(fn, P),
                        kLayerTol});
    }

    {
        const std::size_t T = 5, h = 4;
        ParamSet P;
        P.add("H", random_tensor({T, h}, rng));
        P.add("q", random_tensor({h}, rng));
        const Tensor r = random_tensor({h}, rng);
        auto fn = [&](ParamSet& p) {
            auto a = nk::attention(p["H"].value, p["q"].value);
            Tensor dq = nk::attention_backward(p["H"].value, p["q"].value, a, r, p["H"].grad);
            for (std::size_t i = 0; i < h; ++i) p["q"].grad[i] += dq[i];
            return dot(a.context, r);
        };
        rows.push_back({"attention", nk::grad_check(fn, P), kLayerTol});
    }

    {
        const std::size_t h = 4;
        ParamSet P;
        P.add("Wc", random_tensor({h, 2 * h}, rng));
        P.add("bc", random_tensor({h}, rng));
        P.add("c", random_tensor({h}, rng));
        P.add("h", random_tensor({h}, rng));
        const Tensor r = random_tensor({h}, rng);
        auto fn = [&](ParamSet& p) {
            Tensor out = nk::attended_output(p["c"].value, p["h"].value, p["Wc"].value, p["bc"].value);
            auto [dc, dh] = nk::attended_output_backward(p["c"].value, p["h"].value, p["Wc"].value, out, r,
                                                         p["Wc"].grad, p["bc"].grad);
            for (std::size_t i = 0; i < h; ++i) {
                p["c"].grad[i] += dc[i];
                p["h"].grad[i] += dh[i];
            }
            return dot(out, r);
        };
        rows.push_back({"attended_output", nk::grad_check(fn, P), kLayerTol});
    }

    {
        const auto kinds = message_kinds(Layer::Nas);
        std::vector<Packet> ps;
        const std::size_t n = 6 + rng.index(6);
        for (std::size_t i = 0; i < n; ++i) {
            Packet p;
            p.trace_id = "g";
            p.seq = static_cast<std::uint32_t>(i);
            p.layer = Layer::Nas;
            p.kind = std::string(kinds[rng.index(kinds.size())]);
            p.label = rng.chance(0.5) ? Label::benign() : Label::msa(static_cast<int>(1 + rng.index(kNumAttacks)));
            ps.push_back(std::move(p));
        }
        auto g = msa::build_graph(ps);
        std::vector<int> targets;
        for (const auto& e : g.edges) targets.push_back(e.label());
        ParamSet P = msa::init_sage_params(Layer::Nas, 4, rng.next());
        auto fn = [&](ParamSet& p) { return msa::sage_forward(p, g, &targets, true).loss; };
        rows.push_back({"sage_edge_head", nk::grad_check(fn, P), kGraphTol});
    }

    {
        const std::size_t d = 4, h = 3, T = 5;
        ParamSet P = fbs::init_packet_params(d, h, rng.next());
        Tensor X = random_tensor({T, d}, rng);
        std::vector<double> targets(T);
        for (auto& t : targets) t = rng.chance(0.5) ? 1.0 : 0.0;
        fbs::LstmState init{random_tensor({h}, rng, 0.5), random_tensor({h}, rng, 0.5)};
        auto fn = [&](ParamSet& p) { return fbs::run_window(p, X, targets, init, 3, true).loss; };
        rows.push_back({"packet_model_window", nk::grad_check(fn, P), kCompositeTol});
    }
    return rows;
}

}  // namespace fbsd::pipeline
