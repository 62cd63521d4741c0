// SPDX-License-Identifier: Apache-2.0
#include "fbsd/fbs_detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fbsd/rng.hpp"
#include "fbsd/schema.hpp"

namespace fbsd::fbs {

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

void expect_type(const nlohmann::json& j, const char* type) {
    if (j.value("model_type", std::string()) != type)
        throw Error(ErrorKind::Parse, std::string("expected model_type ") + type);
}

Tensor row_of(const Tensor& X, std::size_t t) {
    const std::size_t d = X.cols();
    return Tensor({d}, std::vector<double>(X.data() + t * d, X.data() + (t + 1) * d));
}

void clip_gradients(nk::ParamSet& params, double max_norm) {
    double sq = 0;
    for (const auto& [name, p] : params)
        for (double g : p.grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double k = max_norm / norm;
    for (auto& [name, p] : params)
        for (double& g : p.grad.values()) g *= k;
}

}  // namespace

PacketConfig default_packet_config(Layer) { return {}; }

LstmState zero_state(std::size_t hidden) { return {Tensor({hidden}), Tensor({hidden})}; }

nk::ParamSet init_packet_params(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    Rng rng(seed);
    nk::ParamSet p;
    for (const char* br : {"a", "b"}) {
        std::string s(br);
        p.add(s + ".Wx", nk::init_uniform({4 * hidden, input_dim}, hidden, rng));
        p.add(s + ".Wh", nk::init_uniform({4 * hidden, hidden}, hidden, rng));
        Tensor b({4 * hidden});
        for (std::size_t j = 0; j < hidden; ++j) b[hidden + j] = 1.0;  // forget gate bias
        p.add(s + ".b", std::move(b));
    }
    p.add("att.Wc", nk::init_uniform({hidden, 2 * hidden}, 2 * hidden, rng));
    p.add("att.bc", Tensor({hidden}));
    p.add("head.W", nk::init_uniform({1, 2 * hidden}, 2 * hidden, rng));
    p.add("head.b", Tensor({1}));
    return p;
}

WindowPass run_window(nk::ParamSet& P, const Tensor& X, const std::vector<double>& targets, const LstmState& init,
                      std::size_t carry_steps, bool backward) {
    const std::size_t T = X.rows();
    const std::size_t hidden = P["a.Wh"].value.cols();
    nk::check_shape(T >= 1, "run_window: empty window");
    nk::check_shape(targets.empty() || targets.size() == T, "run_window: target length differs from window");
    nk::check_shape(init.h.size() == hidden && init.c.size() == hidden, "run_window: state size");
    nk::check_shape(X.cols() == P["a.Wx"].value.cols(), "run_window: input width");

    WindowPass out;
    std::vector<nk::LstmCache> ka, kb;
    ka.reserve(T);
    kb.reserve(T);
    Tensor h = init.h, c = init.c;
    out.carry = init;
    for (std::size_t t = 0; t < T; ++t) {
        ka.push_back(nk::lstm_cell(row_of(X, t), h, c, P["a.Wx"].value, P["a.Wh"].value, P["a.b"].value,
                                   nk::Activation::Sigmoid));
        h = ka.back().h;
        c = ka.back().c;
        if (t + 1 == carry_steps) out.carry = {h, c};
    }
    Tensor hb({hidden}), cb({hidden});
    Tensor H({T, hidden});
    for (std::size_t t = 0; t < T; ++t) {
        kb.push_back(nk::lstm_cell(row_of(X, t), hb, cb, P["b.Wx"].value, P["b.Wh"].value, P["b.b"].value,
                                   nk::Activation::Tanh));
        hb = kb.back().h;
        cb = kb.back().c;
        for (std::size_t j = 0; j < hidden; ++j) H.at(t, j) = hb[j];
    }
    std::vector<nk::Attention> att;
    std::vector<Tensor> hp, feat;
    Tensor y({T});
    for (std::size_t t = 0; t < T; ++t) {
        att.push_back(nk::attention(H, kb[t].h));
        hp.push_back(nk::attended_output(att[t].context, kb[t].h, P["att.Wc"].value, P["att.bc"].value));
        feat.push_back(nk::concat(ka[t].h, hp[t]));
        y[t] = nk::sigmoid(nk::dense(P["head.W"].value, P["head.b"].value, feat[t])[0]);
    }
    out.probs = y.values();
    if (targets.empty()) return out;

    Tensor target({T}, targets);
    nk::Loss loss = nk::mse_loss(y, target, std::vector<int>(T, 1));
    loss.value *= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) loss.grad[t] *= static_cast<double>(T);
    out.loss = loss.value;
    if (!backward) return out;

    std::vector<Tensor> dha(T, Tensor({hidden}));
    Tensor dH({T, hidden});
    for (std::size_t t = 0; t < T; ++t) {
        Tensor dz({1}, {loss.grad[t] * y[t] * (1.0 - y[t])});
        Tensor df = nk::dense_backward(P["head.W"].value, feat[t], dz, P["head.W"].grad, P["head.b"].grad);
        auto [dhat, dhp] = nk::concat_backward(df, hidden);
        dha[t] = std::move(dhat);
        auto [dctx, dq_direct] = nk::attended_output_backward(att[t].context, kb[t].h, P["att.Wc"].value, hp[t], dhp,
                                                              P["att.Wc"].grad, P["att.bc"].grad);
        Tensor dq = nk::attention_backward(H, kb[t].h, att[t], dctx, dH);
        for (std::size_t j = 0; j < hidden; ++j) dH.at(t, j) += dq[j] + dq_direct[j];
    }
    Tensor dh_next({hidden}), dc_next({hidden});
    for (std::size_t t = T; t-- > 0;) {
        Tensor dh({hidden});
        for (std::size_t j = 0; j < hidden; ++j) dh[j] = dH.at(t, j) + dh_next[j];
        auto g = nk::lstm_cell_backward(kb[t], dh, dc_next, P["b.Wx"].value, P["b.Wh"].value, P["b.Wx"].grad,
                                        P["b.Wh"].grad, P["b.b"].grad, nk::Activation::Tanh, false);
        dh_next = std::move(g.dh_prev);
        dc_next = std::move(g.dc_prev);
    }
    dh_next.fill(0.0);
    dc_next.fill(0.0);
    for (std::size_t t = T; t-- > 0;) {
        Tensor dh({hidden});
        for (std::size_t j = 0; j < hidden; ++j) dh[j] = dha[t][j] + dh_next[j];
        auto g = nk::lstm_cell_backward(ka[t], dh, dc_next, P["a.Wx"].value, P["a.Wh"].value, P["a.Wx"].grad,
                                        P["a.Wh"].grad, P["a.b"].grad, nk::Activation::Sigmoid, false);
        dh_next = std::move(g.dh_prev);
        dc_next = std::move(g.dc_prev);
    }
    return out;
}

std::size_t PacketModel::len_seq() const {
    return config.len_seq ? config.len_seq : feat::default_len_seq(layer);
}

std::string PacketModel::to_json() const {
    nlohmann::ordered_json j;
    j["model_type"] = "fbs_packet_v1";
    j["layer"] = to_string(layer);
    j["trained"] = trained;
    j["config"] = {{"hidden", config.hidden}, {"len_seq", config.len_seq}, {"stride", config.stride},
                   {"epochs", config.epochs}, {"lr", config.lr},           {"clip_norm", config.clip_norm},
                   {"seed", config.seed}};
    j["input_scale"] = input_scale;
    j["params"] = nlohmann::ordered_json::parse(params.to_json());
    return j.dump();
}

PacketModel PacketModel::from_json(const std::string& text) {
    auto j = parse_json(text);
    expect_type(j, "fbs_packet_v1");
    PacketModel m;
    try {
        m.layer = parse_layer(j.at("layer").get<std::string>());
        m.trained = j.at("trained").get<bool>();
        const auto& c = j.at("config");
        m.config.hidden = c.at("hidden").get<std::size_t>();
        m.config.len_seq = c.at("len_seq").get<std::size_t>();
        m.config.stride = c.at("stride").get<std::size_t>();
        m.config.epochs = c.at("epochs").get<int>();
        m.config.lr = c.at("lr").get<double>();
        m.config.clip_norm = c.at("clip_norm").get<double>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.input_scale = j.at("input_scale").get<std::vector<double>>();
        m.params = nk::ParamSet::from_json(j.at("params").dump());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    if (m.input_scale.size() != field_schema(m.layer).size())
        throw Error(ErrorKind::SchemaMismatch, "packet model input width differs from the layer schema");
    return m;
}

void PacketModel::save(const std::string& path) const { write_file(path, to_json()); }
PacketModel PacketModel::load(const std::string& path) { return from_json(read_file(path)); }

Tensor window_inputs(const PacketModel& model, const feat::FeatureMatrix& m, std::size_t begin, std::size_t n) {
    if (m.width != model.input_scale.size())
        throw Error(ErrorKind::ShapeMismatch, "feature width differs from the packet model input");
    Tensor X({n, m.width});
    for (std::size_t r = 0; r < n; ++r) {
        const int* x = m.row(begin + r);
        for (std::size_t c = 0; c < m.width; ++c) X.at(r, c) = x[c] * model.input_scale[c];
    }
    return X;
}

PacketTraining train_packet_model(const feat::FeatureMatrix& train, const feat::Codebook& codebook,
                                  const PacketConfig& config) {
    if (train.rows() == 0) throw Error(ErrorKind::EmptyTrainingSet, "no packets to train on");
    if (codebook.width() != train.width || codebook.layer() != train.layer)
        throw Error(ErrorKind::SchemaMismatch, "codebook does not match feature matrix");
    if (config.epochs <= 0 || config.hidden == 0) throw Error(ErrorKind::Validation, "epochs and hidden must be positive");
    PacketTraining out;
    PacketModel& model = out.model;
    model.layer = train.layer;
    model.config = config;
    model.input_scale.resize(train.width);
    for (std::size_t c = 0; c < train.width; ++c) model.input_scale[c] = 1.0 / codebook.cardinality(c);
    model.params = init_packet_params(train.width, config.hidden, config.seed);

    const std::size_t L = model.len_seq();
    const std::size_t stride = config.stride ? config.stride : L;
    std::vector<std::size_t> order;
    for (std::size_t t = 0; t < train.traces.size(); ++t)
        if (train.traces[t].end > train.traces[t].begin) order.push_back(t);
    if (order.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no packets to train on");

    Rng rng(mix_seed(config.seed, 0x7a41));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0;
        std::size_t windows = 0;
        for (std::size_t t : order) {
            const auto& tr = train.traces[t];
            const std::size_t len = tr.end - tr.begin;
            LstmState state = zero_state(config.hidden);
            for (std::size_t off : feat::window_offsets(len, L, stride)) {
                const std::size_t valid = std::min(L, len - off);
                Tensor X = window_inputs(model, train, tr.begin + off, valid);
                std::vector<double> y(valid);
                for (std::size_t r = 0; r < valid; ++r) y[r] = train.labels[tr.begin + off + r] != 0 ? 1.0 : 0.0;
                auto pass = run_window(model.params, X, y, state, std::min(stride, valid), true);
                if (config.clip_norm > 0) clip_gradients(model.params, config.clip_norm);
                nk::sgd_step(model.params, config.lr);
                state = std::move(pass.carry);
                total += pass.loss;
                ++windows;
            }
        }
        out.loss_history.push_back(total / static_cast<double>(windows));
    }
    model.trained = true;
    return out;
}

std::vector<double> predict_packets(const PacketModel& model, const feat::FeatureMatrix& m, std::size_t trace,
                                    std::size_t stride, bool carry_state) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "packet model is not trained");
    if (trace >= m.traces.size()) throw Error(ErrorKind::ShapeMismatch, "trace index out of range");
    const auto& tr = m.traces[trace];
    const std::size_t len = tr.end - tr.begin;
    const std::size_t L = model.len_seq();
    if (stride == 0) stride = L;
    std::vector<double> sum(len, 0.0), cnt(len, 0.0);
    nk::ParamSet params = model.params;
    LstmState state = zero_state(model.config.hidden);
    for (std::size_t off : feat::window_offsets(len, L, stride)) {
        const std::size_t valid = std::min(L, len - off);
        Tensor X = window_inputs(model, m, tr.begin + off, valid);
        LstmState init = carry_state ? state : zero_state(model.config.hidden);
        auto pass = run_window(params, X, {}, init, std::min(stride, valid), false);
        state = std::move(pass.carry);
        for (std::size_t r = 0; r < valid; ++r) {
            sum[off + r] += pass.probs[r];
            cnt[off + r] += 1.0;
        }
    }
    for (std::size_t i = 0; i < len; ++i) sum[i] /= cnt[i];
    return sum;
}

std::string counted_kind(const Packet& p) {
    if (p.layer == Layer::Nas) return p.kind;
    if (p.kind == "rrcConnectionReject" || p.kind == "rrcConnectionReestablishmentReject") return p.kind;
    auto it = p.fields.find("lte_rrc_dedicatedInfoNAS");
    if (it == p.fields.end()) return {};
    const auto* s = std::get_if<std::string>(&it->second);
    if (!s) return {};
    return s->substr(0, s->find(':'));
}

TraceFeatures trace_features(std::span<const double> probs, std::span<const Packet> packets) {
    if (probs.size() != packets.size())
        throw Error(ErrorKind::LengthMismatch, "probabilities not aligned to packets");
    TraceFeatures f{};
    const double n = static_cast<double>(packets.size());
    if (packets.empty()) return f;
    std::size_t above = 0, run = 0, best_run = 0;
    double mx = 0, sum = 0;
    for (double p : probs) {
        if (p > 0.5) {
            ++above;
            best_run = std::max(best_run, ++run);
        } else {
            run = 0;
        }
        mx = std::max(mx, p);
        sum += p;
    }
    std::size_t tau = 0, ident = 0, rej = 0;
    for (const auto& p : packets) {
        std::string k = counted_kind(p);
        if (k.rfind("TrackingAreaUpdate", 0) == 0) ++tau;
        if (k.rfind("Identity", 0) == 0) ++ident;
        if (k.find("Reject") != std::string::npos) ++rej;
    }
    f[0] = above / n;
    f[1] = mx;
    f[2] = sum / n;
    f[3] = best_run / n;
    f[4] = tau / n;
    f[5] = ident / n;
    f[6] = rej / n;
    f[7] = std::log1p(n) / std::log1p(512.0);
    return f;
}

double TraceModel::probability(const TraceFeatures& x) const {
    double z = b;
    for (std::size_t k = 0; k < kTraceFeatures; ++k) z += w[k] * x[k];
    return nk::sigmoid(z);
}

std::string TraceModel::to_json() const {
    nlohmann::ordered_json j;
    j["model_type"] = "fbs_trace_v1";
    j["layer"] = to_string(layer);
    j["trained"] = trained;
    j["weights"] = std::vector<double>(w.begin(), w.end());
    j["bias"] = b;
    return j.dump();
}

TraceModel TraceModel::from_json(const std::string& text) {
    auto j = parse_json(text);
    expect_type(j, "fbs_trace_v1");
    TraceModel m;
    try {
        m.layer = parse_layer(j.at("layer").get<std::string>());
        m.trained = j.at("trained").get<bool>();
        auto ws = j.at("weights").get<std::vector<double>>();
        if (ws.size() != kTraceFeatures) throw Error(ErrorKind::Parse, "trace model needs 8 weights");
        std::copy(ws.begin(), ws.end(), m.w.begin());
        m.b = j.at("bias").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return m;
}

void TraceModel::save(const std::string& path) const { write_file(path, to_json()); }
TraceModel TraceModel::load(const std::string& path) { return from_json(read_file(path)); }

TraceModel train_trace_model(Layer layer, std::span<const TraceFeatures> xs, std::span<const int> ys,
                             const TraceTrainConfig& config) {
    if (xs.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no traces to train on");
    if (xs.size() != ys.size()) throw Error(ErrorKind::LengthMismatch, "features and labels differ in length");
    TraceModel m;
    m.layer = layer;
    const double n = static_cast<double>(xs.size());
    for (int it = 0; it < config.iterations; ++it) {
        std::array<double, kTraceFeatures> gw{};
        double gb = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double err = m.probability(xs[i]) - (ys[i] != 0 ? 1.0 : 0.0);
            for (std::size_t k = 0; k < kTraceFeatures; ++k) gw[k] += err * xs[i][k];
            gb += err;
        }
        for (std::size_t k = 0; k < kTraceFeatures; ++k) m.w[k] -= config.lr * (gw[k] / n + config.l2 * m.w[k]);
        m.b -= config.lr * gb / n;
    }
    m.trained = true;
    return m;
}

Prediction predict_trace(const TraceModel& model, const TraceFeatures& x) {
    if (!model.trained) throw Error(ErrorKind::UntrainedModel, "trace model is not trained");
    double p = model.probability(x);
    Prediction out;
    out.layer = model.layer;
    out.label = p >= 0.5 ? Label::fbs() : Label::benign();
    out.confidence = p >= 0.5 ? p : 1.0 - p;
    return out;
}

}  // namespace fbsd::fbs
