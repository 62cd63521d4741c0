// SPDX-License-Identifier: Apache-2.0
#include "fbsd/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "fbsd/rng.hpp"

namespace fbsd::nk {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    values_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape(values_.size() == product(shape_), "value count does not match shape");
}

Tensor Tensor::vector(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void check_shape(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

Param& ParamSet::add(const std::string& name, Tensor value) {
    Param p;
    p.grad = Tensor(value.shape());
    p.value = std::move(value);
    auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
    return it->second;
}

Param& ParamSet::operator[](const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::ShapeMismatch, "missing parameter '" + name + "'");
    return it->second;
}

const Param& ParamSet::operator[](const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::ShapeMismatch, "missing parameter '" + name + "'");
    return it->second;
}

void ParamSet::zero_grad() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
}

std::string ParamSet::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    nlohmann::ordered_json ts = nlohmann::ordered_json::object();
    for (const auto& [name, p] : params_) {
        nlohmann::ordered_json t;
        t["shape"] = p.value.shape();
        t["values"] = p.value.values();
        ts[name] = std::move(t);
    }
    j["tensors"] = std::move(ts);
    return j.dump();
}

ParamSet ParamSet::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    ParamSet ps;
    try {
        for (const auto& [name, t] : j.at("tensors").items())
            ps.add(name, Tensor(t.at("shape").get<std::vector<std::size_t>>(), t.at("values").get<std::vector<double>>()));
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Parse, e.what());
    }
    return ps;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.params_.size() != b.params_.size()) return false;
    for (const auto& [name, p] : a.params_) {
        auto it = b.params_.find(name);
        if (it == b.params_.end() || !(it->second.value == p.value)) return false;
    }
    return true;
}

Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor dense(const Tensor& W, const Tensor& b, const Tensor& x) {
    const std::size_t out = W.rows(), in = W.cols();
    check_shape(x.size() == in && b.size() == out, "dense: shape mismatch");
    Tensor y({out});
    for (std::size_t r = 0; r < out; ++r) {
        const double* w = W.data() + r * in;
        double s = b[r];
        for (std::size_t c = 0; c < in; ++c) s += w[c] * x[c];
        y[r] = s;
    }
    return y;
}

Tensor dense_backward(const Tensor& W, const Tensor& x, const Tensor& dy, Tensor& dW, Tensor& db) {
    const std::size_t out = W.rows(), in = W.cols();
    check_shape(dy.size() == out && x.size() == in, "dense_backward: shape mismatch");
    Tensor dx({in});
    for (std::size_t r = 0; r < out; ++r) {
        const double g = dy[r];
        db[r] += g;
        if (g == 0.0) continue;
        const double* w = W.data() + r * in;
        double* dw = dW.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) {
            dw[c] += g * x[c];
            dx[c] += g * w[c];
        }
    }
    return dx;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
    return dx;
}

Tensor tanh(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? dy[i] : 0.0;
    return dx;
}

namespace {

// Applies fn to each row of a [rows x cols] tensor (a vector is one row).
template <class Fn>
Tensor rowwise(const Tensor& x, Fn fn) {
    Tensor y(x.shape());
    const std::size_t cols = x.shape().size() < 2 ? x.size() : x.cols();
    const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) fn(x.data() + r * cols, y.data() + r * cols, cols);
    return y;
}

}  // namespace

Tensor softmax(const Tensor& x) {
    return rowwise(x, [](const double* in, double* out, std::size_t n) {
        double m = *std::max_element(in, in + n);
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += (out[i] = std::exp(in[i] - m));
        for (std::size_t i = 0; i < n; ++i) out[i] /= s;
    });
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx(y.shape());
    const std::size_t cols = y.shape().size() < 2 ? y.size() : y.cols();
    for (std::size_t r = 0; r * cols < y.size(); ++r) {
        const double* s = y.data() + r * cols;
        const double* g = dy.data() + r * cols;
        double dot = 0;
        for (std::size_t i = 0; i < cols; ++i) dot += s[i] * g[i];
        for (std::size_t i = 0; i < cols; ++i) dx[r * cols + i] = s[i] * (g[i] - dot);
    }
    return dx;
}

Tensor log_softmax(const Tensor& x) {
    return rowwise(x, [](const double* in, double* out, std::size_t n) {
        double m = *std::max_element(in, in + n);
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += std::exp(in[i] - m);
        double lse = m + std::log(s);
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] - lse;
    });
}

Tensor log_softmax_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx(y.shape());
    const std::size_t cols = y.shape().size() < 2 ? y.size() : y.cols();
    for (std::size_t r = 0; r * cols < y.size(); ++r) {
        const double* ly = y.data() + r * cols;
        const double* g = dy.data() + r * cols;
        double sum = 0;
        for (std::size_t i = 0; i < cols; ++i) sum += g[i];
        for (std::size_t i = 0; i < cols; ++i) dx[r * cols + i] = g[i] - std::exp(ly[i]) * sum;
    }
    return dx;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    std::vector<double> v(a.values());
    v.insert(v.end(), b.values().begin(), b.values().end());
    return Tensor::vector(std::move(v));
}

std::pair<Tensor, Tensor> concat_backward(const Tensor& dy, std::size_t a_size) {
    check_shape(a_size <= dy.size(), "concat_backward: split beyond size");
    std::vector<double> a(dy.values().begin(), dy.values().begin() + static_cast<std::ptrdiff_t>(a_size));
    std::vector<double> b(dy.values().begin() + static_cast<std::ptrdiff_t>(a_size), dy.values().end());
    return {Tensor::vector(std::move(a)), Tensor::vector(std::move(b))};
}

namespace {

inline double act_fwd(double z, Activation act) { return act == Activation::Tanh ? std::tanh(z) : sigmoid(z); }
inline double act_grad(double y, Activation act) { return act == Activation::Tanh ? 1.0 - y * y : y * (1.0 - y); }

}  // namespace

LstmCache lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const Tensor& Wx, const Tensor& Wh,
                    const Tensor& b, Activation act) {
    const std::size_t h = h_prev.size(), d = x.size();
    check_shape(Wx.rows() == 4 * h && Wx.cols() == d, "lstm_cell: Wx shape");
    check_shape(Wh.rows() == 4 * h && Wh.cols() == h, "lstm_cell: Wh shape");
    check_shape(b.size() == 4 * h && c_prev.size() == h, "lstm_cell: bias or state shape");
    std::vector<double> z(b.values());
    for (std::size_t c = 0; c < d; ++c) {
        const double xv = x[c];
        if (xv == 0.0) continue;
        for (std::size_t r = 0; r < 4 * h; ++r) z[r] += Wx.data()[r * d + c] * xv;
    }
    for (std::size_t r = 0; r < 4 * h; ++r) {
        const double* w = Wh.data() + r * h;
        double s = 0;
        for (std::size_t c = 0; c < h; ++c) s += w[c] * h_prev[c];
        z[r] += s;
    }
    LstmCache k;
    k.x = x;
    k.h_prev = h_prev;
    k.c_prev = c_prev;
    k.i = Tensor({h});
    k.f = Tensor({h});
    k.g = Tensor({h});
    k.o = Tensor({h});
    k.c = Tensor({h});
    k.ac = Tensor({h});
    k.h = Tensor({h});
    for (std::size_t j = 0; j < h; ++j) {
        k.i[j] = sigmoid(z[j]);
        k.f[j] = sigmoid(z[h + j]);
        k.g[j] = act_fwd(z[2 * h + j], act);
        k.o[j] = sigmoid(z[3 * h + j]);
        k.c[j] = k.f[j] * c_prev[j] + k.i[j] * k.g[j];
        k.ac[j] = act_fwd(k.c[j], act);
        k.h[j] = k.o[j] * k.ac[j];
    }
    return k;
}

LstmGrads lstm_cell_backward(const LstmCache& k, const Tensor& dh, const Tensor& dc_in, const Tensor& Wx,
                             const Tensor& Wh, Tensor& dWx, Tensor& dWh, Tensor& db, Activation act,
                             bool want_dx) {
    const std::size_t h = k.h.size(), d = k.x.size();
    check_shape(dh.size() == h && dc_in.size() == h, "lstm_cell_backward: gradient shape");
    std::vector<double> dz(4 * h);
    LstmGrads g;
    g.dc_prev = Tensor({h});
    for (std::size_t j = 0; j < h; ++j) {
        double d_o = dh[j] * k.ac[j];
        double dc = dc_in[j] + dh[j] * k.o[j] * act_grad(k.ac[j], act);
        double d_f = dc * k.c_prev[j];
        double d_i = dc * k.g[j];
        double d_g = dc * k.i[j];
        g.dc_prev[j] = dc * k.f[j];
        dz[j] = d_i * k.i[j] * (1.0 - k.i[j]);
        dz[h + j] = d_f * k.f[j] * (1.0 - k.f[j]);
        dz[2 * h + j] = d_g * act_grad(k.g[j], act);
        dz[3 * h + j] = d_o * k.o[j] * (1.0 - k.o[j]);
    }
    g.dx = Tensor({d});
    g.dh_prev = Tensor({h});
    for (std::size_t r = 0; r < 4 * h; ++r) {
        const double gz = dz[r];
        db[r] += gz;
        if (gz == 0.0) continue;
        const double* wx = Wx.data() + r * d;
        double* dwx = dWx.data() + r * d;
        for (std::size_t c = 0; c < d; ++c)
            if (k.x[c] != 0.0) dwx[c] += gz * k.x[c];
        if (want_dx)
            for (std::size_t c = 0; c < d; ++c) g.dx[c] += gz * wx[c];
        const double* wh = Wh.data() + r * h;
        double* dwh = dWh.data() + r * h;
        for (std::size_t c = 0; c < h; ++c) {
            dwh[c] += gz * k.h_prev[c];
            g.dh_prev[c] += gz * wh[c];
        }
    }
    return g;
}

Attention attention(const Tensor& H, const Tensor& q) {
    const std::size_t T = H.rows(), h = H.cols();
    check_shape(T >= 1 && q.size() == h, "attention: shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    Tensor e({T});
    for (std::size_t t = 0; t < T; ++t) {
        double s = 0;
        for (std::size_t j = 0; j < h; ++j) s += q[j] * H.at(t, j);
        e[t] = s * scale;
    }
    Attention a;
    a.weights = softmax(e);
    a.context = Tensor({h});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < h; ++j) a.context[j] += a.weights[t] * H.at(t, j);
    return a;
}

Tensor attention_backward(const Tensor& H, const Tensor& q, const Attention& a, const Tensor& dc, Tensor& dH) {
    const std::size_t T = H.rows(), h = H.cols();
    check_shape(dc.size() == h && dH.rows() == T && dH.cols() == h, "attention_backward: shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    Tensor dalpha({T});
    for (std::size_t t = 0; t < T; ++t) {
        double s = 0;
        for (std::size_t j = 0; j < h; ++j) {
            s += dc[j] * H.at(t, j);
            dH.at(t, j) += a.weights[t] * dc[j];
        }
        dalpha[t] = s;
    }
    Tensor de = softmax_backward(a.weights, dalpha);
    Tensor dq({h});
    for (std::size_t t = 0; t < T; ++t) {
        const double g = de[t] * scale;
        for (std::size_t j = 0; j < h; ++j) {
            dq[j] += g * H.at(t, j);
            dH.at(t, j) += g * q[j];
        }
    }
    return dq;
}

Tensor attended_output(const Tensor& c, const Tensor& h, const Tensor& Wc, const Tensor& bc) {
    check_shape(Wc.cols() == c.size() + h.size(), "attended_output: concat size differs from Wc columns");
    return tanh(dense(Wc, bc, concat(c, h)));
}

std::pair<Tensor, Tensor> attended_output_backward(const Tensor& c, const Tensor& h, const Tensor& Wc,
                                                   const Tensor& out, const Tensor& dout, Tensor& dWc, Tensor& dbc) {
    Tensor dz = tanh_backward(out, dout);
    Tensor dx = dense_backward(Wc, concat(c, h), dz, dWc, dbc);
    return concat_backward(dx, c.size());
}

Loss mse_loss(const Tensor& pred, const Tensor& target, const std::vector<int>& mask) {
    check_shape(pred.size() == target.size() && mask.size() == pred.size(), "mse_loss: shape mismatch");
    std::size_t n = 0;
    for (int m : mask) n += m != 0;
    if (n == 0) throw Error(ErrorKind::AllMasked, "mse_loss: every position masked");
    Loss l;
    l.grad = Tensor(pred.shape());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        double d = pred[i] - target[i];
        l.value += d * d;
        l.grad[i] = 2.0 * d / static_cast<double>(n);
    }
    l.value /= static_cast<double>(n);
    return l;
}

Loss nll_loss(const Tensor& log_probs, const std::vector<int>& classes, const std::vector<int>& mask) {
    const std::size_t rows = log_probs.rows(), C = log_probs.cols();
    check_shape(classes.size() == rows && mask.size() == rows, "nll_loss: shape mismatch");
    std::size_t n = 0;
    for (int m : mask) n += m != 0;
    if (n == 0) throw Error(ErrorKind::AllMasked, "nll_loss: every row masked");
    Loss l;
    l.grad = Tensor(log_probs.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        auto cls = static_cast<std::size_t>(classes[r]);
        check_shape(cls < C, "nll_loss: class index out of range");
        l.value -= log_probs.at(r, cls);
        l.grad.at(r, cls) = -1.0 / static_cast<double>(n);
    }
    l.value /= static_cast<double>(n);
    return l;
}

void sgd_step(ParamSet& params, double lr) {
    if (!(lr > 0)) throw Error(ErrorKind::Validation, "learning rate must be positive");
    for (auto& [name, p] : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
        p.grad.fill(0.0);
    }
}

double grad_check(const std::function<double(ParamSet&)>& fn, ParamSet& params, double eps) {
    params.zero_grad();
    fn(params);
    std::map<std::string, Tensor> analytic;
    for (auto& [name, p] : params) analytic[name] = p.grad;
    double worst = 0.0;
    for (auto& [name, p] : params) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double orig = p.value[i];
            p.value[i] = orig + eps;
            double fp = fn(params);
            p.value[i] = orig - eps;
            double fm = fn(params);
            p.value[i] = orig;
            double num = (fp - fm) / (2.0 * eps);
            double a = analytic[name][i];
            double rel = std::abs(a - num) / std::max(std::abs(a) + std::abs(num), kGradCheckFloor);
            worst = std::max(worst, rel);
        }
    }
    params.zero_grad();
    return worst;
}

}  // namespace fbsd::nk
