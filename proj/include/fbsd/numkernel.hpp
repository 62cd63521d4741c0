// SPDX-License-Identifier: Apache-2.0
// Dense float64 tensors and hand-written forward/backward passes.
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fbsd/error.hpp"

namespace fbsd {
class Rng;
}

namespace fbsd::nk {

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);
    static Tensor vector(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    void fill(double v);
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

void check_shape(bool ok, const std::string& what);

struct Param {
    Tensor value;
    Tensor grad;
};

class ParamSet {
public:
    Param& add(const std::string& name, Tensor value);
    Param& operator[](const std::string& name);
    const Param& operator[](const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad();
    std::size_t count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    // {format_version, tensors: {name: {shape, values}}}
    std::string to_json() const;
    static ParamSet from_json(const std::string& text);

    friend bool operator==(const ParamSet& a, const ParamSet& b);

private:
    std::map<std::string, Param> params_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

// y = W x + b with W [out x in].
Tensor dense(const Tensor& W, const Tensor& b, const Tensor& x);
// Accumulates into dW/db; returns dx.
Tensor dense_backward(const Tensor& W, const Tensor& x, const Tensor& dy, Tensor& dW, Tensor& db);

Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& dy);
Tensor tanh(const Tensor& x);
Tensor tanh_backward(const Tensor& y, const Tensor& dy);
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);
Tensor softmax(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& dy);
Tensor log_softmax(const Tensor& x);
Tensor log_softmax_backward(const Tensor& y, const Tensor& dy);
Tensor concat(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> concat_backward(const Tensor& dy, std::size_t a_size);

double sigmoid(double x);

enum class Activation { Tanh, Sigmoid };

struct LstmCache {
    Tensor x, h_prev, c_prev;
    Tensor i, f, g, o;  // gate activations
    Tensor c, ac;       // new cell state and its activation
    Tensor h;
};

struct LstmGrads {
    Tensor dx, dh_prev, dc_prev;
};

// Gate order in Wx [4h x d], Wh [4h x h], b [4h]: input, forget, candidate, output.
LstmCache lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const Tensor& Wx, const Tensor& Wh,
                    const Tensor& b, Activation act = Activation::Tanh);
LstmGrads lstm_cell_backward(const LstmCache& cache, const Tensor& dh, const Tensor& dc, const Tensor& Wx,
                             const Tensor& Wh, Tensor& dWx, Tensor& dWh, Tensor& db,
                             Activation act = Activation::Tanh, bool want_dx = true);

struct Attention {
    Tensor context;
    Tensor weights;
};

// Scaled dot-product: e_i = q.h_i / sqrt(h), alpha = softmax(e), c = sum alpha_i h_i.
Attention attention(const Tensor& H, const Tensor& q);
// Accumulates into dH; returns dq.
Tensor attention_backward(const Tensor& H, const Tensor& q, const Attention& a, const Tensor& dc, Tensor& dH);

// h' = tanh(Wc [c; h] + bc)
Tensor attended_output(const Tensor& c, const Tensor& h, const Tensor& Wc, const Tensor& bc);
// Accumulates into dWc/dbc; returns (dc, dh).
std::pair<Tensor, Tensor> attended_output_backward(const Tensor& c, const Tensor& h, const Tensor& Wc,
                                                   const Tensor& out, const Tensor& dout, Tensor& dWc, Tensor& dbc);

struct Loss {
    double value = 0.0;
    Tensor grad;
};

Loss mse_loss(const Tensor& pred, const Tensor& target, const std::vector<int>& mask);
// log_probs [rows x C]; one class per row.
Loss nll_loss(const Tensor& log_probs, const std::vector<int>& classes, const std::vector<int>& mask);

void sgd_step(ParamSet& params, double lr);

inline constexpr double kGradCheckFloor = 1e-6;

// fn evaluates the loss and accumulates analytic gradients into params.
// Returns max over coordinates of |a - n| / max(|a| + |n|, kGradCheckFloor).
double grad_check(const std::function<double(ParamSet&)>& fn, ParamSet& params, double eps = 1e-5);

}  // namespace fbsd::nk
