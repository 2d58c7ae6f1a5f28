#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "djcm/channel.hpp"
#include "djcm/constellation.hpp"
#include "djcm/modem.hpp"
#include "djcm/rng.hpp"

// Reverse-mode differentiation over dense float64 arrays. Only the op set the
// toy pipeline needs is provided; there is no general broadcasting.
namespace djcm::ad {

struct Tensor {
    std::vector<double> data;
    std::vector<std::size_t> shape;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape_, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    // Rank-2 accessors.
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated by backward for nodes that require gradients
    bool requires_grad = false;
    std::string op;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    double item() const { return value.data.at(0); }
};

Var constant(Tensor value);
Var parameter(Tensor value);
inline Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

/// Runs reverse accumulation from a single-element root. Every ancestor that
/// requires gradients receives its gradient exactly once, in reverse
/// topological order. A root that does not require gradients is a no-op.
void backward(const Var& root);

// Linear algebra and arithmetic.
Var matmul(const Var& a, const Var& b);             // [n,k] x [k,m]
Var add(const Var& a, const Var& b);                // same shape
Var sub(const Var& a, const Var& b);                // same shape
Var mul(const Var& a, const Var& b);                // elementwise, same shape
Var add_bias(const Var& x, const Var& bias);        // [n,m] + [m] per row
Var affine(const Var& x, const Var& w, const Var& b);
Var scale(const Var& x, double c);
Var add_constant(const Var& x, const Tensor& c);    // x + c, c held fixed
Var mul_constant(const Var& x, const Tensor& c);    // x * c elementwise, c held fixed
Var broadcast_rows(const Var& v, std::size_t rows); // [m] -> [rows, m]
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& x, std::size_t start, std::size_t count);

// Elementwise nonlinearities.
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
// log(1 + e^x) in the overflow-free form max(x,0) + log1p(e^-|x|).
Var softplus(const Var& x);

// Reductions to a single element.
Var sum(const Var& x);
Var mean(const Var& x);
Var mse(const Var& a, const Var& b);

// Sum of -log2 of the Gaussian-convolved-unit-uniform mass of y under
// (mean, scale); likelihoods floored at 2^-50, scales clamped at 1e-6.
Var gu_rate_bits(const Var& y, const Var& mean, const Var& scale);
// Same for the logistic factorized prior.
Var logistic_rate_bits(const Var& z, const Var& loc, const Var& scale);

/// x + u with u ~ U(-half_width, half_width) drawn once per call from rng.
/// The draw is a constant of the graph, so d out / d x = 1.
Var uniform_noise(const Var& x, double half_width, const RngState& rng, Dither dither = Dither::Random);

// min(max(x, -bound), bound); gradient 1 on the closed interval, 0 outside.
Var clip(const Var& x, double bound);

// Forward: nearest constellation level per element. Backward: identity.
Var ste_quantize(const Var& x, const ConstellationSpec& spec);

/// Scales each row so its mean energy per complex symbol (consecutive pairs,
/// averaged over `active_symbols[r]` symbols) does not exceed `power`.
/// Rows already within budget pass unchanged.
Var power_limit_rows(const Var& x, std::span<const int> active_symbols, double power);

/// The channel with its randomness frozen: consecutive column pairs are
/// (I, Q) symbols, and the equalized output is x + n (AWGN) or x + n/h
/// (Rayleigh), with n and h drawn from rng. Positions where `mask` is zero
/// stay untouched.
Var channel(const Var& x, const ChannelParams& params, const RngState& rng, const Tensor* mask = nullptr);

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double ad_at_worst = 0.0;
    double fd_at_worst = 0.0;
};

/// Compares the AD gradient of a scalar graph function with central
/// differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). The relative
/// error uses max(|g_ad|, 1e-8) as denominator. f must rebuild its graph from
/// the supplied leaf and be deterministic; eps must lie in [1e-7, 1e-3].
GradCheckResult gradient_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps = 1e-6);

/// Adam with bias correction.
class Adam {
  public:
    explicit Adam(std::vector<Var> params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void zero_grad();
    void step();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

  private:
    std::vector<Var> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double lr_, beta1_, beta2_, epsilon_;
    long long t_ = 0;
};

namespace testing {
// Multiplies the backward contribution of every node with the given op name
// by 1.01 until cleared. Used to prove the gradient checker catches faults.
void inject_gradient_fault(std::string_view op);
void clear_gradient_fault();
}  // namespace testing

}  // namespace djcm::ad
