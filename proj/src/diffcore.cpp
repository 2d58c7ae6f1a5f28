#include "djcm/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "djcm/entropy_model.hpp"
#include "djcm/error.hpp"

namespace djcm::ad {

namespace {

std::string g_fault_op;

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->value.shape != b->value.shape) {
        throw Error(ErrorKind::Shape, std::string(op) + ": " + shape_str(a->value.shape) + " vs " +
                                          shape_str(b->value.shape));
    }
}

void require_rank2(const Var& a, const char* op) {
    if (a->value.rank() != 2) throw Error(ErrorKind::Shape, std::string(op) + " expects a rank-2 array");
}

Var make(std::string op, Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = std::move(op);
    n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p->requires_grad; });
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(fn);
    }
    return n;
}

// Accumulate into a parent's gradient if it takes one.
inline bool wants(const Var& p) { return p->requires_grad; }

template <class F>
Var unary(const char* op, const Var& x, F&& forward, std::function<double(double x, double y)> derivative) {
    Tensor out(x->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = forward(x->value.data[i]);
    return make(op, std::move(out), {x}, [x, derivative](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            x->grad.data[i] += self.grad.data[i] * derivative(x->value.data[i], self.value.data[i]);
        }
    });
}

double phi(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

double logistic(double t) { return logistic_cdf(t); }

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, double fill) : shape(std::move(shape_)) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    data.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values)
    : data(std::move(values)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    if (n != data.size()) throw Error(ErrorKind::Shape, "tensor data does not match shape " + shape_str(shape));
}

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = "constant";
    return n;
}

Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = "parameter";
    n->requires_grad = true;
    return n;
}

void backward(const Var& root) {
    if (!root->requires_grad) return;
    if (root->value.size() != 1) throw Error(ErrorKind::Shape, "backward needs a single-element root");

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (n->grad.shape != n->value.shape) n->grad = Tensor(n->value.shape, 0.0);
    }
    root->grad.data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward_fn) continue;
        if (!g_fault_op.empty() && n->op == g_fault_op) {
            for (double& g : n->grad.data) g *= 1.01;
        }
        n->backward_fn(*n);
    }
}

Var matmul(const Var& a, const Var& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t n = a->value.rows(), k = a->value.cols(), m = b->value.cols();
    if (b->value.rows() != k) {
        throw Error(ErrorKind::Shape, "matmul: " + shape_str(a->value.shape) + " x " + shape_str(b->value.shape));
    }
    Tensor out({n, m}, 0.0);
    const double* A = a->value.data.data();
    const double* B = b->value.data.data();
    double* C = out.data.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * m;
            double* crow = C + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return make("matmul", std::move(out), {a, b}, [a, b, n, k, m](Node& self) {
        const double* G = self.grad.data.data();
        if (wants(a)) {
            // dA = G B^T
            const double* B = b->value.data.data();
            double* dA = a->grad.data.data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* brow = B + p * m;
                    const double* grow = G + i * m;
                    for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                    dA[i * k + p] += acc;
                }
            }
        }
        if (wants(b)) {
            // dB = A^T G
            const double* A = a->value.data.data();
            double* dB = b->grad.data.data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    if (av == 0.0) continue;
                    const double* grow = G + i * m;
                    double* drow = dB + p * m;
                    for (std::size_t j = 0; j < m; ++j) drow[j] += av * grow[j];
                }
            }
        }
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    return make("add", std::move(out), {a, b}, [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (wants(a)) a->grad.data[i] += self.grad.data[i];
            if (wants(b)) b->grad.data[i] += self.grad.data[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b->value.data[i];
    return make("sub", std::move(out), {a, b}, [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (wants(a)) a->grad.data[i] += self.grad.data[i];
            if (wants(b)) b->grad.data[i] -= self.grad.data[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
    return make("mul", std::move(out), {a, b}, [a, b](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (wants(a)) a->grad.data[i] += self.grad.data[i] * b->value.data[i];
            if (wants(b)) b->grad.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

Var add_bias(const Var& x, const Var& bias) {
    require_rank2(x, "add_bias");
    const std::size_t n = x->value.rows(), m = x->value.cols();
    if (bias->value.size() != m) throw Error(ErrorKind::Shape, "add_bias: bias length mismatch");
    Tensor out = x->value;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out.data[i * m + j] += bias->value.data[j];
    }
    return make("add_bias", std::move(out), {x, bias}, [x, bias, n, m](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double g = self.grad.data[i * m + j];
                if (wants(x)) x->grad.data[i * m + j] += g;
                if (wants(bias)) bias->grad.data[j] += g;
            }
        }
    });
}

Var affine(const Var& x, const Var& w, const Var& b) { return add_bias(matmul(x, w), b); }

Var scale(const Var& x, double c) {
    Tensor out = x->value;
    for (double& v : out.data) v *= c;
    return make("scale", std::move(out), {x}, [x, c](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad.data[i] += c * self.grad.data[i];
    });
}

Var add_constant(const Var& x, const Tensor& c) {
    if (c.shape != x->value.shape) throw Error(ErrorKind::Shape, "add_constant: shape mismatch");
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += c.data[i];
    return make("add_constant", std::move(out), {x}, [x](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad.data[i] += self.grad.data[i];
    });
}

Var mul_constant(const Var& x, const Tensor& c) {
    if (c.shape != x->value.shape) throw Error(ErrorKind::Shape, "mul_constant: shape mismatch");
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= c.data[i];
    return make("mul_constant", std::move(out), {x}, [x, c](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad.data[i] += self.grad.data[i] * c.data[i];
    });
}

Var broadcast_rows(const Var& v, std::size_t rows) {
    const std::size_t m = v->value.size();
    Tensor out({rows, m});
    for (std::size_t i = 0; i < rows; ++i) std::copy(v->value.data.begin(), v->value.data.end(), out.data.begin() + i * m);
    return make("broadcast_rows", std::move(out), {v}, [v, rows, m](Node& self) {
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < m; ++j) v->grad.data[j] += self.grad.data[i * m + j];
        }
    });
}

Var concat_cols(const Var& a, const Var& b) {
    require_rank2(a, "concat_cols");
    require_rank2(b, "concat_cols");
    const std::size_t n = a->value.rows(), ma = a->value.cols(), mb = b->value.cols();
    if (b->value.rows() != n) throw Error(ErrorKind::Shape, "concat_cols: row counts differ");
    Tensor out({n, ma + mb});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < ma; ++j) out.at(i, j) = a->value.at(i, j);
        for (std::size_t j = 0; j < mb; ++j) out.at(i, ma + j) = b->value.at(i, j);
    }
    return make("concat_cols", std::move(out), {a, b}, [a, b, n, ma, mb](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
            if (wants(a)) {
                for (std::size_t j = 0; j < ma; ++j) a->grad.at(i, j) += self.grad.at(i, j);
            }
            if (wants(b)) {
                for (std::size_t j = 0; j < mb; ++j) b->grad.at(i, j) += self.grad.at(i, ma + j);
            }
        }
    });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t n = x->value.rows();
    if (start + count > x->value.cols()) throw Error(ErrorKind::Shape, "slice_cols: range out of bounds");
    Tensor out({n, count});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < count; ++j) out.at(i, j) = x->value.at(i, start + j);
    }
    return make("slice_cols", std::move(out), {x}, [x, n, start, count](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < count; ++j) x->grad.at(i, start + j) += self.grad.at(i, j);
        }
    });
}

Var relu(const Var& x) {
    return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
    return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
    return unary("sigmoid", x, [](double v) { return logistic(v); }, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& x) {
    return unary("softplus", x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
                 [](double v, double) { return logistic(v); });
}

Var sum(const Var& x) {
    double acc = 0.0;
    for (double v : x->value.data) acc += v;
    return make("sum", Tensor::scalar(acc), {x}, [x](Node& self) {
        const double g = self.grad.data[0];
        for (double& v : x->grad.data) v += g;
    });
}

Var mean(const Var& x) {
    if (x->value.size() == 0) throw Error(ErrorKind::Shape, "mean of an empty array");
    return scale(sum(x), 1.0 / static_cast<double>(x->value.size()));
}

Var mse(const Var& a, const Var& b) {
    require_same_shape(a, b, "mse");
    const std::size_t n = a->value.size();
    if (n == 0) throw Error(ErrorKind::Shape, "mse of empty arrays");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = a->value.data[i] - b->value.data[i];
        acc += e * e;
    }
    return make("mse", Tensor::scalar(acc / static_cast<double>(n)), {a, b}, [a, b, n](Node& self) {
        const double g = self.grad.data[0] * 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = a->value.data[i] - b->value.data[i];
            if (wants(a)) a->grad.data[i] += g * e;
            if (wants(b)) b->grad.data[i] -= g * e;
        }
    });
}

namespace {

// Shared shape of the two rate nodes: -log2 (F(a) - F(b)), a = (v + 1/2)/s,
// b = (v - 1/2)/s, v = y - mean. `cdf_tail` evaluates F(a) - F(b) on the
// precise tail; `density` is F'.
template <class Mass, class Density>
Var interval_rate(const char* op, const Var& y, const Var& mu, const Var& sc, Mass mass, Density density) {
    require_same_shape(y, mu, op);
    require_same_shape(y, sc, op);
    const std::size_t n = y->value.size();
    double bits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::max(sc->value.data[i], kScaleMin);
        bits -= std::log2(std::max(mass(y->value.data[i] - mu->value.data[i], s), kLikelihoodFloor));
    }
    return make(op, Tensor::scalar(bits), {y, mu, sc}, [=](Node& self) {
        const double g = self.grad.data[0];
        for (std::size_t i = 0; i < n; ++i) {
            const bool clamped = sc->value.data[i] < kScaleMin;
            const double s = clamped ? kScaleMin : sc->value.data[i];
            const double v = y->value.data[i] - mu->value.data[i];
            const double p = mass(v, s);
            if (p < kLikelihoodFloor) continue;
            const double a = (v + 0.5) / s, b = (v - 0.5) / s;
            const double fa = density(a), fb = density(b);
            const double coef = -g / (p * std::numbers::ln2);
            const double dv = (fa - fb) / s;
            if (wants(y)) y->grad.data[i] += coef * dv;
            if (wants(mu)) mu->grad.data[i] -= coef * dv;
            if (wants(sc) && !clamped) sc->grad.data[i] += coef * (-(a * fa - b * fb) / s);
        }
    });
}

}  // namespace

Var gu_rate_bits(const Var& y, const Var& mean, const Var& scale) {
    return interval_rate(
        "gu_rate", y, mean, scale,
        [](double v, double s) {
            const double w = -std::abs(v);
            return normal_cdf((w + 0.5) / s) - normal_cdf((w - 0.5) / s);
        },
        phi);
}

Var logistic_rate_bits(const Var& z, const Var& loc, const Var& scale) {
    return interval_rate(
        "logistic_rate", z, loc, scale,
        [](double v, double s) {
            const double w = -std::abs(v);
            return logistic_cdf((w + 0.5) / s) - logistic_cdf((w - 0.5) / s);
        },
        [](double t) {
            const double l = logistic(t);
            return l * (1.0 - l);
        });
}

Var uniform_noise(const Var& x, double half_width, const RngState& rng, Dither dither) {
    if (!(half_width > 0.0)) throw Error(ErrorKind::InvalidParams, "uniform noise half width must be positive");
    Tensor u(x->value.shape, 0.0);
    if (dither == Dither::Random) {
        Rng gen(rng);
        for (double& v : u.data) v = gen.uniform(-half_width, half_width);
    }
    Var out = add_constant(x, u);
    out->op = "uniform_noise";
    return out;
}

Var clip(const Var& x, double bound) {
    if (!(bound > 0.0)) throw Error(ErrorKind::InvalidParams, "clip bound must be positive");
    return unary("clip", x, [bound](double v) { return std::clamp(v, -bound, bound); },
                 [bound](double v, double) { return (v >= -bound && v <= bound) ? 1.0 : 0.0; });
}

Var ste_quantize(const Var& x, const ConstellationSpec& spec) {
    Tensor out = x->value;
    for (double& v : out.data) v = spec.quantize(v);
    return make("ste_quantize", std::move(out), {x}, [x](Node& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad.data[i] += self.grad.data[i];
    });
}

Var power_limit_rows(const Var& x, std::span<const int> active_symbols, double power) {
    require_rank2(x, "power_limit_rows");
    const std::size_t n = x->value.rows(), m = x->value.cols();
    if (active_symbols.size() != n) throw Error(ErrorKind::Shape, "power_limit_rows: one symbol count per row");
    std::vector<double> factor(n, 1.0), energy(n, 0.0);
    Tensor out = x->value;
    for (std::size_t i = 0; i < n; ++i) {
        if (active_symbols[i] <= 0) continue;
        double e = 0.0;
        for (std::size_t j = 0; j < m; ++j) e += x->value.at(i, j) * x->value.at(i, j);
        energy[i] = e / active_symbols[i];
        if (energy[i] > power) {
            factor[i] = std::sqrt(power / energy[i]);
            for (std::size_t j = 0; j < m; ++j) out.at(i, j) *= factor[i];
        }
    }
    std::vector<int> counts(active_symbols.begin(), active_symbols.end());
    return make("power_limit", std::move(out), {x}, [x, n, m, factor, energy, counts](Node& self) {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = factor[i];
            if (s == 1.0) {
                for (std::size_t j = 0; j < m; ++j) x->grad.at(i, j) += self.grad.at(i, j);
                continue;
            }
            double gx = 0.0;
            for (std::size_t j = 0; j < m; ++j) gx += self.grad.at(i, j) * x->value.at(i, j);
            const double k = s * gx / (counts[i] * energy[i]);
            for (std::size_t j = 0; j < m; ++j) x->grad.at(i, j) += s * self.grad.at(i, j) - k * x->value.at(i, j);
        }
    });
}

Var channel(const Var& x, const ChannelParams& params, const RngState& rng, const Tensor* mask) {
    require_rank2(x, "channel");
    const std::size_t n = x->value.rows(), m = x->value.cols();
    if (m % 2 != 0) throw Error(ErrorKind::Shape, "channel: column count must be even (I/Q pairs)");
    if (mask && mask->shape != x->value.shape) throw Error(ErrorKind::Shape, "channel: mask shape mismatch");
    Tensor offset(x->value.shape, 0.0);
    const SymbolBlock zeros(std::vector<Sample>(m / 2, Sample{}));
    for (std::size_t i = 0; i < n; ++i) {
        const SymbolBlock noise = transmit(zeros, params, substream(rng, i));
        for (std::size_t s = 0; s < m / 2; ++s) {
            if (mask && mask->at(i, 2 * s) == 0.0) continue;
            offset.at(i, 2 * s) = noise[s].real();
            offset.at(i, 2 * s + 1) = noise[s].imag();
        }
    }
    Var out = add_constant(x, offset);
    out->op = "channel";
    return out;
}

GradCheckResult gradient_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error(ErrorKind::InvalidParams, "eps must lie in [1e-7, 1e-3]");
    Var leaf = parameter(x);
    Var y = f(leaf);
    if (y->value.size() != 1) throw Error(ErrorKind::Shape, "gradient_check needs a scalar function");
    const Var again = f(parameter(x));
    if (again->value.data != y->value.data) {
        throw Error(ErrorKind::Determinism, "function is not deterministic; freeze its random draws");
    }
    backward(y);
    const Tensor ad = leaf->grad.shape == x.shape ? leaf->grad : Tensor(x.shape, 0.0);

    GradCheckResult result;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe.data[i] = x.data[i] + eps;
        const double fp = f(constant(probe))->item();
        probe.data[i] = x.data[i] - eps;
        const double fm = f(constant(probe))->item();
        probe.data[i] = x.data[i];
        const double fd = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(ad.data[i] - fd) / std::max(std::abs(ad.data[i]), 1e-8);
        if (i == 0 || rel > result.max_rel_err) {
            result.max_rel_err = rel;
            result.worst_index = i;
            result.ad_at_worst = ad.data[i];
            result.fd_at_worst = fd;
        }
    }
    return result;
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    for (const Var& p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (const Var& p : params_) p->grad = Tensor(p->value.shape, 0.0);
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Node& p = *params_[k];
        if (p.grad.shape != p.value.shape) continue;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.data[i];
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[k][i] / c1;
            const double vhat = v_[k][i] / c2;
            p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
        }
    }
}

namespace testing {
void inject_gradient_fault(std::string_view op) { g_fault_op = std::string(op); }
void clear_gradient_fault() { g_fault_op.clear(); }
}  // namespace testing

}  // namespace djcm::ad
