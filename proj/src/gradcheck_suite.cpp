#include "djcm/gradcheck_suite.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "djcm/constellation.hpp"
#include "djcm/csv.hpp"
#include "djcm/diffcore.hpp"
#include "djcm/rng.hpp"

namespace djcm {

using namespace ad;

namespace {

// Random magnitudes in [lo, hi] with random sign.
Tensor signed_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data) {
        v = rng.uniform(lo, hi);
        if (rng.uniform() < 0.5) v = -v;
    }
    return t;
}

Tensor positive_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
}

// f(x) = sum(w * op(x)) with fixed positive weights.
Var weighted(const Var& y, const Tensor& w) { return sum(mul_constant(y, w)); }

struct Case {
    std::function<Var(const Var&)> f;
    Tensor x;
};

using CaseMaker = std::function<Case(Rng&)>;

Case unary_case(Rng& rng, Var (*op)(const Var&), double lo, double hi) {
    const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
    Tensor w = positive_tensor(rng, shape, 0.5, 1.5);
    return {[op, w](const Var& x) { return weighted(op(x), w); }, signed_tensor(rng, shape, lo, hi)};
}

}  // namespace

bool GradCheckReport::passed() const {
    for (const auto& r : rows) {
        if (r.gated && !r.passed) return false;
    }
    return true;
}

std::string GradCheckReport::csv() const {
    csv::Writer w({"node", "cases", "max_rel_err", "gated", "passed", "worst_case"});
    for (const auto& r : rows) {
        w.cell(r.node).cell(static_cast<long long>(r.cases)).cell(r.max_rel_err);
        w.cell(std::string(r.gated ? "yes" : "no")).cell(std::string(r.passed ? "yes" : "no")).cell(r.worst_case);
        w.end_row();
    }
    return w.str();
}

GradCheckReport run_gradcheck_suite(std::uint64_t seed, int cases, double threshold) {
    const ConstellationSpec spec16 = build_spec(16, 1.0);
    const double d = spec16.spacing(), A = spec16.bound();

    std::vector<std::pair<std::string, CaseMaker>> makers;

    makers.emplace_back("matmul", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 4), k = dim(rng, 1, 5), m = dim(rng, 1, 5);
        Tensor b = positive_tensor(rng, {k, m}, 0.5, 1.5);
        Tensor w = positive_tensor(rng, {n, m}, 0.5, 1.5);
        if (rng.uniform() < 0.5) {
            return Case{[b, w](const Var& x) { return weighted(matmul(x, constant(b)), w); },
                        signed_tensor(rng, {n, k}, 0.1, 2.0)};
        }
        Tensor a = positive_tensor(rng, {n, k}, 0.5, 1.5);
        return Case{[a, w](const Var& x) { return weighted(matmul(constant(a), x), w); }, b};
    });
    makers.emplace_back("add", [](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor other = signed_tensor(rng, shape, 0.1, 2.0), w = positive_tensor(rng, shape, 0.5, 1.5);
        return Case{[other, w](const Var& x) { return weighted(add(x, constant(other)), w); },
                    signed_tensor(rng, shape, 0.1, 2.0)};
    });
    makers.emplace_back("sub", [](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor other = signed_tensor(rng, shape, 0.1, 2.0), w = positive_tensor(rng, shape, 0.5, 1.5);
        const bool left = rng.uniform() < 0.5;
        return Case{[other, w, left](const Var& x) {
                        return weighted(left ? sub(x, constant(other)) : sub(constant(other), x), w);
                    },
                    signed_tensor(rng, shape, 0.1, 2.0)};
    });
    makers.emplace_back("mul", [](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor other = signed_tensor(rng, shape, 0.5, 2.0), w = positive_tensor(rng, shape, 0.5, 1.5);
        return Case{[other, w](const Var& x) { return weighted(mul(x, constant(other)), w); },
                    signed_tensor(rng, shape, 0.1, 2.0)};
    });
    makers.emplace_back("affine", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 4), k = dim(rng, 1, 5), m = dim(rng, 1, 5);
        Tensor x0 = positive_tensor(rng, {n, k}, 0.5, 1.5);
        Tensor wmat = positive_tensor(rng, {k, m}, 0.5, 1.5);
        Tensor w = positive_tensor(rng, {n, m}, 0.5, 1.5);
        // Leaf is the bias; x and W are covered by matmul.
        return Case{[x0, wmat, w](const Var& b) { return weighted(affine(constant(x0), constant(wmat), b), w); },
                    signed_tensor(rng, {m}, 0.1, 1.0)};
    });
    makers.emplace_back("relu", [](Rng& rng) { return unary_case(rng, relu, 0.05, 2.0); });
    makers.emplace_back("tanh", [](Rng& rng) { return unary_case(rng, ad::tanh, 0.0, 2.0); });
    makers.emplace_back("sigmoid", [](Rng& rng) { return unary_case(rng, sigmoid, 0.0, 4.0); });
    makers.emplace_back("softplus", [](Rng& rng) { return unary_case(rng, softplus, 0.0, 6.0); });
    makers.emplace_back("mse", [](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor target = signed_tensor(rng, shape, 0.0, 1.0);
        Tensor x = target;
        for (double& v : x.data) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
        return Case{[target](const Var& v) { return mse(v, constant(target)); }, x};
    });
    makers.emplace_back("concat", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 4), ma = dim(rng, 1, 4), mb = dim(rng, 1, 4);
        Tensor other = signed_tensor(rng, {n, mb}, 0.1, 2.0), w = positive_tensor(rng, {n, ma + mb}, 0.5, 1.5);
        return Case{[other, w](const Var& x) { return weighted(ad::tanh(concat_cols(x, constant(other))), w); },
                    signed_tensor(rng, {n, ma}, 0.0, 1.5)};
    });
    makers.emplace_back("gu_rate", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 12);
        Tensor mu = signed_tensor(rng, {n}, 0.0, 3.0), sc = positive_tensor(rng, {n}, 0.3, 2.0);
        Tensor y = mu;
        // Keep |y - mu| in (0, 1/2) so the mass is strictly monotone in every argument.
        for (double& v : y.data) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.4);
        const int which = static_cast<int>(rng.uniform() * 3.0);
        if (which == 0) {
            return Case{[mu, sc](const Var& v) { return gu_rate_bits(v, constant(mu), constant(sc)); }, y};
        }
        if (which == 1) {
            return Case{[y, sc](const Var& v) { return gu_rate_bits(constant(y), v, constant(sc)); }, mu};
        }
        return Case{[y, mu](const Var& v) { return gu_rate_bits(constant(y), constant(mu), v); }, sc};
    });
    makers.emplace_back("logistic_rate", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 12);
        Tensor loc = signed_tensor(rng, {n}, 0.0, 3.0), sc = positive_tensor(rng, {n}, 0.3, 2.0);
        Tensor z = loc;
        for (double& v : z.data) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 0.4);
        const int which = static_cast<int>(rng.uniform() * 3.0);
        if (which == 0) {
            return Case{[loc, sc](const Var& v) { return logistic_rate_bits(v, constant(loc), constant(sc)); }, z};
        }
        if (which == 1) {
            return Case{[z, sc](const Var& v) { return logistic_rate_bits(constant(z), v, constant(sc)); }, loc};
        }
        return Case{[z, loc](const Var& v) { return logistic_rate_bits(constant(z), constant(loc), v); }, sc};
    });
    makers.emplace_back("uniform_noise", [d](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor w = positive_tensor(rng, shape, 0.5, 1.5);
        const RngState frozen{rng.next_u64(), 0};
        return Case{[w, d, frozen](const Var& x) { return weighted(ad::tanh(uniform_noise(x, d, frozen)), w); },
                    signed_tensor(rng, shape, 0.0, 1.0)};
    });
    makers.emplace_back("clip", [A](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor w = positive_tensor(rng, shape, 0.5, 1.5);
        Tensor x(shape);
        // Interior points and points well outside the bound.
        for (double& v : x.data) {
            v = rng.uniform() < 0.7 ? rng.uniform(-0.95 * A, 0.95 * A) : rng.uniform(1.05 * A, 2.0 * A);
            if (std::abs(v) > A && rng.uniform() < 0.5) v = -v;
        }
        return Case{[w, A](const Var& v) { return weighted(clip(v, A), w); }, x};
    });
    makers.emplace_back("power_limit", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 4), sym = dim(rng, 1, 4);
        const double power = 1.0;
        Tensor x(std::vector<std::size_t>{n, 2 * sym});
        std::vector<int> active(n, static_cast<int>(sym));
        for (std::size_t i = 0; i < n; ++i) {
            // Rows either well above or well below the budget.
            const double target = rng.uniform() < 0.6 ? rng.uniform(1.3, 3.0) : rng.uniform(0.2, 0.8);
            double e = 0.0;
            for (std::size_t j = 0; j < 2 * sym; ++j) {
                x.at(i, j) = rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
                e += x.at(i, j) * x.at(i, j);
            }
            const double f = std::sqrt(target * static_cast<double>(sym) / e);
            for (std::size_t j = 0; j < 2 * sym; ++j) x.at(i, j) *= f;
        }
        Tensor target = signed_tensor(rng, x.shape, 0.0, 1.0);
        return Case{[active, power, target](const Var& v) {
                        return mse(power_limit_rows(v, active, power), constant(target));
                    },
                    x};
    });
    makers.emplace_back("channel", [](Rng& rng) {
        const std::size_t n = dim(rng, 1, 4), sym = dim(rng, 1, 4);
        ChannelParams params;
        params.kind = rng.uniform() < 0.5 ? ChannelKind::Awgn : ChannelKind::Rayleigh;
        params.snr_db = rng.uniform(0.0, 20.0);
        const RngState frozen{rng.next_u64(), 3};
        Tensor w = positive_tensor(rng, {n, 2 * sym}, 0.5, 1.5);
        return Case{[params, frozen, w](const Var& x) { return weighted(channel(x, params, frozen), w); },
                    signed_tensor(rng, {n, 2 * sym}, 0.0, 1.0)};
    });
    makers.emplace_back("relaxed_chain", [&spec16](Rng& rng) {
        // x -> affine -> clip -> +u1 -> channel -> +u2 -> affine -> tanh -> mse, leaf = encoder weights.
        const std::size_t batch = dim(rng, 2, 4), n_in = 6, sym = 4, n_out = 5;
        // Positive inputs and decoder weights with targets below the tanh range keep every
        // gradient term the same sign, so no coordinate cancels to a roundoff-sized value.
        Tensor input = positive_tensor(rng, {batch, n_in}, 0.2, 1.0);
        Tensor bias = signed_tensor(rng, {2 * sym}, 0.0, 0.1);
        Tensor dec_w = positive_tensor(rng, {2 * sym, n_out}, 0.1, 0.6);
        Tensor dec_b = signed_tensor(rng, {n_out}, 0.0, 0.1);
        Tensor target = positive_tensor(rng, {batch, n_out}, -1.8, -1.2);
        ChannelParams params;
        params.snr_db = rng.uniform(0.0, 20.0);
        const RngState frozen{rng.next_u64(), 7};
        const double d = spec16.spacing(), A = spec16.bound();
        auto f = [=](const Var& enc_w) {
            Var s = clip(affine(constant(input), enc_w, constant(bias)), A);
            Var o = uniform_noise(s, d, named_stream(frozen, "noise1"));
            o = channel(o, params, named_stream(frozen, "channel"));
            o = uniform_noise(o, d, named_stream(frozen, "noise2"));
            return mse(ad::tanh(affine(o, constant(dec_w), constant(dec_b))), constant(target));
        };
        return Case{f, signed_tensor(rng, {n_in, 2 * sym}, 0.0, 0.4)};
    });
    makers.emplace_back("ste_quantize", [&spec16](Rng& rng) {
        const std::vector<std::size_t> shape{dim(rng, 1, 4), dim(rng, 1, 6)};
        Tensor target = signed_tensor(rng, shape, 0.0, 1.0);
        return Case{[&spec16, target](const Var& x) { return mse(ste_quantize(x, spec16), constant(target)); },
                    signed_tensor(rng, shape, 0.0, 1.0)};
    });

    GradCheckReport report;
    report.threshold = threshold;
    const RngState root{seed, 0};
    for (std::size_t k = 0; k < makers.size(); ++k) {
        const auto& [name, make_case] = makers[k];
        GradCheckRow row;
        row.node = name;
        row.gated = name != "ste_quantize";
        Rng rng(named_stream(root, name));
        for (int c = 0; c < cases; ++c) {
            Case cs = make_case(rng);
            const GradCheckResult r = gradient_check(cs.f, cs.x, 1e-6);
            if (c == 0 || r.max_rel_err > row.max_rel_err) {
                row.max_rel_err = r.max_rel_err;
                std::ostringstream os;
                os << "case " << c << " index " << r.worst_index << " ad " << csv::format(r.ad_at_worst) << " fd "
                   << csv::format(r.fd_at_worst);
                row.worst_case = os.str();
            }
            ++row.cases;
        }
        row.passed = row.max_rel_err <= threshold;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace djcm
