#pragma once

#include <cstdint>
#include <functional>
#include <vector>

// Reference computations used only by tests. They share no numerical code with
// the library: CDFs come from std::erf and convolutions are done on a lattice.
namespace oracle {

// CDF of a per-component law, closed form.
using Cdf = std::function<double(double)>;

Cdf uniform_cdf(double half_width);
Cdf truncated_gaussian_cdf(double scale, double half_width);
Cdf gaussian_cdf(double sd);

// Mass of each lattice cell [k h - h/2, k h + h/2] for k in [-n, n].
struct Lattice {
    long first = 0;  // index of data[0]
    double h = 0.0;
    std::vector<double> mass;
};

Lattice discretize(const Cdf& cdf, double h, double lo, double hi);
Lattice convolve(const Lattice& a, const Lattice& b);
// mass / h at lattice point k h.
double density_at(const Lattice& l, long k);

// Density of source + U(-d,d) + error + U(-d,d) at the lattice points x = k h,
// with h = d / per_d.
struct Convolved {
    Lattice lattice;
    int per_d = 0;
};
Convolved four_fold(const Cdf& source, double source_half_width, const Cdf& error, double error_half_width,
                    double d, int per_d);

// Adaptive Simpson on [a, b].
double simpson(const std::function<double(double)>& f, double a, double b, double tol);

// Direct numerical convolution of N(mu, sigma^2) with the unit box, evaluated at y.
double gaussian_box(double y, double mu, double sigma);

// Differential entropy in bits of N(0, sigma^2) convolved with the unit box.
double gaussian_box_entropy_bits(double sigma);

// Binomial standard error sqrt(p (1 - p) / n).
double binomial_se(double p, std::uint64_t n);

// One-sample Kolmogorov-Smirnov statistic against a CDF.
double ks_statistic(std::vector<double> samples, const Cdf& cdf);
// Asymptotic 1% critical value 1.628 / sqrt(n).
double ks_critical_1pct(std::size_t n);

}  // namespace oracle
