#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace additive {

// Finite expansion on the probabilists' Hermite basis He_k (unnormalized
// convention, E[He_k He_l] = k! delta_{kl} under N(0,1)). coeffs[k] multiplies
// He_k; canonical form trims trailing zeros so the top coefficient is nonzero
// unless the series is identically zero.
struct HermiteSeries {
    std::vector<double> coeffs;

    HermiteSeries() : coeffs{0.0} {}
    explicit HermiteSeries(std::vector<double> c);

    // Unit coefficient at degree k.
    static HermiteSeries basis(int k);

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    double coeff(int k) const {
        return (k >= 0 && k < static_cast<int>(coeffs.size())) ? coeffs[static_cast<size_t>(k)] : 0.0;
    }
    bool is_zero() const;

    // E[s(z)^2] = sum_k k! c_k^2, exact in coefficient arithmetic.
    double second_moment() const;

    HermiteSeries scaled(double factor) const;

    // Rescale between the unnormalized basis stored here and the orthonormal
    // basis He_k/sqrt(k!): c_k <-> c_k*sqrt(k!).
    std::vector<double> to_normalized() const;
    static HermiteSeries from_normalized(const std::vector<double>& normalized);

    std::string to_json() const;
    static HermiteSeries from_json(const std::string& text);
};

// He_k(x) by the three-term recurrence He_{k+1} = x He_k - k He_{k-1};
// He_1(x) = x, He_2(x) = x^2 - 1.
double he_eval(int k, double x);

// sum_k c_k He_k(x) in one recurrence pass.
double series_eval(const HermiteSeries& s, double x);

// E[f(z) g(z)] over N(0,1), exact in coefficient space.
double inner_product(const HermiteSeries& f, const HermiteSeries& g);

// Product of two series as a series, via the linearization
// He_a He_b = sum_r binom(a,r) binom(b,r) r! He_{a+b-2r}.
HermiteSeries series_product(const HermiteSeries& f, const HermiteSeries& g);

HermiteSeries series_add(const HermiteSeries& f, const HermiteSeries& g);

// Expansion of z -> s(z + shift) on the same basis (exact polynomial shift).
HermiteSeries series_shift(const HermiteSeries& s, double shift);

// Nodes and positive weights for expectations against N(0,1):
// sum_i w_i h(x_i) ~ E[h(z)]. Rules from gauss_quadrature(n) are exact for
// polynomials of degree <= 2n-1; piecewise rules trade that for robustness to
// kinks at the listed breakpoints.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int order = 0;

    double integrate(const std::function<double(double)>& h) const;
};

// Gauss-Hermite rule via Golub-Welsch on the Jacobi matrix of the He basis.
// Throws std::runtime_error if the symmetric eigen-solve fails.
QuadratureRule gauss_quadrature(int n);

// Composite Gauss-Legendre rule with the Gaussian density folded into the
// weights. Panels are split at the given breakpoints and the domain is
// truncated at +-extent (the discarded tail mass is ~1e-350 at extent 40).
// Converges at machine precision for piecewise-smooth integrands.
QuadratureRule piecewise_legendre_rule(const std::vector<double>& breakpoints,
                                       int nodes_per_panel = 24,
                                       double extent = 40.0,
                                       double panel_width = 1.0);

// Coefficients c_k = (1/k!) sum_i w_i h(x_i) He_k(x_i) for k <= q.
// Requires rule.order >= q+1 for Gauss rules to resolve the basis.
HermiteSeries expand_function(const std::function<double(double)>& h, int q,
                              const QuadratureRule& rule);

// Expansion of z -> ReLU(z + b) up to degree q from the closed forms
// c_1 = Phi(b), c_i = (-1)^i e^{-b^2/2} He_{i-2}(b) / (sqrt(2 pi) i!) for
// i >= 2; c_0 falls back to quadrature.
HermiteSeries relu_shifted_coeffs(double b, int q);

// min{k >= 1 : |c_k| > tol}. Throws std::invalid_argument when every
// positive-degree coefficient is within tol.
int information_exponent(const HermiteSeries& s, double tol = 1e-9);

// Smallest Gauss order that integrates f^K He_L exactly.
int superorthogonality_min_order(int deg_f, int K, int L);

// Residual matrix r(k-1, l-1) = E[f(z)^k He_l(z)] for 1 <= k <= K,
// 1 <= l <= L. Throws std::invalid_argument when the rule order is below
// superorthogonality_min_order (a silently-inexact run).
Eigen::MatrixXd superorthogonality_check(const HermiteSeries& f, int K, int L,
                                         const QuadratureRule& rule);

}  // namespace additive
