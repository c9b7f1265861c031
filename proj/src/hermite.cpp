#include "additive/hermite.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace additive {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return b;
}

void trim_trailing_zeros(std::vector<double>& c) {
    while (c.size() > 1 && c.back() == 0.0) c.pop_back();
}

}  // namespace

HermiteSeries::HermiteSeries(std::vector<double> c) : coeffs(std::move(c)) {
    if (coeffs.empty()) coeffs.push_back(0.0);
    trim_trailing_zeros(coeffs);
}

HermiteSeries HermiteSeries::basis(int k) {
    if (k < 0) throw std::invalid_argument("HermiteSeries::basis: negative degree");
    std::vector<double> c(static_cast<size_t>(k) + 1, 0.0);
    c.back() = 1.0;
    return HermiteSeries(std::move(c));
}

bool HermiteSeries::is_zero() const {
    for (double c : coeffs)
        if (c != 0.0) return false;
    return true;
}

double HermiteSeries::second_moment() const {
    double m = 0.0, kfact = 1.0;
    for (size_t k = 0; k < coeffs.size(); ++k) {
        if (k > 0) kfact *= static_cast<double>(k);
        m += kfact * coeffs[k] * coeffs[k];
    }
    return m;
}

HermiteSeries HermiteSeries::scaled(double factor) const {
    std::vector<double> c(coeffs);
    for (double& v : c) v *= factor;
    return HermiteSeries(std::move(c));
}

std::vector<double> HermiteSeries::to_normalized() const {
    std::vector<double> out(coeffs);
    double kfact = 1.0;
    for (size_t k = 0; k < out.size(); ++k) {
        if (k > 0) kfact *= static_cast<double>(k);
        out[k] *= std::sqrt(kfact);
    }
    return out;
}

HermiteSeries HermiteSeries::from_normalized(const std::vector<double>& normalized) {
    std::vector<double> c(normalized);
    double kfact = 1.0;
    for (size_t k = 0; k < c.size(); ++k) {
        if (k > 0) kfact *= static_cast<double>(k);
        c[k] /= std::sqrt(kfact);
    }
    return HermiteSeries(std::move(c));
}

std::string HermiteSeries::to_json() const {
    nlohmann::json j = coeffs;
    return j.dump();
}

HermiteSeries HermiteSeries::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_array()) throw std::invalid_argument("HermiteSeries: expected a JSON array");
    return HermiteSeries(j.get<std::vector<double>>());
}

double he_eval(int k, double x) {
    if (k < 0) throw std::invalid_argument("he_eval: negative degree");
    if (k == 0) return 1.0;
    double prev = 1.0, cur = x;
    for (int i = 1; i < k; ++i) {
        const double next = x * cur - static_cast<double>(i) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double series_eval(const HermiteSeries& s, double x) {
    double acc = s.coeffs[0];
    if (s.coeffs.size() == 1) return acc;
    double prev = 1.0, cur = x;
    acc += s.coeffs[1] * cur;
    for (size_t k = 2; k < s.coeffs.size(); ++k) {
        const double next = x * cur - static_cast<double>(k - 1) * prev;
        prev = cur;
        cur = next;
        acc += s.coeffs[k] * cur;
    }
    return acc;
}

double inner_product(const HermiteSeries& f, const HermiteSeries& g) {
    const size_t n = std::min(f.coeffs.size(), g.coeffs.size());
    double acc = 0.0, kfact = 1.0;
    for (size_t k = 0; k < n; ++k) {
        if (k > 0) kfact *= static_cast<double>(k);
        acc += kfact * f.coeffs[k] * g.coeffs[k];
    }
    return acc;
}

HermiteSeries series_product(const HermiteSeries& f, const HermiteSeries& g) {
    const int df = f.degree(), dg = g.degree();
    std::vector<double> out(static_cast<size_t>(df + dg) + 1, 0.0);
    for (int a = 0; a <= df; ++a) {
        if (f.coeffs[static_cast<size_t>(a)] == 0.0) continue;
        for (int b = 0; b <= dg; ++b) {
            const double cab = f.coeffs[static_cast<size_t>(a)] * g.coeffs[static_cast<size_t>(b)];
            if (cab == 0.0) continue;
            double rfact = 1.0;
            for (int r = 0; r <= std::min(a, b); ++r) {
                if (r > 0) rfact *= static_cast<double>(r);
                out[static_cast<size_t>(a + b - 2 * r)] +=
                    cab * binomial(a, r) * binomial(b, r) * rfact;
            }
        }
    }
    return HermiteSeries(std::move(out));
}

HermiteSeries series_add(const HermiteSeries& f, const HermiteSeries& g) {
    std::vector<double> out(std::max(f.coeffs.size(), g.coeffs.size()), 0.0);
    for (size_t k = 0; k < out.size(); ++k) out[k] = f.coeff(static_cast<int>(k)) + g.coeff(static_cast<int>(k));
    return HermiteSeries(std::move(out));
}

HermiteSeries series_shift(const HermiteSeries& s, double shift) {
    // He_n(z + b) = sum_k binom(n, k) b^{n-k} He_k(z)
    const int q = s.degree();
    std::vector<double> out(static_cast<size_t>(q) + 1, 0.0);
    for (int n = 0; n <= q; ++n) {
        const double cn = s.coeffs[static_cast<size_t>(n)];
        if (cn == 0.0) continue;
        double bpow = 1.0;
        for (int k = n; k >= 0; --k) {
            out[static_cast<size_t>(k)] += cn * binomial(n, k) * bpow;
            bpow *= shift;
        }
    }
    return HermiteSeries(std::move(out));
}

double QuadratureRule::integrate(const std::function<double(double)>& h) const {
    double acc = 0.0;
    for (size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * h(nodes[i]);
    return acc;
}

namespace {

// He_k(x) in extended precision; the recurrence has no cancellation issues
// but loses relative digits at large |x| in plain double.
long double he_eval_ld(int k, long double x) {
    if (k == 0) return 1.0L;
    long double prev = 1.0L, cur = x;
    for (int i = 1; i < k; ++i) {
        const long double next = x * cur - static_cast<long double>(i) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

}  // namespace

QuadratureRule gauss_quadrature(int n) {
    if (n < 1 || n > 256) throw std::invalid_argument("gauss_quadrature: order must be in [1, 256]");
    QuadratureRule rule;
    rule.order = n;
    if (n == 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    // Jacobi matrix of the He recurrence: zero diagonal, off-diagonal sqrt(k).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double off = std::sqrt(static_cast<double>(k));
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("gauss_quadrature: eigen-solve for nodes did not converge");

    // Eigenvalues give the nodes to ~1e-14; polish each root of He_n with
    // Newton steps in extended precision, then use the classical weight
    // formula w_i = (n-1)! / (n He_{n-1}(x_i)^2). This keeps the weights
    // accurate in a relative sense even at extreme nodes, where the
    // eigenvector first components underflow their precision.
    rule.nodes.resize(static_cast<size_t>(n));
    rule.weights.resize(static_cast<size_t>(n));
    long double nm1_fact = 1.0L;
    for (int i = 2; i < n; ++i) nm1_fact *= static_cast<long double>(i);
    for (int i = 0; i < n; ++i) {
        long double x = static_cast<long double>(solver.eigenvalues()(i));
        for (int it = 0; it < 3; ++it) {
            const long double fx = he_eval_ld(n, x);
            const long double dfx = static_cast<long double>(n) * he_eval_ld(n - 1, x);
            if (dfx == 0.0L) break;
            x -= fx / dfx;
        }
        const long double hn1 = he_eval_ld(n - 1, x);
        if (hn1 == 0.0L || !std::isfinite(static_cast<double>(hn1)))
            throw std::runtime_error("gauss_quadrature: node polishing degenerated");
        rule.nodes[static_cast<size_t>(i)] = static_cast<double>(x);
        rule.weights[static_cast<size_t>(i)] =
            static_cast<double>(nm1_fact / (static_cast<long double>(n) * hn1 * hn1));
    }
    return rule;
}

QuadratureRule piecewise_legendre_rule(const std::vector<double>& breakpoints,
                                       int nodes_per_panel, double extent,
                                       double panel_width) {
    if (nodes_per_panel < 2 || nodes_per_panel > 64)
        throw std::invalid_argument("piecewise_legendre_rule: nodes_per_panel must be in [2, 64]");
    // Gauss-Legendre nodes/weights on [-1, 1] from the Jacobi matrix.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes_per_panel, nodes_per_panel);
    for (int k = 1; k < nodes_per_panel; ++k) {
        const double kk = static_cast<double>(k);
        const double off = kk / std::sqrt(4.0 * kk * kk - 1.0);
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("piecewise_legendre_rule: eigen-solve did not converge");

    std::vector<double> edges = {-extent, extent};
    for (double b : breakpoints)
        if (b > -extent && b < extent) edges.push_back(b);
    std::sort(edges.begin(), edges.end());

    QuadratureRule rule;
    rule.order = nodes_per_panel;
    for (size_t e = 0; e + 1 < edges.size(); ++e) {
        const double lo = edges[e], hi = edges[e + 1];
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel_width)));
        for (int p = 0; p < panels; ++p) {
            const double a = lo + (hi - lo) * p / panels;
            const double b = lo + (hi - lo) * (p + 1) / panels;
            for (int i = 0; i < nodes_per_panel; ++i) {
                const double t = solver.eigenvalues()(i);
                const double v0 = solver.eigenvectors()(0, i);
                const double x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                const double w_leg = 2.0 * v0 * v0 * 0.5 * (b - a);
                rule.nodes.push_back(x);
                rule.weights.push_back(w_leg * std::exp(-0.5 * x * x) / kSqrt2Pi);
            }
        }
    }
    return rule;
}

HermiteSeries expand_function(const std::function<double(double)>& h, int q,
                              const QuadratureRule& rule) {
    if (q < 0) throw std::invalid_argument("expand_function: negative cutoff");
    if (rule.order < q + 1)
        throw std::invalid_argument("expand_function: rule order below cutoff + 1");
    std::vector<double> c(static_cast<size_t>(q) + 1, 0.0);
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = rule.nodes[i];
        const double wh = rule.weights[i] * h(x);
        double prev = 1.0, cur = x;
        c[0] += wh;
        if (q >= 1) c[1] += wh * cur;
        for (int k = 2; k <= q; ++k) {
            const double next = x * cur - static_cast<double>(k - 1) * prev;
            prev = cur;
            cur = next;
            c[static_cast<size_t>(k)] += wh * cur;
        }
    }
    double kfact = 1.0;
    for (int k = 1; k <= q; ++k) {
        kfact *= static_cast<double>(k);
        c[static_cast<size_t>(k)] /= kfact;
    }
    std::vector<double> out(c);
    return HermiteSeries(std::move(out));
}

HermiteSeries relu_shifted_coeffs(double b, int q) {
    if (q < 2) throw std::invalid_argument("relu_shifted_coeffs: cutoff must be >= 2");
    std::vector<double> c(static_cast<size_t>(q) + 1, 0.0);
    const QuadratureRule rule = piecewise_legendre_rule({-b});
    c[0] = rule.integrate([b](double z) { return std::max(z + b, 0.0); });
    c[1] = 0.5 * (1.0 + std::erf(b / std::sqrt(2.0)));  // Phi(b)
    const double gauss_b = std::exp(-0.5 * b * b) / kSqrt2Pi;
    double ifact = 1.0;
    for (int i = 2; i <= q; ++i) {
        ifact *= static_cast<double>(i);
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        c[static_cast<size_t>(i)] = sign * gauss_b * he_eval(i - 2, b) / ifact;
    }
    return HermiteSeries(std::move(c));
}

int information_exponent(const HermiteSeries& s, double tol) {
    for (int k = 1; k <= s.degree(); ++k)
        if (std::abs(s.coeff(k)) > tol) return k;
    throw std::invalid_argument("information_exponent: no positive-degree coefficient above tolerance");
}

int superorthogonality_min_order(int deg_f, int K, int L) {
    return (K * deg_f + L) / 2 + 1;
}

Eigen::MatrixXd superorthogonality_check(const HermiteSeries& f, int K, int L,
                                         const QuadratureRule& rule) {
    if (K < 1 || L < 1) throw std::invalid_argument("superorthogonality_check: K, L must be >= 1");
    const int min_order = superorthogonality_min_order(f.degree(), K, L);
    if (rule.order < min_order)
        throw std::invalid_argument("superorthogonality_check: insufficient quadrature order");
    Eigen::MatrixXd residuals = Eigen::MatrixXd::Zero(K, L);
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
        const double x = rule.nodes[i];
        const double w = rule.weights[i];
        const double fx = series_eval(f, x);
        double fpow = 1.0;
        for (int k = 1; k <= K; ++k) {
            fpow *= fx;
            double prev = 1.0, cur = x;
            residuals(k - 1, 0) += w * fpow * cur;
            for (int l = 2; l <= L; ++l) {
                const double next = x * cur - static_cast<double>(l - 1) * prev;
                prev = cur;
                cur = next;
                residuals(k - 1, l - 1) += w * fpow * cur;
            }
        }
    }
    return residuals;
}

}  // namespace additive
