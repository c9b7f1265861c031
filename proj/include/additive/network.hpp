#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "additive/hermite.hpp"
#include "additive/model.hpp"

namespace additive {

enum class ActivationKind { relu, randomized_poly };
enum class PolyNormalization { sqrt_i, sqrt_factorial };

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& s);
std::string to_string(PolyNormalization norm);
PolyNormalization poly_normalization_from_string(const std::string& s);

// Student nonlinearity. For randomized_poly, neuron j computes
// sum_{i=p}^{q} eps(j, i-p)/sqrt(i) He_i(z) (or /sqrt(i!) in the
// sqrt_factorial variant); the per-neuron signs live in NetworkState so the
// network is replayable.
struct ActivationSpec {
    ActivationKind kind = ActivationKind::relu;
    int p = 0;  // randomized_poly only
    int q = 0;
    PolyNormalization norm = PolyNormalization::sqrt_i;
};

// Phase-I bias handling at initialization. Algorithm-literal runs keep biases
// at zero until the interphase step; the reproduction experiments draw them
// uniformly up front (a zero-bias ReLU has no odd Hermite coefficients above
// degree 1, so He_3-style targets would produce no drive at all).
enum class BiasInit { zero, uniform };

// Two-layer student f(x) = (1/J) sum_j a_j sigma_j(w_j . x + b_j).
struct NetworkState {
    int J = 0;
    int d = 0;
    Eigen::VectorXd a;                                 // second layer
    RowMatrixXd W;                                     // J x d
    Eigen::VectorXd b;                                 // biases
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> eps;  // J x (q-p+1)
    ActivationSpec act;
    double C_b = 0.0;

    double activation(int j, double z) const;
    double activation_derivative(int j, double z) const;
};

// Rows of W uniform on the unit sphere; a_j uniform in {-1, +1}; biases zero
// or Unif([-C_b, C_b]) per bias_init; randomized_poly signs i.i.d. uniform
// over {-1, 0, +1}.
NetworkState init_network(int J, int d, const ActivationSpec& act, double C_b,
                          std::uint64_t seed, BiasInit bias_init = BiasInit::zero);

// (1/J) sum_j a_j sigma_j(w_j . x + b_j).
double forward(const NetworkState& net, const Eigen::VectorXd& x);

// Expansion of z -> a_j sigma_j(z + b_j): closed forms for ReLU, exact shift
// recombination for polynomial activations.
HermiteSeries neuron_expansion(const NetworkState& net, int j, int cutoff_q);

// Margin matrix for the Hermite sign condition: entry (j, m) is
// min over the constrained degrees of the required sign products, positive
// iff alpha_{m,p} beta_{j,p} > 0 and alpha_{m,i} beta_{j,i} >= 0 for
// p < i <= q. The boolean check is margin(j, m) > 0.
Eigen::MatrixXd descent_path_margins(const NetworkState& net, const AdditiveTarget& target);

// entry (j, m) true iff neuron j satisfies the sign condition for task m.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> descent_path_check(
    const NetworkState& net, const AdditiveTarget& target);

// Binary checkpoint (fixed little-endian layout: header, then row-major W,
// a, b, and the sign table) plus a JSON sidecar with the same metadata at
// <path>.json.
void save_network(const NetworkState& net, const std::string& path);
NetworkState load_network(const std::string& path);

}  // namespace additive
