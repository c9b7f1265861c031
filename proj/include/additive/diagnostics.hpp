#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "additive/model.hpp"
#include "additive/network.hpp"

namespace additive {

// Time-indexed snapshots of the J x M alignment matrix kappa_{j,m} = <w_j, v_m>.
struct AlignmentTrace {
    std::vector<long> times;
    std::vector<Eigen::MatrixXd> snapshots;
    std::string meta;

    bool empty() const { return snapshots.empty(); }
    const Eigen::MatrixXd& first() const { return snapshots.front(); }
    const Eigen::MatrixXd& last() const { return snapshots.back(); }

    // CSV schema: step,j,m,kappa (17 significant digits).
    void write_csv(const std::string& path) const;
};

// Exact inner products W * dirs^T; rows of W and dirs must be unit norm.
Eigen::MatrixXd alignment_matrix(const NetworkState& net, const DirectionSet& dirs);

// Index sets J_m of neurons whose initialization favors task m:
// w_j.v_m >= 1/sqrt(d) and (w_j.v_m)^{p-2} >= C_p^{(p-2)/2} max_{m' != m}
// |w_j.v_{m'}|^{p-2} + delta d^{-(p-2)/2}, with C_p from the link leading
// coefficients.
std::vector<std::vector<int>> initialization_classes(const NetworkState& net,
                                                     const AdditiveTarget& target,
                                                     double delta);

struct LocalizationReport {
    std::vector<int> counts;        // neurons at or above threshold, per task
    std::vector<int> argmax_task;   // per neuron, task with largest alignment
    std::vector<double> top_gap;    // per neuron, top-two alignment gap
    bool jmin_ok = false;           // all counts >= j_min
    double threshold = 0.0;
    int j_min = 0;
    bool sign_insensitive = true;

    std::string to_json() const;
};

// Counts at the final snapshot; alignment read as |kappa| when
// sign_insensitive (the post-randomization default for ReLU runs).
LocalizationReport localization_report(const AlignmentTrace& trace, double threshold,
                                       int j_min, bool sign_insensitive = true);

enum class ErrorMetric { L1, L2 };

struct ErrorEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Monte Carlo E|f_* - predict| (L1) or sqrt(E[(f_* - predict)^2]) (L2)
// against the noiseless target; n >= 10^4.
ErrorEstimate population_error(const std::function<double(const Eigen::VectorXd&)>& predict,
                               const AdditiveTarget& target, int n, ErrorMetric metric,
                               std::uint64_t seed);

// CSV with columns j, kappa_{j,m1}, kappa_{j,m2} at the first and last
// snapshots (column pairs suffixed _init and _final), plotting-ready.
void emit_scatter(const AlignmentTrace& trace, int m1, int m2, const std::string& path);

}  // namespace additive
