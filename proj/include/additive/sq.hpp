#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "additive/hermite.hpp"
#include "additive/model.hpp"

namespace additive {

enum class NoiseMode { none, adversarial_hide, clipped_gaussian };

// Oracle state: tolerance, noise policy and query budget. A config is
// single-owner mutable state; queries against it execute sequentially.
struct OracleConfig {
    double tau = 0.0;
    NoiseMode mode = NoiseMode::none;
    double noise_std = 0.0;  // clipped_gaussian scale
    long budget = 0;
    long used = 0;
    int hidden_task = -1;  // adversarial_hide target task
};

struct QueryResult {
    double value = 0.0;
    double std_error = 0.0;  // Monte Carlo estimator noise; 0 in exact mode
};

// Correlational query E[y g(x)] + noise for g declared as a Hermite series
// composed with a unit direction; evaluated exactly in coefficient space via
// E[He_k(u.x) He_l(v.x)] = k! (u.v)^k delta_{kl}.
QueryResult csq_query(const AdditiveTarget& target, const HermiteSeries& g,
                      const Eigen::VectorXd& direction, OracleConfig& cfg,
                      std::uint64_t seed);

// Free-form correlational query, Monte Carlo with n_mc samples.
QueryResult csq_query(const AdditiveTarget& target,
                      const std::function<double(const Eigen::VectorXd&)>& g,
                      OracleConfig& cfg, std::uint64_t seed, int n_mc = 1000000);

// Full statistical query E[g(x, y)] + noise; g values are clipped to [-1, 1].
QueryResult sq_query(const AdditiveTarget& target,
                     const std::function<double(const Eigen::VectorXd&, double)>& g,
                     OracleConfig& cfg, std::uint64_t seed, int n_mc = 1000000);

// Hard instance family {He_p(v.x)/sqrt(p!) : v in dirs} over a hypercube
// direction set with pairwise overlap at most sqrt(2 log A)/sqrt(d).
struct HardClass {
    int p = 0;
    DirectionSet dirs;

    int size() const { return dirs.count(); }
    HermiteSeries member_series() const;  // He_p / sqrt(p!)
    // Exact pairwise function correlation (v_i . v_j)^p.
    double correlation(int i, int j) const;
    double coherence() const;  // max_{i != j} |correlation|

    // Serializes to the AdditiveTarget JSON schema, one member per link.
    std::string to_json() const;
};

HardClass build_hard_class(int d, int A, int p, std::uint64_t seed);

struct CensusResult {
    int count = 0;       // members with |correlation with g| >= tau
    double bound = 0.0;  // 2 / (tau^2 - coherence)
    double coherence = 0.0;

    std::string to_json() const;
};

// Counts class members correlated with the unit query g (a Hermite series on
// a direction) above tau; throws if tau^2 <= coherence and checks the
// counting bound count <= 2/(tau^2 - coherence).
CensusResult correlation_census(const HermiteSeries& g, const Eigen::VectorXd& direction,
                                const HardClass& cls, double tau);

struct BihariResult {
    std::vector<double> sequence;  // a^{t+1} = a^t + c (a^t)^{p-1}
    std::vector<double> lower;     // NaN past the bound's blow-up time
    std::vector<double> upper;
};

// Trajectory of the alignment recursion with its closed-form lower
// (Bihari-LaSalle) and upper (Gronwall) envelopes; entries are truncated to
// NaN where a denominator crosses zero, and the upper bound additionally
// loses validity once the sequence exceeds 1.
BihariResult bihari_lasalle_bounds(double a0, double c, int p, int T);

// The published degree-20 polynomial whose first two powers are orthogonal to
// He_1 and He_2 (the K = L = 2 instance used by the hard-class construction).
HermiteSeries superorthogonal_k2l2_polynomial();

}  // namespace additive
