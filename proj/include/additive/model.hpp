#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "additive/hermite.hpp"

namespace additive {

// Sample/weight matrices are accessed row-wise throughout; keep them row-major.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DirectionMode { canonical, sphere, hypercube };

std::string to_string(DirectionMode mode);
DirectionMode direction_mode_from_string(const std::string& s);

// M unit vectors in R^d (one per row) with the recorded pairwise-overlap
// statistic max_{m != m'} |v_m . v_m'|.
struct DirectionSet {
    RowMatrixXd directions;  // M x d, unit rows
    double max_overlap = 0.0;
    DirectionMode mode = DirectionMode::canonical;

    int count() const { return static_cast<int>(directions.rows()); }
    int dim() const { return static_cast<int>(directions.cols()); }

    // Recompute max_{m != m'} |v_m . v_m'| from the rows.
    double recompute_max_overlap() const;
};

// canonical: e_1..e_M (requires M <= d). sphere: i.i.d. uniform unit vectors.
// hypercube: rows with +-1/sqrt(d) coordinates, accepted greedily until every
// pairwise overlap is within sqrt(2 log M)/sqrt(d); throws after 100 rejected
// draws for a single row.
DirectionSet gen_directions(int d, int M, DirectionMode mode, std::uint64_t seed);

struct DiversityReport {
    bool ok = false;
    double bound = 0.0;  // c_v * max{1/max_overlap, sqrt(d)}
};

// ok iff M <= c_v * max{1/max_overlap, sqrt(d)} (1/0 treated as +inf).
DiversityReport diversity_check(const DirectionSet& dirs, double c_v);

struct OrthonormalBasis {
    Eigen::MatrixXd basis;   // M x d, orthonormal rows
    Eigen::MatrixXd coeffs;  // M x M lower triangular; row m expresses basis row
                             // m in terms of v_1..v_m
};

// Gram-Schmidt with coefficient tracking. Requires max_overlap <= 1/(2M);
// asserts the coefficient bounds |c_{m,m'}| <= 4*max_overlap (m' < m) and
// |1 - c_{m,m}| <= 20*M*max_overlap on the output.
OrthonormalBasis orthonormalize(const DirectionSet& dirs);

// Additive target f_*(x) = (1/sqrt(M)) sum_m f_m(v_m . x); labels add
// N(0, noise_std^2). Links are stored with unit second moment and no constant
// term; all links share one information exponent unless force_mixed.
struct AdditiveTarget {
    DirectionSet dirs;
    std::vector<HermiteSeries> links;
    double noise_std = 0.0;
    int info_exponent = 0;
    int max_degree = 0;

    int task_count() const { return dirs.count(); }
    int dim() const { return dirs.dim(); }

    std::string to_json() const;
    static AdditiveTarget from_json(const std::string& text);
};

// Validates and normalizes the links (rescale to unit second moment; reject a
// nonzero constant term; reject mixed information exponents unless force_mixed).
AdditiveTarget make_target(DirectionSet dirs, std::vector<HermiteSeries> links,
                           double noise_std, bool force_mixed = false);

struct SampleBatch {
    RowMatrixXd xs;  // n x d
    Eigen::VectorXd ys;  // n
    std::uint64_t seed = 0;

    void write_csv(const std::string& path) const;
};

// n i.i.d. rows x ~ N(0, I_d) with y = f_*(x) + noise; reproducible from seed.
SampleBatch sample_batch(const AdditiveTarget& target, int n, std::uint64_t seed);

// Noiseless f_*(x).
double target_eval(const AdditiveTarget& target, const Eigen::VectorXd& x);

// Monte Carlo estimate of E[f_*(x)^2].
double second_moment_estimate(const AdditiveTarget& target, int n, std::uint64_t seed);

}  // namespace additive
