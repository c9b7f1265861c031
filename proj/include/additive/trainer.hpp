#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "additive/diagnostics.hpp"
#include "additive/model.hpp"
#include "additive/network.hpp"

namespace additive {

enum class StepRule { constant, anneal };

// Phase lengths, step-size rule and second-layer fit parameters. eta0 is the
// per-neuron step applied in phase1_step; presets that follow the 1/J-scaled
// network forward pass divide the documented rate by J before building the
// schedule.
struct TrainSchedule {
    long T1 = 1;
    long T2 = 1;
    StepRule rule = StepRule::constant;
    double eta0 = 0.0;
    long anneal_start = 0;  // T'; defaults to T1/2 when 0 under anneal
    double lambda_bar = 0.0;
    int r = 2;
    long snapshot_every = 0;  // 0: record only the first and last snapshots

    // constant: eta0. anneal: eta0 until T', then eta0 / (t/T')^2.
    double eta_at(long t) const;
};

// One online step of normalized SGD on the correlation loss:
// w_j <- normalize(w_j + eta y a_j sigma_j'(w_j.x + b_j) (I - w_j w_j^T) x).
// ReLU derivative at 0 is 0. Throws std::runtime_error on a non-finite update.
void phase1_step(NetworkState& net, const Eigen::VectorXd& x, double y, double eta);

struct Phase1Result {
    NetworkState net;
    AlignmentTrace trace;
};

using SnapshotSink = std::function<void(long step, const Eigen::MatrixXd& kappa)>;

// T1 online steps with a fresh sample per step; the sample stream is fully
// determined by seed. Alignment snapshots are recorded at step 0, every
// snapshot_every steps, and at T1.
Phase1Result run_phase1(NetworkState net, const AdditiveTarget& target,
                        const TrainSchedule& schedule, std::uint64_t seed,
                        const SnapshotSink& sink = nullptr);

// Biases resampled Unif([-C_b, C_b]); every first-layer row multiplied by an
// independent uniform sign.
void interphase_randomize(NetworkState& net, double C_b, std::uint64_t seed);

struct FittedModel {
    NetworkState net;
    double train_objective = 0.0;
    double kkt_residual = 0.0;
    long iterations = 0;
    std::vector<double> objective_trace;  // per-iteration objective (r = 1)
};

// Second-layer fit: argmin_a (1/T2) sum_t (f_a(x_t) - y_t)^2 + lambda |a|_r^r.
// r=2 solves the normal equations (J <= 4096) or runs conjugate gradient;
// r=1 runs monotone proximal gradient (ISTA) with the documented stopping
// rule and reports the KKT residual.
FittedModel fit_second_layer(const NetworkState& net, const SampleBatch& batch, int r,
                             double lambda_bar);

struct TunedFit {
    FittedModel model;
    double lambda = 0.0;
    std::vector<std::pair<double, double>> validation;  // (lambda, held-out MSE)
};

// Grid selection of lambda on a held-out tail split (default grid
// 1e-4..1), then a refit on the full batch at the winner.
TunedFit fit_second_layer_tuned(const NetworkState& net, const SampleBatch& batch, int r,
                                const std::vector<double>& lambdas, double holdout_frac = 0.2);

struct NtkResult {
    NetworkState net;  // a holds sqrt(J) * trained second layer, so forward()
                       // evaluates the 1/sqrt(J)-scaled predictor
    AlignmentTrace trace;
    double relative_movement = 0.0;  // |W_T - W_0|_F / |W_0|_F
};

// Baseline in the lazy regime: 1/sqrt(J) output scaling, plain SGD on the
// squared loss for both layers (biases drawn Unif([-1,1]) and frozen).
// Alignment snapshots divide by the row norms since rows are unconstrained.
NtkResult run_ntk_baseline(int J, int d, const AdditiveTarget& target, long steps,
                           double eta, std::uint64_t seed, long snapshot_every = 0);

// Hidden constants of the published rates; all default to 1.
struct ScheduleConstants {
    double c_t11 = 1.0;
    double c_t12 = 1.0;
    double c_t13 = 1.0;
    double c_eta = 1.0;
    double c_t2 = 1.0;
    double c_eps_tilde = 1.0;
};

struct TheoreticalPlan {
    long T11 = 0;  // M d^{p-1}
    long T12 = 0;  // M d^{p/2}
    long T13 = 0;  // eps~^{-2} M d v M eps~^{-3}
    double eps_tilde = 0.0;
    TrainSchedule schedule;  // T1 = T11 + T12 + T13, eta = c M^{-1/2} d^{-p/2}
};

TheoreticalPlan theoretical_schedule(int d, int M, int p, double eps,
                                     const ScheduleConstants& constants = {});

}  // namespace additive
