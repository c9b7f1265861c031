#include "additive/trainer.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "additive/parallel.hpp"
#include "additive/rng.hpp"

namespace additive {

double TrainSchedule::eta_at(long t) const {
    if (rule == StepRule::constant) return eta0;
    const long start = anneal_start > 0 ? anneal_start : T1 / 2;
    if (t < start || start <= 0) return eta0;
    const double ratio = static_cast<double>(t) / static_cast<double>(start);
    return eta0 / (ratio * ratio);
}

namespace {

// One correlation-loss step over all rows. z must hold W x; rows with zero
// derivative are untouched, identical to the per-neuron update.
void correlation_step(NetworkState& net, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                      double y, double eta, long step_for_error) {
    const int d = net.d;
    const double* xp = x.data();
    for (int j = 0; j < net.J; ++j) {
        const double zj = z(j);
        const double deriv = net.activation_derivative(j, zj + net.b(j));
        if (deriv == 0.0) continue;
        const double s = eta * y * net.a(j) * deriv;
        if (s == 0.0) continue;
        double* wp = net.W.data() + static_cast<long>(j) * d;
        const double c1 = 1.0 - s * zj;
        double norm2 = 0.0;
        for (int i = 0; i < d; ++i) {
            const double wn = c1 * wp[i] + s * xp[i];
            wp[i] = wn;
            norm2 += wn * wn;
        }
        if (!std::isfinite(norm2) || norm2 == 0.0) {
            std::ostringstream msg;
            msg << "phase1_step: non-finite update for neuron " << j;
            if (step_for_error >= 0) msg << " at step " << step_for_error;
            msg << " (step size too large)";
            throw std::runtime_error(msg.str());
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (int i = 0; i < d; ++i) wp[i] *= inv;
    }
}

}  // namespace

void phase1_step(NetworkState& net, const Eigen::VectorXd& x, double y, double eta) {
    if (x.size() != net.d) throw std::invalid_argument("phase1_step: dimension mismatch");
    const Eigen::VectorXd z = net.W * x;
    correlation_step(net, x, z, y, eta, -1);
}

Phase1Result run_phase1(NetworkState net, const AdditiveTarget& target,
                        const TrainSchedule& schedule, std::uint64_t seed,
                        const SnapshotSink& sink) {
    if (target.dim() != net.d) throw std::invalid_argument("run_phase1: dimension mismatch");
    if (schedule.T1 < 1) throw std::invalid_argument("run_phase1: T1 must be >= 1");

    AlignmentTrace trace;
    {
        std::ostringstream meta;
        meta << "phase1 J=" << net.J << " d=" << net.d << " M=" << target.task_count()
             << " T1=" << schedule.T1 << " eta0=" << schedule.eta0 << " seed=" << seed;
        trace.meta = meta.str();
    }
    auto record = [&](long step) {
        Eigen::MatrixXd kappa = alignment_matrix(net, target.dirs);
        if (sink) sink(step, kappa);
        trace.times.push_back(step);
        trace.snapshots.push_back(std::move(kappa));
    };
    record(0);

    RandomStream rng(seed);
    Eigen::VectorXd x(net.d);
    Eigen::VectorXd z(net.J);
    for (long t = 0; t < schedule.T1; ++t) {
        for (int i = 0; i < net.d; ++i) x(i) = rng.gaussian();
        double y = target_eval(target, x);
        if (target.noise_std > 0.0) y += target.noise_std * rng.gaussian();
        const double eta = schedule.eta_at(t);
        if (eta != 0.0 && y != 0.0) {
            z.noalias() = net.W * x;
            correlation_step(net, x, z, y, eta, t);
        }
        const long done = t + 1;
        if (schedule.snapshot_every > 0 && done % schedule.snapshot_every == 0 &&
            done != schedule.T1)
            record(done);
    }
    record(schedule.T1);
    return Phase1Result{std::move(net), std::move(trace)};
}

void interphase_randomize(NetworkState& net, double C_b, std::uint64_t seed) {
    if (C_b < 0.0) throw std::invalid_argument("interphase_randomize: C_b must be >= 0");
    RandomStream rng(seed);
    net.C_b = C_b;
    for (int j = 0; j < net.J; ++j) net.b(j) = C_b > 0.0 ? rng.uniform(-C_b, C_b) : 0.0;
    for (int j = 0; j < net.J; ++j) net.W.row(j) *= rng.sign();
}

namespace {

// Feature matrix Phi with Phi(t, j) = sigma_j(w_j . x_t + b_j) / J, so the
// prediction is Phi a. Rows are independent; built in parallel blocks.
RowMatrixXd feature_matrix(const NetworkState& net, const SampleBatch& batch) {
    const int n = static_cast<int>(batch.xs.rows());
    RowMatrixXd phi(n, net.J);
    const double inv_j = 1.0 / static_cast<double>(net.J);
    RowPool pool(worker_count());
    pool.run(n, [&](int lo, int hi) {
        Eigen::VectorXd z(net.J);
        for (int t = lo; t < hi; ++t) {
            z.noalias() = net.W * batch.xs.row(t).transpose();
            for (int j = 0; j < net.J; ++j)
                phi(t, j) = net.activation(j, z(j) + net.b(j)) * inv_j;
        }
    });
    return phi;
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

}  // namespace

FittedModel fit_second_layer(const NetworkState& net, const SampleBatch& batch, int r,
                             double lambda_bar) {
    if (r != 1 && r != 2) throw std::invalid_argument("fit_second_layer: r must be 1 or 2");
    if (lambda_bar < 0.0) throw std::invalid_argument("fit_second_layer: negative lambda");
    const int n = static_cast<int>(batch.xs.rows());
    if (n < 1) throw std::invalid_argument("fit_second_layer: empty batch");

    const RowMatrixXd phi = feature_matrix(net, batch);
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::VectorXd rhs = phi.transpose() * batch.ys * inv_n;  // Phi^T y / n

    FittedModel out;
    out.net = net;

    auto objective = [&](const Eigen::VectorXd& a) {
        const double fit = (phi * a - batch.ys).squaredNorm() * inv_n;
        const double reg = (r == 2) ? lambda_bar * a.squaredNorm() : lambda_bar * a.lpNorm<1>();
        return fit + reg;
    };

    if (r == 2) {
        Eigen::VectorXd a;
        if (net.J <= 4096) {
            Eigen::MatrixXd gram = phi.transpose() * phi * inv_n;
            gram.diagonal().array() += lambda_bar;
            a = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(rhs);
            // one refinement pass against the explicit operator
            const Eigen::VectorXd resid = rhs - (phi.transpose() * (phi * a) * inv_n + lambda_bar * a);
            a += Eigen::LDLT<Eigen::MatrixXd>(gram).solve(resid);
            out.iterations = 1;
        } else {
            // matrix-free conjugate gradient on (Phi^T Phi / n + lambda I) a = rhs
            auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
                return phi.transpose() * (phi * v) * inv_n + lambda_bar * v;
            };
            a = Eigen::VectorXd::Zero(net.J);
            Eigen::VectorXd res = rhs;
            Eigen::VectorXd p = res;
            double rs = res.squaredNorm();
            const double tol2 = 2.5e-17;  // gradient norm 1e-8 => residual 5e-9
            const long max_iter = 10000;
            long it = 0;
            for (; it < max_iter && rs > tol2; ++it) {
                const Eigen::VectorXd ap = apply(p);
                const double alpha = rs / p.dot(ap);
                a += alpha * p;
                res -= alpha * ap;
                const double rs_new = res.squaredNorm();
                p = res + (rs_new / rs) * p;
                rs = rs_new;
            }
            out.iterations = it;
            if (rs > tol2) {
                std::ostringstream msg;
                msg << "fit_second_layer: did not converge, residual " << std::sqrt(rs);
                throw std::runtime_error(msg.str());
            }
        }
        out.net.a = a;
        out.train_objective = objective(a);
        out.objective_trace.push_back(out.train_objective);
        const Eigen::VectorXd grad =
            2.0 * (phi.transpose() * (phi * a - batch.ys) * inv_n + lambda_bar * a);
        out.kkt_residual = grad.norm();
        return out;
    }

    // r = 1: ISTA with step 1/L, L = 2 lambda_max(Phi^T Phi / n).
    Eigen::VectorXd probe = Eigen::VectorXd::Ones(net.J).normalized();
    double lmax = 0.0;
    for (int it = 0; it < 60; ++it) {
        Eigen::VectorXd next = phi.transpose() * (phi * probe) * inv_n;
        lmax = next.norm();
        if (lmax == 0.0) break;
        probe = next / lmax;
    }
    const double step = lmax > 0.0 ? 1.0 / (2.0 * lmax) : 1.0;

    Eigen::VectorXd a = Eigen::VectorXd::Zero(net.J);
    double obj = objective(a);
    out.objective_trace.push_back(obj);
    const long max_iter = 100000;
    long it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::VectorXd grad = 2.0 * phi.transpose() * (phi * a - batch.ys) * inv_n;
        Eigen::VectorXd next(net.J);
        for (int j = 0; j < net.J; ++j)
            next(j) = soft_threshold(a(j) - step * grad(j), step * lambda_bar);
        const double next_obj = objective(next);
        a.swap(next);
        const double rel = std::abs(obj - next_obj) / std::max(1.0, std::abs(obj));
        obj = next_obj;
        out.objective_trace.push_back(obj);
        if (rel < 1e-8) {
            ++it;
            break;
        }
    }
    out.iterations = it;
    out.net.a = a;
    out.train_objective = obj;
    const Eigen::VectorXd grad = 2.0 * phi.transpose() * (phi * a - batch.ys) * inv_n;
    double kkt = 0.0;
    for (int j = 0; j < net.J; ++j) {
        const double v = (a(j) != 0.0) ? std::abs(grad(j) + lambda_bar * (a(j) > 0 ? 1.0 : -1.0))
                                       : std::max(0.0, std::abs(grad(j)) - lambda_bar);
        kkt = std::max(kkt, v);
    }
    out.kkt_residual = kkt;
    return out;
}

TunedFit fit_second_layer_tuned(const NetworkState& net, const SampleBatch& batch, int r,
                                const std::vector<double>& lambdas, double holdout_frac) {
    if (lambdas.empty()) throw std::invalid_argument("fit_second_layer_tuned: empty grid");
    if (holdout_frac <= 0.0 || holdout_frac >= 1.0)
        throw std::invalid_argument("fit_second_layer_tuned: holdout_frac in (0,1)");
    const int n = static_cast<int>(batch.xs.rows());
    const int n_fit = std::max(1, static_cast<int>(std::lround(n * (1.0 - holdout_frac))));
    if (n_fit >= n) throw std::invalid_argument("fit_second_layer_tuned: batch too small to split");

    SampleBatch fit_part;
    fit_part.xs = batch.xs.topRows(n_fit);
    fit_part.ys = batch.ys.head(n_fit);
    fit_part.seed = batch.seed;
    const RowMatrixXd phi_val = feature_matrix(net, [&] {
        SampleBatch v;
        v.xs = batch.xs.bottomRows(n - n_fit);
        v.ys = batch.ys.tail(n - n_fit);
        return v;
    }());
    const Eigen::VectorXd y_val = batch.ys.tail(n - n_fit);

    TunedFit out;
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : lambdas) {
        const FittedModel m = fit_second_layer(net, fit_part, r, lambda);
        const double mse = (phi_val * m.net.a - y_val).squaredNorm() / y_val.size();
        out.validation.emplace_back(lambda, mse);
        if (mse < best) {
            best = mse;
            out.lambda = lambda;
        }
    }
    out.model = fit_second_layer(net, batch, r, out.lambda);
    return out;
}

NtkResult run_ntk_baseline(int J, int d, const AdditiveTarget& target, long steps,
                           double eta, std::uint64_t seed, long snapshot_every) {
    if (target.dim() != d) throw std::invalid_argument("run_ntk_baseline: dimension mismatch");
    ActivationSpec act;
    act.kind = ActivationKind::relu;
    NetworkState net = init_network(J, d, act, 1.0, seed, BiasInit::uniform);
    const RowMatrixXd w0 = net.W;
    const double w0_norm = w0.norm();
    const double inv_sqrt_j = 1.0 / std::sqrt(static_cast<double>(J));

    Eigen::VectorXd a_tilde = net.a;  // +-1; effective second layer a/sqrt(J)

    NtkResult out;
    {
        std::ostringstream meta;
        meta << "ntk J=" << J << " d=" << d << " M=" << target.task_count() << " steps=" << steps
             << " eta=" << eta << " seed=" << seed;
        out.trace.meta = meta.str();
    }
    auto record = [&](long step) {
        RowMatrixXd rows = net.W;
        for (int j = 0; j < J; ++j) {
            const double norm = rows.row(j).norm();
            if (norm > 0.0) rows.row(j) /= norm;
        }
        Eigen::MatrixXd kappa = rows * target.dirs.directions.transpose();
        out.trace.times.push_back(step);
        out.trace.snapshots.push_back(std::move(kappa));
    };
    record(0);

    RandomStream rng(seed + 1);  // sample stream distinct from the init stream
    Eigen::VectorXd x(d), z(J);
    for (long t = 0; t < steps; ++t) {
        for (int i = 0; i < d; ++i) x(i) = rng.gaussian();
        double y = target_eval(target, x);
        if (target.noise_std > 0.0) y += target.noise_std * rng.gaussian();

        z.noalias() = net.W * x;
        double pred = 0.0;
        for (int j = 0; j < J; ++j) {
            const double arg = z(j) + net.b(j);
            pred += a_tilde(j) * (arg > 0.0 ? arg : 0.0);
        }
        pred *= inv_sqrt_j;
        const double resid = pred - y;
        const double scale = -eta * 2.0 * resid * inv_sqrt_j;
        if (!std::isfinite(resid))
            throw std::runtime_error("run_ntk_baseline: non-finite residual (step size too large)");
        for (int j = 0; j < J; ++j) {
            const double arg = z(j) + net.b(j);
            if (arg > 0.0) {
                net.W.row(j) += (scale * a_tilde(j)) * x.transpose();
                a_tilde(j) += scale * arg;
            }
        }
        const long done = t + 1;
        if (snapshot_every > 0 && done % snapshot_every == 0 && done != steps) record(done);
    }
    record(steps);

    net.a = a_tilde * std::sqrt(static_cast<double>(J));  // forward() = ntk predictor
    out.relative_movement = (net.W - w0).norm() / w0_norm;
    out.net = std::move(net);
    return out;
}

TheoreticalPlan theoretical_schedule(int d, int M, int p, double eps,
                                     const ScheduleConstants& constants) {
    if (d < 1 || M < 1 || p < 3) throw std::invalid_argument("theoretical_schedule: need d, M >= 1, p >= 3");
    if (eps <= 0.0 || eps >= 1.0) throw std::invalid_argument("theoretical_schedule: eps in (0,1)");
    TheoreticalPlan plan;
    const double dd = static_cast<double>(d);
    const double mm = static_cast<double>(M);
    plan.eps_tilde = constants.c_eps_tilde * eps / std::sqrt(mm);
    plan.T11 = static_cast<long>(std::llround(constants.c_t11 * mm * std::pow(dd, p - 1)));
    plan.T12 = static_cast<long>(std::llround(constants.c_t12 * mm * std::pow(dd, 0.5 * p)));
    const double t13 = std::max(mm * dd / (plan.eps_tilde * plan.eps_tilde),
                                mm / std::pow(plan.eps_tilde, 3.0));
    plan.T13 = static_cast<long>(std::llround(constants.c_t13 * t13));
    plan.schedule.T1 = plan.T11 + plan.T12 + plan.T13;
    plan.schedule.eta0 = constants.c_eta / (std::sqrt(mm) * std::pow(dd, 0.5 * p));
    plan.schedule.rule = StepRule::constant;
    plan.schedule.T2 = static_cast<long>(std::llround(constants.c_t2 * mm / (eps * eps)));
    return plan;
}

}  // namespace additive
