#include "additive/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "additive/rng.hpp"
#include "json.hpp"

namespace additive {

void AlignmentTrace::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("AlignmentTrace: cannot open " + path);
    out << "step,j,m,kappa\n";
    char buf[32];
    for (size_t s = 0; s < snapshots.size(); ++s) {
        const auto& k = snapshots[s];
        for (int j = 0; j < k.rows(); ++j) {
            for (int m = 0; m < k.cols(); ++m) {
                std::snprintf(buf, sizeof(buf), "%.17g", k(j, m));
                out << times[s] << "," << j << "," << m << "," << buf << "\n";
            }
        }
    }
    if (!out) throw std::runtime_error("AlignmentTrace: write failed for " + path);
}

Eigen::MatrixXd alignment_matrix(const NetworkState& net, const DirectionSet& dirs) {
    if (net.d != dirs.dim())
        throw std::invalid_argument("alignment_matrix: dimension mismatch");
    return net.W * dirs.directions.transpose();
}

std::vector<std::vector<int>> initialization_classes(const NetworkState& net,
                                                     const AdditiveTarget& target,
                                                     double delta) {
    if (delta <= 0.0) throw std::invalid_argument("initialization_classes: delta must be positive");
    const int p = target.info_exponent;
    const int M = target.task_count();
    if (p < 3) throw std::invalid_argument("initialization_classes: needs information exponent p > 2");

    double max_alpha = 0.0, min_alpha = std::numeric_limits<double>::infinity();
    for (const auto& link : target.links) {
        const double a = std::abs(link.coeff(p));
        max_alpha = std::max(max_alpha, a);
        min_alpha = std::min(min_alpha, a);
    }
    if (min_alpha == 0.0)
        throw std::invalid_argument("initialization_classes: a link has no degree-p coefficient");
    const double cp = std::pow(max_alpha / min_alpha, 2.0 / (p - 2));
    const double cp_pow = std::pow(cp, 0.5 * (p - 2));  // = max_alpha/min_alpha

    const Eigen::MatrixXd kappa = alignment_matrix(net, target.dirs);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(net.d));
    const double margin = delta * std::pow(inv_sqrt_d, p - 2);

    std::vector<std::vector<int>> classes(static_cast<size_t>(M));
    for (int j = 0; j < net.J; ++j) {
        for (int m = 0; m < M; ++m) {
            const double cm = kappa(j, m);
            if (cm < inv_sqrt_d) continue;
            double rival = 0.0;
            for (int m2 = 0; m2 < M; ++m2) {
                if (m2 == m) continue;
                rival = std::max(rival, std::abs(kappa(j, m2)));
            }
            if (std::pow(cm, p - 2) >= cp_pow * std::pow(rival, p - 2) + margin)
                classes[static_cast<size_t>(m)].push_back(j);
        }
    }
    return classes;
}

LocalizationReport localization_report(const AlignmentTrace& trace, double threshold,
                                       int j_min, bool sign_insensitive) {
    if (trace.empty()) throw std::invalid_argument("localization_report: empty trace");
    // Thresholds above 1 are allowed and simply count nothing.
    if (threshold <= 0.0)
        throw std::invalid_argument("localization_report: threshold must be positive");
    const Eigen::MatrixXd& kappa = trace.last();
    const int J = static_cast<int>(kappa.rows());
    const int M = static_cast<int>(kappa.cols());

    LocalizationReport rep;
    rep.threshold = threshold;
    rep.j_min = j_min;
    rep.sign_insensitive = sign_insensitive;
    rep.counts.assign(static_cast<size_t>(M), 0);
    rep.argmax_task.resize(static_cast<size_t>(J));
    rep.top_gap.resize(static_cast<size_t>(J));

    for (int j = 0; j < J; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        int best_m = 0;
        for (int m = 0; m < M; ++m) {
            const double v = sign_insensitive ? std::abs(kappa(j, m)) : kappa(j, m);
            if (v >= threshold) rep.counts[static_cast<size_t>(m)] += 1;
            if (v > best) {
                second = best;
                best = v;
                best_m = m;
            } else if (v > second) {
                second = v;
            }
        }
        rep.argmax_task[static_cast<size_t>(j)] = best_m;
        rep.top_gap[static_cast<size_t>(j)] = (M > 1) ? best - second : best;
    }
    rep.jmin_ok = true;
    for (int c : rep.counts)
        if (c < j_min) rep.jmin_ok = false;
    return rep;
}

std::string LocalizationReport::to_json() const {
    nlohmann::json j;
    j["counts"] = counts;
    j["argmax_task"] = argmax_task;
    j["top_gap"] = top_gap;
    j["jmin_ok"] = jmin_ok;
    j["threshold"] = threshold;
    j["j_min"] = j_min;
    j["sign_insensitive"] = sign_insensitive;
    return j.dump(2);
}

ErrorEstimate population_error(const std::function<double(const Eigen::VectorXd&)>& predict,
                               const AdditiveTarget& target, int n, ErrorMetric metric,
                               std::uint64_t seed) {
    if (n < 10000) throw std::invalid_argument("population_error: n must be >= 10^4");
    RandomStream rng(seed);
    Eigen::VectorXd x(target.dim());
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < target.dim(); ++k) x(k) = rng.gaussian();
        const double diff = target_eval(target, x) - predict(x);
        const double v = (metric == ErrorMetric::L1) ? std::abs(diff) : diff * diff;
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    ErrorEstimate est;
    if (metric == ErrorMetric::L1) {
        est.value = mean;
        est.std_error = std::sqrt(var / n);
    } else {
        est.value = std::sqrt(mean);
        // delta method: d sqrt(m)/dm = 1/(2 sqrt(m))
        est.std_error = est.value > 0.0 ? 0.5 * std::sqrt(var / n) / est.value : std::sqrt(var / n);
    }
    return est;
}

void emit_scatter(const AlignmentTrace& trace, int m1, int m2, const std::string& path) {
    if (trace.empty()) throw std::invalid_argument("emit_scatter: empty trace");
    if (m1 == m2) throw std::invalid_argument("emit_scatter: task pair must be distinct");
    const Eigen::MatrixXd& init = trace.first();
    const Eigen::MatrixXd& fin = trace.last();
    if (m1 < 0 || m2 < 0 || m1 >= init.cols() || m2 >= init.cols())
        throw std::invalid_argument("emit_scatter: task index out of range");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_scatter: cannot open " + path);
    out << "j,kappa_m" << m1 << "_init,kappa_m" << m2 << "_init,kappa_m" << m1
        << "_final,kappa_m" << m2 << "_final\n";
    char buf[160];
    for (int j = 0; j < init.rows(); ++j) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", j, init(j, m1),
                      init(j, m2), fin(j, m1), fin(j, m2));
        out << buf;
    }
    if (!out) throw std::runtime_error("emit_scatter: write failed for " + path);
}

}  // namespace additive
