#include "additive/sq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "additive/rng.hpp"
#include "json.hpp"

namespace additive {

namespace {

void consume_budget(OracleConfig& cfg) {
    if (cfg.budget > 0 && cfg.used >= cfg.budget)
        throw std::runtime_error("oracle: budget exhausted");
    cfg.used += 1;
}

double clipped_gaussian_noise(const OracleConfig& cfg, RandomStream& rng) {
    const double raw = cfg.noise_std * rng.gaussian();
    return std::clamp(raw, -cfg.tau, cfg.tau);
}

// Answer after the noise policy. `hidden` is the value the oracle would like
// to report instead of `truth` (only used by adversarial_hide).
double apply_noise(const OracleConfig& cfg, double truth, double hidden, RandomStream& rng) {
    switch (cfg.mode) {
        case NoiseMode::none:
            return truth;
        case NoiseMode::clipped_gaussian:
            return truth + clipped_gaussian_noise(cfg, rng);
        case NoiseMode::adversarial_hide: {
            const double shift = hidden - truth;
            if (std::abs(shift) <= cfg.tau) return hidden;
            return truth + (shift > 0.0 ? cfg.tau : -cfg.tau);
        }
    }
    return truth;
}

// f_*(x) with one task removed, keeping the 1/sqrt(M) prefactor.
double target_eval_excluding(const AdditiveTarget& target, const Eigen::VectorXd& x, int skip) {
    double value = target_eval(target, x);
    if (skip >= 0 && skip < target.task_count()) {
        const double proj = target.dirs.directions.row(skip).dot(x);
        value -= series_eval(target.links[static_cast<size_t>(skip)], proj) /
                 std::sqrt(static_cast<double>(target.task_count()));
    }
    return value;
}

// Exact E[f_*(x) g(u.x)] for a series query: only matching Hermite degrees
// survive, each contributing i! alpha_i g_i (u.v_m)^i / sqrt(M).
double exact_series_correlation(const AdditiveTarget& target, const HermiteSeries& g,
                                const Eigen::VectorXd& direction, int skip_task) {
    double acc = 0.0;
    for (int m = 0; m < target.task_count(); ++m) {
        if (m == skip_task) continue;
        const double uv = target.dirs.directions.row(m).dot(direction);
        const HermiteSeries& link = target.links[static_cast<size_t>(m)];
        double ifact = 1.0, uv_pow = 1.0;
        for (int i = 1; i <= std::min(link.degree(), g.degree()); ++i) {
            ifact *= static_cast<double>(i);
            uv_pow *= uv;
            acc += ifact * link.coeff(i) * g.coeff(i) * uv_pow;
        }
    }
    return acc / std::sqrt(static_cast<double>(target.task_count()));
}

}  // namespace

QueryResult csq_query(const AdditiveTarget& target, const HermiteSeries& g,
                      const Eigen::VectorXd& direction, OracleConfig& cfg,
                      std::uint64_t seed) {
    if (direction.size() != target.dim())
        throw std::invalid_argument("csq_query: direction dimension mismatch");
    if (std::abs(direction.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("csq_query: direction must be unit norm");
    if (std::abs(g.second_moment() - 1.0) > 1e-2)
        throw std::invalid_argument("csq_query: query not normalized");
    consume_budget(cfg);

    const double truth = exact_series_correlation(target, g, direction, -1);
    double hidden = truth;
    if (cfg.mode == NoiseMode::adversarial_hide)
        hidden = exact_series_correlation(target, g, direction, cfg.hidden_task);
    RandomStream rng(seed);
    return QueryResult{apply_noise(cfg, truth, hidden, rng), 0.0};
}

QueryResult csq_query(const AdditiveTarget& target,
                      const std::function<double(const Eigen::VectorXd&)>& g,
                      OracleConfig& cfg, std::uint64_t seed, int n_mc) {
    if (n_mc < 100) throw std::invalid_argument("csq_query: n_mc too small");
    consume_budget(cfg);

    RandomStream rng(seed);
    Eigen::VectorXd x(target.dim());
    double sum = 0.0, sumsq = 0.0, gsq = 0.0, hidden_sum = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        for (int k = 0; k < target.dim(); ++k) x(k) = rng.gaussian();
        double y = target_eval(target, x);
        if (target.noise_std > 0.0) y += target.noise_std * rng.gaussian();
        const double gv = g(x);
        const double v = y * gv;
        sum += v;
        sumsq += v * v;
        gsq += gv * gv;
        if (cfg.mode == NoiseMode::adversarial_hide) {
            double yh = target_eval_excluding(target, x, cfg.hidden_task);
            // hidden answer keeps the label noise model
            if (target.noise_std > 0.0) yh += target.noise_std * rng.gaussian();
            hidden_sum += yh * gv;
        }
    }
    const double mean = sum / n_mc;
    const double var = std::max(0.0, sumsq / n_mc - mean * mean);
    const double se = std::sqrt(var / n_mc);
    const double g_norm2 = gsq / n_mc;
    // estimated normalization check; allow 3 sigma of its own estimator noise
    if (std::abs(g_norm2 - 1.0) > 1e-2 + 3.0 / std::sqrt(static_cast<double>(n_mc)))
        throw std::invalid_argument("csq_query: query not normalized");

    const double hidden = cfg.mode == NoiseMode::adversarial_hide ? hidden_sum / n_mc : mean;
    return QueryResult{apply_noise(cfg, mean, hidden, rng), se};
}

QueryResult sq_query(const AdditiveTarget& target,
                     const std::function<double(const Eigen::VectorXd&, double)>& g,
                     OracleConfig& cfg, std::uint64_t seed, int n_mc) {
    if (n_mc < 100) throw std::invalid_argument("sq_query: n_mc too small");
    consume_budget(cfg);

    RandomStream rng(seed);
    Eigen::VectorXd x(target.dim());
    double sum = 0.0, sumsq = 0.0, hidden_sum = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        for (int k = 0; k < target.dim(); ++k) x(k) = rng.gaussian();
        double y = target_eval(target, x);
        if (target.noise_std > 0.0) y += target.noise_std * rng.gaussian();
        const double v = std::clamp(g(x, y), -1.0, 1.0);
        sum += v;
        sumsq += v * v;
        if (cfg.mode == NoiseMode::adversarial_hide) {
            double yh = target_eval_excluding(target, x, cfg.hidden_task);
            if (target.noise_std > 0.0) yh += target.noise_std * rng.gaussian();
            hidden_sum += std::clamp(g(x, yh), -1.0, 1.0);
        }
    }
    const double mean = sum / n_mc;
    const double var = std::max(0.0, sumsq / n_mc - mean * mean);
    const double hidden = cfg.mode == NoiseMode::adversarial_hide ? hidden_sum / n_mc : mean;
    return QueryResult{apply_noise(cfg, mean, hidden, rng), std::sqrt(var / n_mc)};
}

HermiteSeries HardClass::member_series() const {
    double pfact = 1.0;
    for (int i = 2; i <= p; ++i) pfact *= static_cast<double>(i);
    return HermiteSeries::basis(p).scaled(1.0 / std::sqrt(pfact));
}

double HardClass::correlation(int i, int j) const {
    const double uv = dirs.directions.row(i).dot(dirs.directions.row(j));
    return std::pow(uv, p);
}

double HardClass::coherence() const {
    return std::pow(dirs.max_overlap, p);
}

std::string HardClass::to_json() const {
    std::vector<HermiteSeries> links(static_cast<size_t>(size()), member_series());
    const AdditiveTarget as_target = make_target(dirs, std::move(links), 0.0);
    return as_target.to_json();
}

HardClass build_hard_class(int d, int A, int p, std::uint64_t seed) {
    if (A < 2) throw std::invalid_argument("build_hard_class: A must be >= 2");
    if (p < 1) throw std::invalid_argument("build_hard_class: p must be >= 1");
    HardClass cls;
    cls.p = p;
    cls.dirs = gen_directions(d, A, DirectionMode::hypercube, seed);
    return cls;
}

CensusResult correlation_census(const HermiteSeries& g, const Eigen::VectorXd& direction,
                                const HardClass& cls, double tau) {
    if (std::abs(g.second_moment() - 1.0) > 1e-8)
        throw std::invalid_argument("correlation_census: query must be unit norm");
    if (std::abs(direction.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("correlation_census: direction must be unit norm");
    CensusResult res;
    res.coherence = cls.coherence();
    if (tau * tau <= res.coherence)
        throw std::invalid_argument("correlation_census: tau below class coherence");
    res.bound = 2.0 / (tau * tau - res.coherence);

    const HermiteSeries member = cls.member_series();
    double pfact = 1.0;
    for (int i = 2; i <= cls.p; ++i) pfact *= static_cast<double>(i);
    // corr = sum_k k! g_k member_k (u.v)^k = sqrt(p!) g_p (u.v)^p
    const double gp = g.coeff(cls.p);
    for (int i = 0; i < cls.size(); ++i) {
        const double uv = cls.dirs.directions.row(i).dot(direction);
        const double corr = std::sqrt(pfact) * gp * std::pow(uv, cls.p);
        if (std::abs(corr) >= tau) res.count += 1;
    }
    if (static_cast<double>(res.count) > res.bound)
        throw std::logic_error("correlation_census: counting bound violated");
    return res;
}

std::string CensusResult::to_json() const {
    nlohmann::json j;
    j["count"] = count;
    j["bound"] = bound;
    j["coherence"] = coherence;
    return j.dump(2);
}

BihariResult bihari_lasalle_bounds(double a0, double c, int p, int T) {
    if (a0 <= 0.0 || a0 >= 1.0) throw std::invalid_argument("bihari_lasalle_bounds: a0 in (0,1)");
    if (c < 0.0) throw std::invalid_argument("bihari_lasalle_bounds: c must be >= 0");
    if (p < 3) throw std::invalid_argument("bihari_lasalle_bounds: p must be >= 3");
    if (T < 0) throw std::invalid_argument("bihari_lasalle_bounds: T must be >= 0");

    BihariResult out;
    out.sequence.reserve(static_cast<size_t>(T) + 1);
    out.lower.reserve(static_cast<size_t>(T) + 1);
    out.upper.reserve(static_cast<size_t>(T) + 1);

    // The discrete recursion is an explicit Euler scheme for da/dt = c a^{p-1}
    // and therefore sits BELOW the ODE envelope a0 (1 - c(p-2)a0^{p-2} t)^{-1/(p-2)};
    // that envelope is the valid upper bound, not a lower one. The lower bound
    // carries the step-ratio correction (1+c)^{-(p-1)}, from
    // a^{t+1} <= (1+c) a^t while a <= 1.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double pm2 = static_cast<double>(p - 2);
    const double a0_pow = std::pow(a0, pm2);
    const double lower_rate = c * std::pow(1.0 + c, -(p - 1)) * pm2 * a0_pow;
    const double upper_rate = c * pm2 * a0_pow;

    double a = a0;
    bool exceeded = false;  // the lower bound needs a^t <= 1 so far
    for (int t = 0; t <= T; ++t) {
        out.sequence.push_back(a);
        const double ld = 1.0 - lower_rate * t;
        out.lower.push_back((!exceeded && ld > 0.0) ? a0 / std::pow(ld, 1.0 / pm2) : nan);
        const double ud = 1.0 - upper_rate * t;
        out.upper.push_back(ud > 0.0 ? a0 / std::pow(ud, 1.0 / pm2) : nan);
        if (a > 1.0) exceeded = true;
        a += c * std::pow(a, p - 1);
    }
    return out;
}

HermiteSeries superorthogonal_k2l2_polynomial() {
    std::vector<double> c(21, 0.0);
    c[4] = 1.0;
    c[6] = -4.0 / 15.0;
    c[8] = 11.0 / 280.0;
    c[10] = -19.0 / 4725.0;
    c[12] = 311.0 / 997920.0;
    c[14] = -719.0 / 37837800.0;
    c[16] = 14297.0 / 15567552000.0;
    c[18] = -35369.0 / 1042053012000.0;
    c[20] = 35369.0 / 41682120480000.0 -
            std::sqrt(11163552839.0 / 38.0) / 83364240960000.0;
    return HermiteSeries(std::move(c));
}

}  // namespace additive
