#include "additive/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "additive/rng.hpp"
#include "json.hpp"

namespace additive {

std::string to_string(DirectionMode mode) {
    switch (mode) {
        case DirectionMode::canonical: return "canonical";
        case DirectionMode::sphere: return "sphere";
        case DirectionMode::hypercube: return "hypercube";
    }
    return "canonical";
}

DirectionMode direction_mode_from_string(const std::string& s) {
    if (s == "canonical") return DirectionMode::canonical;
    if (s == "sphere") return DirectionMode::sphere;
    if (s == "hypercube") return DirectionMode::hypercube;
    throw std::invalid_argument("unknown direction mode: " + s);
}

double DirectionSet::recompute_max_overlap() const {
    const int M = count();
    double worst = 0.0;
    for (int i = 0; i < M; ++i)
        for (int j = i + 1; j < M; ++j)
            worst = std::max(worst, std::abs(directions.row(i).dot(directions.row(j))));
    return worst;
}

DirectionSet gen_directions(int d, int M, DirectionMode mode, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("gen_directions: M must be >= 1");
    if (d < 1) throw std::invalid_argument("gen_directions: d must be >= 1");
    DirectionSet out;
    out.mode = mode;
    out.directions = Eigen::MatrixXd::Zero(M, d);
    RandomStream rng(seed);

    switch (mode) {
        case DirectionMode::canonical: {
            if (M > d) throw std::invalid_argument("gen_directions: M exceeds d for canonical mode");
            for (int m = 0; m < M; ++m) out.directions(m, m) = 1.0;
            break;
        }
        case DirectionMode::sphere: {
            for (int m = 0; m < M; ++m) {
                Eigen::VectorXd v(d);
                double norm2 = 0.0;
                do {
                    for (int i = 0; i < d; ++i) v(i) = rng.gaussian();
                    norm2 = v.squaredNorm();
                } while (norm2 == 0.0);
                out.directions.row(m) = v.transpose() / std::sqrt(norm2);
            }
            break;
        }
        case DirectionMode::hypercube: {
            const double bound = std::sqrt(2.0 * std::log(static_cast<double>(M))) / std::sqrt(d);
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            for (int m = 0; m < M; ++m) {
                bool accepted = false;
                for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
                    Eigen::VectorXd v(d);
                    for (int i = 0; i < d; ++i) v(i) = rng.sign() * scale;
                    accepted = true;
                    for (int j = 0; j < m; ++j) {
                        if (std::abs(out.directions.row(j).dot(v.transpose())) > bound) {
                            accepted = false;
                            break;
                        }
                    }
                    if (accepted) out.directions.row(m) = v.transpose();
                }
                if (!accepted)
                    throw std::runtime_error("gen_directions: overlap target unreachable");
            }
            break;
        }
    }
    out.max_overlap = out.recompute_max_overlap();
    return out;
}

DiversityReport diversity_check(const DirectionSet& dirs, double c_v) {
    if (c_v <= 0.0) throw std::invalid_argument("diversity_check: c_v must be positive");
    DiversityReport rep;
    const double inv_overlap = dirs.max_overlap > 0.0
                                   ? 1.0 / dirs.max_overlap
                                   : std::numeric_limits<double>::infinity();
    rep.bound = c_v * std::max(inv_overlap, std::sqrt(static_cast<double>(dirs.dim())));
    rep.ok = static_cast<double>(dirs.count()) <= rep.bound;
    return rep;
}

OrthonormalBasis orthonormalize(const DirectionSet& dirs) {
    const int M = dirs.count();
    const double overlap = dirs.max_overlap;
    if (overlap > 0.5 / M)
        throw std::invalid_argument("orthonormalize: precondition violated, max_overlap > 1/(2M)");

    OrthonormalBasis out;
    out.basis = Eigen::MatrixXd::Zero(M, dirs.dim());
    out.coeffs = Eigen::MatrixXd::Zero(M, M);

    for (int m = 0; m < M; ++m) {
        // Coefficient vector of the residual in terms of v_1..v_m; two
        // Gram-Schmidt passes keep the basis orthonormal to ~1e-15.
        Eigen::VectorXd c = Eigen::VectorXd::Zero(M);
        c(m) = 1.0;
        Eigen::VectorXd u = dirs.directions.row(m).transpose();
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k < m; ++k) {
                const double proj = out.basis.row(k).dot(u.transpose());
                u -= proj * out.basis.row(k).transpose();
                c -= proj * out.coeffs.row(k).transpose();
            }
        }
        const double norm = u.norm();
        if (norm < 1e-8)
            throw std::runtime_error("orthonormalize: rank deficiency during elimination");
        out.basis.row(m) = u.transpose() / norm;
        out.coeffs.row(m) = c.transpose() / norm;

        // Bounds from the construction; violations indicate an input outside
        // the regime where the coefficients are meaningful.
        for (int k = 0; k < m; ++k) {
            if (std::abs(out.coeffs(m, k)) > 4.0 * overlap + 1e-12)
                throw std::runtime_error("orthonormalize: off-diagonal coefficient bound violated");
        }
        if (std::abs(1.0 - out.coeffs(m, m)) > 20.0 * M * overlap + 1e-12)
            throw std::runtime_error("orthonormalize: diagonal coefficient bound violated");
    }
    return out;
}

AdditiveTarget make_target(DirectionSet dirs, std::vector<HermiteSeries> links,
                           double noise_std, bool force_mixed) {
    if (static_cast<int>(links.size()) != dirs.count())
        throw std::invalid_argument("make_target: link count must match direction count");
    if (noise_std < 0.0) throw std::invalid_argument("make_target: negative noise level");

    AdditiveTarget target;
    target.noise_std = noise_std;
    target.dirs = std::move(dirs);

    int min_p = 0;
    int max_degree = 0;
    for (auto& link : links) {
        if (link.coeff(0) != 0.0)
            throw std::invalid_argument("make_target: link has a nonzero constant term");
        const double moment = link.second_moment();
        if (moment <= 0.0) throw std::invalid_argument("make_target: link is identically zero");
        link = link.scaled(1.0 / std::sqrt(moment));
        const int p = information_exponent(link);
        if (min_p != 0 && p != min_p && !force_mixed)
            throw std::invalid_argument("make_target: links have mixed information exponents");
        min_p = (min_p == 0) ? p : std::min(min_p, p);
        max_degree = std::max(max_degree, link.degree());
    }
    target.links = std::move(links);
    target.info_exponent = min_p;
    target.max_degree = max_degree;
    return target;
}

double target_eval(const AdditiveTarget& target, const Eigen::VectorXd& x) {
    const int M = target.task_count();
    double acc = 0.0;
    for (int m = 0; m < M; ++m)
        acc += series_eval(target.links[static_cast<size_t>(m)], target.dirs.directions.row(m).dot(x));
    return acc / std::sqrt(static_cast<double>(M));
}

SampleBatch sample_batch(const AdditiveTarget& target, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_batch: n must be >= 1");
    const int d = target.dim();
    SampleBatch batch;
    batch.seed = seed;
    batch.xs.resize(n, d);
    batch.ys.resize(n);
    RandomStream rng(seed);
    Eigen::VectorXd x(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) x(j) = rng.gaussian();
        batch.xs.row(i) = x.transpose();
        double y = target_eval(target, x);
        if (target.noise_std > 0.0) y += target.noise_std * rng.gaussian();
        batch.ys(i) = y;
    }
    return batch;
}

double second_moment_estimate(const AdditiveTarget& target, int n, std::uint64_t seed) {
    if (n < 10000) throw std::invalid_argument("second_moment_estimate: n must be >= 10^4");
    RandomStream rng(seed);
    Eigen::VectorXd x(target.dim());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < target.dim(); ++j) x(j) = rng.gaussian();
        const double v = target_eval(target, x);
        acc += v * v;
    }
    return acc / n;
}

std::string AdditiveTarget::to_json() const {
    nlohmann::json j;
    j["d"] = dim();
    j["M"] = task_count();
    j["noise_std"] = noise_std;
    j["mode"] = to_string(dirs.mode);
    std::vector<double> flat(static_cast<size_t>(dim()) * static_cast<size_t>(task_count()));
    for (int m = 0; m < task_count(); ++m)
        for (int i = 0; i < dim(); ++i)
            flat[static_cast<size_t>(m) * dim() + i] = dirs.directions(m, i);
    j["directions"] = flat;
    nlohmann::json links_json = nlohmann::json::array();
    for (const auto& link : links) links_json.push_back(link.coeffs);
    j["links"] = links_json;
    return j.dump(2);
}

AdditiveTarget AdditiveTarget::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    const int d = j.at("d").get<int>();
    const int M = j.at("M").get<int>();
    DirectionSet dirs;
    dirs.mode = direction_mode_from_string(j.at("mode").get<std::string>());
    dirs.directions.resize(M, d);
    const auto flat = j.at("directions").get<std::vector<double>>();
    if (static_cast<int>(flat.size()) != M * d)
        throw std::invalid_argument("AdditiveTarget: direction matrix size mismatch");
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < d; ++i) dirs.directions(m, i) = flat[static_cast<size_t>(m) * d + i];
    dirs.max_overlap = dirs.recompute_max_overlap();
    std::vector<HermiteSeries> links;
    for (const auto& coeffs : j.at("links")) links.emplace_back(coeffs.get<std::vector<double>>());
    return make_target(std::move(dirs), std::move(links), j.at("noise_std").get<double>());
}

void SampleBatch::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("SampleBatch: cannot open " + path);
    const int d = static_cast<int>(xs.cols());
    for (int j = 0; j < d; ++j) out << "x_" << j << ",";
    out << "y\n";
    char buf[32];
    for (int i = 0; i < xs.rows(); ++i) {
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", xs(i, j));
            out << buf << ",";
        }
        std::snprintf(buf, sizeof(buf), "%.17g", ys(i));
        out << buf << "\n";
    }
}

}  // namespace additive
