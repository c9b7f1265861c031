#include "additive/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "additive/rng.hpp"
#include "json.hpp"

namespace additive {

std::string to_string(ActivationKind kind) {
    return kind == ActivationKind::relu ? "relu" : "randomized_poly";
}

ActivationKind activation_kind_from_string(const std::string& s) {
    if (s == "relu") return ActivationKind::relu;
    if (s == "randomized_poly") return ActivationKind::randomized_poly;
    throw std::invalid_argument("unknown activation kind: " + s);
}

std::string to_string(PolyNormalization norm) {
    return norm == PolyNormalization::sqrt_i ? "sqrt_i" : "sqrt_factorial";
}

PolyNormalization poly_normalization_from_string(const std::string& s) {
    if (s == "sqrt_i") return PolyNormalization::sqrt_i;
    if (s == "sqrt_factorial") return PolyNormalization::sqrt_factorial;
    throw std::invalid_argument("unknown poly normalization: " + s);
}

namespace {

double poly_norm_factor(PolyNormalization norm, int i) {
    if (norm == PolyNormalization::sqrt_i) return std::sqrt(static_cast<double>(i));
    double f = 1.0;
    for (int k = 2; k <= i; ++k) f *= static_cast<double>(k);
    return std::sqrt(f);
}

}  // namespace

double NetworkState::activation(int j, double z) const {
    if (act.kind == ActivationKind::relu) return z > 0.0 ? z : 0.0;
    double acc = 0.0;
    for (int i = act.p; i <= act.q; ++i) {
        const int e = eps(j, i - act.p);
        if (e == 0) continue;
        acc += static_cast<double>(e) * he_eval(i, z) / poly_norm_factor(act.norm, i);
    }
    return acc;
}

double NetworkState::activation_derivative(int j, double z) const {
    if (act.kind == ActivationKind::relu) return z > 0.0 ? 1.0 : 0.0;
    double acc = 0.0;
    for (int i = act.p; i <= act.q; ++i) {
        const int e = eps(j, i - act.p);
        if (e == 0) continue;
        acc += static_cast<double>(e) * static_cast<double>(i) * he_eval(i - 1, z) /
               poly_norm_factor(act.norm, i);
    }
    return acc;
}

NetworkState init_network(int J, int d, const ActivationSpec& act, double C_b,
                          std::uint64_t seed, BiasInit bias_init) {
    if (J < 1 || d < 1) throw std::invalid_argument("init_network: J and d must be >= 1");
    if (C_b < 0.0) throw std::invalid_argument("init_network: C_b must be >= 0");
    if (act.kind == ActivationKind::randomized_poly && (act.p < 1 || act.q < act.p))
        throw std::invalid_argument("init_network: randomized_poly needs 1 <= p <= q");

    NetworkState net;
    net.J = J;
    net.d = d;
    net.act = act;
    net.C_b = C_b;
    net.W.resize(J, d);
    net.a.resize(J);
    net.b = Eigen::VectorXd::Zero(J);

    RandomStream rng(seed);
    for (int j = 0; j < J; ++j) {
        double norm2 = 0.0;
        do {
            for (int i = 0; i < d; ++i) {
                const double g = rng.gaussian();
                net.W(j, i) = g;
            }
            norm2 = net.W.row(j).squaredNorm();
        } while (norm2 == 0.0);
        net.W.row(j) /= std::sqrt(norm2);
    }
    for (int j = 0; j < J; ++j) net.a(j) = rng.sign();
    if (bias_init == BiasInit::uniform && C_b > 0.0)
        for (int j = 0; j < J; ++j) net.b(j) = rng.uniform(-C_b, C_b);
    if (act.kind == ActivationKind::randomized_poly) {
        const int width = act.q - act.p + 1;
        net.eps.resize(J, width);
        for (int j = 0; j < J; ++j)
            for (int i = 0; i < width; ++i)
                net.eps(j, i) = static_cast<std::int8_t>(rng.ternary_sign());
    }
    return net;
}

double forward(const NetworkState& net, const Eigen::VectorXd& x) {
    const Eigen::VectorXd z = net.W * x + net.b;
    double acc = 0.0;
    for (int j = 0; j < net.J; ++j) acc += net.a(j) * net.activation(j, z(j));
    return acc / static_cast<double>(net.J);
}

HermiteSeries neuron_expansion(const NetworkState& net, int j, int cutoff_q) {
    if (j < 0 || j >= net.J) throw std::invalid_argument("neuron_expansion: index out of range");
    if (cutoff_q < 2) throw std::invalid_argument("neuron_expansion: cutoff must be >= 2");
    if (net.act.kind == ActivationKind::relu)
        return relu_shifted_coeffs(net.b(j), cutoff_q).scaled(net.a(j));

    std::vector<double> base(static_cast<size_t>(net.act.q) + 1, 0.0);
    for (int i = net.act.p; i <= net.act.q; ++i) {
        const int e = net.eps(j, i - net.act.p);
        if (e != 0)
            base[static_cast<size_t>(i)] = static_cast<double>(e) / poly_norm_factor(net.act.norm, i);
    }
    HermiteSeries shifted = series_shift(HermiteSeries(std::move(base)), net.b(j)).scaled(net.a(j));
    if (shifted.degree() > cutoff_q) {
        shifted.coeffs.resize(static_cast<size_t>(cutoff_q) + 1);
        shifted = HermiteSeries(shifted.coeffs);
    }
    return shifted;
}

Eigen::MatrixXd descent_path_margins(const NetworkState& net, const AdditiveTarget& target) {
    const int p = target.info_exponent;
    const int q = target.max_degree;
    const int M = target.task_count();
    Eigen::MatrixXd margins(net.J, M);
    for (int j = 0; j < net.J; ++j) {
        const HermiteSeries beta = neuron_expansion(net, j, std::max(q, 2));
        for (int m = 0; m < M; ++m) {
            const HermiteSeries& alpha = target.links[static_cast<size_t>(m)];
            double margin = alpha.coeff(p) * beta.coeff(p);
            for (int i = p + 1; i <= q; ++i) {
                const double s = alpha.coeff(i) * beta.coeff(i);
                if (s < 0.0) margin = std::min(margin, s);
            }
            margins(j, m) = margin;
        }
    }
    return margins;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> descent_path_check(
    const NetworkState& net, const AdditiveTarget& target) {
    const Eigen::MatrixXd margins = descent_path_margins(net, target);
    return margins.array() > 0.0;
}

namespace {

constexpr char kMagic[4] = {'A', 'L', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

void save_network(const NetworkState& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_network: cannot open " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::int64_t>(net.J));
    write_pod(out, static_cast<std::int64_t>(net.d));
    write_pod(out, static_cast<std::uint8_t>(net.act.kind));
    write_pod(out, static_cast<std::uint8_t>(net.act.norm));
    write_pod(out, static_cast<std::int32_t>(net.act.p));
    write_pod(out, static_cast<std::int32_t>(net.act.q));
    write_pod(out, net.C_b);
    for (int j = 0; j < net.J; ++j)
        for (int i = 0; i < net.d; ++i) write_pod(out, net.W(j, i));
    for (int j = 0; j < net.J; ++j) write_pod(out, net.a(j));
    for (int j = 0; j < net.J; ++j) write_pod(out, net.b(j));
    if (net.act.kind == ActivationKind::randomized_poly) {
        const int width = net.act.q - net.act.p + 1;
        for (int j = 0; j < net.J; ++j)
            for (int i = 0; i < width; ++i) write_pod(out, net.eps(j, i));
    }
    if (!out) throw std::runtime_error("save_network: write failed for " + path);

    nlohmann::json sidecar;
    sidecar["J"] = net.J;
    sidecar["d"] = net.d;
    sidecar["activation"] = to_string(net.act.kind);
    sidecar["C_b"] = net.C_b;
    if (net.act.kind == ActivationKind::randomized_poly) {
        sidecar["p"] = net.act.p;
        sidecar["q"] = net.act.q;
        sidecar["normalization"] = to_string(net.act.norm);
    }
    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("save_network: cannot open " + path + ".json");
    side << sidecar.dump(2) << "\n";
}

NetworkState load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_network: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_network: bad magic in " + path);
    std::uint32_t version = 0;
    read_pod(in, version);
    if (version != kVersion) throw std::runtime_error("load_network: unsupported version");
    std::int64_t J = 0, d = 0;
    read_pod(in, J);
    read_pod(in, d);
    std::uint8_t kind = 0, norm = 0;
    read_pod(in, kind);
    read_pod(in, norm);
    std::int32_t p = 0, q = 0;
    read_pod(in, p);
    read_pod(in, q);

    NetworkState net;
    net.J = static_cast<int>(J);
    net.d = static_cast<int>(d);
    net.act.kind = static_cast<ActivationKind>(kind);
    net.act.norm = static_cast<PolyNormalization>(norm);
    net.act.p = p;
    net.act.q = q;
    read_pod(in, net.C_b);
    net.W.resize(net.J, net.d);
    net.a.resize(net.J);
    net.b.resize(net.J);
    for (int j = 0; j < net.J; ++j)
        for (int i = 0; i < net.d; ++i) read_pod(in, net.W(j, i));
    for (int j = 0; j < net.J; ++j) read_pod(in, net.a(j));
    for (int j = 0; j < net.J; ++j) read_pod(in, net.b(j));
    if (net.act.kind == ActivationKind::randomized_poly) {
        const int width = net.act.q - net.act.p + 1;
        net.eps.resize(net.J, width);
        for (int j = 0; j < net.J; ++j)
            for (int i = 0; i < width; ++i) read_pod(in, net.eps(j, i));
    }
    if (!in) throw std::runtime_error("load_network: truncated file " + path);
    return net;
}

}  // namespace additive
