#include "tamed/oracles.hpp"

#include "tamed/error.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

namespace tamed::oracle {

std::vector<double> fractional_ou_exact(const FbmPath& path, double x0, double theta) {
    if (path.dim != 1) {
        throw Error(ErrorKind::InvalidArgument, "fractional OU oracle is one-dimensional");
    }
    const std::size_t steps = path.n_steps;
    const double h = path.horizon / static_cast<double>(steps);
    const double decay = std::exp(-theta * h);

    std::vector<double> x(steps + 1);
    double integral = 0.0;  // int_0^{t_k} e^{-theta (t_k - s)} B_s ds
    x[0] = x0;
    for (std::size_t k = 0; k < steps; ++k) {
        integral = decay * integral + 0.5 * h * (decay * path.values[k] + path.values[k + 1]);
        const double t = path.time(k + 1);
        x[k + 1] = x0 * std::exp(-theta * t) + path.values[k + 1] - theta * integral;
    }
    return x;
}

std::vector<double> textbook_euler(const VectorField& field, const FbmPath& path, std::span<const double> x0) {
    const std::size_t d = path.dim;
    if (x0.size() != d) {
        throw Error(ErrorKind::InvalidArgument, "x0 dimension does not match the path");
    }
    const double h = path.horizon / static_cast<double>(path.n_steps);
    std::vector<double> x((path.n_steps + 1) * d);
    std::vector<double> current(x0.begin(), x0.end());
    std::vector<double> f(d);
    std::copy(current.begin(), current.end(), x.begin());
    for (std::size_t k = 0; k < path.n_steps; ++k) {
        field(current, f);
        for (std::size_t j = 0; j < d; ++j) {
            current[j] = current[j] + h * f[j] + (path.at(k + 1, j) - path.at(k, j));
            x[(k + 1) * d + j] = current[j];
        }
    }
    return x;
}

namespace {

template <std::size_t N>
class Unrolled {
public:
    Unrolled(const MollifiedDrift& drift, const FbmPath& path, std::span<const double> x0)
        : drift_(drift), path_(path), h_(1.0 / static_cast<double>(N)), d_(path.dim) {
        states_[0].assign(x0.begin(), x0.end());
    }

    std::vector<double> solve() {
        expand(std::make_index_sequence<N>{});
        std::vector<double> out;
        out.reserve((N + 1) * d_);
        for (const auto& s : states_) {
            out.insert(out.end(), s.begin(), s.end());
        }
        return out;
    }

private:
    std::vector<double> drift_at(std::size_t j) const {
        std::vector<double> b(d_);
        drift_.eval(states_[j], b);
        return b;
    }

    // X_K = x0 + (0 + h b(X_0) + ... + h b(X_{K-1})) + B_K
    template <std::size_t K, std::size_t... J>
    void state(std::index_sequence<J...>) {
        const std::array<std::vector<double>, sizeof...(J)> b{drift_at(J)...};
        states_[K].resize(d_);
        for (std::size_t c = 0; c < d_; ++c) {
            states_[K][c] = states_[0][c] + (0.0 + ... + (h_ * b[J][c])) + path_.at(K, c);
        }
    }

    template <std::size_t... K>
    void expand(std::index_sequence<K...>) {
        (state<K + 1>(std::make_index_sequence<K + 1>{}), ...);
    }

    const MollifiedDrift& drift_;
    const FbmPath& path_;
    double h_;
    std::size_t d_;
    std::array<std::vector<double>, N + 1> states_;
};

}  // namespace

std::vector<double> small_grid_bruteforce(const MollifiedDrift& drift, const FbmPath& path,
                                          std::span<const double> x0) {
    if (path.dim != drift.dim() || x0.size() != path.dim) {
        throw Error(ErrorKind::InvalidArgument, "dimension mismatch");
    }
    switch (path.n_steps) {
        case 1: return Unrolled<1>(drift, path, x0).solve();
        case 2: return Unrolled<2>(drift, path, x0).solve();
        case 3: return Unrolled<3>(drift, path, x0).solve();
        case 4: return Unrolled<4>(drift, path, x0).solve();
        case 5: return Unrolled<5>(drift, path, x0).solve();
        case 6: return Unrolled<6>(drift, path, x0).solve();
        case 7: return Unrolled<7>(drift, path, x0).solve();
        case 8: return Unrolled<8>(drift, path, x0).solve();
        default:
            throw Error(ErrorKind::InvalidArgument,
                        "brute force oracle supports 1..8 steps, got " + std::to_string(path.n_steps));
    }
}

}  // namespace tamed::oracle
