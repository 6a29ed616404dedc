#ifndef DQUAD_TESTS_SUPPORT_HPP
#define DQUAD_TESTS_SUPPORT_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>

namespace dquad::testing {

inline std::mt19937_64& rng(std::uint64_t seed = 12345)
{
    static std::mt19937_64 eng(seed);
    return eng;
}

inline double uniform(double lo, double hi, std::mt19937_64& eng)
{
    return std::uniform_real_distribution<double>(lo, hi)(eng);
}

inline Eigen::VectorXd random_vector(Eigen::Index n, double lo, double hi, std::mt19937_64& eng)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = uniform(lo, hi, eng);
    return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& eng)
{
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = uniform(-1.0, 1.0, eng);
    return m;
}

/// Central-difference Jacobian of f at x.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6)
{
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd J(f0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

inline std::string data_path(const std::string& name)
{
    return std::string(DQUAD_DATA_DIR) + "/" + name;
}

} // namespace dquad::testing

#endif // DQUAD_TESTS_SUPPORT_HPP
