#ifndef DQUAD_GAUSS_NEWTON_HPP
#define DQUAD_GAUSS_NEWTON_HPP

#include "dquad/moment_system.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <vector>

namespace dquad {

/// A priori regularization table: lambda as a function of ||R||.
struct LambdaBand
{
    double residual_lo;
    double residual_hi;
    double lambda;
};

struct SolverConfig
{
    double tol = 1e-8;
    int max_iters = 1000;
    int lambda_update_period = 30;
    std::optional<double> lambda_override;
    /// Optional lookup by ||R||; consulted before the spectrum when it covers
    /// the current residual.
    std::vector<LambdaBand> lambda_schedule;
    /// When positive, lambda = factor * ||R~|| at every iteration.
    double lambda_residual_factor = 0.25;
    /// Scale by ||R|| instead of ||R~||.
    bool lambda_from_moments = false;
    double penalty_A = 1e3;
    /// Consecutive iterations with eta < tol and ||R~|| >= 10 tol before the
    /// run counts as stagnated.
    int stagnation_window = 5;
    /// A run also counts as stagnated when ||R~|| fails to halve over this many
    /// iterations (0 disables).
    int progress_window = 400;
    /// ||R~|| below which the singular-value-shifted step replaces Tikhonov.
    double shift_threshold = 1e-2;
    /// Normal-equation steps without any SVD.
    bool high_dim_mode = false;
    /// Checked once per iteration; a stop request ends the run as cancelled.
    std::stop_token stop;

    void validate() const
    {
        if (!(tol > 0.0))
            throw std::invalid_argument("SolverConfig: tol must be positive");
        if (max_iters < 1)
            throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
        if (lambda_update_period < 1)
            throw std::invalid_argument("SolverConfig: lambda_update_period must be >= 1");
        if (lambda_override && *lambda_override < 0.0)
            throw std::invalid_argument("SolverConfig: lambda must be >= 0");
    }
};

enum class SolveOutcome { converged, stagnated, iter_cap, cancelled };

inline std::string outcome_name(SolveOutcome o)
{
    switch (o) {
    case SolveOutcome::converged: return "converged";
    case SolveOutcome::stagnated: return "stagnated";
    case SolveOutcome::iter_cap: return "iter_cap";
    case SolveOutcome::cancelled: return "cancelled";
    }
    return "unknown";
}

struct IterationRecord
{
    double res_aug;  // ||R~|| after the step
    double res;      // ||R|| after the step
    double eta;      // Newton decrement of the step
    double c;        // penalty constant used for the step
    double lambda;   // regularization used for the step
};

struct SolveTrace
{
    double initial_res_aug = 0.0;
    double initial_res = 0.0;
    std::vector<IterationRecord> records;
    SolveOutcome outcome = SolveOutcome::iter_cap;
    /// Set when some step produced a negative eta^2 that was clamped to zero.
    bool negative_decrement = false;

    std::size_t iterations() const { return records.size(); }
    double final_res_aug() const { return records.empty() ? initial_res_aug : records.back().res_aug; }
    double final_res() const { return records.empty() ? initial_res : records.back().res; }
};

/// CSV with header "iter,res_aug,res,eta,c,lambda"; iteration 0 is the start point.
inline void write_trace_csv(std::ostream& out, const SolveTrace& t)
{
    out.precision(17);
    out << "iter,res_aug,res,eta,c,lambda\n";
    out << 0 << ',' << t.initial_res_aug << ',' << t.initial_res << ",,,\n";
    for (std::size_t k = 0; k < t.records.size(); ++k) {
        const auto& r = t.records[k];
        out << k + 1 << ',' << r.res_aug << ',' << r.res << ',' << r.eta << ',' << r.c << ',' << r.lambda << '\n';
    }
}

namespace detail {

inline double rank_cutoff(const Eigen::VectorXd& s, Eigen::Index rows, Eigen::Index cols)
{
    if (s.size() == 0)
        return 0.0;
    return s(0) * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

template <typename Filter>
Eigen::VectorXd filtered_step(const Eigen::BDCSVD<Eigen::MatrixXd>& svd, const Eigen::VectorXd& R, Eigen::Index rows,
                              Eigen::Index cols, Filter filter)
{
    const Eigen::VectorXd& s = svd.singularValues();
    const double cut = rank_cutoff(s, rows, cols);
    const Eigen::VectorXd utr = svd.matrixU().transpose() * R;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut)
            coef(i) = filter(s(i)) * utr(i);
    return svd.matrixV() * coef;
}

} // namespace detail

inline Eigen::BDCSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& J)
{
    Eigen::BDCSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw std::runtime_error("SVD of the augmented Jacobian failed");
    return svd;
}

/// Tikhonov step sum_i rho_i (u_i^T R / sigma_i) v_i with rho_i = s^2/(s^2+lambda^2).
inline Eigen::VectorXd tikhonov_step(const Eigen::BDCSVD<Eigen::MatrixXd>& svd, const Eigen::VectorXd& R, double lambda,
                                     Eigen::Index rows, Eigen::Index cols)
{
    if (lambda < 0.0)
        throw std::invalid_argument("tikhonov_step: lambda must be >= 0");
    const double l2 = lambda * lambda;
    return detail::filtered_step(svd, R, rows, cols, [l2](double s) { return s / (s * s + l2); });
}

inline Eigen::VectorXd tikhonov_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& R, double lambda)
{
    return tikhonov_step(thin_svd(J), R, lambda, J.rows(), J.cols());
}

/// Same Tikhonov step from a QR factorization of [J; lambda I], without an
/// SVD. Needs lambda > 0.
inline Eigen::VectorXd tikhonov_step_qr(const Eigen::MatrixXd& J, const Eigen::VectorXd& R, double lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("tikhonov_step_qr: lambda must be positive");
    const auto m = J.rows();
    const auto n = J.cols();
    Eigen::MatrixXd A(m + n, n);
    A.topRows(m) = J;
    A.bottomRows(n) = lambda * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + n);
    b.head(m) = R;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return qr.solve(b);
}

/// Shifted step sum_i (u_i^T R / (sigma_i + lambda)) v_i.
inline Eigen::VectorXd shifted_step(const Eigen::BDCSVD<Eigen::MatrixXd>& svd, const Eigen::VectorXd& R, double lambda,
                                    Eigen::Index rows, Eigen::Index cols)
{
    if (lambda < 0.0)
        throw std::invalid_argument("shifted_step: lambda must be >= 0");
    return detail::filtered_step(svd, R, rows, cols, [lambda](double s) { return 1.0 / (s + lambda); });
}

inline Eigen::VectorXd shifted_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& R, double lambda)
{
    return shifted_step(thin_svd(J), R, lambda, J.rows(), J.cols());
}

/// (J^T J + lambda I)^{-1} J^T R without an SVD.
inline Eigen::VectorXd normal_equation_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& R, double lambda)
{
    if (lambda < 0.0)
        throw std::invalid_argument("normal_equation_step: lambda must be >= 0");
    Eigen::MatrixXd A = J.transpose() * J;
    A.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const double pivot_floor = lambda > 0.0 ? 0.0 : 1e-14 * A.diagonal().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > pivot_floor).all())
        throw std::runtime_error("normal_equation_step: shifted normal matrix is not positive definite");
    Eigen::VectorXd step = ldlt.solve(J.transpose() * R);
    if (!step.allFinite())
        throw std::runtime_error("normal_equation_step: linear solve failed");
    return step;
}

/// Normal-equation step for J~ = [J; C] where C^T C is diagonal (box and
/// weight penalties): solves (J^T J + D) x = J~^T R~ with D = C^T C + lambda I
/// through the M x M system (I + J D^{-1} J^T), which is what makes
/// thousands of decision variables affordable.
inline Eigen::VectorXd normal_equation_step_structured(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& R,
                                                       const Eigen::VectorXd& penalty_diag_sq,
                                                       const Eigen::VectorXd& penalty_rhs, double lambda)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("normal_equation_step_structured: lambda must be positive");
    const Eigen::VectorXd Dinv = (penalty_diag_sq.array() + lambda).inverse().matrix();
    const Eigen::VectorXd g = Eigen::VectorXd(J.transpose() * R) + penalty_rhs;
    // Woodbury: (D + J^T J)^{-1} g = D^{-1} g - D^{-1} J^T (I + J D^{-1} J^T)^{-1} J D^{-1} g
    const Eigen::VectorXd Dg = Dinv.cwiseProduct(g);
    Eigen::SparseMatrix<double> JD = J * Dinv.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd S = Eigen::MatrixXd(JD * Eigen::SparseMatrix<double>(JD.transpose()));
    S.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("normal_equation_step_structured: factorization failed");
    const Eigen::VectorXd y = llt.solve(Eigen::VectorXd(J * Dg));
    return Dg - Dinv.cwiseProduct(Eigen::VectorXd(J.transpose() * y));
}

/// Regularization from the singular spectrum (sorted decreasing): the value
/// at the first index where the second difference of log(sigma) exceeds five
/// times the median absolute first difference, i.e. the first knee where a
/// drop flattens out. Falls back to the geometric mean of the extremes.
/// The result always lies in [sigma_min, sigma_max] of the positive values.
inline double select_lambda(const std::vector<double>& sigma)
{
    std::vector<double> s;
    for (double v : sigma)
        if (v > 0.0 && std::isfinite(v))
            s.push_back(v);
    if (s.empty())
        return 0.0;
    const double fallback = std::sqrt(s.front() * s.back());
    if (s.size() < 3)
        return fallback;
    std::vector<double> l(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        l[i] = std::log(s[i]);
    std::vector<double> d1(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
        d1[i] = std::abs(l[i + 1] - l[i]);
    std::vector<double> tmp = d1;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2), tmp.end());
    double med = tmp[tmp.size() / 2];
    if (tmp.size() % 2 == 0) {
        const double lower = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2));
        med = 0.5 * (med + lower);
    }
    const double threshold = 5.0 * med;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const double curv = l[i - 1] - 2.0 * l[i] + l[i + 1];
        if (curv > threshold)
            return s[i];
    }
    return fallback;
}

inline std::optional<double> scheduled_lambda(const std::vector<LambdaBand>& schedule, double residual_norm)
{
    for (const auto& b : schedule)
        if (residual_norm >= b.residual_lo && residual_norm <= b.residual_hi)
            return b.lambda;
    return std::nullopt;
}

/// The illustrative bands lambda = 50 on [200, 500] and lambda = 10 on [20, 200].
inline std::vector<LambdaBand> illustrative_lambda_schedule()
{
    return {{200.0, 500.0, 50.0}, {20.0, 200.0, 10.0}};
}

struct NewtonDecrement
{
    double value = 0.0;
    bool clamped = false;
};

/// eta = (dd^T J~^T R~)^{1/2}; a negative inner product yields 0 and sets clamped.
inline NewtonDecrement newton_decrement(const Eigen::VectorXd& step, const Eigen::VectorXd& JtR)
{
    const double v = step.dot(JtR);
    if (v < 0.0)
        return {0.0, true};
    return {std::sqrt(v), false};
}

inline NewtonDecrement newton_decrement(const Eigen::VectorXd& step, const Eigen::MatrixXd& J, const Eigen::VectorXd& R)
{
    return newton_decrement(step, Eigen::VectorXd(J.transpose() * R));
}

struct SolveResult
{
    DecisionVector point;
    SolveTrace trace;
};

namespace detail {

struct Evaluation
{
    Eigen::VectorXd R;
    Eigen::VectorXd P;
    double res = 0.0;
    double res_aug = 0.0;
    double c = 0.0;
};

inline Evaluation evaluate(const MomentSystem& sys, const DecisionVector& dv, double c_floor, double A, double c_cap)
{
    Evaluation e;
    e.R = sys.residual(dv);
    e.P = sys.penalties(dv);
    e.res = e.R.norm();
    e.c = std::min(c_cap, std::max(c_floor, penalty_constant(e.res, A)));
    e.res_aug = std::sqrt(e.res * e.res + e.c * e.c * e.P.squaredNorm());
    return e;
}

inline bool penalty_jacobian_is_diagonal(const Eigen::SparseMatrix<double>& dP)
{
    for (Eigen::Index k = 0; k < dP.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(dP, k); it; ++it)
            if (it.row() != it.col())
                return false;
    return true;
}

} // namespace detail

/// Penalized, regularized Gauss-Newton iteration d <- d - dd.
///
/// Stops when ||R~|| < tol (converged), when the Newton decrement has stayed
/// below tol while ||R~|| >= 10 tol for stagnation_window steps or progress
/// stalls (stagnated), or after max_iters steps.
inline SolveResult solve(const MomentSystem& sys, DecisionVector d0, const SolverConfig& cfg)
{
    cfg.validate();
    if (d0.dim() != sys.dim())
        throw std::invalid_argument("solve: decision vector does not match the system");

    SolveResult out;
    out.point = std::move(d0);
    auto& dv = out.point;
    auto& trace = out.trace;

    // Past 1/tol the penalty weight only demands P below tol * ||R||, which
    // stalls nodes sitting a hair inside an infeasible region.
    const double c_cap = std::max(cfg.penalty_A, 1.0 / cfg.tol);
    double c_floor = 0.0;
    auto ev = detail::evaluate(sys, dv, c_floor, cfg.penalty_A, c_cap);
    if (!std::isfinite(ev.res_aug))
        throw std::runtime_error("solve: non-finite residual at the initial point");
    c_floor = ev.c;
    trace.initial_res_aug = ev.res_aug;
    trace.initial_res = ev.res;
    if (ev.res_aug < cfg.tol) {
        trace.outcome = SolveOutcome::converged;
        return out;
    }

    double lambda = cfg.lambda_override.value_or(0.0);
    int low_eta_run = 0;
    trace.outcome = SolveOutcome::iter_cap;

    for (int k = 0; k < cfg.max_iters; ++k) {
        if (cfg.stop.stop_requested()) {
            trace.outcome = SolveOutcome::cancelled;
            break;
        }
        const double c = ev.c;
        Eigen::VectorXd Raug(ev.R.size() + ev.P.size());
        Raug << ev.R, c * ev.P;
        const Eigen::SparseMatrix<double> dP = sys.penalty_jacobian(dv);

        Eigen::VectorXd step;
        Eigen::VectorXd JtR;
        if (cfg.high_dim_mode) {
            const Eigen::SparseMatrix<double> J = sys.jacobian_sparse(dv);
            JtR = Eigen::VectorXd(J.transpose() * ev.R) + c * c * Eigen::VectorXd(dP.transpose() * ev.P);
            if (cfg.lambda_override)
                lambda = *cfg.lambda_override;
            else if (auto s = scheduled_lambda(cfg.lambda_schedule, ev.res))
                lambda = *s;
            else
                lambda = std::max(1e-12, (cfg.lambda_residual_factor > 0.0 ? cfg.lambda_residual_factor : 0.25) * ev.res_aug);
            // Damping mu = lambda on the normal matrix (Levenberg-Marquardt with
            // mu proportional to ||R~||); lambda^2 under-damps near the solution.
            const double lam_normal = std::max(lambda, 1e-14);
            if (detail::penalty_jacobian_is_diagonal(dP)) {
                Eigen::VectorXd diag = Eigen::VectorXd(dP.diagonal());
                step = normal_equation_step_structured(J, ev.R, (c * diag).cwiseAbs2(),
                                                       c * c * diag.cwiseProduct(ev.P), lam_normal);
            } else {
                Eigen::MatrixXd Jaug(J.rows() + dP.rows(), J.cols());
                Jaug.topRows(J.rows()) = Eigen::MatrixXd(J);
                Jaug.bottomRows(dP.rows()) = c * Eigen::MatrixXd(dP);
                step = normal_equation_step(Jaug, Raug, lam_normal);
            }
        } else {
            Eigen::MatrixXd Jaug(ev.R.size() + ev.P.size(), static_cast<Eigen::Index>(dv.size()));
            Jaug.topRows(ev.R.size()) = sys.jacobian(dv);
            Jaug.bottomRows(ev.P.size()) = c * Eigen::MatrixXd(dP);
            const bool shifted = ev.res_aug < cfg.shift_threshold;
            std::optional<Eigen::BDCSVD<Eigen::MatrixXd>> svd;
            if (cfg.lambda_override) {
                lambda = *cfg.lambda_override;
            } else if (auto s = scheduled_lambda(cfg.lambda_schedule, ev.res)) {
                lambda = *s;
            } else if (cfg.lambda_residual_factor > 0.0) {
                lambda = cfg.lambda_residual_factor * (cfg.lambda_from_moments ? ev.res : ev.res_aug);
            } else if (k % cfg.lambda_update_period == 0) {
                svd = thin_svd(Jaug);
                const Eigen::VectorXd& sv = svd->singularValues();
                lambda = select_lambda(std::vector<double>(sv.data(), sv.data() + sv.size()));
            }
            if (shifted || lambda == 0.0 || (svd && !shifted)) {
                if (!svd)
                    svd = thin_svd(Jaug);
                step = shifted ? shifted_step(*svd, Raug, lambda, Jaug.rows(), Jaug.cols())
                               : tikhonov_step(*svd, Raug, lambda, Jaug.rows(), Jaug.cols());
            } else {
                step = tikhonov_step_qr(Jaug, Raug, lambda);
            }
            JtR = Jaug.transpose() * Raug;
        }

        const auto eta = newton_decrement(step, JtR);
        trace.negative_decrement = trace.negative_decrement || eta.clamped;
        dv.values() -= step;
        if (!dv.all_finite())
            throw std::runtime_error("solve: non-finite decision vector at iteration " + std::to_string(k + 1));

        ev = detail::evaluate(sys, dv, c_floor, cfg.penalty_A, c_cap);
        if (!std::isfinite(ev.res_aug))
            throw std::runtime_error("solve: non-finite residual at iteration " + std::to_string(k + 1));
        c_floor = ev.c;
        trace.records.push_back({ev.res_aug, ev.res, eta.value, c, lambda});

        if (ev.res_aug < cfg.tol) {
            trace.outcome = SolveOutcome::converged;
            break;
        }
        if (eta.value < cfg.tol && ev.res_aug >= 10.0 * cfg.tol) {
            if (++low_eta_run >= cfg.stagnation_window) {
                trace.outcome = SolveOutcome::stagnated;
                break;
            }
        } else {
            low_eta_run = 0;
        }
        const auto w = static_cast<std::size_t>(cfg.progress_window);
        if (w > 0 && trace.records.size() > w) {
            const double before = trace.records[trace.records.size() - 1 - w].res_aug;
            if (ev.res_aug > 0.5 * before) {
                trace.outcome = SolveOutcome::stagnated;
                break;
            }
        }
    }
    return out;
}

} // namespace dquad

#endif // DQUAD_GAUSS_NEWTON_HPP
