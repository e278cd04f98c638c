#include "atlas/error.hpp"
#include "atlas/regress.hpp"

#include <cmath>
#include <limits>

namespace atlas {

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma) {
    const Eigen::VectorXd a_sq = A.rowwise().squaredNorm();
    const Eigen::VectorXd b_sq = B.rowwise().squaredNorm();
    Eigen::MatrixXd dist = (-2.0 * A * B.transpose()).colwise() + a_sq;
    dist.rowwise() += b_sq.transpose();
    return (-gamma * dist.array().max(0.0)).exp().matrix();
}

double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double eps) {
    return 0.5 * beta.dot(K * beta) - y.dot(beta) + eps * beta.lpNorm<1>();
}

double SvrModel::decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double f = bias;
    for (Eigen::Index s = 0; s < support.rows(); ++s)
        f += coef(s) * std::exp(-gamma * (support.row(s) - x).squaredNorm());
    return f;
}

namespace {

// Dual over 2l box-constrained variables a in [0, C]:
//   min 0.5 a'Qa + p'a  s.t.  sum_t s_t a_t = 0
// with sign s = +1 for the first l (alpha) and -1 for the last l (alpha*),
// Q_tu = s_t s_u K(t mod l, u mod l), p = [eps - y; eps + y].
class SmoSolver {
public:
    SmoSolver(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, double eps)
        : K_(K), l_(y.size()), C_(C), alpha_(Eigen::VectorXd::Zero(2 * y.size())), grad_(2 * y.size()) {
        for (Eigen::Index t = 0; t < l_; ++t) {
            grad_(t) = eps - y(t);
            grad_(t + l_) = eps + y(t);
        }
    }

    double sign(Eigen::Index t) const { return t < l_ ? 1.0 : -1.0; }
    double q(Eigen::Index t, Eigen::Index u) const { return sign(t) * sign(u) * K_(t % l_, u % l_); }
    bool at_upper(Eigen::Index t) const { return alpha_(t) >= C_; }
    bool at_lower(Eigen::Index t) const { return alpha_(t) <= 0.0; }

    /// Returns false when the maximal violating pair is within tolerance.
    bool select(double tol, Eigen::Index& out_i, Eigen::Index& out_j, double& violation) const {
        constexpr double tau = 1e-12;
        const Eigen::Index n = 2 * l_;
        double g_max = -std::numeric_limits<double>::infinity();
        double g_max2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (sign(t) > 0) {
                if (!at_upper(t) && -grad_(t) >= g_max) {
                    g_max = -grad_(t);
                    i = t;
                }
            } else if (!at_lower(t) && grad_(t) >= g_max) {
                g_max = grad_(t);
                i = t;
            }
        }
        double best_drop = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            double grad_diff;
            double quad;
            if (sign(t) > 0) {
                if (at_lower(t)) continue;
                g_max2 = std::max(g_max2, grad_(t));
                grad_diff = g_max + grad_(t);
                if (grad_diff <= 0.0 || i < 0) continue;
                quad = q(i, i) + q(t, t) - 2.0 * sign(i) * q(i, t);
            } else {
                if (at_upper(t)) continue;
                g_max2 = std::max(g_max2, -grad_(t));
                grad_diff = g_max - grad_(t);
                if (grad_diff <= 0.0 || i < 0) continue;
                quad = q(i, i) + q(t, t) + 2.0 * sign(i) * q(i, t);
            }
            const double drop = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : tau);
            if (drop <= best_drop) {
                best_drop = drop;
                j = t;
            }
        }
        violation = g_max + g_max2;
        if (violation < tol || j < 0) return false;
        out_i = i;
        out_j = j;
        return true;
    }

    void update(Eigen::Index i, Eigen::Index j) {
        constexpr double tau = 1e-12;
        const double old_i = alpha_(i);
        const double old_j = alpha_(j);
        double& ai = alpha_(i);
        double& aj = alpha_(j);
        if (sign(i) != sign(j)) {
            double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad_(i) - grad_(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > C_) {
                    ai = C_;
                    aj = C_ - diff;
                }
            } else if (aj > C_) {
                aj = C_;
                ai = C_ + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = tau;
            const double delta = (grad_(i) - grad_(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C_) {
                if (ai > C_) {
                    ai = C_;
                    aj = sum - C_;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > C_) {
                if (aj > C_) {
                    aj = C_;
                    ai = sum - C_;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        const double di = ai - old_i;
        const double dj = aj - old_j;
        for (Eigen::Index t = 0; t < 2 * l_; ++t) grad_(t) += q(t, i) * di + q(t, j) * dj;
    }

    /// Threshold rho; the decision function is sum coef K - rho.
    double rho() const {
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0.0;
        int n_free = 0;
        for (Eigen::Index t = 0; t < 2 * l_; ++t) {
            const double yg = sign(t) * grad_(t);
            if (at_upper(t)) {
                if (sign(t) < 0)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else if (at_lower(t)) {
                if (sign(t) > 0)
                    ub = std::min(ub, yg);
                else
                    lb = std::max(lb, yg);
            } else {
                ++n_free;
                sum_free += yg;
            }
        }
        return n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
    }

    Eigen::VectorXd beta() const { return alpha_.head(l_) - alpha_.tail(l_); }

private:
    const Eigen::MatrixXd& K_;
    Eigen::Index l_;
    double C_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd grad_;
};

}  // namespace

SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double gamma, double epsilon,
                 const SvrOptions& opts, SvrDiagnostics* diagnostics) {
    if (X.rows() != y.size()) throw SizeMismatchError("design and target row counts differ");
    if (X.rows() < 2) throw InvalidArgumentError("need at least two training rows");
    if (!(C > 0.0) || !(gamma > 0.0) || !(epsilon >= 0.0))
        throw InvalidArgumentError("SVR needs C > 0, gamma > 0, epsilon >= 0");

    const Eigen::MatrixXd K = rbf_kernel(X, X, gamma);
    SmoSolver solver(K, y, C, epsilon);
    long long iter = 0;
    double violation = 0.0;
    Eigen::Index i = 0, j = 0;
    while (solver.select(opts.tolerance, i, j, violation)) {
        if (iter >= opts.max_iterations)
            throw ConvergenceError("SVR did not converge within " + std::to_string(opts.max_iterations) +
                                   " iterations");
        solver.update(i, j);
        ++iter;
    }

    const Eigen::VectorXd beta = solver.beta();
    SvrModel model;
    model.gamma = gamma;
    model.bias = -solver.rho();
    Eigen::Index n_support = 0;
    for (Eigen::Index t = 0; t < beta.size(); ++t) n_support += beta(t) != 0.0 ? 1 : 0;
    model.support.resize(n_support, X.cols());
    model.coef.resize(n_support);
    for (Eigen::Index t = 0, s = 0; t < beta.size(); ++t) {
        if (beta(t) == 0.0) continue;
        model.support.row(s) = X.row(t);
        model.coef(s) = beta(t);
        ++s;
    }
    if (diagnostics) {
        diagnostics->iterations = iter;
        diagnostics->max_violation = violation;
        diagnostics->dual = beta;
        diagnostics->objective = svr_dual_objective(K, y, beta, epsilon);
    }
    return model;
}

}  // namespace atlas
