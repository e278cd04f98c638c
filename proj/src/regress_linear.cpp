#include "atlas/error.hpp"
#include "atlas/regress.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace atlas {

namespace {

void check_shapes(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size())
        throw SizeMismatchError("design has " + std::to_string(X.rows()) + " rows, target has " +
                                std::to_string(y.size()));
    if (X.rows() < 2) throw InvalidArgumentError("need at least two training rows");
}

}  // namespace

LinearModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    check_shapes(X, y);
    if (!(lambda >= 0.0)) throw InvalidArgumentError("ridge lambda must be non-negative");
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd A = Xc.transpose() * Xc;
    A.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = Xc.transpose() * yc;

    LinearModel model;
    if (lambda == 0.0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (lu.rank() < A.rows()) throw NumericError("ridge normal equations are singular (lambda = 0)");
        model.weights = lu.solve(rhs);
    } else {
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() != Eigen::Success) throw NumericError("ridge factorization failed");
        model.weights = ldlt.solve(rhs);
    }
    model.intercept = y_mean - x_mean.dot(model.weights);
    return model;
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LinearModel& model, double lambda) {
    const Eigen::VectorXd r = y - X * model.weights - Eigen::VectorXd::Constant(y.size(), model.intercept);
    return r.squaredNorm() / (2.0 * static_cast<double>(y.size())) + lambda * model.weights.lpNorm<1>();
}

LinearModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, const LassoOptions& opts,
                      std::vector<double>* objective_trace) {
    check_shapes(X, y);
    if (!(lambda >= 0.0)) throw InvalidArgumentError("lasso lambda must be non-negative");
    const auto n = static_cast<double>(X.rows());
    const Eigen::Index d = X.cols();
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm().transpose() / n;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd residual = y.array() - y_mean;

    auto objective = [&] { return residual.squaredNorm() / (2.0 * n) + lambda * w.lpNorm<1>(); };

    bool converged = d == 0;
    for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (col_sq(j) <= 0.0) continue;
            const double rho = Xc.col(j).dot(residual) / n + col_sq(j) * w(j);
            const double updated = soft_threshold(rho, lambda) / col_sq(j);
            const double delta = updated - w(j);
            if (delta != 0.0) {
                residual -= delta * Xc.col(j);
                w(j) = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (objective_trace) objective_trace->push_back(objective());
        converged = max_change < opts.tolerance;
    }
    if (!converged)
        throw ConvergenceError("lasso did not converge within " + std::to_string(opts.max_sweeps) + " sweeps");

    LinearModel model;
    model.weights = std::move(w);
    model.intercept = y_mean - x_mean.dot(model.weights);
    return model;
}

}  // namespace atlas
