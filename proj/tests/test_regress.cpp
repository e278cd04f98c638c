#include "atlas/error.hpp"
#include "atlas/regress.hpp"
#include "atlas/random.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace atlas;
using testing_helpers::scratch_dir;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd X(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) X(r, c) = standard_normal(rng);
    return X;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
    std::vector<std::vector<double>> out(X.rows(), std::vector<double>(X.cols()));
    for (int r = 0; r < X.rows(); ++r)
        for (int c = 0; c < X.cols(); ++c) out[r][c] = X(r, c);
    return out;
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("ridge") {
    SUBCASE("exact line") {
        Eigen::MatrixXd X(4, 1);
        X << 1, 2, 3, 4;
        Eigen::VectorXd y = 2 * X.col(0);
        const auto m = fit_ridge(X, y, 0.0);
        CHECK(m.weights(0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(std::abs(m.intercept) < 1e-9);
    }
    SUBCASE("huge penalty shrinks to the mean") {
        const Eigen::MatrixXd X = random_matrix(20, 3, 1);
        const Eigen::VectorXd y = random_matrix(20, 1, 2).col(0);
        const auto m = fit_ridge(X, y, 1e9);
        CHECK(m.weights.norm() < 1e-6);
        CHECK(m.intercept == doctest::Approx(y.mean() - X.colwise().mean().dot(m.weights)));
    }
    SUBCASE("normal-equation oracle") {
        Eigen::MatrixXd X(3, 2);
        X << 1, 0.5, -1, 2, 0.3, -0.7;
        Eigen::VectorXd y(3);
        y << 1, -2, 0.5;
        const auto m = fit_ridge(X, y, 1.0);
        const auto ref = oracle::ridge(rows_of(X), vec(y), 1.0);
        CHECK(std::abs(m.intercept - ref[0]) < 1e-8);
        CHECK(std::abs(m.weights(0) - ref[1]) < 1e-8);
        CHECK(std::abs(m.weights(1) - ref[2]) < 1e-8);
    }
    SUBCASE("normal equations residual") {
        const Eigen::MatrixXd X = random_matrix(30, 4, 3);
        const Eigen::VectorXd y = random_matrix(30, 1, 4).col(0);
        const auto m = fit_ridge(X, y, 0.5);
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const Eigen::VectorXd yc = y.array() - y.mean();
        const Eigen::VectorXd r = (Xc.transpose() * Xc + 0.5 * Eigen::MatrixXd::Identity(4, 4)) * m.weights - Xc.transpose() * yc;
        CHECK(r.cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("singular without penalty") {
        Eigen::MatrixXd X(4, 2);
        X << 1, 2, 2, 4, 3, 6, 4, 8;
        CHECK_THROWS_AS(fit_ridge(X, Eigen::VectorXd::Ones(4), 0.0), NumericError);
    }
}

TEST_CASE("lasso") {
    const Eigen::MatrixXd X = random_matrix(40, 4, 10);
    Eigen::VectorXd y = X * Eigen::Vector4d(1.5, -2, 0, 0.5) + 0.1 * random_matrix(40, 1, 11).col(0);
    y.array() += 3;

    SUBCASE("lambda_max switches every weight off") {
        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const double lambda_max = (Xc.transpose() * (y.array() - y.mean()).matrix()).cwiseAbs().maxCoeff() / 40.0;
        const auto m = fit_lasso(X, y, lambda_max * 1.0001);
        CHECK(m.weights.cwiseAbs().maxCoeff() == 0.0);
        CHECK(m.intercept == doctest::Approx(y.mean()));
        const auto below = fit_lasso(X, y, lambda_max * 0.9);
        CHECK(below.weights.cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("no penalty matches least squares") {
        const auto l = fit_lasso(X, y, 0.0);
        const auto r = fit_ridge(X, y, 0.0);
        CHECK((l.weights - r.weights).cwiseAbs().maxCoeff() < 1e-4);
        CHECK(std::abs(l.intercept - r.intercept) < 1e-4);
    }
    SUBCASE("orthonormal design is a soft threshold") {
        Eigen::MatrixXd H(4, 3);
        H << 1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, 1;
        Eigen::VectorXd t(4);
        t << 2.0, -1.0, 0.5, 3.0;
        for (double lambda : {0.0, 0.1, 0.4, 1.0}) {
            const auto m = fit_lasso(H, t, lambda);
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(m.weights(j) - soft_threshold(H.col(j).dot(t) / 4.0, lambda)) < 1e-6);
        }
    }
    SUBCASE("objective never increases") {
        std::vector<double> trace;
        fit_lasso(X, y, 0.05, {}, &trace);
        REQUIRE(trace.size() >= 2);
        for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-12);
    }
}

TEST_CASE("svr") {
    SUBCASE("constant target") {
        const Eigen::MatrixXd X = random_matrix(10, 2, 20);
        const auto m = fit_svr(X, Eigen::VectorXd::Constant(10, 4.0), 1.0, 0.5, 0.1);
        CHECK(m.coef.size() == 0);
        CHECK(m.decision(X.row(3)) == doctest::Approx(4.0));
    }
    SUBCASE("six-point dual matches exhaustive face search") {
        Eigen::MatrixXd X(6, 1);
        X << 0.0, 0.4, 1.1, 1.5, 2.2, 3.0;
        Eigen::VectorXd y(6);
        y << 0.1, 0.9, 0.7, 1.8, 1.2, 2.5;
        for (auto [C, gamma, eps] : {std::tuple{1.0, 0.5, 0.1}, std::tuple{10.0, 2.0, 0.2}, std::tuple{0.3, 1.0, 0.05}}) {
            SvrDiagnostics diag;
            const auto m = fit_svr(X, y, C, gamma, eps, {}, &diag);
            std::vector<std::vector<double>> K(6, std::vector<double>(6));
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) K[i][j] = std::exp(-gamma * (X(i, 0) - X(j, 0)) * (X(i, 0) - X(j, 0)));
            const double ref = oracle::svr_dual_min(K, vec(y), C, eps);
            CHECK(std::abs(diag.objective - ref) <= 1e-3 * std::abs(ref));
            CHECK(diag.dual.cwiseAbs().maxCoeff() <= C + 1e-12);
            CHECK(std::abs(diag.dual.sum()) < 1e-9);
            for (int i = 0; i < 6; ++i)
                if (diag.dual(i) == 0.0) CHECK(std::abs(m.decision(X.row(i)) - y(i)) <= eps + 1e-3);
        }
    }
    SUBCASE("box constraint on a larger problem") {
        const Eigen::MatrixXd X = random_matrix(60, 3, 21);
        const Eigen::VectorXd y = (X.col(0).array().sin() + X.col(1).array()).matrix();
        SvrDiagnostics diag;
        const auto m = fit_svr(X, y, 5.0, 0.3, 0.05, {}, &diag);
        CHECK(m.coef.cwiseAbs().maxCoeff() <= 5.0 + 1e-12);
        CHECK(diag.max_violation <= 1e-3);
    }
}

TEST_CASE("trees and forests") {
    SUBCASE("single unpruned tree interpolates unique rows") {
        const Eigen::MatrixXd X = random_matrix(25, 3, 30);
        const Eigen::VectorXd y = random_matrix(25, 1, 31).col(0);
        HyperParams hp;
        hp.trees = 1;
        hp.bootstrap = false;
        const auto forest = fit_forest(X, y, hp, ForestVariant::rf, 1);
        CHECK((forest.predict(X) - y).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("identical rows with different targets predict the mean") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 2);
        Eigen::VectorXd y(4);
        y << 1, 2, 3, 6;
        HyperParams hp;
        hp.trees = 3;
        const auto forest = fit_forest(X, y, hp, ForestVariant::et, 1);
        CHECK(forest.predict(X)(0) == doctest::Approx(3.0));
    }
    SUBCASE("seeded determinism is bit exact") {
        const Eigen::MatrixXd X = random_matrix(50, 4, 32);
        const Eigen::VectorXd y = random_matrix(50, 1, 33).col(0);
        HyperParams hp;
        hp.trees = 20;
        hp.max_features = -1;
        for (auto variant : {ForestVariant::rf, ForestVariant::et}) {
            const Eigen::MatrixXd Q = random_matrix(30, 4, 34);
            const auto a = fit_forest(X, y, hp, variant, 77).predict(Q);
            const auto b = fit_forest(X, y, hp, variant, 77).predict(Q);
            CHECK(a == b);
            const auto c = fit_forest(X, y, hp, variant, 78).predict(Q);
            CHECK(a != c);
        }
    }
    SUBCASE("random forest fits a smooth curve") {
        Rng rng(40);
        Eigen::MatrixXd X(200, 1);
        Eigen::VectorXd y(200);
        for (int k = 0; k < 200; ++k) {
            X(k, 0) = uniform01(rng);
            y(k) = std::sin(2 * std::numbers::pi * X(k, 0)) + 0.01 * standard_normal(rng);
        }
        HyperParams hp;
        hp.trees = 500;
        const auto pred = fit_forest(X, y, hp, ForestVariant::rf, 3).predict(X);
        const double ss_res = (pred - y).squaredNorm();
        const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
        CHECK(1 - ss_res / ss_tot > 0.95);
    }
    SUBCASE("importances concentrate on the informative feature") {
        const Eigen::MatrixXd X = random_matrix(150, 4, 41);
        const Eigen::VectorXd y = X.col(0);
        HyperParams hp;
        hp.trees = 50;
        for (auto variant : {ForestVariant::rf, ForestVariant::et}) {
            const auto imp = ensemble_importances(fit_forest(X, y, hp, variant, 5), 4);
            CHECK(imp(0) > 0.8);
            CHECK(imp.sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("forest predictions stay inside the target range") {
        const Eigen::MatrixXd X = random_matrix(40, 3, 42);
        const Eigen::VectorXd y = random_matrix(40, 1, 43).col(0);
        HyperParams hp;
        hp.trees = 30;
        const auto pred = fit_forest(X, y, hp, ForestVariant::et, 9).predict(random_matrix(100, 3, 44));
        CHECK(pred.minCoeff() >= y.minCoeff());
        CHECK(pred.maxCoeff() <= y.maxCoeff());
    }
}

TEST_CASE("gradient boosting") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 1, 2, 5, 9;

    SUBCASE("depth zero is the mean") {
        HyperParams hp;
        hp.estimators = 1;
        hp.max_depth = 0;
        const auto gb = fit_gb(X, y, hp, 0);
        CHECK(gb.predict(X).isApprox(Eigen::VectorXd::Constant(4, 4.25)));
    }
    SUBCASE("two hand-traced stumps") {
        // f0 = 4.25; stump 1 splits at 2.5 (leaves -2.75, 2.75); stump 2 splits
        // at 3.5 on residuals {-1.875, -0.875, -0.625, 3.375} (leaves -1.125, 3.375).
        HyperParams hp;
        hp.estimators = 2;
        hp.max_depth = 1;
        hp.learning_rate = 0.5;
        const auto pred = fit_gb(X, y, hp, 0).predict(X);
        const double expected[4] = {2.3125, 2.3125, 5.0625, 7.3125};
        for (int k = 0; k < 4; ++k) CHECK(std::abs(pred(k) - expected[k]) < 1e-9);
    }
    SUBCASE("training error never increases") {
        const Eigen::MatrixXd Z = random_matrix(60, 3, 50);
        const Eigen::VectorXd t = (Z.col(0).array() * Z.col(1).array()).matrix();
        HyperParams hp;
        hp.estimators = 50;
        hp.max_depth = 2;
        std::vector<double> mse;
        const auto gb = fit_gb(Z, t, hp, 0, &mse);
        REQUIRE(mse.size() == 51);
        for (std::size_t k = 1; k < mse.size(); ++k) CHECK(mse[k] <= mse[k - 1] + 1e-12);
        const auto pred = gb.predict(Z);
        CHECK(pred.minCoeff() >= t.minCoeff());
        CHECK(pred.maxCoeff() <= t.maxCoeff());
    }
}

TEST_CASE("trained models") {
    const Eigen::MatrixXd X = random_matrix(30, 5, 60);
    const Eigen::VectorXd y = X * Eigen::VectorXd::LinSpaced(5, -1, 1) + Eigen::VectorXd::Constant(30, 2.0);

    SUBCASE("ridge prediction on raw rows") {
        Eigen::MatrixXd x1(3, 1);
        x1 << 0, 1, 2;
        const auto m = train_ridge(x1, Eigen::Vector3d(1, 3, 5), 0.0);
        Eigen::MatrixXd q(1, 1);
        q << 3;
        CHECK(predict(m, q)(0) == doctest::Approx(7.0));
        CHECK(predict(m, Eigen::MatrixXd(0, 1)).size() == 0);
        CHECK_THROWS_AS(predict(m, Eigen::MatrixXd::Zero(2, 2)), SizeMismatchError);
    }
    SUBCASE("file round trip keeps predictions bit exact") {
        const auto dir = scratch_dir("model");
        HyperParams hp;
        hp.trees = 10;
        for (auto kind : {RegressorKind::ridge, RegressorKind::lasso, RegressorKind::svr, RegressorKind::rf,
                          RegressorKind::et, RegressorKind::gb}) {
            const auto m = train_model(kind, X, y, hp, FeatureMask::all(), 4);
            save_model(dir / "m.json", m);
            const auto back = load_model(dir / "m.json");
            CHECK(predict(back, X) == predict(m, X));
            CHECK(model_state_hash(back) == model_state_hash(m));
        }
    }
    SUBCASE("format version is checked") {
        auto j = to_json(train_ridge(X, y, 1.0));
        j["format_version"] = kModelFormatVersion + 1;
        CHECK_THROWS_AS(model_from_json(j), FormatVersionError);
    }
    SUBCASE("importances only for tree ensembles") {
        CHECK_THROWS_AS(feature_importances(train_ridge(X, y, 1.0)), UnsupportedError);
        HyperParams hp;
        hp.estimators = 20;
        const auto imp = feature_importances(train_gb(X, y, hp, 1));
        CHECK(imp.size() == 5);
        CHECK(imp.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("grid search") {
    const Eigen::MatrixXd X = random_matrix(40, 2, 70);
    const Eigen::VectorXd y = 3 * X.col(0) - X.col(1) + 0.01 * random_matrix(40, 1, 71).col(0);
    HyperParams small, large;
    small.lambda = 1e-6;
    large.lambda = 1e6;
    const auto cv = grid_search_cv(X, y, RegressorKind::ridge, {small, large}, 5, 1);
    CHECK(cv.best_index == 0);
    CHECK(cv.mean_error[0] < cv.mean_error[1]);

    CHECK(grid_search_cv(X, y, RegressorKind::ridge, {large}, 5, 1).best == large);
    CHECK_THROWS(grid_search_cv(X, y, RegressorKind::ridge, {small}, 41, 1));
    CHECK_THROWS(grid_search_cv(X, y, RegressorKind::ridge, {}, 5, 1));

    // Equal candidates tie; the first wins.
    HyperParams twin = small;
    CHECK(grid_search_cv(X, y, RegressorKind::ridge, {twin, small}, 5, 1).best_index == 0);

    CHECK(default_grid(RegressorKind::ridge).size() == 7);
    CHECK(default_grid(RegressorKind::svr).size() == 18);
    CHECK(default_grid(RegressorKind::rf).size() == 8);
    CHECK(default_grid(RegressorKind::et).size() == 8);
    CHECK(default_grid(RegressorKind::gb).size() == 8);
    CHECK_THROWS(parse_regressor("knn"));
}
