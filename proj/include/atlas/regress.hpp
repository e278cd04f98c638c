#pragma once

#include "atlas/features.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace atlas {

/// Regression engines. `identity` passes the (signed) quality column
/// through unchanged and backs the before-regression pathway.
enum class RegressorKind { ridge, lasso, svr, rf, et, gb, identity };

std::string_view regressor_name(RegressorKind kind);
RegressorKind parse_regressor(std::string_view name);
bool is_tree_ensemble(RegressorKind kind);
/// Kinds whose fitted state depends on the seed.
bool is_stochastic(RegressorKind kind);

/// One resolved grid point. Only the fields of the model's kind are used.
struct HyperParams {
    // ridge, lasso
    double lambda = 1.0;
    // svr
    double C = 1.0;
    double gamma = 0.1;
    double epsilon = 0.1;
    // rf, et; max_depth is shared with gb (-1 = unlimited)
    int trees = 100;
    int max_features = 0;  // 0 = all, -1 = ceil(sqrt(d)), otherwise a count
    int min_leaf = 1;
    int max_depth = -1;
    bool bootstrap = true;  // rf only
    // gb
    int estimators = 100;
    double learning_rate = 0.1;
    // identity
    double sign = 1.0;

    bool operator==(const HyperParams&) const = default;
};

using HyperGrid = std::vector<HyperParams>;

HyperGrid default_grid(RegressorKind kind);
nlohmann::json hyperparams_to_json(RegressorKind kind, const HyperParams& hp);
HyperParams hyperparams_from_json(RegressorKind kind, const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Engines. These operate on already standardized design matrices.

struct LinearModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
};

/// Closed-form ridge with an unpenalized intercept. Throws NumericError when
/// lambda == 0 and the centered Gram matrix is singular.
LinearModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

struct LassoOptions {
    double tolerance = 1e-6;
    int max_sweeps = 10000;
};

/// (1/2n)||y - Xw - b||^2 + lambda ||w||_1 by cyclic coordinate descent.
/// `objective_trace`, when given, receives the objective after every sweep.
LinearModel fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, const LassoOptions& opts = {},
                      std::vector<double>* objective_trace = nullptr);

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LinearModel& model, double lambda);

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

struct SvrModel {
    Eigen::MatrixXd support;  // rows with non-zero dual coefficient
    Eigen::VectorXd coef;     // alpha_i - alpha_i^*, each in [-C, C]
    double bias = 0.0;
    double gamma = 0.1;

    double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct SvrOptions {
    double tolerance = 1e-3;
    long long max_iterations = 100000;
};

struct SvrDiagnostics {
    long long iterations = 0;
    double max_violation = 0.0;
    /// Dual coefficients for every training row (zeros included).
    Eigen::VectorXd dual;
    double objective = 0.0;
};

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma);

/// 0.5 b'Kb - y'b + eps ||b||_1, the epsilon-SVR dual in difference form.
double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double eps);

/// Epsilon-insensitive SVR with an RBF kernel, solved by two-coefficient
/// working-set updates (second-order selection).
SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double gamma, double epsilon,
                 const SvrOptions& opts = {}, SvrDiagnostics* diagnostics = nullptr);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double gain = 0.0;  // weighted squared-error decrease of the split
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    int depth() const;
};

struct TreeParams {
    int max_features = 0;
    int min_leaf = 1;
    int max_depth = -1;
    bool random_thresholds = false;
};

/// Grow one CART regression tree over the given (possibly repeated) rows.
RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<int> rows,
                         const TreeParams& params, std::uint64_t seed);

struct TreeEnsemble {
    std::vector<RegressionTree> trees;
    double base = 0.0;       // boosting: initial constant
    double shrinkage = 1.0;  // boosting: learning rate
    bool averaged = true;    // forests average, boosting sums

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

enum class ForestVariant { rf, et };

TreeEnsemble fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp,
                        ForestVariant variant, std::uint64_t seed);

/// Least-squares gradient boosting. `train_mse`, when given, receives the
/// training MSE after the initial constant and after every round.
TreeEnsemble fit_gb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp, std::uint64_t seed,
                    std::vector<double>* train_mse = nullptr);

/// Per-feature impurity decrease, normalized per tree, averaged and
/// renormalized to sum to one.
Eigen::VectorXd ensemble_importances(const TreeEnsemble& ensemble, Eigen::Index n_features);

// ---------------------------------------------------------------------------
// Trained models: standardizer + engine state, applied to raw feature rows.

inline constexpr int kModelFormatVersion = 1;

struct TrainedModel {
    RegressorKind kind = RegressorKind::ridge;
    HyperParams hyperparams;
    Standardizer standardizer;
    FeatureMask feature_mask = FeatureMask::all();
    std::uint64_t seed = 0;
    std::variant<LinearModel, SvrModel, TreeEnsemble> state;
};

/// Fit the standardizer on X and train `kind` with the given grid point.
TrainedModel train_model(RegressorKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const HyperParams& hp, const FeatureMask& mask, std::uint64_t seed = 0);

TrainedModel train_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
TrainedModel train_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
TrainedModel train_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double gamma, double epsilon);
TrainedModel train_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp,
                          ForestVariant variant, std::uint64_t seed);
TrainedModel train_gb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp, std::uint64_t seed);

/// Predictions for raw (unstandardized) rows.
Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X);

/// Normalized importances over the model's feature mask (tree ensembles only).
Eigen::VectorXd feature_importances(const TrainedModel& model);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

/// Stable hash of the serialized model state.
std::uint64_t model_state_hash(const TrainedModel& model);

enum class CvCriterion { mse, mae };

struct CvResult {
    HyperParams best;
    std::size_t best_index = 0;
    std::vector<double> mean_error;  // per grid point; +inf when training failed
};

/// k-fold cross validation over `grid`; folds come from a seeded shuffle and
/// the standardizer is refit on each fold's training rows. Ties go to the
/// earliest grid point.
CvResult grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RegressorKind kind,
                        const HyperGrid& grid, int k, std::uint64_t seed, CvCriterion criterion = CvCriterion::mse);

}  // namespace atlas
