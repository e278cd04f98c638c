#include "atlas/error.hpp"
#include "atlas/random.hpp"
#include "atlas/regress.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace atlas {

std::string_view regressor_name(RegressorKind kind) {
    switch (kind) {
        case RegressorKind::ridge: return "ridge";
        case RegressorKind::lasso: return "lasso";
        case RegressorKind::svr: return "svr";
        case RegressorKind::rf: return "rf";
        case RegressorKind::et: return "et";
        case RegressorKind::gb: return "gb";
        case RegressorKind::identity: return "identity";
    }
    return "unknown";
}

RegressorKind parse_regressor(std::string_view name) {
    for (auto k : {RegressorKind::ridge, RegressorKind::lasso, RegressorKind::svr, RegressorKind::rf, RegressorKind::et,
                   RegressorKind::gb, RegressorKind::identity})
        if (name == regressor_name(k)) return k;
    if (name == "br") return RegressorKind::identity;
    throw InvalidArgumentError("unknown regressor '" + std::string(name) + "'");
}

bool is_tree_ensemble(RegressorKind kind) {
    return kind == RegressorKind::rf || kind == RegressorKind::et || kind == RegressorKind::gb;
}

bool is_stochastic(RegressorKind kind) { return kind == RegressorKind::rf || kind == RegressorKind::et; }

HyperGrid default_grid(RegressorKind kind) {
    HyperGrid grid;
    switch (kind) {
        case RegressorKind::ridge:
        case RegressorKind::lasso:
            for (int e = -3; e <= 3; ++e) {
                HyperParams hp;
                hp.lambda = std::pow(10.0, e);
                grid.push_back(hp);
            }
            break;
        case RegressorKind::svr:
            for (double C : {1.0, 10.0, 100.0})
                for (double gamma : {0.01, 0.1, 1.0})
                    for (double eps : {0.1, 1.0}) {
                        HyperParams hp;
                        hp.C = C;
                        hp.gamma = gamma;
                        hp.epsilon = eps;
                        grid.push_back(hp);
                    }
            break;
        case RegressorKind::rf:
        case RegressorKind::et:
            for (int trees : {100, 500})
                for (int max_features : {0, -1})
                    for (int min_leaf : {1, 3}) {
                        HyperParams hp;
                        hp.trees = trees;
                        hp.max_features = max_features;
                        hp.min_leaf = min_leaf;
                        hp.bootstrap = kind == RegressorKind::rf;
                        grid.push_back(hp);
                    }
            break;
        case RegressorKind::gb:
            for (double lr : {0.05, 0.1})
                for (int estimators : {100, 300})
                    for (int depth : {2, 3}) {
                        HyperParams hp;
                        hp.learning_rate = lr;
                        hp.estimators = estimators;
                        hp.max_depth = depth;
                        grid.push_back(hp);
                    }
            break;
        case RegressorKind::identity: grid.emplace_back(); break;
    }
    return grid;
}

nlohmann::json hyperparams_to_json(RegressorKind kind, const HyperParams& hp) {
    switch (kind) {
        case RegressorKind::ridge:
        case RegressorKind::lasso: return {{"lambda", hp.lambda}};
        case RegressorKind::svr: return {{"C", hp.C}, {"gamma", hp.gamma}, {"epsilon", hp.epsilon}};
        case RegressorKind::rf:
        case RegressorKind::et:
            return {{"trees", hp.trees},           {"max_features", hp.max_features}, {"min_leaf", hp.min_leaf},
                    {"max_depth", hp.max_depth}, {"bootstrap", hp.bootstrap}};
        case RegressorKind::gb:
            return {{"estimators", hp.estimators},
                    {"learning_rate", hp.learning_rate},
                    {"max_depth", hp.max_depth},
                    {"min_leaf", hp.min_leaf}};
        case RegressorKind::identity: return {{"sign", hp.sign}};
    }
    return nlohmann::json::object();
}

HyperParams hyperparams_from_json(RegressorKind kind, const nlohmann::json& j) {
    HyperParams hp;
    if (kind == RegressorKind::gb) hp.max_depth = 3;
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    take("lambda", hp.lambda);
    take("C", hp.C);
    take("gamma", hp.gamma);
    take("epsilon", hp.epsilon);
    take("trees", hp.trees);
    take("max_features", hp.max_features);
    take("min_leaf", hp.min_leaf);
    take("max_depth", hp.max_depth);
    take("bootstrap", hp.bootstrap);
    take("estimators", hp.estimators);
    take("learning_rate", hp.learning_rate);
    take("sign", hp.sign);
    return hp;
}

namespace {

/// Mask naming the first `cols` canonical features.
FeatureMask positional_mask(Eigen::Index cols) {
    if (cols < 1 || cols > static_cast<Eigen::Index>(kAllFeatures.size()))
        throw SizeMismatchError("feature matrices have between 1 and 5 columns, got " + std::to_string(cols));
    return FeatureMask(std::vector<FeatureId>(kAllFeatures.begin(), kAllFeatures.begin() + cols));
}

Eigen::VectorXd predict_standardized(const TrainedModel& model, const Eigen::MatrixXd& Z) {
    return std::visit(
        [&](const auto& state) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(state)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return (Z * state.weights).array() + state.intercept;
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                Eigen::VectorXd out(Z.rows());
                if (Z.rows() == 0) return out;
                const Eigen::MatrixXd K = rbf_kernel(Z, state.support, state.gamma);
                out = (K * state.coef).array() + state.bias;
                return out;
            } else {
                return state.predict(Z);
            }
        },
        model.state);
}

}  // namespace

TrainedModel train_model(RegressorKind kind, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const HyperParams& hp, const FeatureMask& mask, std::uint64_t seed) {
    if (X.rows() != y.size()) throw SizeMismatchError("design and target row counts differ");
    if (static_cast<std::size_t>(X.cols()) != mask.size())
        throw SizeMismatchError("design has " + std::to_string(X.cols()) + " columns, feature subset has " +
                                std::to_string(mask.size()));
    TrainedModel model;
    model.kind = kind;
    model.hyperparams = hp;
    model.feature_mask = mask;
    model.seed = seed;
    model.standardizer = standardize_fit(X);
    const Eigen::MatrixXd Z = model.standardizer.apply(X);
    switch (kind) {
        case RegressorKind::ridge: model.state = fit_ridge(Z, y, hp.lambda); break;
        case RegressorKind::lasso: model.state = fit_lasso(Z, y, hp.lambda); break;
        case RegressorKind::svr: model.state = fit_svr(Z, y, hp.C, hp.gamma, hp.epsilon); break;
        case RegressorKind::rf: model.state = fit_forest(Z, y, hp, ForestVariant::rf, seed); break;
        case RegressorKind::et: model.state = fit_forest(Z, y, hp, ForestVariant::et, seed); break;
        case RegressorKind::gb: model.state = fit_gb(Z, y, hp, seed); break;
        case RegressorKind::identity: {
            if (!mask.contains(FeatureId::vqa)) throw InvalidArgumentError("identity model needs the vqa feature");
            LinearModel lm;
            lm.weights = Eigen::VectorXd::Zero(X.cols());
            lm.weights(0) = hp.sign;  // vqa is the first canonical column
            model.state = lm;
            break;
        }
    }
    return model;
}

TrainedModel train_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    HyperParams hp;
    hp.lambda = lambda;
    return train_model(RegressorKind::ridge, X, y, hp,
                       positional_mask(X.cols()));
}

TrainedModel train_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    HyperParams hp;
    hp.lambda = lambda;
    return train_model(RegressorKind::lasso, X, y, hp,
                       positional_mask(X.cols()));
}

TrainedModel train_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C, double gamma, double epsilon) {
    HyperParams hp;
    hp.C = C;
    hp.gamma = gamma;
    hp.epsilon = epsilon;
    return train_model(RegressorKind::svr, X, y, hp,
                       positional_mask(X.cols()));
}

TrainedModel train_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp,
                          ForestVariant variant, std::uint64_t seed) {
    return train_model(variant == ForestVariant::rf ? RegressorKind::rf : RegressorKind::et, X, y, hp,
                       positional_mask(X.cols()),
                       seed);
}

TrainedModel train_gb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp, std::uint64_t seed) {
    return train_model(RegressorKind::gb, X, y, hp,
                       positional_mask(X.cols()),
                       seed);
}

Eigen::VectorXd predict(const TrainedModel& model, const Eigen::MatrixXd& X) {
    if (X.rows() == 0) return Eigen::VectorXd(0);
    if (static_cast<std::size_t>(X.cols()) != model.feature_mask.size())
        throw SizeMismatchError("model expects " + std::to_string(model.feature_mask.size()) + " features (" +
                                model.feature_mask.to_string() + "), got " + std::to_string(X.cols()));
    return predict_standardized(model, model.standardizer.apply(X));
}

Eigen::VectorXd feature_importances(const TrainedModel& model) {
    if (!is_tree_ensemble(model.kind))
        throw UnsupportedError("feature importances need a tree ensemble, model is " +
                               std::string(regressor_name(model.kind)));
    return ensemble_importances(std::get<TreeEnsemble>(model.state),
                                static_cast<Eigen::Index>(model.feature_mask.size()));
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json tree_to_json(const RegressionTree& tree) {
    nlohmann::json j;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value, gain;
    for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        left.push_back(n.left);
        right.push_back(n.right);
        threshold.push_back(n.threshold);
        value.push_back(n.value);
        gain.push_back(n.gain);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},
            {"right", right},     {"value", value},         {"gain", gain}};
}

RegressionTree tree_from_json(const nlohmann::json& j) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto gain = j.at("gain").get<std::vector<double>>();
    const auto n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || gain.size() != n)
        throw ParseError("tree node arrays differ in length");
    RegressionTree tree;
    for (std::size_t k = 0; k < n; ++k) {
        if (feature[k] >= 0 && (left[k] <= static_cast<int>(k) || right[k] <= static_cast<int>(k) ||
                                left[k] >= static_cast<int>(n) || right[k] >= static_cast<int>(n)))
            throw ParseError("tree node has invalid children");
        tree.nodes.push_back({feature[k], threshold[k], left[k], right[k], value[k], gain[k]});
    }
    if (tree.nodes.empty()) throw ParseError("empty tree");
    return tree;
}

}  // namespace

nlohmann::json to_json(const TrainedModel& model) {
    nlohmann::json state = std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return {{"weights", to_std(s.weights)}, {"intercept", s.intercept}};
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                nlohmann::json support = nlohmann::json::array();
                for (Eigen::Index r = 0; r < s.support.rows(); ++r) support.push_back(to_std(s.support.row(r)));
                return {{"support", support}, {"coef", to_std(s.coef)}, {"bias", s.bias}, {"gamma", s.gamma}};
            } else {
                nlohmann::json trees = nlohmann::json::array();
                for (const auto& t : s.trees) trees.push_back(tree_to_json(t));
                return {{"base", s.base}, {"shrinkage", s.shrinkage}, {"averaged", s.averaged}, {"trees", trees}};
            }
        },
        model.state);
    return {{"format_version", kModelFormatVersion},
            {"kind", regressor_name(model.kind)},
            {"hyperparams", hyperparams_to_json(model.kind, model.hyperparams)},
            {"standardizer", to_json(model.standardizer)},
            {"feature_mask", model.feature_mask.to_string()},
            {"seed", model.seed},
            {"state", state}};
}

TrainedModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw FormatVersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                                     std::to_string(kModelFormatVersion) + ")");
        TrainedModel model;
        model.kind = parse_regressor(j.at("kind").get<std::string>());
        model.hyperparams = hyperparams_from_json(model.kind, j.at("hyperparams"));
        model.standardizer = standardizer_from_json(j.at("standardizer"));
        model.feature_mask = FeatureMask::parse(j.at("feature_mask").get<std::string>());
        model.seed = j.at("seed").get<std::uint64_t>();
        if (static_cast<std::size_t>(model.standardizer.mean.size()) != model.feature_mask.size())
            throw ParseError("standardizer width does not match the feature subset");
        const auto& s = j.at("state");
        switch (model.kind) {
            case RegressorKind::ridge:
            case RegressorKind::lasso:
            case RegressorKind::identity: {
                LinearModel lm;
                lm.weights = to_eigen(s.at("weights").get<std::vector<double>>());
                lm.intercept = s.at("intercept").get<double>();
                model.state = lm;
                break;
            }
            case RegressorKind::svr: {
                SvrModel sm;
                const auto rows = s.at("support").get<std::vector<std::vector<double>>>();
                const auto d = static_cast<Eigen::Index>(model.feature_mask.size());
                sm.support.resize(static_cast<Eigen::Index>(rows.size()), d);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    if (static_cast<Eigen::Index>(rows[r].size()) != d) throw ParseError("support vector width mismatch");
                    for (Eigen::Index c = 0; c < d; ++c)
                        sm.support(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
                }
                sm.coef = to_eigen(s.at("coef").get<std::vector<double>>());
                sm.bias = s.at("bias").get<double>();
                sm.gamma = s.at("gamma").get<double>();
                model.state = sm;
                break;
            }
            default: {
                TreeEnsemble te;
                te.base = s.at("base").get<double>();
                te.shrinkage = s.at("shrinkage").get<double>();
                te.averaged = s.at("averaged").get<bool>();
                for (const auto& t : s.at("trees")) te.trees.push_back(tree_from_json(t));
                model.state = te;
                break;
            }
        }
        return model;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed model file: ") + ex.what());
    }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(model).dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    return model_from_json(j);
}

std::uint64_t model_state_hash(const TrainedModel& model) {
    const std::string text = to_json(model).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

CvResult grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RegressorKind kind,
                        const HyperGrid& grid, int k, std::uint64_t seed, CvCriterion criterion) {
    if (grid.empty()) throw InvalidArgumentError("hyperparameter grid is empty");
    if (X.rows() != y.size()) throw SizeMismatchError("design and target row counts differ");
    if (k < 2) throw InvalidArgumentError("cross validation needs at least two folds");
    if (k > X.rows())
        throw InvalidArgumentError("cannot split " + std::to_string(X.rows()) + " rows into " + std::to_string(k) +
                                   " folds");

    const auto n = static_cast<int>(X.rows());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, {0xf01dULL}));
    shuffle(perm, rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(p)])] = p * k / n;

    std::vector<Eigen::MatrixXd> train_x(static_cast<std::size_t>(k)), test_x(static_cast<std::size_t>(k));
    std::vector<Eigen::VectorXd> train_y(static_cast<std::size_t>(k)), test_y(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        std::vector<int> tr, te;
        for (int r = 0; r < n; ++r) (fold_of[static_cast<std::size_t>(r)] == f ? te : tr).push_back(r);
        train_x[static_cast<std::size_t>(f)] = X(tr, Eigen::all);
        train_y[static_cast<std::size_t>(f)] = y(tr);
        test_x[static_cast<std::size_t>(f)] = X(te, Eigen::all);
        test_y[static_cast<std::size_t>(f)] = y(te);
    }

    const FeatureMask mask = positional_mask(X.cols());
    CvResult result;
    result.mean_error.assign(grid.size(), std::numeric_limits<double>::infinity());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double total = 0.0;
        bool ok = true;
        for (int f = 0; f < k && ok; ++f) {
            const auto fi = static_cast<std::size_t>(f);
            try {
                const auto model = train_model(kind, train_x[fi], train_y[fi], grid[g], mask,
                                               derive_seed(seed, {static_cast<std::uint64_t>(f), g}));
                const Eigen::VectorXd err = predict(model, test_x[fi]) - test_y[fi];
                total += criterion == CvCriterion::mse ? err.squaredNorm() / static_cast<double>(err.size())
                                                       : err.cwiseAbs().mean();
            } catch (const Error&) {
                ok = false;
            }
        }
        if (!ok) continue;
        result.mean_error[g] = total / k;
        if (result.mean_error[g] < best) {
            best = result.mean_error[g];
            result.best_index = g;
        }
    }
    if (!std::isfinite(best)) throw NumericError("every grid point failed to train");
    result.best = grid[result.best_index];
    return result;
}

}  // namespace atlas
