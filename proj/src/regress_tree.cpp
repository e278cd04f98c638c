#include "atlas/error.hpp"
#include "atlas/random.hpp"
#include "atlas/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atlas {

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(node)];
        node = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

int RegressionTree::depth() const {
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        deepest = std::max(deepest, level[k]);
        if (nodes[k].feature >= 0) {
            level[static_cast<std::size_t>(nodes[k].left)] = level[k] + 1;
            level[static_cast<std::size_t>(nodes[k].right)] = level[k] + 1;
        }
    }
    return deepest;
}

namespace {

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params, std::uint64_t seed)
        : X_(X), y_(y), params_(params), rng_(seed), order_(static_cast<std::size_t>(X.cols())) {
        std::iota(order_.begin(), order_.end(), 0);
        const auto d = static_cast<int>(X.cols());
        if (params.max_features == 0)
            max_features_ = d;
        else if (params.max_features < 0)
            max_features_ = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
        else
            max_features_ = std::min(params.max_features, d);
        max_features_ = std::max(max_features_, 1);
    }

    RegressionTree build(std::vector<int> rows) {
        rows_ = std::move(rows);
        tree_.nodes.clear();
        tree_.nodes.reserve(2 * rows_.size() + 1);
        grow(0, rows_.size(), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    double target(std::size_t k) const { return y_(rows_[k]); }
    double feature(std::size_t k, int f) const { return X_(rows_[k], f); }

    int grow(std::size_t begin, std::size_t end, int depth) {
        const int index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const std::size_t n = end - begin;
        double sum = 0.0;
        double lo = target(begin), hi = target(begin);
        for (std::size_t k = begin; k < end; ++k) {
            sum += target(k);
            lo = std::min(lo, target(k));
            hi = std::max(hi, target(k));
        }
        tree_.nodes[static_cast<std::size_t>(index)].value = sum / static_cast<double>(n);

        const bool depth_left = params_.max_depth < 0 || depth < params_.max_depth;
        if (!depth_left || n < 2 * static_cast<std::size_t>(params_.min_leaf) || lo == hi) return index;

        const Split split = find_split(begin, end, sum);
        if (split.feature < 0) return index;

        const auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                           rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                           [&](int r) { return X_(r, split.feature) <= split.threshold; });
        const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
        const int left = grow(begin, mid, depth + 1);
        const int right = grow(mid, end, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(index)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        node.gain = split.gain;
        return index;
    }

    Split find_split(std::size_t begin, std::size_t end, double sum) {
        const std::size_t n = end - begin;
        const double parent_term = sum * sum / static_cast<double>(n);
        shuffle(order_, rng_);
        Split best;
        int visited = 0;
        for (int f : order_) {
            if (visited >= max_features_) break;
            double fmin = feature(begin, f), fmax = fmin;
            for (std::size_t k = begin; k < end; ++k) {
                fmin = std::min(fmin, feature(k, f));
                fmax = std::max(fmax, feature(k, f));
            }
            if (fmin == fmax) continue;  // constant here; does not count toward max_features
            ++visited;
            const Split candidate = params_.random_thresholds ? random_split(begin, end, f, fmin, fmax, parent_term)
                                                              : best_split(begin, end, f, sum, parent_term);
            if (candidate.feature >= 0 && candidate.gain > best.gain) best = candidate;
        }
        return best;
    }

    Split best_split(std::size_t begin, std::size_t end, int f, double sum, double parent_term) {
        const std::size_t n = end - begin;
        scratch_.clear();
        for (std::size_t k = begin; k < end; ++k) scratch_.emplace_back(feature(k, f), target(k));
        std::sort(scratch_.begin(), scratch_.end());
        const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
        Split best;
        double left_sum = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            left_sum += scratch_[k].second;
            const std::size_t n_left = k + 1;
            if (scratch_[k].first == scratch_[k + 1].first) continue;
            if (n_left < min_leaf || n - n_left < min_leaf) continue;
            const double right_sum = sum - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                right_sum * right_sum / static_cast<double>(n - n_left) - parent_term;
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = f;
                double threshold = 0.5 * (scratch_[k].first + scratch_[k + 1].first);
                if (threshold >= scratch_[k + 1].first) threshold = scratch_[k].first;
                best.threshold = threshold;
            }
        }
        return best;
    }

    Split random_split(std::size_t begin, std::size_t end, int f, double fmin, double fmax, double parent_term) {
        double threshold = uniform(rng_, fmin, fmax);
        if (threshold >= fmax) threshold = fmin;
        double left_sum = 0.0, right_sum = 0.0;
        std::size_t n_left = 0, n_right = 0;
        for (std::size_t k = begin; k < end; ++k) {
            if (feature(k, f) <= threshold) {
                left_sum += target(k);
                ++n_left;
            } else {
                right_sum += target(k);
                ++n_right;
            }
        }
        const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
        Split split;
        if (n_left < min_leaf || n_right < min_leaf || n_left == 0 || n_right == 0) return split;
        split.feature = f;
        split.threshold = threshold;
        split.gain = left_sum * left_sum / static_cast<double>(n_left) +
                     right_sum * right_sum / static_cast<double>(n_right) - parent_term;
        return split;
    }

    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    TreeParams params_;
    Rng rng_;
    std::vector<int> order_;
    int max_features_ = 1;
    std::vector<int> rows_;
    std::vector<std::pair<double, double>> scratch_;
    RegressionTree tree_;
};

void check_shapes(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw SizeMismatchError("design and target row counts differ");
    if (X.rows() < 1) throw InvalidArgumentError("need at least one training row");
}

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<int> rows,
                         const TreeParams& params, std::uint64_t seed) {
    check_shapes(X, y);
    if (rows.empty()) throw InvalidArgumentError("tree needs at least one row");
    if (params.min_leaf < 1) throw InvalidArgumentError("min_leaf must be at least 1");
    TreeBuilder builder(X, y, params, seed);
    return builder.build(std::move(rows));
}

double TreeEnsemble::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double acc = 0.0;
    for (const auto& t : trees) acc += t.predict(x);
    if (averaged) return trees.empty() ? base : acc / static_cast<double>(trees.size());
    return base + shrinkage * acc;
}

Eigen::VectorXd TreeEnsemble::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X.row(r));
    return out;
}

TreeEnsemble fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp,
                        ForestVariant variant, std::uint64_t seed) {
    check_shapes(X, y);
    if (hp.trees < 1) throw InvalidArgumentError("forest needs at least one tree");
    const TreeParams params{hp.max_features, hp.min_leaf, hp.max_depth, variant == ForestVariant::et};
    const bool bootstrap = variant == ForestVariant::rf && hp.bootstrap;
    const auto n = static_cast<int>(X.rows());

    TreeEnsemble ensemble;
    ensemble.averaged = true;
    ensemble.base = y.mean();
    ensemble.trees.reserve(static_cast<std::size_t>(hp.trees));
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (int t = 0; t < hp.trees; ++t) {
        const std::uint64_t tree_seed = derive_seed(seed, {static_cast<std::uint64_t>(t)});
        if (bootstrap) {
            Rng rng(derive_seed(tree_seed, {0xb007ULL}));
            for (auto& r : rows) r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        ensemble.trees.push_back(grow_tree(X, y, rows, params, tree_seed));
    }
    return ensemble;
}

TreeEnsemble fit_gb(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HyperParams& hp, std::uint64_t seed,
                    std::vector<double>* train_mse) {
    check_shapes(X, y);
    if (hp.estimators < 1) throw InvalidArgumentError("boosting needs at least one estimator");
    if (!(hp.learning_rate > 0.0)) throw InvalidArgumentError("learning rate must be positive");
    const TreeParams params{0, std::max(1, hp.min_leaf), hp.max_depth < 0 ? 3 : hp.max_depth, false};

    TreeEnsemble ensemble;
    ensemble.averaged = false;
    ensemble.base = y.mean();
    ensemble.shrinkage = hp.learning_rate;
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), ensemble.base);
    if (train_mse) train_mse->push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));

    std::vector<int> rows(static_cast<std::size_t>(y.size()));
    std::iota(rows.begin(), rows.end(), 0);
    for (int round = 0; round < hp.estimators; ++round) {
        const Eigen::VectorXd residual = y - fitted;
        auto tree = grow_tree(X, residual, rows, params, derive_seed(seed, {static_cast<std::uint64_t>(round)}));
        for (Eigen::Index r = 0; r < X.rows(); ++r) fitted(r) += hp.learning_rate * tree.predict(X.row(r));
        ensemble.trees.push_back(std::move(tree));
        if (train_mse) train_mse->push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
    }
    return ensemble;
}

Eigen::VectorXd ensemble_importances(const TreeEnsemble& ensemble, Eigen::Index n_features) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(n_features);
    for (const auto& tree : ensemble.trees) {
        Eigen::VectorXd per_tree = Eigen::VectorXd::Zero(n_features);
        for (const auto& node : tree.nodes)
            if (node.feature >= 0) per_tree(node.feature) += node.gain;
        const double s = per_tree.sum();
        if (s > 0.0) total += per_tree / s;
    }
    const double s = total.sum();
    if (s > 0.0) total /= s;
    return total;
}

}  // namespace atlas
