#pragma once

#include "atlas/baselines.hpp"
#include "atlas/features.hpp"
#include "atlas/regress.hpp"
#include "atlas/stats.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace atlas {

/// A table of session features with dataset-level facts the protocols need.
struct Dataset {
    std::string name;
    std::vector<QoESample> samples;
    bool higher_is_better = true;       // polarity of the vqa column
    bool m_is_stall = false;            // m column already holds the stall-only variant
    bool has_bitrate_variation = true;  // false when every session plays at one rate

    std::vector<std::string> content_ids() const;  // sorted, unique
    std::vector<std::string> pattern_ids() const;  // sorted, unique
};

/// Copy of `ds` whose m column holds the stall-only memory feature.
Dataset with_m_stall(const Dataset& ds);

struct SplitTrial {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

struct SplitMatrix {
    std::vector<SplitTrial> trials;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
};

/// Training contents per trial: round(fraction * n), at least one per side.
std::size_t train_content_count(std::size_t n_contents, double fraction);

SplitMatrix gen_content_splits(std::vector<std::string> contents, double train_fraction, std::size_t n_trials,
                               std::uint64_t seed);

struct ExperimentConfig {
    RegressorKind regressor = RegressorKind::ridge;
    FeatureMask features = FeatureMask::all();
    HyperGrid grid;  // empty: default grid for the regressor
    int cv_folds = 10;
    CvCriterion criterion = CvCriterion::mse;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool compute_lcc = true;
    LogisticOptions logistic;
    int repetitions = 50;  // cross-dataset runs
    // Echoed into reports only.
    std::string metric_label;
    std::string pooling_label;
};

struct TrialRecord {
    std::size_t index = 0;
    std::optional<double> srocc;
    std::optional<double> lcc;
    bool failed = false;
    std::string error;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::string held_out;  // leave-one-pattern-out fold id
    nlohmann::json chosen;  // selected hyperparameters
    std::vector<double> importances;
};

struct EvalReport {
    std::string experiment;
    nlohmann::json config;
    std::vector<TrialRecord> trials;
    std::optional<double> median_srocc;
    std::optional<double> median_lcc;
    std::size_t n_failed = 0;
    // Pooled predictions across folds (leave-one-pattern-out only).
    std::optional<double> pooled_srocc;
    std::optional<double> pooled_lcc;
    std::size_t pooled_count = 0;
    std::vector<double> mean_importances;

    /// Per-trial SROCC with NaN for undefined/failed trials.
    std::vector<double> srocc_values() const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Samples belonging to the given content ids, in dataset order.
std::vector<QoESample> select_contents(const std::vector<QoESample>& samples, const std::vector<std::string>& ids);

/// Content-independence protocol over pre-generated splits.
EvalReport run_experiment1(const Dataset& ds, const SplitMatrix& splits, const ExperimentConfig& cfg);

/// The pooled quality feature used directly as the prediction.
EvalReport run_before_regression(const Dataset& ds, const SplitMatrix& splits, const ExperimentConfig& cfg);

/// Leave-one-pattern-out protocol.
EvalReport run_experiment2(const Dataset& ds, const ExperimentConfig& cfg);

/// Train on one dataset, test on another.
EvalReport run_cross_dataset(const Dataset& train, const Dataset& test, const ExperimentConfig& cfg);

/// Content splits protocol for a tuned baseline (parameters re-tuned per trial).
EvalReport run_baseline_experiment1(const std::vector<BaselineSession>& sessions, const SplitMatrix& splits,
                                    BaselineKind kind, const std::vector<BaselineParams>& grid,
                                    const ExperimentConfig& cfg);

enum class Verdict { better, worse, indistinguishable, diagonal };
char verdict_symbol(Verdict v);

struct SignificanceMatrix {
    std::vector<std::string> methods;
    std::vector<std::vector<Verdict>> entries;  // entries[row][col]
    std::vector<std::vector<double>> p_values;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Pairwise two-sided rank-sum tests on per-trial SROCC distributions.
/// Entry (i, j) is `better` when row i is significantly better than column j.
SignificanceMatrix ranksum_significance(const std::vector<std::pair<std::string, std::vector<double>>>& trial_sroccs,
                                        double alpha = 0.01);

struct SweepPoint {
    double fraction = 0.0;
    std::size_t train_contents = 0;
    EvalReport report;
};

std::vector<SweepPoint> train_fraction_sweep(const Dataset& ds, const std::vector<double>& fractions,
                                             std::size_t n_trials, std::uint64_t split_seed,
                                             const ExperimentConfig& cfg);

nlohmann::json sweep_to_json(const std::vector<SweepPoint>& sweep);
std::string sweep_to_csv(const std::vector<SweepPoint>& sweep);
/// Whitespace-separated columns for plotting tools.
std::string sweep_to_dat(const std::vector<SweepPoint>& sweep);

}  // namespace atlas
