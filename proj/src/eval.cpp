#include "atlas/eval.hpp"

#include "atlas/error.hpp"
#include "atlas/parallel.hpp"
#include "atlas/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace atlas {

std::vector<std::string> Dataset::content_ids() const {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.content_id);
    return {ids.begin(), ids.end()};
}

std::vector<std::string> Dataset::pattern_ids() const {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.pattern_id);
    return {ids.begin(), ids.end()};
}

Dataset with_m_stall(const Dataset& ds) {
    if (ds.m_is_stall) return ds;
    Dataset out = ds;
    for (auto& s : out.samples) {
        if (!s.m_stall)
            throw InvalidArgumentError("dataset '" + ds.name + "' has no stall-only memory feature for session " +
                                       s.content_id + "/" + s.pattern_id);
        s.features.m = *s.m_stall;
    }
    out.m_is_stall = true;
    return out;
}

std::size_t train_content_count(std::size_t n_contents, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgumentError("train fraction must be in (0, 1)");
    if (n_contents < 2) throw InvalidArgumentError("need at least two contents to split");
    const auto rounded = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_contents)));
    return std::clamp<std::size_t>(rounded, 1, n_contents - 1);
}

SplitMatrix gen_content_splits(std::vector<std::string> contents, double train_fraction, std::size_t n_trials,
                               std::uint64_t seed) {
    std::sort(contents.begin(), contents.end());
    contents.erase(std::unique(contents.begin(), contents.end()), contents.end());
    const std::size_t n_train = train_content_count(contents.size(), train_fraction);
    SplitMatrix m;
    m.seed = seed;
    m.train_fraction = train_fraction;
    m.trials.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        Rng rng(derive_seed(seed, {t}));
        auto order = contents;
        shuffle(order, rng);
        SplitTrial trial;
        trial.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        trial.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(trial.train.begin(), trial.train.end());
        std::sort(trial.test.begin(), trial.test.end());
        m.trials.push_back(std::move(trial));
    }
    return m;
}

std::vector<QoESample> select_contents(const std::vector<QoESample>& samples, const std::vector<std::string>& ids) {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<QoESample> out;
    for (const auto& s : samples)
        if (wanted.count(s.content_id)) out.push_back(s);
    return out;
}

std::vector<double> EvalReport::srocc_values() const {
    std::vector<double> out;
    out.reserve(trials.size());
    for (const auto& t : trials) out.push_back(t.srocc.value_or(std::numeric_limits<double>::quiet_NaN()));
    return out;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

nlohmann::json config_echo(const std::string& experiment, const ExperimentConfig& cfg, std::size_t grid_size) {
    nlohmann::json j = {{"experiment", experiment},
                        {"regressor", regressor_name(cfg.regressor)},
                        {"features", cfg.features.to_string()},
                        {"cv_folds", cfg.cv_folds},
                        {"cv_criterion", cfg.criterion == CvCriterion::mse ? "mse" : "mae"},
                        {"grid_size", grid_size},
                        {"seed", cfg.seed},
                        {"metric", cfg.metric_label},
                        {"pooling", cfg.pooling_label}};
    if (const auto idx = cfg.features.ablation_index()) j["feature_subset_id"] = *idx;
    return j;
}

struct FitOutcome {
    Eigen::VectorXd predictions;
    nlohmann::json chosen;
    std::vector<double> importances;
};

FitOutcome fit_and_predict(const std::vector<QoESample>& train, const std::vector<QoESample>& test,
                           const ExperimentConfig& cfg, bool higher_is_better, std::uint64_t seed,
                           const std::optional<HyperParams>& fixed = std::nullopt) {
    const Eigen::MatrixXd X = feature_matrix(train, cfg.features);
    const Eigen::VectorXd y = mos_vector(train);
    HyperParams hp;
    if (fixed) {
        hp = *fixed;
    } else if (cfg.regressor == RegressorKind::identity) {
        hp.sign = higher_is_better ? 1.0 : -1.0;
    } else {
        const HyperGrid grid = cfg.grid.empty() ? default_grid(cfg.regressor) : cfg.grid;
        if (grid.size() == 1) {
            hp = grid.front();
        } else {
            const int k = std::min<int>(cfg.cv_folds, static_cast<int>(X.rows()));
            hp = grid_search_cv(X, y, cfg.regressor, grid, k, seed, cfg.criterion).best;
        }
    }
    const auto model = train_model(cfg.regressor, X, y, hp, cfg.features, derive_seed(seed, {1}));
    FitOutcome out;
    out.predictions = predict(model, feature_matrix(test, cfg.features));
    out.chosen = hyperparams_to_json(cfg.regressor, hp);
    if (is_tree_ensemble(cfg.regressor)) {
        const Eigen::VectorXd imp = feature_importances(model);
        out.importances.assign(imp.data(), imp.data() + imp.size());
    }
    return out;
}

HyperParams select_hyperparams(const std::vector<QoESample>& train, const ExperimentConfig& cfg,
                               bool higher_is_better, std::uint64_t seed) {
    HyperParams hp;
    if (cfg.regressor == RegressorKind::identity) {
        hp.sign = higher_is_better ? 1.0 : -1.0;
        return hp;
    }
    const HyperGrid grid = cfg.grid.empty() ? default_grid(cfg.regressor) : cfg.grid;
    if (grid.size() == 1) return grid.front();
    const Eigen::MatrixXd X = feature_matrix(train, cfg.features);
    const int k = std::min<int>(cfg.cv_folds, static_cast<int>(X.rows()));
    return grid_search_cv(X, mos_vector(train), cfg.regressor, grid, k, seed, cfg.criterion).best;
}

void score_trial(TrialRecord& rec, std::span<const double> pred, std::span<const double> mos,
                 const ExperimentConfig& cfg, std::uint64_t seed) {
    rec.n_test = pred.size();
    if (pred.size() < 3) {
        rec.failed = true;
        rec.error = "fewer than three test points";
        return;
    }
    rec.srocc = srocc(pred, mos);
    if (!rec.srocc) {
        rec.failed = true;
        rec.error = "undefined correlation (constant predictions or MOS)";
        return;
    }
    if (cfg.compute_lcc && pred.size() >= 5) {
        auto opts = cfg.logistic;
        opts.seed = derive_seed(seed, {0x1cc});
        rec.lcc = lcc_after_logistic(pred, mos, opts);
    }
}

void summarize(EvalReport& report) {
    std::vector<double> s, l;
    report.n_failed = 0;
    for (const auto& t : report.trials) {
        if (t.failed) ++report.n_failed;
        if (t.srocc) s.push_back(*t.srocc);
        if (t.lcc) l.push_back(*t.lcc);
    }
    report.median_srocc = finite_median(s);
    report.median_lcc = finite_median(l);

    std::size_t dims = 0;
    for (const auto& t : report.trials) dims = std::max(dims, t.importances.size());
    if (dims > 0) {
        report.mean_importances.assign(dims, 0.0);
        std::size_t count = 0;
        for (const auto& t : report.trials) {
            if (t.importances.size() != dims) continue;
            for (std::size_t k = 0; k < dims; ++k) report.mean_importances[k] += t.importances[k];
            ++count;
        }
        for (auto& v : report.mean_importances) v /= static_cast<double>(std::max<std::size_t>(count, 1));
    }
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json trials_json = nlohmann::json::array();
    for (const auto& t : trials) {
        nlohmann::json j = {{"trial", t.index},
                            {"srocc", optional_json(t.srocc)},
                            {"lcc", optional_json(t.lcc)},
                            {"failed", t.failed},
                            {"n_train", t.n_train},
                            {"n_test", t.n_test}};
        if (!t.error.empty()) j["error"] = t.error;
        if (!t.held_out.empty()) j["held_out"] = t.held_out;
        if (!t.chosen.is_null()) j["hyperparams"] = t.chosen;
        if (!t.importances.empty()) j["importances"] = t.importances;
        trials_json.push_back(std::move(j));
    }
    nlohmann::json j = {{"experiment", experiment},
                        {"config", config},
                        {"n_trials", trials.size()},
                        {"n_failed", n_failed},
                        {"median_srocc", optional_json(median_srocc)},
                        {"median_lcc", optional_json(median_lcc)},
                        {"trials", trials_json}};
    if (pooled_count > 0) {
        j["pooled"] = {{"count", pooled_count}, {"srocc", optional_json(pooled_srocc)}, {"lcc", optional_json(pooled_lcc)}};
    }
    if (!mean_importances.empty()) {
        nlohmann::json imp = nlohmann::json::object();
        const auto names = config.contains("features") ? config["features"].get<std::string>() : std::string();
        const auto mask = names.empty() ? FeatureMask::all() : FeatureMask::parse(names);
        for (std::size_t k = 0; k < mean_importances.size() && k < mask.size(); ++k)
            imp[std::string(feature_name(mask.ids()[k]))] = mean_importances[k];
        j["mean_importances"] = imp;
    }
    return j;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "trial,srocc,lcc,failed,n_train,n_test,held_out\n";
    for (const auto& t : trials)
        os << t.index << ',' << format_optional(t.srocc) << ',' << format_optional(t.lcc) << ',' << (t.failed ? 1 : 0)
           << ',' << t.n_train << ',' << t.n_test << ',' << t.held_out << '\n';
    return os.str();
}

EvalReport run_experiment1(const Dataset& ds, const SplitMatrix& splits, const ExperimentConfig& cfg) {
    if (ds.content_ids().size() < 2) throw InvalidArgumentError("experiment needs at least two contents");
    EvalReport report;
    report.experiment = "1";
    const auto grid_size = cfg.grid.empty() ? default_grid(cfg.regressor).size() : cfg.grid.size();
    report.config = config_echo("1", cfg, grid_size);
    report.config["train_fraction"] = splits.train_fraction;
    report.config["split_seed"] = splits.seed;
    report.trials.resize(splits.trials.size());

    parallel_for(splits.trials.size(), cfg.threads, [&](std::size_t t) {
        auto& rec = report.trials[t];
        rec.index = t;
        const std::uint64_t seed = derive_seed(cfg.seed, {t});
        try {
            const auto train = select_contents(ds.samples, splits.trials[t].train);
            const auto test = select_contents(ds.samples, splits.trials[t].test);
            rec.n_train = train.size();
            const auto fit = fit_and_predict(train, test, cfg, ds.higher_is_better, seed);
            rec.chosen = fit.chosen;
            rec.importances = fit.importances;
            const auto mos = to_std(mos_vector(test));
            score_trial(rec, to_std(fit.predictions), mos, cfg, seed);
        } catch (const Error& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
    });
    summarize(report);
    return report;
}

EvalReport run_before_regression(const Dataset& ds, const SplitMatrix& splits, const ExperimentConfig& cfg) {
    EvalReport report;
    report.experiment = "br";
    ExperimentConfig echo = cfg;
    echo.regressor = RegressorKind::identity;
    echo.features = FeatureMask({FeatureId::vqa});
    report.config = config_echo("br", echo, 1);
    report.config["train_fraction"] = splits.train_fraction;
    report.config["split_seed"] = splits.seed;
    report.trials.resize(splits.trials.size());
    const double sign = ds.higher_is_better ? 1.0 : -1.0;
    for (std::size_t t = 0; t < splits.trials.size(); ++t) {
        auto& rec = report.trials[t];
        rec.index = t;
        const auto test = select_contents(ds.samples, splits.trials[t].test);
        rec.n_train = select_contents(ds.samples, splits.trials[t].train).size();
        std::vector<double> pred, mos;
        for (const auto& s : test) {
            pred.push_back(sign * s.features.vqa);
            mos.push_back(s.mos);
        }
        try {
            score_trial(rec, pred, mos, cfg, derive_seed(cfg.seed, {t}));
        } catch (const Error& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
    }
    summarize(report);
    return report;
}

EvalReport run_experiment2(const Dataset& ds, const ExperimentConfig& cfg) {
    const auto patterns = ds.pattern_ids();
    if (patterns.size() < 2) throw InvalidArgumentError("leave-one-pattern-out needs at least two patterns");
    EvalReport report;
    report.experiment = "2";
    const auto grid_size = cfg.grid.empty() ? default_grid(cfg.regressor).size() : cfg.grid.size();
    report.config = config_echo("2", cfg, grid_size);
    report.trials.resize(patterns.size());
    std::vector<std::vector<double>> fold_pred(patterns.size()), fold_mos(patterns.size());

    parallel_for(patterns.size(), cfg.threads, [&](std::size_t f) {
        auto& rec = report.trials[f];
        rec.index = f;
        rec.held_out = patterns[f];
        const std::uint64_t seed = derive_seed(cfg.seed, {f});
        std::vector<QoESample> train, test;
        for (const auto& s : ds.samples) (s.pattern_id == patterns[f] ? test : train).push_back(s);
        try {
            if (test.empty()) throw InvalidArgumentError("pattern '" + patterns[f] + "' has no samples");
            rec.n_train = train.size();
            const auto fit = fit_and_predict(train, test, cfg, ds.higher_is_better, seed);
            rec.chosen = fit.chosen;
            rec.importances = fit.importances;
            fold_pred[f] = to_std(fit.predictions);
            fold_mos[f] = to_std(mos_vector(test));
            score_trial(rec, fold_pred[f], fold_mos[f], cfg, seed);
        } catch (const Error& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
    });
    summarize(report);

    std::vector<double> pooled_pred, pooled_mos;
    for (std::size_t f = 0; f < patterns.size(); ++f) {
        pooled_pred.insert(pooled_pred.end(), fold_pred[f].begin(), fold_pred[f].end());
        pooled_mos.insert(pooled_mos.end(), fold_mos[f].begin(), fold_mos[f].end());
    }
    report.pooled_count = pooled_pred.size();
    if (pooled_pred.size() >= 3) report.pooled_srocc = srocc(pooled_pred, pooled_mos);
    if (cfg.compute_lcc && pooled_pred.size() >= 5) {
        auto opts = cfg.logistic;
        opts.seed = derive_seed(cfg.seed, {0x9001});
        report.pooled_lcc = lcc_after_logistic(pooled_pred, pooled_mos, opts);
    }
    return report;
}

EvalReport run_cross_dataset(const Dataset& train_in, const Dataset& test_in, const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    Dataset train = train_in;
    Dataset test = test_in;
    const bool forced = !train.has_bitrate_variation || !test.has_bitrate_variation;
    if (forced) {
        cfg.features = FeatureMask({FeatureId::vqa, FeatureId::m, FeatureId::r2});
        train = with_m_stall(train);
        test = with_m_stall(test);
    } else if (cfg.features.contains(FeatureId::m) && train.m_is_stall != test.m_is_stall) {
        throw InvalidArgumentError("feature subset mismatch: memory feature is stall-only in one dataset only");
    }
    if (train.higher_is_better != test.higher_is_better)
        throw InvalidArgumentError("feature subset mismatch: quality feature polarity differs between datasets");
    if (train.samples.size() < 2 || test.samples.empty()) throw InvalidArgumentError("datasets are too small");

    EvalReport report;
    report.experiment = "cross";
    const auto grid_size = cfg.grid.empty() ? default_grid(cfg.regressor).size() : cfg.grid.size();
    report.config = config_echo("cross", cfg, grid_size);
    report.config["train_dataset"] = train.name;
    report.config["test_dataset"] = test.name;
    report.config["repetitions"] = cfg.repetitions;
    report.config["forced_subset"] = forced;
    report.config["memory_feature"] = train.m_is_stall ? "m_stall" : "m";

    const HyperParams hp = select_hyperparams(train.samples, cfg, train.higher_is_better, cfg.seed);
    const auto mos = to_std(mos_vector(test.samples));
    const auto reps = static_cast<std::size_t>(std::max(cfg.repetitions, 1));
    report.trials.resize(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
        auto& rec = report.trials[r];
        rec.index = r;
        rec.n_train = train.samples.size();
        const std::uint64_t seed = derive_seed(cfg.seed, {r});
        try {
            const auto fit = fit_and_predict(train.samples, test.samples, cfg, train.higher_is_better, seed, hp);
            rec.chosen = fit.chosen;
            rec.importances = fit.importances;
            score_trial(rec, to_std(fit.predictions), mos, cfg, seed);
        } catch (const Error& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
    });
    summarize(report);
    return report;
}

EvalReport run_baseline_experiment1(const std::vector<BaselineSession>& sessions, const SplitMatrix& splits,
                                    BaselineKind kind, const std::vector<BaselineParams>& grid,
                                    const ExperimentConfig& cfg) {
    EvalReport report;
    report.experiment = "1";
    report.config = {{"experiment", "1"},
                     {"regressor", baseline_name(kind)},
                     {"grid_size", grid.size()},
                     {"metric", cfg.metric_label},
                     {"train_fraction", splits.train_fraction},
                     {"split_seed", splits.seed},
                     {"seed", cfg.seed}};
    report.trials.resize(splits.trials.size());
    parallel_for(splits.trials.size(), cfg.threads, [&](std::size_t t) {
        auto& rec = report.trials[t];
        rec.index = t;
        const std::set<std::string> train_ids(splits.trials[t].train.begin(), splits.trials[t].train.end());
        std::vector<BaselineSession> train;
        std::vector<const BaselineSession*> test;
        for (const auto& s : sessions) {
            if (train_ids.count(s.content_id))
                train.push_back(s);
            else
                test.push_back(&s);
        }
        try {
            rec.n_train = train.size();
            const auto params = tune_baseline(train, kind, grid);
            rec.chosen = to_json(kind, params);
            std::vector<double> pred, mos;
            for (const auto* s : test) {
                pred.push_back(baseline_score(kind, *s, params));
                mos.push_back(s->mos);
            }
            score_trial(rec, pred, mos, cfg, derive_seed(cfg.seed, {t}));
        } catch (const Error& ex) {
            rec.failed = true;
            rec.error = ex.what();
        }
    });
    summarize(report);
    return report;
}

char verdict_symbol(Verdict v) {
    switch (v) {
        case Verdict::better: return '1';
        case Verdict::worse: return '0';
        case Verdict::indistinguishable:
        case Verdict::diagonal: return '-';
    }
    return '-';
}

SignificanceMatrix ranksum_significance(const std::vector<std::pair<std::string, std::vector<double>>>& trial_sroccs,
                                        double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgumentError("alpha must be in (0, 1)");
    const auto m = trial_sroccs.size();
    for (const auto& [name, v] : trial_sroccs) {
        if (v.size() != trial_sroccs.front().second.size())
            throw SizeMismatchError("trial count of '" + name + "' differs from '" + trial_sroccs.front().first + "'");
        if (v.size() < 10) throw InvalidArgumentError("'" + name + "' has fewer than ten trials");
    }
    auto finite = [](const std::vector<double>& v) {
        std::vector<double> out;
        for (double x : v)
            if (std::isfinite(x)) out.push_back(x);
        return out;
    };
    SignificanceMatrix sig;
    sig.entries.assign(m, std::vector<Verdict>(m, Verdict::diagonal));
    sig.p_values.assign(m, std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i) {
        sig.methods.push_back(trial_sroccs[i].first);
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const auto a = finite(trial_sroccs[i].second);
            const auto b = finite(trial_sroccs[j].second);
            if (a.empty() || b.empty()) {
                sig.entries[i][j] = Verdict::indistinguishable;
                continue;
            }
            const auto res = ranksum(a, b);
            sig.p_values[i][j] = res.p;
            const double mu = static_cast<double>(a.size()) * static_cast<double>(b.size()) / 2.0;
            if (res.p < alpha)
                sig.entries[i][j] = res.u > mu ? Verdict::better : Verdict::worse;
            else
                sig.entries[i][j] = Verdict::indistinguishable;
        }
    }
    return sig;
}

nlohmann::json SignificanceMatrix::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < methods.size(); ++i) {
        std::string row;
        for (auto v : entries[i]) row += verdict_symbol(v);
        rows.push_back({{"method", methods[i]}, {"verdicts", row}, {"p_values", p_values[i]}});
    }
    return {{"methods", methods}, {"rows", rows}};
}

std::string SignificanceMatrix::to_csv() const {
    std::ostringstream os;
    os << "method";
    for (const auto& name : methods) os << ',' << name;
    os << '\n';
    for (std::size_t i = 0; i < methods.size(); ++i) {
        os << methods[i];
        for (auto v : entries[i]) os << ',' << verdict_symbol(v);
        os << '\n';
    }
    return os.str();
}

std::vector<SweepPoint> train_fraction_sweep(const Dataset& ds, const std::vector<double>& fractions,
                                             std::size_t n_trials, std::uint64_t split_seed,
                                             const ExperimentConfig& cfg) {
    const auto contents = ds.content_ids();
    std::vector<SweepPoint> out;
    for (double f : fractions) {
        const auto splits = gen_content_splits(contents, f, n_trials, split_seed);
        SweepPoint p;
        p.fraction = f;
        p.train_contents = train_content_count(contents.size(), f);
        p.report = run_experiment1(ds, splits, cfg);
        out.push_back(std::move(p));
    }
    return out;
}

nlohmann::json sweep_to_json(const std::vector<SweepPoint>& sweep) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : sweep)
        points.push_back({{"train_fraction", p.fraction},
                          {"train_contents", p.train_contents},
                          {"n_trials", p.report.trials.size()},
                          {"n_failed", p.report.n_failed},
                          {"median_srocc", optional_json(p.report.median_srocc)},
                          {"median_lcc", optional_json(p.report.median_lcc)}});
    nlohmann::json j = {{"points", points}};
    if (!sweep.empty()) j["config"] = sweep.front().report.config;
    return j;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& sweep) {
    std::ostringstream os;
    os << "train_fraction,train_contents,median_srocc,median_lcc,n_trials,n_failed\n";
    for (const auto& p : sweep)
        os << format_number(p.fraction) << ',' << p.train_contents << ',' << format_optional(p.report.median_srocc)
           << ',' << format_optional(p.report.median_lcc) << ',' << p.report.trials.size() << ','
           << p.report.n_failed << '\n';
    return os.str();
}

std::string sweep_to_dat(const std::vector<SweepPoint>& sweep) {
    std::ostringstream os;
    os << "# train_fraction median_srocc median_lcc\n";
    for (const auto& p : sweep) {
        os << format_number(p.fraction) << ' ';
        os << (p.report.median_srocc ? format_number(*p.report.median_srocc) : std::string("nan")) << ' ';
        os << (p.report.median_lcc ? format_number(*p.report.median_lcc) : std::string("nan")) << '\n';
    }
    return os.str();
}

}  // namespace atlas
