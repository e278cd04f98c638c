// Command-line front end for the Video ATLAS pipeline.

#include "atlas/baselines.hpp"
#include "atlas/dataset.hpp"
#include "atlas/error.hpp"
#include "atlas/eval.hpp"
#include "atlas/parallel.hpp"
#include "atlas/random.hpp"
#include "atlas/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : atlas::Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Output

void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw atlas::IoError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw atlas::IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw atlas::IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw atlas::ParseError(path.string() + ": " + e.what());
    }
}

std::string format_double(double v) {
    if (!std::isfinite(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Options shared by the subcommands

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 0;

    std::string manifest;
    std::string table;
    std::string test_manifest;
    std::string test_table;
    std::string metric = "psnr";
    int msssim_scales = 5;
    std::string pooling = "mean";
    double tau_s = 2.0;
    double alpha = 0.8;
    double w_low = 0.75;

    std::string regressor = "ridge";
    std::string features = "vqa,r1,r2,m,i";
    std::string grid;
    int cv_folds = 10;
    std::string experiment = "1";
    int trials = 1000;
    double train_fraction = 0.8;
    int repetitions = 50;
    std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8};
    bool no_lcc = false;

    std::string model;
    std::vector<std::string> reports;
    double sig_alpha = 0.01;

    // synth
    int contents = 10;
    int patterns = 6;
    int width = 64;
    int height = 64;
    double fps = 5.0;
    double mos_noise = 3.0;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "JSON file of flat dotted keys mirroring the flags");
    cmd->add_option("--out", o.out, "Output directory")->required();
    cmd->add_option("--seed", o.seed, "Seed for every random choice");
    cmd->add_option("--threads", o.threads, "Worker threads (default: ATLAS_THREADS or hardware)");
}

void add_source(CLI::App* cmd, Options& o) {
    cmd->add_option("--manifest", o.manifest, "Dataset manifest");
    cmd->add_option("--table", o.table, "Feature table CSV instead of a manifest");
    cmd->add_option("--metric", o.metric, "Per-frame quality source")
        ->check(CLI::IsMember({"psnr", "ssim", "msssim", "gmsd", "csv"}));
    cmd->add_option("--msssim-scales", o.msssim_scales, "Upper bound on MS-SSIM scales");
    cmd->add_option("--pooling", o.pooling, "Temporal pooling")->check(CLI::IsMember({"mean", "hysteresis", "vq"}));
    cmd->add_option("--pooling-tau", o.tau_s, "Hysteresis window in seconds");
    cmd->add_option("--pooling-alpha", o.alpha, "Hysteresis memory weight");
    cmd->add_option("--pooling-w-low", o.w_low, "VQ weight of the worse cluster");
}

void add_model(CLI::App* cmd, Options& o) {
    cmd->add_option("--regressor", o.regressor, "ridge|lasso|svr|rf|et|gb (evaluate also: br|ftw|vsqm|sqi)");
    cmd->add_option("--features", o.features, "Comma-separated feature subset");
    cmd->add_option("--cv-folds", o.cv_folds, "Cross-validation folds for the grid search");
    cmd->add_option("--grid", o.grid, "Grid override: inline JSON (object or array of objects) or a JSON file");
}

/// Dotted config keys map onto long flags: "pooling.tau" -> "--pooling-tau".
std::string key_to_flag(std::string key) {
    for (char& c : key)
        if (c == '.' || c == '_') c = '-';
    return "--" + key;
}

std::string json_to_arg(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_object()) return v.dump();
    if (v.is_array()) {
        if (std::any_of(v.begin(), v.end(), [](const json& e) { return e.is_structured(); })) return v.dump();
        std::string s;
        for (const auto& e : v) {
            if (!s.empty()) s += ",";
            s += json_to_arg(e);
        }
        return s;
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

/// Append config-file values for flags the command line did not set.
std::vector<std::string> merge_config(CLI::App& app, std::vector<std::string> args) {
    std::string config;
    CLI::App* sub = nullptr;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (!sub && !args[k].empty() && args[k][0] != '-') sub = app.get_subcommand_no_throw(args[k]);
        if (args[k] == "--config" && k + 1 < args.size()) config = args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) config = args[k].substr(9);
    }
    if (config.empty() || !sub) return args;

    const json j = read_json(config);
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        const std::string flag = key_to_flag(key);
        if (!sub->get_option_no_throw(flag)) {
            bool known = false;
            for (const auto* other : app.get_subcommands({}))
                known = known || other->get_option_no_throw(flag) != nullptr;
            if (!known) throw UsageError("unknown config key '" + key + "'");
            continue;
        }
        bool given = false;
        for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
        if (given) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        args.push_back(json_to_arg(value));
    }
    return args;
}

// ---------------------------------------------------------------------------
// Data loading

atlas::PoolingConfig pooling_config(const Options& o) {
    atlas::PoolingConfig p;
    p.method = atlas::parse_pooling(o.pooling);
    p.hysteresis.tau_s = o.tau_s;
    p.hysteresis.alpha = o.alpha;
    p.vq.w_low = o.w_low;
    p.vq.seed = o.seed;
    p.validate();
    return p;
}

struct Loaded {
    atlas::Dataset dataset;
    std::vector<atlas::ScoredSession> sessions;  // empty for feature tables
};

Loaded load_source(const std::string& manifest_path, const std::string& table_path, const Options& o,
                   unsigned threads) {
    if (manifest_path.empty() == table_path.empty())
        throw UsageError("give exactly one of --manifest or --table");
    Loaded out;
    if (!table_path.empty()) {
        out.dataset.name = fs::path(table_path).stem().string();
        out.dataset.samples = atlas::read_feature_csv(table_path);
        out.dataset.higher_is_better = o.metric == "csv" || atlas::metric_higher_is_better(atlas::parse_metric(o.metric));
        return out;
    }
    const auto m = atlas::load_manifest(manifest_path);
    atlas::ScoringOptions so;
    so.threads = threads;
    if (o.metric != "csv") {
        so.metric = atlas::parse_metric(o.metric);
        so.metric_config.msssim_scales = atlas::fitting_msssim_scales(m.width, m.height, o.msssim_scales);
    }
    std::vector<std::string> warnings;
    out.sessions = atlas::score_manifest(m, so, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    out.dataset = atlas::build_dataset(m.name, out.sessions, pooling_config(o), threads);
    return out;
}

atlas::HyperGrid parse_grid(const std::string& text, atlas::RegressorKind kind) {
    json j;
    if (!text.empty() && (text.front() == '{' || text.front() == '[')) {
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw UsageError(std::string("--grid: ") + e.what());
        }
    } else {
        j = read_json(text);
    }
    if (j.is_object()) j = json::array({j});
    if (!j.is_array() || j.empty()) throw UsageError("--grid must be a JSON object or a non-empty array");
    atlas::HyperGrid grid;
    for (const auto& point : j) grid.push_back(atlas::hyperparams_from_json(kind, point));
    return grid;
}

atlas::ExperimentConfig experiment_config(const Options& o, unsigned threads) {
    atlas::ExperimentConfig cfg;
    cfg.regressor = atlas::parse_regressor(o.regressor);
    if (!o.grid.empty()) cfg.grid = parse_grid(o.grid, cfg.regressor);
    cfg.features = atlas::FeatureMask::parse(o.features);
    cfg.cv_folds = o.cv_folds;
    cfg.seed = atlas::derive_seed(o.seed, {1});
    cfg.threads = threads;
    cfg.compute_lcc = !o.no_lcc;
    cfg.repetitions = o.repetitions;
    cfg.metric_label = o.metric;
    cfg.pooling_label = o.pooling;
    if (o.cv_folds < 2) throw UsageError("--cv-folds must be at least 2");
    return cfg;
}

void write_report(const fs::path& dir, const std::string& stem, const atlas::EvalReport& rep) {
    atomic_write(dir / (stem + ".json"), rep.to_json().dump(2) + "\n");
    atomic_write(dir / (stem + ".csv"), rep.to_csv());
}

void print_summary(const atlas::EvalReport& rep) {
    auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
    std::cout << "experiment " << rep.experiment << ": " << rep.trials.size() << " trials, " << rep.n_failed
              << " failed, median SROCC " << show(rep.median_srocc) << ", median LCC " << show(rep.median_lcc);
    if (rep.pooled_srocc) std::cout << ", pooled SROCC " << show(rep.pooled_srocc);
    std::cout << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_synth(const Options& o) {
    atlas::SynthConfig cfg;
    cfg.n_contents = o.contents;
    cfg.n_patterns = o.patterns;
    cfg.width = o.width;
    cfg.height = o.height;
    cfg.fps = o.fps;
    cfg.mos_noise_sigma = o.mos_noise;
    cfg.seed = o.seed;
    cfg.validate();
    const auto data = atlas::generate(cfg);
    const auto manifest = atlas::write_synth_dataset(data, o.out);
    atomic_write(fs::path(o.out) / "synth_config.json", atlas::to_json(cfg).dump(2) + "\n");
    std::cout << manifest.string() << "\n";
}

void cmd_features(const Options& o, unsigned threads) {
    if (o.manifest.empty()) throw UsageError("features needs --manifest");
    const auto loaded = load_source(o.manifest, "", o, threads);
    const fs::path out = fs::path(o.out) / "features.csv";
    fs::create_directories(o.out);
    const fs::path tmp = out.string() + ".tmp";
    atlas::write_feature_csv(tmp, loaded.dataset.samples);
    fs::rename(tmp, out);
    std::cout << out.string() << "\n";
}

void cmd_train(const Options& o, unsigned threads) {
    const auto loaded = load_source(o.manifest, o.table, o, threads);
    const auto cfg = experiment_config(o, threads);
    if (cfg.regressor == atlas::RegressorKind::identity) throw UsageError("identity is not a trainable regressor");
    const auto& samples = loaded.dataset.samples;
    const Eigen::MatrixXd X = atlas::feature_matrix(samples, cfg.features);
    const Eigen::VectorXd y = atlas::mos_vector(samples);
    const auto grid = cfg.grid.empty() ? atlas::default_grid(cfg.regressor) : cfg.grid;
    atlas::HyperParams chosen = grid.front();
    if (grid.size() > 1) {
        const int k = std::min<int>(cfg.cv_folds, static_cast<int>(samples.size()));
        chosen = atlas::grid_search_cv(X, y, cfg.regressor, grid, k, cfg.seed, cfg.criterion).best;
    }
    const auto model = atlas::train_model(cfg.regressor, X, y, chosen, cfg.features, atlas::derive_seed(cfg.seed, {1}));
    atomic_write(fs::path(o.out) / "model.json", atlas::to_json(model).dump(2) + "\n");
    std::cout << "trained " << o.regressor << " on " << samples.size() << " sessions with "
              << atlas::hyperparams_to_json(cfg.regressor, chosen).dump() << "\n";
}

void cmd_predict(const Options& o, bool features_given, unsigned threads) {
    if (o.model.empty()) throw UsageError("predict needs --model");
    const auto model = atlas::load_model(o.model);
    if (features_given && !(atlas::FeatureMask::parse(o.features) == model.feature_mask))
        throw atlas::InvalidArgumentError("feature subset " + atlas::FeatureMask::parse(o.features).to_string() +
                                          " does not match the model's " + model.feature_mask.to_string());
    const auto loaded = load_source(o.manifest, o.table, o, threads);
    const auto& samples = loaded.dataset.samples;
    const auto pred = atlas::predict(model, atlas::feature_matrix(samples, model.feature_mask));
    std::string csv = "content_id,pattern_id,prediction,mos\n";
    for (std::size_t k = 0; k < samples.size(); ++k)
        csv += samples[k].content_id + "," + samples[k].pattern_id + "," + format_double(pred(static_cast<Eigen::Index>(k))) +
               "," + format_double(samples[k].mos) + "\n";
    atomic_write(fs::path(o.out) / "predictions.csv", csv);
    std::cout << samples.size() << " predictions\n";
}

atlas::SplitMatrix splits_for(const atlas::Dataset& ds, const Options& o, double fraction) {
    if (o.trials < 1) throw UsageError("--trials must be positive");
    return atlas::gen_content_splits(ds.content_ids(), fraction, static_cast<std::size_t>(o.trials),
                                     atlas::derive_seed(o.seed, {0}));
}

void cmd_evaluate(const Options& o, unsigned threads) {
    const bool baseline = atlas::is_baseline_name(o.regressor);
    const bool br = o.regressor == "br";
    Options eff = o;
    if (baseline || br) eff.regressor = "identity";
    if (br) eff.features = "vqa";
    const auto cfg = experiment_config(eff, threads);
    const auto loaded = load_source(o.manifest, o.table, o, threads);
    const auto& ds = loaded.dataset;

    atlas::EvalReport rep;
    if (o.experiment == "1") {
        const auto splits = splits_for(ds, o, o.train_fraction);
        if (baseline) {
            if (loaded.sessions.empty()) throw UsageError("baselines need --manifest (playout patterns)");
            const auto kind = atlas::parse_baseline(o.regressor);
            rep = atlas::run_baseline_experiment1(atlas::baseline_sessions(loaded.sessions), splits, kind,
                                                  atlas::default_baseline_grid(kind), cfg);
        } else if (br) {
            rep = atlas::run_before_regression(ds, splits, cfg);
        } else {
            rep = atlas::run_experiment1(ds, splits, cfg);
        }
    } else if (o.experiment == "2") {
        if (baseline || br) throw UsageError("experiment 2 needs a trainable regressor");
        rep = atlas::run_experiment2(ds, cfg);
    } else if (o.experiment == "cross") {
        if (baseline || br) throw UsageError("cross-dataset evaluation needs a trainable regressor");
        const auto test = load_source(o.test_manifest, o.test_table, o, threads);
        rep = atlas::run_cross_dataset(ds, test.dataset, cfg);
    } else {
        throw UsageError("--experiment must be 1, 2 or cross");
    }
    write_report(o.out, "report", rep);
    print_summary(rep);
}

void cmd_significance(const Options& o) {
    if (o.reports.size() < 2) throw UsageError("significance needs at least two --reports");
    std::vector<std::pair<std::string, std::vector<double>>> methods;
    for (const auto& path : o.reports) {
        const json j = read_json(path);
        std::string name = fs::path(path).stem().string();
        if (j.contains("config")) {
            const auto& c = j["config"];
            if (c.contains("regressor")) {
                name = c["regressor"].get<std::string>();
                if (c.contains("features") && c["regressor"] != "identity") name += "[" + c["features"].get<std::string>() + "]";
            }
        }
        std::vector<double> values;
        for (const auto& t : j.at("trials"))
            values.push_back(t.contains("srocc") && t["srocc"].is_number() ? t["srocc"].get<double>()
                                                                            : std::numeric_limits<double>::quiet_NaN());
        for (const auto& [existing, _] : methods)
            if (existing == name) name += "#" + std::to_string(methods.size());
        methods.emplace_back(name, std::move(values));
    }
    const auto sig = atlas::ranksum_significance(methods, o.sig_alpha);
    atomic_write(fs::path(o.out) / "significance.json", sig.to_json().dump(2) + "\n");
    atomic_write(fs::path(o.out) / "significance.csv", sig.to_csv());
    std::cout << sig.to_csv();
}

void cmd_sweep(const Options& o, unsigned threads) {
    const auto loaded = load_source(o.manifest, o.table, o, threads);
    const auto cfg = experiment_config(o, threads);
    if (o.trials < 1) throw UsageError("--trials must be positive");
    const auto sweep = atlas::train_fraction_sweep(loaded.dataset, o.fractions, static_cast<std::size_t>(o.trials),
                                                   atlas::derive_seed(o.seed, {0}), cfg);
    atomic_write(fs::path(o.out) / "sweep.json", atlas::sweep_to_json(sweep).dump(2) + "\n");
    atomic_write(fs::path(o.out) / "sweep.csv", atlas::sweep_to_csv(sweep));
    atomic_write(fs::path(o.out) / "sweep.dat", atlas::sweep_to_dat(sweep));
    std::cout << atlas::sweep_to_dat(sweep);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Video ATLAS: streaming QoE prediction from quality, rebuffering and memory features"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with an oracle MOS");
    add_common(synth, o);
    synth->add_option("--contents", o.contents, "Number of source contents");
    synth->add_option("--patterns", o.patterns, "Number of playout patterns");
    synth->add_option("--width", o.width, "Frame width");
    synth->add_option("--height", o.height, "Frame height");
    synth->add_option("--fps", o.fps, "Frame rate");
    synth->add_option("--mos-noise", o.mos_noise, "Std of the MOS noise");

    auto* features = app.add_subcommand("features", "Write the per-session feature table");
    add_common(features, o);
    add_source(features, o);

    auto* train = app.add_subcommand("train", "Cross-validate and train one regressor on all sessions");
    add_common(train, o);
    add_source(train, o);
    add_model(train, o);

    auto* predict = app.add_subcommand("predict", "Apply a trained model");
    add_common(predict, o);
    add_source(predict, o);
    predict->add_option("--model", o.model, "Model file from train")->required();
    auto* predict_features = predict->add_option("--features", o.features, "Expected feature subset");

    auto* evaluate = app.add_subcommand("evaluate", "Run an evaluation protocol and write reports");
    add_common(evaluate, o);
    add_source(evaluate, o);
    add_model(evaluate, o);
    evaluate->add_option("--experiment", o.experiment, "1 (content splits), 2 (leave one pattern out) or cross");
    evaluate->add_option("--trials", o.trials, "Content-split trials");
    evaluate->add_option("--train-fraction", o.train_fraction, "Training share of the contents");
    evaluate->add_option("--test-manifest", o.test_manifest, "Test dataset for --experiment cross");
    evaluate->add_option("--test-table", o.test_table, "Test feature table for --experiment cross");
    evaluate->add_option("--repetitions", o.repetitions, "Repetitions of stochastic cross-dataset runs");
    evaluate->add_flag("--no-lcc", o.no_lcc, "Skip the logistic fit");

    auto* significance = app.add_subcommand("significance", "Rank-sum tests between evaluation reports");
    add_common(significance, o);
    significance->add_option("--reports", o.reports, "Report JSON files from evaluate")->delimiter(',');
    significance->add_option("--alpha", o.sig_alpha, "Significance level");

    auto* sweep = app.add_subcommand("sweep", "Median correlations as the training share varies");
    add_common(sweep, o);
    add_source(sweep, o);
    add_model(sweep, o);
    sweep->add_option("--trials", o.trials, "Trials per fraction");
    sweep->add_option("--fractions", o.fractions, "Training fractions")->delimiter(',');
    sweep->add_flag("--no-lcc", o.no_lcc, "Skip the logistic fit");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config(app, std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const atlas::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const unsigned threads = atlas::resolve_threads(o.threads);
        if (synth->parsed()) cmd_synth(o);
        if (features->parsed()) cmd_features(o, threads);
        if (train->parsed()) cmd_train(o, threads);
        if (predict->parsed()) cmd_predict(o, predict_features->count() > 0, threads);
        if (evaluate->parsed()) cmd_evaluate(o, threads);
        if (significance->parsed()) cmd_significance(o);
        if (sweep->parsed()) cmd_sweep(o, threads);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const atlas::InvalidArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const atlas::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
