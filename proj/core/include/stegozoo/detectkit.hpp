#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stegozoo/featurex.hpp"
#include "stegozoo/tensorstore.hpp"

namespace stegozoo::detect {

// ------------------------------------------------------------------ metrics

// Confusion counts with "malicious" as the positive class.
struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    double accuracy() const;
    double recall() const;     // 0 when tp + fn == 0
    double precision() const;  // 0 when tp + fp == 0
    double f1() const;         // 0 when precision + recall == 0

    bool operator==(const Metrics&) const = default;
};

// truth/pred entries: 1 = malicious, 0 = benign.
Metrics confusion(const std::vector<int>& truth, const std::vector<int>& pred);

// ---------------------------------------------------- unsupervised detector

// Flags a scalar feature as malicious iff value > mu + eps.
struct ThresholdDetector {
    double mu = 0.0;
    double eps = 0.0;
    // Set when no grid value met the target false-positive rate and the
    // largest one was taken instead.
    bool saturated = false;

    bool is_malicious(double value) const { return value > mu + eps; }
};

// {0, 0.25, 0.5, ..., 5.0} * sigma
std::vector<double> default_eps_grid(double sigma);

double mean_of(const std::vector<double>& values);
double stddev_of(const std::vector<double>& values);

// mu = mean of the benign training values; eps = smallest grid value whose
// false-positive rate on those same values is <= alpha. Needs >= 10 values
// and a nonempty grid.
ThresholdDetector fit_threshold(const std::vector<double>& benign_train,
                                const std::vector<double>& eps_grid, double alpha);

Metrics evaluate_threshold(const ThresholdDetector& d, const feat::FeatureDataset& test);

// ------------------------------------------------------------ tree ensembles

enum class EnsembleVariant { Rf, Gb, Hgb };

EnsembleVariant variant_from_name(const std::string& name);  // rf | gb | hgb
std::string variant_name(EnsembleVariant v);

struct EnsembleConfig {
    int rf_trees = 100;
    int rf_depth = 8;
    int gb_rounds = 200;
    int gb_depth = 3;
    double gb_lr = 0.1;
    int hgb_bins = 256;
};

// From-scratch forest over axis-aligned splits. rf bags gini trees with
// per-node feature subsampling; gb boosts depth-limited regression trees on
// logistic loss with second-order leaf weights; hgb is gb with per-feature
// quantile binning before split search. Fitting canonicalizes the row order
// first, so predictions do not depend on how the caller ordered the rows.
class TreeEnsemble {
public:
    struct Node {
        int feature = -1;  // -1: leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;  // leaf payload: class-1 fraction (rf) or score (gb)

        bool leaf() const { return feature < 0; }
    };
    struct Tree {
        std::vector<Node> nodes;
        double predict(const std::vector<double>& x) const;
    };

    static TreeEnsemble fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                            EnsembleVariant variant, const EnsembleConfig& cfg,
                            std::uint64_t seed);

    // Mean leaf probability (rf) or sigmoid of the boosted score (gb/hgb).
    double score(const std::vector<double>& x) const;
    int predict(const std::vector<double>& x) const { return score(x) > 0.5 ? 1 : 0; }

    EnsembleVariant variant() const { return variant_; }
    const std::vector<Tree>& trees() const { return trees_; }
    std::size_t dimension() const { return dim_; }

    void save(const std::filesystem::path& path) const;
    static TreeEnsemble load(const std::filesystem::path& path);

private:
    EnsembleVariant variant_ = EnsembleVariant::Rf;
    EnsembleConfig cfg_;
    std::uint64_t seed_ = 0;
    std::size_t dim_ = 0;
    double base_score_ = 0.0;  // gb/hgb initial log-odds
    std::vector<Tree> trees_;

    friend TreeEnsemble fit_rf(const std::vector<std::vector<double>>&, const std::vector<int>&,
                               const EnsembleConfig&, std::uint64_t);
    friend TreeEnsemble fit_gb(const std::vector<std::vector<double>>&, const std::vector<int>&,
                               const EnsembleConfig&, std::uint64_t, bool);
};

Metrics evaluate_ensemble(const TreeEnsemble& e, const feat::FeatureDataset& test);

// ------------------------------------------------------- detector checkpoints

// SDK1 container: magic, format version, JSON body.
void save_threshold(const ThresholdDetector& d, const std::filesystem::path& path);
ThresholdDetector load_threshold(const std::filesystem::path& path);
// "threshold" or "ensemble"; FormatError when the file is not SDK1.
std::string detector_kind(const std::filesystem::path& path);

// ------------------------------------------------------- experiment protocol

struct ReportRow {
    std::string feature;  // loss | grads | weights
    std::string method;   // mean_eps | rf | gb | hgb
    int x_lsb = 0;
    Metrics counts;
    std::uint64_t seed = 0;
    bool eps_saturated = false;

    bool operator==(const ReportRow&) const = default;
};

struct EvalReport {
    std::vector<ReportRow> rows;

    // feature,method,x_lsb,A,R,P,F1,seed
    std::string to_csv() const;
    std::string to_table() const;

    bool operator==(const EvalReport&) const = default;
};

struct SeverityData {
    int x = 0;
    std::vector<store::ModelRecord> models;  // attacked twins, benign order
};

struct ExperimentConfig {
    feat::FeatureKind feature = feat::FeatureKind::Loss;
    std::string method = "mean_eps";  // mean_eps -> unsupervised, else ensemble
    double unsup_train_fraction = 0.7;
    double sup_train_fraction = 0.8;
    double alpha = 0.05;
    feat::AeConfig ae;
    EnsembleConfig ensemble;
};

// Runs the protocol for every severity level present:
//   mean_eps: fit on 70% of benign, test on the other 30% plus all attacked.
//   rf/gb/hgb: 80/20 class-stratified split; a benign model and its attacked
//   twin always land on the same side.
// One report row per severity; deterministic given the seed.
EvalReport run_experiment(const std::vector<store::ModelRecord>& benign,
                          const std::vector<SeverityData>& severities,
                          const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace stegozoo::detect
