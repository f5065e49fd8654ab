#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "stegozoo/csv.hpp"
#include "stegozoo/detectkit.hpp"
#include "stegozoo/featurex.hpp"
#include "stegozoo/rng.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/zooforge.hpp"
#include "support/oracles.hpp"

using namespace stegozoo;
namespace fs = std::filesystem;

namespace {

const zoo::Zoo& shared_zoo() {
    static const zoo::Zoo z = zoo::generate_zoo(zoo::default_manifest(30, 2026, "det"));
    return z;
}

feat::FeatureDataset scalar_dataset(const std::vector<double>& benign,
                                    const std::vector<double>& malicious, int x) {
    feat::FeatureDataset ds;
    ds.kind = feat::FeatureKind::Loss;
    std::size_t id = 0;
    for (double v : benign) {
        ds.rows.push_back({zoo::model_id(id++), "benign", 0, {v}});
    }
    for (double v : malicious) {
        ds.rows.push_back({zoo::model_id(id++), "malicious", x, {v}});
    }
    return ds;
}

// Exhaustive best-stump accuracy over a binary dataset: every feature, every
// midpoint threshold, both polarities.
double best_stump_accuracy(const std::vector<std::vector<double>>& x,
                           const std::vector<int>& y) {
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();
    double best = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> cuts;
        for (const auto& row : x) cuts.push_back(row[f]);
        std::sort(cuts.begin(), cuts.end());
        cuts.push_back(cuts.back() + 1.0);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double thr = (cuts[c] + cuts[c + 1]) / 2.0;
            std::size_t right_pos = 0;  // predict 1 when x[f] > thr
            for (std::size_t i = 0; i < n; ++i) {
                const int pred = x[i][f] > thr ? 1 : 0;
                if (pred == y[i]) ++right_pos;
            }
            best = std::max(best, static_cast<double>(std::max(right_pos, n - right_pos)) /
                                      static_cast<double>(n));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("metrics follow the positive-class conventions") {
    detect::Metrics m{3, 1, 4, 2};
    CHECK(m.total() == 10);
    CHECK(m.accuracy() == doctest::Approx(0.7));
    CHECK(m.recall() == doctest::Approx(0.6));
    CHECK(m.precision() == doctest::Approx(0.75));
    CHECK(m.f1() == doctest::Approx(2.0 * 0.75 * 0.6 / 1.35));

    // No predicted positives: precision 0 by convention, so f1 0.
    detect::Metrics none{0, 0, 5, 5};
    CHECK(none.precision() == 0.0);
    CHECK(none.recall() == 0.0);
    CHECK(none.f1() == 0.0);

    // No actual positives and nothing flagged: vacuous recall 0, accuracy 1.
    detect::Metrics clean{0, 0, 8, 0};
    CHECK(clean.accuracy() == 1.0);
    CHECK(clean.recall() == 0.0);
    CHECK(clean.f1() == 0.0);
}

TEST_CASE("confusion matches the reference counter on fuzzed labelings") {
    Rng rng(0xc0);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<int> truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.below(2));
            pred[i] = static_cast<int>(rng.below(2));
        }
        const detect::Metrics m = detect::confusion(truth, pred);
        const oracle::RefCounts want = oracle::ref_confusion(truth, pred);
        CHECK(m.tp == want.tp);
        CHECK(m.fp == want.fp);
        CHECK(m.tn == want.tn);
        CHECK(m.fn == want.fn);
    }
    CHECK_THROWS_AS(detect::confusion({1, 0}, {1}), ShapeError);
}

TEST_CASE("default eps grid is 21 quarter-sigma steps") {
    const auto grid = detect::default_eps_grid(2.0);
    REQUIRE(grid.size() == 21);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(grid[i] == doctest::Approx(0.25 * static_cast<double>(i) * 2.0).epsilon(1e-15));
    }
}

TEST_CASE("fit_threshold picks the smallest eps meeting the alpha target") {
    // Standard normal sample: FPR(eps = k*sigma) ~ P(Z > k). alpha = 0.05
    // needs k ~ 1.645, so the chosen quarter-step lands at 1.75 sigma (or
    // 1.5 sigma when the sample tail is slightly light).
    Rng rng(0x77);
    std::vector<double> train(10000);
    for (double& v : train) v = rng.normal();
    const double mu = detect::mean_of(train);
    const double sd = detect::stddev_of(train);
    const auto d = detect::fit_threshold(train, detect::default_eps_grid(sd), 0.05);
    CHECK(d.mu == doctest::Approx(mu).epsilon(1e-12));
    CHECK_FALSE(d.saturated);
    const double k = d.eps / sd;
    CHECK(k >= 1.5);
    CHECK(k <= 1.75);

    // The training FPR promise holds exactly.
    std::size_t flagged = 0;
    for (double v : train) flagged += d.is_malicious(v) ? 1 : 0;
    CHECK(static_cast<double>(flagged) / static_cast<double>(train.size()) <= 0.05);

    // Boundary: a value equal to mu + eps is benign (strict inequality).
    CHECK_FALSE(d.is_malicious(d.mu + d.eps));
    CHECK(d.is_malicious(std::nextafter(d.mu + d.eps, 1e300)));
}

TEST_CASE("fit_threshold saturates when no grid value reaches alpha") {
    std::vector<double> train(100, 0.0);
    for (std::size_t i = 0; i < 30; ++i) train[i] = 1e6;  // 30% far outliers
    const auto grid = detect::default_eps_grid(1.0);  // max eps 5.0, far too small
    const auto d = detect::fit_threshold(train, grid, 0.05);
    CHECK(d.saturated);
    CHECK(d.eps == grid.back());
}

TEST_CASE("fit_threshold input validation") {
    std::vector<double> nine(9, 1.0);
    CHECK_THROWS_AS(detect::fit_threshold(nine, {0.0, 1.0}, 0.05), ConfigError);
    std::vector<double> ok(10, 1.0);
    CHECK_THROWS_AS(detect::fit_threshold(ok, {}, 0.05), ConfigError);
    CHECK_THROWS_AS(detect::fit_threshold(ok, {-1.0, 0.5}, 0.05), ConfigError);  // negative
    // Grid order is the caller's business: it gets sorted before the scan.
    Rng grng(0x78);
    std::vector<double> sample(50);
    for (double& v : sample) v = grng.normal();
    const auto sorted_fit = detect::fit_threshold(sample, {0.0, 0.5, 1.0, 2.0}, 0.05);
    const auto shuffled_fit = detect::fit_threshold(sample, {2.0, 0.0, 1.0, 0.5}, 0.05);
    CHECK(sorted_fit.eps == shuffled_fit.eps);
    std::vector<double> bad = ok;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(detect::fit_threshold(bad, {0.0, 1.0}, 0.05), NumericError);
}

TEST_CASE("evaluate_threshold scores a scalar dataset") {
    detect::ThresholdDetector d;
    d.mu = 0.0;
    d.eps = 1.0;
    const auto ds = scalar_dataset({-0.5, 0.4, 2.0}, {3.0, 0.2}, 8);
    const auto m = detect::evaluate_threshold(d, ds);
    CHECK(m.tn == 2);
    CHECK(m.fp == 1);
    CHECK(m.tp == 1);
    CHECK(m.fn == 1);

    feat::FeatureDataset wide;
    wide.rows.push_back({"m0000", "benign", 0, {1.0, 2.0}});
    CHECK_THROWS_AS(detect::evaluate_threshold(d, wide), ShapeError);
    CHECK_THROWS_AS(detect::evaluate_threshold(d, feat::FeatureDataset{}), ConfigError);
}

TEST_CASE("ensembles separate an obvious feature perfectly") {
    Rng rng(0x31);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
        const int cls = i % 2;
        // Feature 0 is noise; feature 1 separates at 0.5 with a wide margin.
        x.push_back({rng.normal(), cls == 1 ? 1.0 + rng.uniform01() : -1.0 - rng.uniform01()});
        y.push_back(cls);
    }
    for (auto variant : {detect::EnsembleVariant::Rf, detect::EnsembleVariant::Gb,
                         detect::EnsembleVariant::Hgb}) {
        const auto e = detect::TreeEnsemble::fit(x, y, variant, {}, 5);
        CHECK(e.dimension() == 2);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < x.size(); ++i) hits += e.predict(x[i]) == y[i] ? 1 : 0;
        CHECK(hits == x.size());
    }
}

TEST_CASE("depth-2 trees solve xor where any single stump cannot") {
    // 25 jittered replicas of each xor corner.
    Rng rng(0x32);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int rep = 0; rep < 25; ++rep) {
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                x.push_back({a + 0.01 * rng.normal(), b + 0.01 * rng.normal()});
                y.push_back(a ^ b);
            }
        }
    }
    // Sanity: the exhaustive oracle confirms no single axis cut separates xor
    // (the jitter lets a lucky cut squeeze out a few points, nothing more).
    CHECK(best_stump_accuracy(x, y) <= 0.6);

    detect::EnsembleConfig deep;
    deep.rf_depth = 2;
    deep.gb_depth = 2;
    for (auto variant : {detect::EnsembleVariant::Rf, detect::EnsembleVariant::Gb,
                         detect::EnsembleVariant::Hgb}) {
        const auto solved = detect::TreeEnsemble::fit(x, y, variant, deep, 7);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < x.size(); ++i) hits += solved.predict(x[i]) == y[i] ? 1 : 0;
        CHECK(hits == x.size());
    }
}

TEST_CASE("hgb reduces to gb when the bins resolve every distinct value") {
    // Few distinct values per feature (< default 256 bins) and no ties at
    // candidate splits, so quantile binning reproduces the exact splits.
    Rng rng(0x33);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 80; ++i) {
        x.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(rng.below(2) ? 1 : 0);
    }
    const auto gb = detect::TreeEnsemble::fit(x, y, detect::EnsembleVariant::Gb, {}, 9);
    const auto hgb = detect::TreeEnsemble::fit(x, y, detect::EnsembleVariant::Hgb, {}, 9);
    for (const auto& row : x) {
        CHECK(gb.score(row) == hgb.score(row));
    }
}

TEST_CASE("ensemble fitting is deterministic and row-order invariant") {
    Rng rng(0x34);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 50; ++i) {
        x.push_back({rng.normal(), rng.normal()});
        y.push_back(i % 3 == 0 ? 1 : 0);
    }
    std::vector<std::size_t> perm(x.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng(0x35).shuffle(perm);
    std::vector<std::vector<double>> xp;
    std::vector<int> yp;
    for (std::size_t i : perm) {
        xp.push_back(x[i]);
        yp.push_back(y[i]);
    }

    const oracle::TempDir tmp("ens_order");
    for (auto variant : {detect::EnsembleVariant::Rf, detect::EnsembleVariant::Gb,
                         detect::EnsembleVariant::Hgb}) {
        const auto a = detect::TreeEnsemble::fit(x, y, variant, {}, 21);
        const auto b = detect::TreeEnsemble::fit(xp, yp, variant, {}, 21);
        for (const auto& row : x) CHECK(a.score(row) == b.score(row));

        const fs::path pa = tmp.path() / (detect::variant_name(variant) + "_a.sdk");
        const fs::path pb = tmp.path() / (detect::variant_name(variant) + "_b.sdk");
        a.save(pa);
        b.save(pb);
        CHECK(csv::read_text_file(pa) == csv::read_text_file(pb));
    }
}

TEST_CASE("ensemble fit input validation") {
    using detect::EnsembleVariant;
    using detect::TreeEnsemble;
    CHECK_THROWS_AS(TreeEnsemble::fit({}, {}, EnsembleVariant::Rf, {}, 1), ConfigError);
    CHECK_THROWS_AS(TreeEnsemble::fit({{}}, {0}, EnsembleVariant::Rf, {}, 1), ConfigError);
    CHECK_THROWS_AS(TreeEnsemble::fit({{1.0}, {2.0}}, {0, 2}, EnsembleVariant::Rf, {}, 1),
                    ConfigError);
    CHECK_THROWS_AS(TreeEnsemble::fit({{1.0}, {2.0}}, {1, 1}, EnsembleVariant::Gb, {}, 1),
                    ConfigError);  // single class
    CHECK_THROWS_AS(TreeEnsemble::fit({{1.0}, {2.0, 3.0}}, {0, 1}, EnsembleVariant::Rf, {}, 1),
                    ShapeError);  // ragged
    CHECK_THROWS_AS(TreeEnsemble::fit({{1.0}, {2.0}}, {0}, EnsembleVariant::Rf, {}, 1),
                    ShapeError);  // row count mismatch
}

TEST_CASE("detector checkpoints round trip through sdk1") {
    const oracle::TempDir tmp("ckpt");

    detect::ThresholdDetector d;
    d.mu = 1.25;
    d.eps = 0.5;
    d.saturated = true;
    const fs::path tpath = tmp.path() / "thr.sdk";
    detect::save_threshold(d, tpath);
    CHECK(detect::detector_kind(tpath) == "threshold");
    const auto dt = detect::load_threshold(tpath);
    CHECK(dt.mu == d.mu);
    CHECK(dt.eps == d.eps);
    CHECK(dt.saturated == d.saturated);

    Rng rng(0x40);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        x.push_back({rng.normal(), rng.normal()});
        y.push_back(i % 2);
    }
    detect::EnsembleConfig small;
    small.rf_trees = 10;
    small.gb_rounds = 15;
    for (auto variant : {detect::EnsembleVariant::Rf, detect::EnsembleVariant::Gb,
                         detect::EnsembleVariant::Hgb}) {
        const auto e = detect::TreeEnsemble::fit(x, y, variant, small, 3);
        const fs::path path = tmp.path() / (detect::variant_name(variant) + ".sdk");
        e.save(path);
        CHECK(detect::detector_kind(path) == "ensemble");
        const auto back = detect::TreeEnsemble::load(path);
        CHECK(back.variant() == variant);
        CHECK(back.dimension() == e.dimension());
        REQUIRE(back.trees().size() == e.trees().size());
        for (const auto& row : x) CHECK(back.score(row) == e.score(row));
    }

    // Wrong-kind loads and corrupt containers fail loudly.
    CHECK_THROWS_AS(detect::TreeEnsemble::load(tpath), FormatError);
    const fs::path junk = tmp.path() / "junk.sdk";
    csv::write_text_file(junk, "MZW1 not a detector");
    CHECK_THROWS_AS(detect::detector_kind(junk), FormatError);
    CHECK_THROWS_AS(detect::load_threshold(junk), FormatError);
    CHECK_THROWS_AS(detect::detector_kind(tmp.path() / "absent.sdk"), Error);
}

TEST_CASE("run_experiment produces one deterministic row per severity") {
    const auto& z = shared_zoo();
    const attack::Payload s = attack::Payload::random(4242, 1024);
    std::vector<detect::SeverityData> severities;
    for (int x : {8, 23}) {
        severities.push_back({x, zoo::attack_zoo(z.benign, x, s)});
    }

    detect::ExperimentConfig cfg;
    cfg.feature = feat::FeatureKind::Weights;
    cfg.method = "hgb";
    cfg.ensemble.gb_rounds = 40;
    const auto r1 = detect::run_experiment(z.benign, severities, cfg, 6);
    const auto r2 = detect::run_experiment(z.benign, severities, cfg, 6);
    CHECK(r1 == r2);
    REQUIRE(r1.rows.size() == 2);
    CHECK(r1.rows[0].x_lsb == 8);
    CHECK(r1.rows[1].x_lsb == 23);
    for (const auto& row : r1.rows) {
        CHECK(row.feature == "weights");
        CHECK(row.method == "hgb");
        CHECK(row.seed == 6);
        // 30 carriers at 80/20: 6 benign + 6 attacked test rows.
        CHECK(row.counts.total() == 12);
        CHECK(row.counts.tp + row.counts.fn == 6);
    }

    // Supervised splits keep each carrier and its twin on one side, so a
    // detector cannot see the test carriers' benign weights during training.
    // Severities arrive sorted even if handed over shuffled.
    std::vector<detect::SeverityData> rev(severities.rbegin(), severities.rend());
    const auto r3 = detect::run_experiment(z.benign, rev, cfg, 6);
    CHECK(r3 == r1);

    detect::ExperimentConfig unsup;
    unsup.feature = feat::FeatureKind::Loss;
    unsup.method = "mean_eps";
    unsup.ae.epochs = 30;
    const auto u = detect::run_experiment(z.benign, severities, unsup, 6);
    REQUIRE(u.rows.size() == 2);
    for (const auto& row : u.rows) {
        CHECK(row.feature == "loss");
        CHECK(row.method == "mean_eps");
        // 30 benign: 21 fit, 9 test; plus 30 attacked.
        CHECK(row.counts.total() == 39);
        CHECK(row.counts.tp + row.counts.fn == 30);
    }

    // mean_eps is defined only for the scalar loss feature.
    detect::ExperimentConfig bad;
    bad.feature = feat::FeatureKind::Weights;
    bad.method = "mean_eps";
    CHECK_THROWS_AS(detect::run_experiment(z.benign, severities, bad, 6), ConfigError);

    // A severity with a missing twin is a shape error.
    auto broken = severities;
    broken[0].models.pop_back();
    CHECK_THROWS_AS(detect::run_experiment(z.benign, broken, cfg, 6), ShapeError);

    CHECK_THROWS_AS(detect::run_experiment({z.benign[0]}, severities, cfg, 6), ConfigError);
}

TEST_CASE("report csv and table render the pinned layout") {
    detect::EvalReport rep;
    detect::ReportRow row;
    row.feature = "loss";
    row.method = "mean_eps";
    row.x_lsb = 8;
    row.counts = {3, 1, 8, 3};
    row.seed = 5;
    rep.rows.push_back(row);
    row.x_lsb = 23;
    row.counts = {6, 0, 9, 0};
    row.eps_saturated = true;
    rep.rows.push_back(row);

    const std::string csv_text = rep.to_csv();
    CHECK(csv_text ==
          "feature,method,x_lsb,A,R,P,F1,seed\n"
          "loss,mean_eps,8,0.7333333333333333,0.5,0.75,0.6,5\n"
          "loss,mean_eps,23,1,1,1,1,5\n");

    const std::string table = rep.to_table();
    CHECK(table.find("feature") != std::string::npos);
    CHECK(table.find("mean_eps") != std::string::npos);
    CHECK(table.find("[eps saturated]") != std::string::npos);
    CHECK(table.find("0.7333") != std::string::npos);
    CHECK(table.find("1.0000") != std::string::npos);
}
