#include "stegozoo/detectkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "stegozoo/csv.hpp"
#include "stegozoo/rng.hpp"

namespace stegozoo::detect {

using nlohmann::json;

// ------------------------------------------------------------------ metrics

double Metrics::accuracy() const {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
}

double Metrics::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double Metrics::precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Metrics::f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Metrics confusion(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size()) {
        throw ShapeError("confusion: " + std::to_string(truth.size()) + " truth labels vs " +
                         std::to_string(pred.size()) + " predictions");
    }
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) {
            pred[i] ? ++m.tp : ++m.fn;
        } else {
            pred[i] ? ++m.fp : ++m.tn;
        }
    }
    return m;
}

// ---------------------------------------------------- unsupervised detector

std::vector<double> default_eps_grid(double sigma) {
    std::vector<double> grid;
    grid.reserve(21);
    for (int k = 0; k <= 20; ++k) grid.push_back(0.25 * k * sigma);
    return grid;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("mean of empty vector");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double stddev_of(const std::vector<double>& values) {
    const double mu = mean_of(values);
    double s = 0.0;
    for (double v : values) s += (v - mu) * (v - mu);
    return std::sqrt(s / static_cast<double>(values.size()));
}

ThresholdDetector fit_threshold(const std::vector<double>& benign_train,
                                const std::vector<double>& eps_grid, double alpha) {
    if (benign_train.size() < 10) {
        throw ConfigError("threshold fit needs >= 10 benign values, got " +
                          std::to_string(benign_train.size()));
    }
    if (eps_grid.empty()) throw ConfigError("empty eps grid");
    ThresholdDetector d;
    d.mu = mean_of(benign_train);
    if (!std::isfinite(d.mu)) throw NumericError("benign training mean is not finite");

    std::vector<double> grid = eps_grid;
    std::sort(grid.begin(), grid.end());
    if (grid.front() < 0.0) throw ConfigError("eps grid values must be >= 0");

    for (double eps : grid) {
        std::size_t false_pos = 0;
        for (double v : benign_train) {
            if (v > d.mu + eps) ++false_pos;
        }
        const double fpr = static_cast<double>(false_pos) / static_cast<double>(benign_train.size());
        if (fpr <= alpha) {
            d.eps = eps;
            return d;
        }
    }
    d.eps = grid.back();
    d.saturated = true;
    return d;
}

Metrics evaluate_threshold(const ThresholdDetector& d, const feat::FeatureDataset& test) {
    if (test.rows.empty()) throw ConfigError("empty test set");
    if (test.dim() != 1) {
        throw ShapeError("threshold detector needs 1-D features, got dimension " +
                         std::to_string(test.dim()));
    }
    std::vector<int> truth, pred;
    truth.reserve(test.rows.size());
    pred.reserve(test.rows.size());
    for (const feat::FeatureRow& r : test.rows) {
        truth.push_back(r.label == "malicious" ? 1 : 0);
        pred.push_back(d.is_malicious(r.values[0]) ? 1 : 0);
    }
    return confusion(truth, pred);
}

// ------------------------------------------------------------ tree ensembles

EnsembleVariant variant_from_name(const std::string& name) {
    if (name == "rf") return EnsembleVariant::Rf;
    if (name == "gb") return EnsembleVariant::Gb;
    if (name == "hgb") return EnsembleVariant::Hgb;
    throw ConfigError("unknown ensemble variant '" + name + "' (expected rf|gb|hgb)");
}

std::string variant_name(EnsembleVariant v) {
    switch (v) {
        case EnsembleVariant::Rf: return "rf";
        case EnsembleVariant::Gb: return "gb";
        case EnsembleVariant::Hgb: return "hgb";
    }
    throw ConfigError("bad ensemble variant value");
}

double TreeEnsemble::Tree::predict(const std::vector<double>& x) const {
    int at = 0;
    while (!nodes[static_cast<std::size_t>(at)].leaf()) {
        const Node& n = nodes[static_cast<std::size_t>(at)];
        at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

namespace {

double gini(std::size_t pos, std::size_t n) {
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

// Midpoint threshold for the rule "x <= t goes left" between two adjacent
// sorted values; falls back to the lower value when rounding would put both
// on the same side.
double split_point(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

struct RfBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    int max_depth;
    int mtry;
    Rng& rng;
    std::vector<TreeEnsemble::Node> nodes;

    int leaf(std::size_t pos, std::size_t n) {
        const int id = static_cast<int>(nodes.size());
        TreeEnsemble::Node node;
        node.value = static_cast<double>(pos) / static_cast<double>(n);
        nodes.push_back(node);
        return id;
    }

    std::vector<int> sample_features() {
        const int d = static_cast<int>(x.front().size());
        std::vector<int> pool(static_cast<std::size_t>(d));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(mtry));
        return pool;
    }

    int build(std::vector<std::size_t>& rows, int depth) {
        const std::size_t n = rows.size();
        std::size_t pos = 0;
        for (std::size_t r : rows) pos += static_cast<std::size_t>(y[r]);
        if (depth >= max_depth || n < 2 || pos == 0 || pos == n) return leaf(pos, n);

        const double parent = gini(pos, n);
        int best_f = -1;
        double best_thr = 0.0;
        double best_score = parent - 1e-12;

        const std::vector<int> feats = sample_features();
        std::vector<std::size_t> order(rows);
        for (int f : feats) {
            const std::size_t fu = static_cast<std::size_t>(f);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x[a][fu] < x[b][fu]; });
            std::size_t pos_left = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                pos_left += static_cast<std::size_t>(y[order[i]]);
                if (x[order[i]][fu] == x[order[i + 1]][fu]) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                const double score = (static_cast<double>(nl) * gini(pos_left, nl) +
                                      static_cast<double>(nr) * gini(pos - pos_left, nr)) /
                                     static_cast<double>(n);
                if (score < best_score) {
                    best_score = score;
                    best_f = f;
                    best_thr = split_point(x[order[i]][fu], x[order[i + 1]][fu]);
                }
            }
        }
        if (best_f < 0) return leaf(pos, n);

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) {
            (x[r][static_cast<std::size_t>(best_f)] <= best_thr ? left : right).push_back(r);
        }
        const int id = static_cast<int>(nodes.size());
        TreeEnsemble::Node node;
        node.feature = best_f;
        node.threshold = best_thr;
        nodes.push_back(node);
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

// Per-feature quantile bin edges; "x <= edges[b]" is exactly "bin(x) <= b"
// with bin(x) = index of the first edge >= x.
std::vector<double> bin_edges(std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> edges;
    if (values.size() < 2) return edges;
    if (values.size() <= static_cast<std::size_t>(bins)) {
        edges.reserve(values.size() - 1);
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            edges.push_back(split_point(values[i], values[i + 1]));
        }
        return edges;
    }
    for (int q = 1; q < bins; ++q) {
        const std::size_t k = static_cast<std::size_t>(q) * values.size() /
                              static_cast<std::size_t>(bins);
        if (k == 0) continue;
        const double e = split_point(values[k - 1], values[k]);
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    return edges;
}

struct GbBuilder {
    const std::vector<std::vector<double>>& x;
    const std::vector<double>& g;
    const std::vector<double>& h;
    int max_depth;
    double lambda;
    double lr;
    // Histogram mode: per-feature bin index of every row, plus the edges.
    const std::vector<std::vector<int>>* bins = nullptr;
    const std::vector<std::vector<double>>* edges = nullptr;
    std::vector<TreeEnsemble::Node> nodes;

    int leaf(double gs, double hs) {
        const int id = static_cast<int>(nodes.size());
        TreeEnsemble::Node node;
        node.value = lr * (-gs / (hs + lambda));
        nodes.push_back(node);
        return id;
    }

    int build(std::vector<std::size_t>& rows, int depth) {
        double gs = 0.0, hs = 0.0;
        for (std::size_t r : rows) {
            gs += g[r];
            hs += h[r];
        }
        if (depth >= max_depth || rows.size() < 2) return leaf(gs, hs);

        const double parent_obj = gs * gs / (hs + lambda);
        int best_f = -1;
        double best_thr = 0.0;
        double best_gain = 1e-12;
        const std::size_t d = x.front().size();

        if (bins == nullptr) {
            std::vector<std::size_t> order(rows);
            for (std::size_t f = 0; f < d; ++f) {
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
                double gl = 0.0, hl = 0.0;
                for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
                    gl += g[order[i]];
                    hl += h[order[i]];
                    if (x[order[i]][f] == x[order[i + 1]][f]) continue;
                    const double gr = gs - gl;
                    const double hr = hs - hl;
                    const double gain =
                        0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_obj);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<int>(f);
                        best_thr = split_point(x[order[i]][f], x[order[i + 1]][f]);
                    }
                }
            }
        } else {
            for (std::size_t f = 0; f < d; ++f) {
                const std::vector<double>& fe = (*edges)[f];
                if (fe.empty()) continue;
                std::vector<double> gb(fe.size() + 1, 0.0), hb(fe.size() + 1, 0.0);
                std::vector<std::size_t> cb(fe.size() + 1, 0);
                for (std::size_t r : rows) {
                    const int b = (*bins)[f][r];
                    gb[static_cast<std::size_t>(b)] += g[r];
                    hb[static_cast<std::size_t>(b)] += h[r];
                    ++cb[static_cast<std::size_t>(b)];
                }
                double gl = 0.0, hl = 0.0;
                std::size_t cl = 0;
                for (std::size_t b = 0; b < fe.size(); ++b) {
                    gl += gb[b];
                    hl += hb[b];
                    cl += cb[b];
                    if (cl == 0 || cl == rows.size()) continue;
                    const double gr = gs - gl;
                    const double hr = hs - hl;
                    const double gain =
                        0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_obj);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<int>(f);
                        best_thr = fe[b];
                    }
                }
            }
        }
        if (best_f < 0) return leaf(gs, hs);

        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) {
            (x[r][static_cast<std::size_t>(best_f)] <= best_thr ? left : right).push_back(r);
        }
        if (left.empty() || right.empty()) return leaf(gs, hs);
        const int id = static_cast<int>(nodes.size());
        TreeEnsemble::Node node;
        node.feature = best_f;
        node.threshold = best_thr;
        nodes.push_back(node);
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TreeEnsemble fit_rf(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                    const EnsembleConfig& cfg, std::uint64_t seed) {
    TreeEnsemble e;
    e.variant_ = EnsembleVariant::Rf;
    e.cfg_ = cfg;
    e.seed_ = seed;
    e.dim_ = x.front().size();
    const std::size_t n = x.size();
    const int mtry = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(e.dim_)))));
    e.trees_.reserve(static_cast<std::size_t>(cfg.rf_trees));
    for (int t = 0; t < cfg.rf_trees; ++t) {
        Rng rng(derive_seed(seed, 0x8000u + static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = rng.below(n);
        RfBuilder builder{x, y, cfg.rf_depth, mtry, rng, {}};
        builder.build(rows, 0);
        e.trees_.push_back(TreeEnsemble::Tree{std::move(builder.nodes)});
    }
    return e;
}

TreeEnsemble fit_gb(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                    const EnsembleConfig& cfg, std::uint64_t seed, bool histogram) {
    TreeEnsemble e;
    e.variant_ = histogram ? EnsembleVariant::Hgb : EnsembleVariant::Gb;
    e.cfg_ = cfg;
    e.seed_ = seed;
    e.dim_ = x.front().size();
    const std::size_t n = x.size();
    const std::size_t d = e.dim_;

    std::size_t pos = 0;
    for (int v : y) pos += static_cast<std::size_t>(v);
    e.base_score_ = std::log(static_cast<double>(pos) / static_cast<double>(n - pos));

    std::vector<std::vector<double>> edges;
    std::vector<std::vector<int>> bins;
    if (histogram) {
        edges.resize(d);
        bins.assign(d, std::vector<int>(n, 0));
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = x[i][f];
            edges[f] = bin_edges(std::move(col), cfg.hgb_bins);
            for (std::size_t i = 0; i < n; ++i) {
                bins[f][i] = static_cast<int>(
                    std::lower_bound(edges[f].begin(), edges[f].end(), x[i][f]) -
                    edges[f].begin());
            }
        }
    }

    std::vector<double> score(n, e.base_score_);
    std::vector<double> g(n), h(n);
    e.trees_.reserve(static_cast<std::size_t>(cfg.gb_rounds));
    for (int round = 0; round < cfg.gb_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(score[i]);
            g[i] = p - static_cast<double>(y[i]);
            h[i] = p * (1.0 - p);
        }
        GbBuilder builder{x,      g,
                          h,      cfg.gb_depth,
                          1e-6,   cfg.gb_lr,
                          histogram ? &bins : nullptr,
                          histogram ? &edges : nullptr,
                          {}};
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        builder.build(rows, 0);
        TreeEnsemble::Tree tree{std::move(builder.nodes)};
        for (std::size_t i = 0; i < n; ++i) score[i] += tree.predict(x[i]);
        e.trees_.push_back(std::move(tree));
    }
    return e;
}

TreeEnsemble TreeEnsemble::fit(const std::vector<std::vector<double>>& x,
                               const std::vector<int>& y, EnsembleVariant variant,
                               const EnsembleConfig& cfg, std::uint64_t seed) {
    if (x.empty()) throw ConfigError("ensemble fit: empty training set");
    if (x.size() != y.size()) {
        throw ShapeError("ensemble fit: " + std::to_string(x.size()) + " rows vs " +
                         std::to_string(y.size()) + " labels");
    }
    const std::size_t d = x.front().size();
    if (d == 0) throw ConfigError("ensemble fit: zero-dimensional features");
    for (const auto& row : x) {
        if (row.size() != d) throw ShapeError("ensemble fit: ragged feature rows");
    }
    std::size_t pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw ConfigError("ensemble fit: labels must be 0 or 1");
        pos += static_cast<std::size_t>(v);
    }
    if (pos == 0 || pos == y.size()) {
        throw ConfigError("ensemble fit: training set has a single class");
    }

    // Canonical row order (label, then lexicographic features) makes the
    // fitted model independent of how the caller ordered the rows.
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (y[a] != y[b]) return y[a] < y[b];
        return x[a] < x[b];
    });
    std::vector<std::vector<double>> cx;
    std::vector<int> cy;
    cx.reserve(x.size());
    cy.reserve(y.size());
    for (std::size_t i : idx) {
        cx.push_back(x[i]);
        cy.push_back(y[i]);
    }

    switch (variant) {
        case EnsembleVariant::Rf: return fit_rf(cx, cy, cfg, seed);
        case EnsembleVariant::Gb: return fit_gb(cx, cy, cfg, seed, false);
        case EnsembleVariant::Hgb: return fit_gb(cx, cy, cfg, seed, true);
    }
    throw ConfigError("bad ensemble variant value");
}

double TreeEnsemble::score(const std::vector<double>& x) const {
    if (x.size() != dim_) {
        throw ShapeError("ensemble score: feature length " + std::to_string(x.size()) +
                         " does not match training dimension " + std::to_string(dim_));
    }
    if (variant_ == EnsembleVariant::Rf) {
        double s = 0.0;
        for (const Tree& t : trees_) s += t.predict(x);
        return s / static_cast<double>(trees_.size());
    }
    double z = base_score_;
    for (const Tree& t : trees_) z += t.predict(x);
    return sigmoid(z);
}

Metrics evaluate_ensemble(const TreeEnsemble& e, const feat::FeatureDataset& test) {
    if (test.rows.empty()) throw ConfigError("empty test set");
    std::vector<int> truth, pred;
    truth.reserve(test.rows.size());
    pred.reserve(test.rows.size());
    for (const feat::FeatureRow& r : test.rows) {
        truth.push_back(r.label == "malicious" ? 1 : 0);
        pred.push_back(e.predict(r.values));
    }
    return confusion(truth, pred);
}

// ------------------------------------------------------- detector checkpoints

namespace {

constexpr std::uint32_t kSdkVersion = 1;

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const std::string& s, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3])) << 24;
}

void write_sdk1(const std::filesystem::path& path, const json& body) {
    const std::string payload = body.dump();
    std::string out = "SDK1";
    put_u32le(out, kSdkVersion);
    put_u32le(out, static_cast<std::uint32_t>(payload.size()));
    out += payload;
    csv::write_text_file(path, out);
}

json read_sdk1(const std::filesystem::path& path) {
    const std::string raw = csv::read_text_file(path);
    if (raw.size() < 12) throw FormatError(path.string() + ": truncated SDK1 file", raw.size());
    if (raw.compare(0, 4, "SDK1") != 0) {
        throw FormatError(path.string() + ": bad magic, not an SDK1 detector file", 0);
    }
    const std::uint32_t version = get_u32le(raw, 4);
    if (version != kSdkVersion) {
        throw FormatError(path.string() + ": unsupported SDK1 version " + std::to_string(version),
                          4);
    }
    const std::uint32_t len = get_u32le(raw, 8);
    if (raw.size() != 12u + len) {
        throw FormatError(path.string() + ": body length mismatch", 8);
    }
    try {
        return json::parse(raw.substr(12));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": bad SDK1 body: " + e.what(), 12);
    }
}

}  // namespace

void save_threshold(const ThresholdDetector& d, const std::filesystem::path& path) {
    json body;
    body["detector"] = "threshold";
    body["mu"] = d.mu;
    body["eps"] = d.eps;
    body["saturated"] = d.saturated;
    write_sdk1(path, body);
}

ThresholdDetector load_threshold(const std::filesystem::path& path) {
    const json body = read_sdk1(path);
    try {
        if (body.at("detector").get<std::string>() != "threshold") {
            throw FormatError(path.string() + ": not a threshold detector checkpoint");
        }
        ThresholdDetector d;
        d.mu = body.at("mu").get<double>();
        d.eps = body.at("eps").get<double>();
        d.saturated = body.at("saturated").get<bool>();
        return d;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad threshold body: " + e.what());
    }
}

std::string detector_kind(const std::filesystem::path& path) {
    const json body = read_sdk1(path);
    try {
        return body.at("detector").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": missing detector kind: " + e.what());
    }
}

void TreeEnsemble::save(const std::filesystem::path& path) const {
    json body;
    body["detector"] = "ensemble";
    body["variant"] = variant_name(variant_);
    body["seed"] = seed_;
    body["dim"] = dim_;
    body["base_score"] = base_score_;
    body["config"] = {{"rf_trees", cfg_.rf_trees},   {"rf_depth", cfg_.rf_depth},
                      {"gb_rounds", cfg_.gb_rounds}, {"gb_depth", cfg_.gb_depth},
                      {"gb_lr", cfg_.gb_lr},         {"hgb_bins", cfg_.hgb_bins}};
    json jtrees = json::array();
    for (const Tree& t : trees_) {
        json jnodes = json::array();
        for (const Node& n : t.nodes) {
            jnodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        }
        jtrees.push_back(std::move(jnodes));
    }
    body["trees"] = std::move(jtrees);
    write_sdk1(path, body);
}

TreeEnsemble TreeEnsemble::load(const std::filesystem::path& path) {
    const json body = read_sdk1(path);
    try {
        if (body.at("detector").get<std::string>() != "ensemble") {
            throw FormatError(path.string() + ": not an ensemble checkpoint");
        }
        TreeEnsemble e;
        e.variant_ = variant_from_name(body.at("variant").get<std::string>());
        e.seed_ = body.at("seed").get<std::uint64_t>();
        e.dim_ = body.at("dim").get<std::size_t>();
        e.base_score_ = body.at("base_score").get<double>();
        const json& c = body.at("config");
        e.cfg_.rf_trees = c.at("rf_trees").get<int>();
        e.cfg_.rf_depth = c.at("rf_depth").get<int>();
        e.cfg_.gb_rounds = c.at("gb_rounds").get<int>();
        e.cfg_.gb_depth = c.at("gb_depth").get<int>();
        e.cfg_.gb_lr = c.at("gb_lr").get<double>();
        e.cfg_.hgb_bins = c.at("hgb_bins").get<int>();
        for (const json& jt : body.at("trees")) {
            Tree t;
            t.nodes.reserve(jt.size());
            for (const json& jn : jt) {
                Node n;
                n.feature = jn.at(0).get<int>();
                n.threshold = jn.at(1).get<double>();
                n.left = jn.at(2).get<int>();
                n.right = jn.at(3).get<int>();
                n.value = jn.at(4).get<double>();
                t.nodes.push_back(n);
            }
            e.trees_.push_back(std::move(t));
        }
        return e;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad ensemble body: " + e.what());
    }
}

// ------------------------------------------------------- experiment protocol

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "feature,method,x_lsb,A,R,P,F1,seed\n";
    for (const ReportRow& r : rows) {
        out << r.feature << ',' << r.method << ',' << r.x_lsb << ','
            << csv::format_double(r.counts.accuracy()) << ','
            << csv::format_double(r.counts.recall()) << ','
            << csv::format_double(r.counts.precision()) << ','
            << csv::format_double(r.counts.f1()) << ',' << r.seed << '\n';
    }
    return out.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %-9s %5s %8s %8s %8s %8s  %s\n", "feature", "method",
                  "x_lsb", "A", "R", "P", "F1", "seed");
    out << line << std::string(68, '-') << '\n';
    for (const ReportRow& r : rows) {
        std::snprintf(line, sizeof(line), "%-8s %-9s %5d %8.4f %8.4f %8.4f %8.4f  %llu%s\n",
                      r.feature.c_str(), r.method.c_str(), r.x_lsb, r.counts.accuracy(),
                      r.counts.recall(), r.counts.precision(), r.counts.f1(),
                      static_cast<unsigned long long>(r.seed),
                      r.eps_saturated ? "  [eps saturated]" : "");
        out << line;
    }
    return out.str();
}

namespace {

constexpr std::uint64_t kUnsupSplitStream = 21;
constexpr std::uint64_t kSupSplitStream = 22;
constexpr std::uint64_t kAeStream = 31;
constexpr std::uint64_t kFitStreamBase = 0x400;

std::vector<std::size_t> shuffled_range(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);
    return idx;
}

std::vector<double> feature_of(const store::ModelRecord& m, feat::FeatureKind kind,
                               const feat::AutoencoderModel* ae) {
    switch (kind) {
        case feat::FeatureKind::Loss: return {ae->reconstruction_loss(m)};
        case feat::FeatureKind::Grads: return feat::gradient_feature(m);
        case feat::FeatureKind::Weights: return feat::weights_feature(m);
    }
    throw ConfigError("bad feature kind value");
}

std::vector<const SeverityData*> by_severity(const std::vector<SeverityData>& severities,
                                            std::size_t benign_count) {
    std::vector<const SeverityData*> ptrs;
    ptrs.reserve(severities.size());
    for (const SeverityData& s : severities) {
        if (s.models.size() != benign_count) {
            throw ShapeError("severity X=" + std::to_string(s.x) + " has " +
                             std::to_string(s.models.size()) + " models, benign zoo has " +
                             std::to_string(benign_count));
        }
        ptrs.push_back(&s);
    }
    std::stable_sort(ptrs.begin(), ptrs.end(),
                     [](const SeverityData* a, const SeverityData* b) { return a->x < b->x; });
    return ptrs;
}

std::size_t split_count(double fraction, std::size_t n) {
    auto k = static_cast<std::size_t>(fraction * static_cast<double>(n) + 0.5);
    if (k < 1) k = 1;
    if (k >= n) k = n - 1;
    return k;
}

}  // namespace

EvalReport run_experiment(const std::vector<store::ModelRecord>& benign,
                          const std::vector<SeverityData>& severities,
                          const ExperimentConfig& cfg, std::uint64_t seed) {
    if (benign.size() < 2) throw ConfigError("experiment needs at least 2 benign models");
    const std::size_t n = benign.size();
    const std::vector<const SeverityData*> levels = by_severity(severities, n);
    const std::string feature = feat::feature_kind_name(cfg.feature);
    const bool unsupervised = cfg.method == "mean_eps";

    EvalReport report;

    if (unsupervised) {
        if (cfg.feature != feat::FeatureKind::Loss) {
            throw ConfigError("mean_eps works on the 1-D loss feature only");
        }
        const std::vector<std::size_t> idx = shuffled_range(n, derive_seed(seed, kUnsupSplitStream));
        const std::size_t n_fit = split_count(cfg.unsup_train_fraction, n);

        std::vector<store::ModelRecord> fit_models;
        fit_models.reserve(n_fit);
        for (std::size_t i = 0; i < n_fit; ++i) fit_models.push_back(benign[idx[i]]);
        const feat::AeTrainResult ae =
            feat::train_autoencoder(fit_models, cfg.ae, derive_seed(seed, kAeStream));

        std::vector<double> fit_losses;
        fit_losses.reserve(n_fit);
        for (const auto& m : fit_models) fit_losses.push_back(ae.model.reconstruction_loss(m));
        const ThresholdDetector det =
            fit_threshold(fit_losses, default_eps_grid(stddev_of(fit_losses)), cfg.alpha);

        std::vector<double> benign_test;
        benign_test.reserve(n - n_fit);
        for (std::size_t i = n_fit; i < n; ++i) {
            benign_test.push_back(ae.model.reconstruction_loss(benign[idx[i]]));
        }

        for (const SeverityData* level : levels) {
            std::vector<int> truth, pred;
            for (double v : benign_test) {
                truth.push_back(0);
                pred.push_back(det.is_malicious(v) ? 1 : 0);
            }
            for (const auto& m : level->models) {
                truth.push_back(1);
                pred.push_back(det.is_malicious(ae.model.reconstruction_loss(m)) ? 1 : 0);
            }
            report.rows.push_back(ReportRow{feature, cfg.method, level->x, confusion(truth, pred),
                                            seed, det.saturated});
        }
        return report;
    }

    const EnsembleVariant variant = variant_from_name(cfg.method);
    const std::vector<std::size_t> idx = shuffled_range(n, derive_seed(seed, kSupSplitStream));
    const std::size_t n_train = split_count(cfg.sup_train_fraction, n);
    const std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(n_train));
    const std::vector<std::size_t> test_idx(idx.begin() + static_cast<long>(n_train), idx.end());

    feat::AutoencoderModel* ae_ptr = nullptr;
    std::optional<feat::AeTrainResult> ae;
    if (cfg.feature == feat::FeatureKind::Loss) {
        std::vector<store::ModelRecord> ae_split;
        ae_split.reserve(n_train);
        for (std::size_t i : train_idx) ae_split.push_back(benign[i]);
        ae.emplace(feat::train_autoencoder(ae_split, cfg.ae, derive_seed(seed, kAeStream)));
        ae_ptr = &ae->model;
    }

    std::vector<std::vector<double>> benign_feat(n);
    for (std::size_t i = 0; i < n; ++i) benign_feat[i] = feature_of(benign[i], cfg.feature, ae_ptr);

    for (const SeverityData* level : levels) {
        std::vector<std::vector<double>> attacked_feat(n);
        for (std::size_t i = 0; i < n; ++i) {
            attacked_feat[i] = feature_of(level->models[i], cfg.feature, ae_ptr);
        }
        std::vector<std::vector<double>> xtrain, xtest;
        std::vector<int> ytrain;
        std::vector<int> ytruth;
        for (std::size_t i : train_idx) {
            xtrain.push_back(benign_feat[i]);
            ytrain.push_back(0);
            xtrain.push_back(attacked_feat[i]);
            ytrain.push_back(1);
        }
        for (std::size_t i : test_idx) {
            xtest.push_back(benign_feat[i]);
            ytruth.push_back(0);
            xtest.push_back(attacked_feat[i]);
            ytruth.push_back(1);
        }
        const TreeEnsemble ens =
            TreeEnsemble::fit(xtrain, ytrain, variant, cfg.ensemble,
                              derive_seed(seed, kFitStreamBase + static_cast<std::uint64_t>(level->x)));
        std::vector<int> pred;
        pred.reserve(xtest.size());
        for (const auto& row : xtest) pred.push_back(ens.predict(row));
        report.rows.push_back(
            ReportRow{feature, cfg.method, level->x, confusion(ytruth, pred), seed, false});
    }
    return report;
}

}  // namespace stegozoo::detect
