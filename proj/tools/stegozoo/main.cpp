// stegozoo: batch front end for the steganography attack / detection pipeline.
//
//   zoo gen      train a fresh zoo of benign carrier models
//   attack       embed payload bits into the low mantissa bits of a zoo
//   extract      read embedded bits back out of one model file
//   features     export per-severity feature datasets as CSV
//   detect       train / evaluate detectors (train, eval)
//   report       join evaluation reports into one table / plot
//   inspect      print bit-level views of a model's weights
//
// Every artifact-producing run writes its resolved configuration next to its
// outputs (run-config.json or <file>.run.json), so any result can be traced
// back to the exact flags and seeds that produced it. Exit codes: 0 ok,
// 2 bad configuration or flags, 3 runtime failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stegozoo/bitview.hpp"
#include "stegozoo/csv.hpp"
#include "stegozoo/detectkit.hpp"
#include "stegozoo/errors.hpp"
#include "stegozoo/featurex.hpp"
#include "stegozoo/rng.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/svgplot.hpp"
#include "stegozoo/tensorstore.hpp"
#include "stegozoo/zooforge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stegozoo;

namespace {

constexpr std::uint64_t kDefaultSeed = 7;

// Relative paths resolve against $STEGOZOO_HOME when it is set, so batch
// scripts can address one workspace from anywhere.
fs::path resolve_path(const std::string& p) {
    fs::path fp(p);
    if (fp.is_absolute()) return fp;
    if (const char* home = std::getenv("STEGOZOO_HOME"); home != nullptr && *home != '\0') {
        return fs::path(home) / fp;
    }
    return fp;
}

void write_run_config(const fs::path& path, const std::string& command, json options) {
    json j;
    j["command"] = command;
    j["options"] = std::move(options);
    csv::write_text_file(path, j.dump(2) + "\n");
}

int parse_bounded_int(const std::string& s, int lo, int hi, const std::string& what) {
    long long v = 0;
    try {
        v = csv::parse_int(s);
    } catch (const Error&) {
        throw ConfigError("bad " + what + " '" + s + "'");
    }
    if (v < lo || v > hi) {
        throw ConfigError(what + " must be in [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] (got " + s + ")");
    }
    return static_cast<int>(v);
}

void check_x_range(int x) {
    if (x < 1 || x > 23) {
        throw ConfigError("attack width x must be in [1, 23] (got " + std::to_string(x) + ")");
    }
}

// "8", "1..23" or "4,8,16,20,23" -> sorted distinct widths in [1, 23].
std::vector<int> parse_x_spec(const std::string& spec) {
    std::set<int> out;
    for (const std::string& part : csv::split_line(spec, ',')) {
        const auto dots = part.find("..");
        if (dots != std::string::npos) {
            const int lo = parse_bounded_int(part.substr(0, dots), 1, 23, "attack width x");
            const int hi = parse_bounded_int(part.substr(dots + 2), 1, 23, "attack width x");
            if (lo > hi) throw ConfigError("empty range '" + part + "'");
            for (int x = lo; x <= hi; ++x) out.insert(x);
        } else {
            out.insert(parse_bounded_int(part, 1, 23, "attack width x"));
        }
    }
    if (out.empty()) throw ConfigError("no attack widths in '" + spec + "'");
    return {out.begin(), out.end()};
}

// Severity levels present on disk, from <zoo>/attacked/x<k> directory names.
std::vector<int> discover_levels(const fs::path& zoo_dir) {
    std::vector<int> levels;
    const fs::path base = zoo_dir / "attacked";
    if (!fs::is_directory(base)) return levels;
    for (const auto& entry : fs::directory_iterator(base)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() < 2 || name[0] != 'x') continue;
        try {
            levels.push_back(parse_bounded_int(name.substr(1), 1, 23, "severity directory"));
        } catch (const ConfigError&) {
            continue;  // unrelated directory
        }
    }
    std::sort(levels.begin(), levels.end());
    return levels;
}

void require_levels(const fs::path& zoo_dir, const std::vector<int>& wanted) {
    const std::vector<int> have = discover_levels(zoo_dir);
    std::string missing;
    for (int x : wanted) {
        if (!std::binary_search(have.begin(), have.end(), x)) {
            missing += (missing.empty() ? "x" : ", x") + std::to_string(x);
        }
    }
    if (!missing.empty()) {
        throw ConfigError("missing severity levels under " + (zoo_dir / "attacked").string() +
                          ": " + missing + " (run `stegozoo attack` first)");
    }
}

std::string arch_to_string(const store::Arch& arch) {
    std::string s;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        if (i > 0) s += '-';
        s += std::to_string(arch.layers[i]);
    }
    return s;
}

store::Arch parse_arch(const std::string& spec) {
    store::Arch arch;
    for (const std::string& tok : csv::split_line(spec, '-')) {
        arch.layers.push_back(parse_bounded_int(tok, 1, 1 << 20, "layer width"));
    }
    if (arch.layers.size() < 2) {
        throw ConfigError("arch '" + spec + "' needs at least input and output layers");
    }
    for (std::size_t i = 0; i + 2 < arch.layers.size(); ++i) arch.activations.push_back("tanh");
    arch.activations.push_back("softmax");
    return arch;
}

struct SeedOpt {
    std::uint64_t value = kDefaultSeed;
    CLI::Option* opt = nullptr;

    void add(CLI::App* cmd, const std::string& flag, const std::string& desc) {
        opt = cmd->add_option(flag, value, desc + " (default " + std::to_string(kDefaultSeed) + ")");
    }
    bool given() const { return opt != nullptr && opt->count() > 0; }
    // --strict refuses to fall back to the recorded default seed.
    void enforce(bool strict, const std::string& flag) const {
        if (strict && !given()) {
            throw ConfigError(flag + " is required in --strict mode");
        }
    }
    void record(json& options, const char* key = "seed") const {
        options[key] = value;
        options[std::string(key) + "_source"] = given() ? "flag" : "default";
    }
};

json metrics_json(const detect::Metrics& m) {
    return json{{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

void print_metrics(const detect::Metrics& m) {
    std::printf("tp=%zu fp=%zu tn=%zu fn=%zu (n=%zu)\n", m.tp, m.fp, m.tn, m.fn, m.total());
    std::printf("A=%s R=%s P=%s F1=%s\n", csv::format_double(m.accuracy()).c_str(),
                csv::format_double(m.recall()).c_str(), csv::format_double(m.precision()).c_str(),
                csv::format_double(m.f1()).c_str());
}

std::vector<svg::Series> f1_series(const std::vector<detect::ReportRow>& rows) {
    // One series per feature/method pair; multiple seeds at one x average out.
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    for (const auto& r : rows) {
        auto& cell = acc[r.feature + "/" + r.method][r.x_lsb];
        cell.first += r.counts.f1();
        cell.second += 1;
    }
    std::vector<svg::Series> series;
    for (const auto& [name, by_x] : acc) {
        svg::Series s{name, {}};
        for (const auto& [x, cell] : by_x) {
            s.points.emplace_back(x, cell.first / cell.second);
        }
        series.push_back(std::move(s));
    }
    return series;
}

// ----------------------------------------------------------------- zoo gen

struct ZooGenArgs {
    std::string out;
    std::string manifest_file;
    std::string arch = "2-8-8-2";
    std::size_t count = 20;
    std::string name = "zoo";
    SeedOpt seed;
    int jobs = 1;
};

void cmd_zoo_gen(const ZooGenArgs& a, bool strict) {
    zoo::ZooManifest manifest;
    if (!a.manifest_file.empty()) {
        manifest = zoo::ZooManifest::from_json(csv::read_text_file(resolve_path(a.manifest_file)));
    } else {
        a.seed.enforce(strict, "--seed");
        manifest = zoo::default_manifest(a.count, a.seed.value, a.name);
        manifest.arch = parse_arch(a.arch);
    }
    manifest.validate();

    const fs::path out = resolve_path(a.out);
    zoo::Zoo z = zoo::generate_zoo(manifest, a.jobs);
    zoo::save_zoo(z, out);

    json options;
    options["out"] = out.string();
    options["jobs"] = a.jobs;
    if (!a.manifest_file.empty()) {
        options["manifest"] = resolve_path(a.manifest_file).string();
    } else {
        options["arch"] = a.arch;
        options["count"] = a.count;
        options["name"] = a.name;
        a.seed.record(options);
    }
    write_run_config(out / "run-config.json", "zoo gen", options);

    std::printf("zoo '%s': %zu models, arch %s -> %s\n", manifest.name.c_str(),
                z.benign.size(), arch_to_string(manifest.arch).c_str(), out.string().c_str());
}

// ------------------------------------------------------------------ attack

struct AttackArgs {
    std::string zoo_dir;
    int x = 0;
    std::string sweep;
    std::string payload_file;
    SeedOpt payload_seed;
    std::size_t payload_bits = 4096;
};

void cmd_attack(const AttackArgs& a, bool strict, CLI::App* cmd) {
    std::vector<int> widths;
    if (!a.sweep.empty()) {
        widths = parse_x_spec(a.sweep);
    } else if (cmd->count("--x") > 0) {
        check_x_range(a.x);
        widths = {a.x};
    } else {
        throw ConfigError("one of --x or --sweep is required");
    }

    attack::Payload payload;
    json options;
    const fs::path zoo_dir = resolve_path(a.zoo_dir);
    options["zoo"] = zoo_dir.string();
    if (!a.payload_file.empty()) {
        const fs::path pf = resolve_path(a.payload_file);
        payload = attack::Payload::from_file(pf);
        options["payload"] = pf.string();
    } else {
        a.payload_seed.enforce(strict, "--payload-seed");
        if (a.payload_bits == 0) throw ConfigError("--payload-bits must be positive");
        payload = attack::Payload::random(a.payload_seed.value, a.payload_bits);
        a.payload_seed.record(options, "payload_seed");
        options["payload_bits"] = a.payload_bits;
    }
    if (payload.empty()) throw ConfigError("payload is empty");
    options["payload_digest"] = payload.digest();

    zoo::Zoo z = zoo::load_zoo(zoo_dir);
    for (int x : widths) {
        std::vector<store::ModelRecord> attacked = zoo::attack_zoo(z.benign, x, payload);
        zoo::save_attacked(zoo_dir, x, attacked, payload);
        json opts = options;
        opts["x"] = x;
        write_run_config(zoo_dir / "attacked" / ("x" + std::to_string(x)) / "run-config.json",
                         "attack", std::move(opts));
        std::printf("x=%d: %zu models -> %s\n", x, attacked.size(),
                    (zoo_dir / "attacked" / ("x" + std::to_string(x))).string().c_str());
    }
}

// ----------------------------------------------------------------- extract

struct ExtractArgs {
    std::string model_file;
    int x = 1;
    std::size_t bits = 0;
    std::string out;
};

void cmd_extract(const ExtractArgs& a) {
    check_x_range(a.x);
    const store::ModelRecord m = store::load(resolve_path(a.model_file));
    const std::size_t bits = a.bits > 0 ? a.bits : attack::capacity_bits(m, a.x);
    const attack::Payload p = attack::extract(m, a.x, bits);
    if (!a.out.empty()) {
        const fs::path out = resolve_path(a.out);
        std::ofstream f(out, std::ios::binary);
        f.write(reinterpret_cast<const char*>(p.bytes().data()),
                static_cast<std::streamsize>(p.bytes().size()));
        if (!f) throw FormatError("cannot write " + out.string());
        write_run_config(out.string() + ".run.json", "extract",
                         {{"model", resolve_path(a.model_file).string()},
                          {"x_lsb", a.x},
                          {"bits", bits},
                          {"digest", p.digest()},
                          {"out", out.string()}});
        std::printf("%zu bits (digest %s) -> %s\n", p.bit_count(), p.digest().c_str(),
                    out.string().c_str());
    } else {
        std::printf("%s\n", p.to_bit_string().c_str());
    }
}

// ---------------------------------------------------------------- features

struct FeaturesArgs {
    std::string zoo_dir;
    std::string kind = "weights";
    std::string x_spec;
    std::string out;
    SeedOpt seed;
    feat::AeConfig ae;
};

void cmd_features(const FeaturesArgs& a, bool strict) {
    const feat::FeatureKind kind = feat::feature_kind_from_name(a.kind);
    const fs::path zoo_dir = resolve_path(a.zoo_dir);
    std::vector<int> widths;
    if (!a.x_spec.empty()) {
        widths = parse_x_spec(a.x_spec);
        require_levels(zoo_dir, widths);
    } else {
        widths = discover_levels(zoo_dir);
        if (widths.empty()) {
            throw ConfigError("no attacked severities under " + (zoo_dir / "attacked").string());
        }
    }
    const fs::path out = a.out.empty() ? zoo_dir / "features" : resolve_path(a.out);
    fs::create_directories(out);

    zoo::Zoo z = zoo::load_zoo(zoo_dir);

    json options;
    options["zoo"] = zoo_dir.string();
    options["kind"] = a.kind;
    options["out"] = out.string();
    options["x"] = widths;

    // The loss feature wants a reference autoencoder; this exploratory path
    // fits it on the whole benign zoo and saves the checkpoint for reuse.
    feat::AutoencoderModel* ae = nullptr;
    std::optional<feat::AutoencoderModel> ae_store;
    if (kind == feat::FeatureKind::Loss) {
        a.seed.enforce(strict, "--seed");
        ae_store.emplace(
            feat::train_autoencoder(z.benign, a.ae, derive_seed(a.seed.value, 31)).model);
        ae = &*ae_store;
        ae->save(out / "autoencoder.mzw");
        a.seed.record(options);
        options["ae"] = {{"hidden", a.ae.hidden},
                         {"epochs", a.ae.epochs},
                         {"lr", a.ae.lr},
                         {"batch", a.ae.batch}};
    }

    for (int x : widths) {
        std::vector<store::ModelRecord> attacked = zoo::load_attacked(zoo_dir, x);
        feat::FeatureDataset ds = feat::build_dataset(z.benign, attacked, kind, ae);
        const fs::path file = out / (a.kind + "_x" + std::to_string(x) + ".csv");
        feat::save_dataset(ds, file);
        std::printf("x=%d: %zu rows, dim %zu -> %s\n", x, ds.rows.size(), ds.dim(),
                    file.string().c_str());
    }
    write_run_config(out / "run-config.json", "features", std::move(options));
}

// -------------------------------------------------------------- detect train

struct DetectTrainArgs {
    std::string data;
    std::string method = "mean_eps";
    std::string out;
    double alpha = 0.05;
    SeedOpt seed;
    detect::EnsembleConfig ensemble;
};

void cmd_detect_train(const DetectTrainArgs& a, bool strict) {
    const fs::path data = resolve_path(a.data);
    const fs::path out = resolve_path(a.out);
    const feat::FeatureDataset ds = feat::load_dataset(data);

    json options;
    options["data"] = data.string();
    options["method"] = a.method;
    options["out"] = out.string();

    if (a.method == "mean_eps") {
        if (ds.dim() != 1) {
            throw ConfigError("mean_eps needs a scalar feature, got dimension " +
                              std::to_string(ds.dim()));
        }
        std::vector<double> benign;
        for (const auto& r : ds.rows) {
            if (r.label == "benign") benign.push_back(r.values[0]);
        }
        const detect::ThresholdDetector d = detect::fit_threshold(
            benign, detect::default_eps_grid(detect::stddev_of(benign)), a.alpha);
        detect::save_threshold(d, out);
        options["alpha"] = a.alpha;
        options["benign_rows"] = benign.size();
        std::printf("threshold: mu=%s eps=%s%s -> %s\n", csv::format_double(d.mu).c_str(),
                    csv::format_double(d.eps).c_str(), d.saturated ? " [eps saturated]" : "",
                    out.string().c_str());
    } else {
        const detect::EnsembleVariant variant = detect::variant_from_name(a.method);
        a.seed.enforce(strict, "--seed");
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& r : ds.rows) {
            x.push_back(r.values);
            y.push_back(r.label == "malicious" ? 1 : 0);
        }
        const detect::TreeEnsemble e =
            detect::TreeEnsemble::fit(x, y, variant, a.ensemble, a.seed.value);
        e.save(out);
        a.seed.record(options);
        std::printf("%s: %zu trees over %zu rows (dim %zu) -> %s\n", a.method.c_str(),
                    e.trees().size(), ds.rows.size(), ds.dim(), out.string().c_str());
    }
    write_run_config(out.string() + ".run.json", "detect train", std::move(options));
}

// --------------------------------------------------------------- detect eval

struct DetectEvalArgs {
    // checkpoint mode
    std::string detector;
    std::string data;
    // protocol mode
    std::string zoo_dir;
    std::string feature = "loss";
    std::string method = "mean_eps";
    std::string x_spec;
    std::string out;
    double alpha = 0.05;
    SeedOpt seed;
    feat::AeConfig ae;
    detect::EnsembleConfig ensemble;
};

void eval_checkpoint(const DetectEvalArgs& a) {
    if (a.data.empty()) throw ConfigError("--detector needs --data to evaluate on");
    const fs::path det = resolve_path(a.detector);
    const feat::FeatureDataset ds = feat::load_dataset(resolve_path(a.data));
    detect::Metrics m;
    if (detect::detector_kind(det) == "threshold") {
        m = detect::evaluate_threshold(detect::load_threshold(det), ds);
    } else {
        m = detect::evaluate_ensemble(detect::TreeEnsemble::load(det), ds);
    }
    print_metrics(m);
}

void eval_protocol(const DetectEvalArgs& a, bool strict) {
    if (a.out.empty()) throw ConfigError("--out is required");
    a.seed.enforce(strict, "--seed");
    const fs::path zoo_dir = resolve_path(a.zoo_dir);
    // The full protocol covers every width; --x narrows it explicitly.
    std::vector<int> widths(23);
    for (int x = 1; x <= 23; ++x) widths[x - 1] = x;
    if (!a.x_spec.empty()) widths = parse_x_spec(a.x_spec);
    require_levels(zoo_dir, widths);

    zoo::Zoo z = zoo::load_zoo(zoo_dir);
    std::vector<detect::SeverityData> severities;
    for (int x : widths) {
        severities.push_back({x, zoo::load_attacked(zoo_dir, x)});
    }

    detect::ExperimentConfig cfg;
    cfg.feature = feat::feature_kind_from_name(a.feature);
    cfg.method = a.method;
    cfg.alpha = a.alpha;
    cfg.ae = a.ae;
    cfg.ensemble = a.ensemble;
    const detect::EvalReport report = detect::run_experiment(z.benign, severities, cfg, a.seed.value);

    const fs::path out = resolve_path(a.out);
    fs::create_directories(out);
    csv::write_text_file(out / "report.csv", report.to_csv());
    svg::PlotSpec plot;
    plot.title = a.feature + " / " + a.method + " on " + z.manifest.name;
    svg::write_line_chart(out / "report.svg", plot, f1_series(report.rows));

    json options;
    options["zoo"] = zoo_dir.string();
    options["feature"] = a.feature;
    options["method"] = a.method;
    options["x"] = widths;
    options["alpha"] = a.alpha;
    options["out"] = out.string();
    a.seed.record(options);
    if (cfg.feature == feat::FeatureKind::Loss) {
        options["ae"] = {{"hidden", a.ae.hidden},
                         {"epochs", a.ae.epochs},
                         {"lr", a.ae.lr},
                         {"batch", a.ae.batch}};
    }
    write_run_config(out / "run-config.json", "detect eval", std::move(options));

    std::fputs(report.to_table().c_str(), stdout);
    std::printf("-> %s\n", (out / "report.csv").string().c_str());
}

void cmd_detect_eval(const DetectEvalArgs& a, bool strict) {
    const bool checkpoint = !a.detector.empty();
    const bool protocol = !a.zoo_dir.empty();
    if (checkpoint == protocol) {
        throw ConfigError("pass exactly one of --detector (checkpoint mode) or --zoo "
                          "(protocol mode)");
    }
    if (checkpoint) {
        eval_checkpoint(a);
    } else {
        eval_protocol(a, strict);
    }
}

// ------------------------------------------------------------------ report

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string svg_out;
};

const char* kReportHeader = "feature,method,x_lsb,A,R,P,F1,seed";

void cmd_report(const ReportArgs& a) {
    struct Row {
        std::vector<std::string> fields;
        int x = 0;
        std::uint64_t seed = 0;
    };
    std::vector<Row> rows;
    for (const std::string& input : a.inputs) {
        const fs::path path = resolve_path(input);
        const auto parsed = csv::read_rows(path);
        if (parsed.empty() || csv::join(parsed.front()) != kReportHeader) {
            throw FormatError(path.string() + " is not an evaluation report (expected header " +
                              kReportHeader + ")");
        }
        for (std::size_t i = 1; i < parsed.size(); ++i) {
            if (parsed[i].size() != 8) {
                throw FormatError(path.string() + ": row " + std::to_string(i + 1) +
                                  " has " + std::to_string(parsed[i].size()) + " fields");
            }
            Row r{parsed[i], 0, 0};
            r.x = parse_bounded_int(parsed[i][2], 1, 23, "x_lsb");
            r.seed = static_cast<std::uint64_t>(csv::parse_int(parsed[i][7]));
            rows.push_back(std::move(r));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& l, const Row& r) {
        return std::tie(l.fields[0], l.fields[1], l.x, l.seed) <
               std::tie(r.fields[0], r.fields[1], r.x, r.seed);
    });

    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %-9s %5s %8s %8s %8s %8s  %s\n", "feature", "method",
                  "x_lsb", "A", "R", "P", "F1", "seed");
    std::fputs(line, stdout);
    std::fputs((std::string(68, '-') + "\n").c_str(), stdout);
    for (const Row& r : rows) {
        std::snprintf(line, sizeof(line), "%-8s %-9s %5d %8.4f %8.4f %8.4f %8.4f  %s\n",
                      r.fields[0].c_str(), r.fields[1].c_str(), r.x,
                      csv::parse_double(r.fields[3]), csv::parse_double(r.fields[4]),
                      csv::parse_double(r.fields[5]), csv::parse_double(r.fields[6]),
                      r.fields[7].c_str());
        std::fputs(line, stdout);
    }

    if (!a.out.empty()) {
        const fs::path out = resolve_path(a.out);
        std::string text = std::string(kReportHeader) + "\n";
        for (const Row& r : rows) text += csv::join(r.fields) + "\n";
        csv::write_text_file(out, text);
        json options;
        options["inputs"] = json::array();
        for (const std::string& input : a.inputs) {
            options["inputs"].push_back(resolve_path(input).string());
        }
        options["out"] = out.string();
        if (!a.svg_out.empty()) options["svg"] = resolve_path(a.svg_out).string();
        write_run_config(out.string() + ".run.json", "report", std::move(options));
    }
    if (!a.svg_out.empty()) {
        // One series per feature/method pair; multiple seeds at one x average out.
        std::map<std::string, std::map<int, std::pair<double, int>>> acc;
        for (const Row& r : rows) {
            auto& cell = acc[r.fields[0] + "/" + r.fields[1]][r.x];
            cell.first += csv::parse_double(r.fields[6]);
            cell.second += 1;
        }
        std::vector<svg::Series> series;
        for (const auto& [name, by_x] : acc) {
            svg::Series s{name, {}};
            for (const auto& [x, cell] : by_x) s.points.emplace_back(x, cell.first / cell.second);
            series.push_back(std::move(s));
        }
        svg::PlotSpec plot;
        plot.title = "F1 by attack width";
        svg::write_line_chart(resolve_path(a.svg_out), plot, series);
    }
}

// ----------------------------------------------------------------- inspect

struct InspectArgs {
    std::string model_file;
    std::size_t offset = 0;
    std::size_t count = 8;
    int x = 0;
};

void cmd_inspect(const InspectArgs& a) {
    const store::ModelRecord m = store::load(resolve_path(a.model_file));
    std::string acts;
    for (std::size_t i = 0; i < m.arch().activations.size(); ++i) {
        if (i > 0) acts += '/';
        acts += m.arch().activations[i];
    }
    std::printf("arch: %s %s (n_W = %zu)\n", arch_to_string(m.arch()).c_str(), acts.c_str(),
                m.weight_count());
    std::string meta;
    for (const auto& [k, v] : m.meta()) meta += " " + k + "=" + v;
    if (!meta.empty()) std::printf("meta:%s\n", meta.c_str());

    const store::WeightVector w = store::flatten(m);
    const std::size_t end = std::min(w.size(), a.offset + a.count);
    if (a.offset >= w.size()) {
        throw ConfigError("--offset " + std::to_string(a.offset) + " is past the last weight (" +
                          std::to_string(w.size()) + " total)");
    }
    if (a.x != 0) check_x_range(a.x);
    for (std::size_t i = a.offset; i < end; ++i) {
        const bits::Float32Word word = bits::Float32Word::from_value(w[i]);
        std::string mantissa;
        for (int b = 23; b >= 1; --b) {
            if (a.x != 0 && b == a.x) mantissa += '|';  // XLSB region starts here
            mantissa += static_cast<char>('0' + word.bit(b));
        }
        std::string exponent;
        for (int b = 31; b >= 24; --b) exponent += static_cast<char>('0' + word.bit(b));
        std::printf("w[%5zu] = %-14s %d %s %s\n", i, csv::format_float(w[i]).c_str(),
                    word.sign(), exponent.c_str(), mantissa.c_str());
    }
}

void add_ae_flags(CLI::App* cmd, feat::AeConfig& ae) {
    cmd->add_option("--ae-hidden", ae.hidden, "autoencoder hidden width, 0 = auto");
    cmd->add_option("--ae-epochs", ae.epochs, "autoencoder training epochs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--ae-lr", ae.lr, "autoencoder learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--ae-batch", ae.batch, "autoencoder batch size")->check(CLI::PositiveNumber);
}

void add_ensemble_flags(CLI::App* cmd, detect::EnsembleConfig& e) {
    cmd->add_option("--rf-trees", e.rf_trees, "random-forest tree count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--rf-depth", e.rf_depth, "random-forest max depth")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--gb-rounds", e.gb_rounds, "boosting rounds")->check(CLI::PositiveNumber);
    cmd->add_option("--gb-depth", e.gb_depth, "boosted-tree max depth")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--gb-lr", e.gb_lr, "boosting learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--hgb-bins", e.hgb_bins, "histogram bin count")
        ->check(CLI::Range(2, 1 << 16));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"steganography attacks and steganalysis on float32 model weights"};
    app.require_subcommand(1);
    bool strict = false;
    app.add_flag("--strict", strict, "refuse default seeds: every run must pin them");

    std::function<void()> run;

    // zoo gen
    CLI::App* zoo_cmd = app.add_subcommand("zoo", "model-zoo management");
    zoo_cmd->require_subcommand(1);
    ZooGenArgs zoo_gen;
    CLI::App* gen = zoo_cmd->add_subcommand("gen", "train a zoo of benign carrier models");
    gen->add_option("--out", zoo_gen.out, "zoo output directory")->required();
    gen->add_option("--manifest", zoo_gen.manifest_file,
                    "generate from an existing manifest JSON instead of flags");
    gen->add_option("--arch", zoo_gen.arch, "layer widths, e.g. 2-8-8-2")
        ->excludes("--manifest");
    gen->add_option("--count", zoo_gen.count, "number of models")->excludes("--manifest");
    gen->add_option("--name", zoo_gen.name, "zoo name recorded in the manifest")
        ->excludes("--manifest");
    zoo_gen.seed.add(gen, "--seed", "base seed; per-model seeds derive from it");
    gen->get_option("--seed")->excludes("--manifest");
    gen->add_option("--jobs", zoo_gen.jobs, "worker threads for model training")
        ->check(CLI::PositiveNumber);
    gen->callback([&] { run = [&] { cmd_zoo_gen(zoo_gen, strict); }; });

    // attack
    AttackArgs attack_args;
    CLI::App* attack_cmd = app.add_subcommand("attack", "embed payload bits into a zoo");
    attack_cmd->add_option("--zoo", attack_args.zoo_dir, "zoo directory")->required();
    attack_cmd->add_option("--x", attack_args.x, "number of attacked low mantissa bits");
    attack_cmd->add_option("--sweep", attack_args.sweep, "width range, e.g. 1..23 or 4,8,16")
        ->excludes("--x");
    attack_cmd->add_option("--payload", attack_args.payload_file, "payload file (bytes)");
    attack_args.payload_seed.add(attack_cmd, "--payload-seed", "seed for a pseudorandom payload");
    attack_cmd->get_option("--payload-seed")->excludes("--payload");
    attack_cmd
        ->add_option("--payload-bits", attack_args.payload_bits,
                     "pseudorandom payload length in bits")
        ->excludes("--payload");
    attack_cmd->callback([&] { run = [&] { cmd_attack(attack_args, strict, attack_cmd); }; });

    // extract
    ExtractArgs extract_args;
    CLI::App* extract_cmd = app.add_subcommand("extract", "read embedded bits from a model file");
    extract_cmd->add_option("--model", extract_args.model_file, "model file (.mzw)")->required();
    extract_cmd->add_option("--x", extract_args.x, "number of attacked low mantissa bits")
        ->required();
    extract_cmd->add_option("--bits", extract_args.bits,
                            "bits to extract (default: full capacity)");
    extract_cmd->add_option("--out", extract_args.out,
                            "write packed payload bytes here instead of printing bits");
    extract_cmd->callback([&] { run = [&] { cmd_extract(extract_args); }; });

    // features
    FeaturesArgs features_args;
    CLI::App* features_cmd =
        app.add_subcommand("features", "export per-severity feature datasets as CSV");
    features_cmd->add_option("--zoo", features_args.zoo_dir, "zoo directory")->required();
    features_cmd->add_option("--kind", features_args.kind, "loss | grads | weights")->required();
    features_cmd->add_option("--x", features_args.x_spec,
                             "severity widths (default: all present on disk)");
    features_cmd->add_option("--out", features_args.out, "output directory (default <zoo>/features)");
    features_args.seed.add(features_cmd, "--seed", "autoencoder seed (loss feature only)");
    add_ae_flags(features_cmd, features_args.ae);
    features_cmd->callback([&] { run = [&] { cmd_features(features_args, strict); }; });

    // detect
    CLI::App* detect_cmd = app.add_subcommand("detect", "train and evaluate detectors");
    detect_cmd->require_subcommand(1);

    DetectTrainArgs train_args;
    CLI::App* train_cmd = detect_cmd->add_subcommand("train", "fit a detector on a dataset CSV");
    train_cmd->add_option("--data", train_args.data, "feature dataset CSV")->required();
    train_cmd->add_option("--method", train_args.method, "mean_eps | rf | gb | hgb");
    train_cmd->add_option("--out", train_args.out, "detector checkpoint path")->required();
    train_cmd->add_option("--alpha", train_args.alpha,
                          "benign false-positive budget for mean_eps");
    train_args.seed.add(train_cmd, "--seed", "ensemble seed (rf/gb/hgb)");
    add_ensemble_flags(train_cmd, train_args.ensemble);
    train_cmd->callback([&] { run = [&] { cmd_detect_train(train_args, strict); }; });

    DetectEvalArgs eval_args;
    CLI::App* eval_cmd = detect_cmd->add_subcommand(
        "eval", "evaluate a checkpoint on a CSV, or run the split protocol on a zoo");
    eval_cmd->add_option("--detector", eval_args.detector, "detector checkpoint (checkpoint mode)");
    eval_cmd->add_option("--data", eval_args.data, "test dataset CSV (checkpoint mode)");
    eval_cmd->add_option("--zoo", eval_args.zoo_dir, "zoo directory (protocol mode)");
    eval_cmd->add_option("--feature", eval_args.feature, "loss | grads | weights");
    eval_cmd->add_option("--method", eval_args.method, "mean_eps | rf | gb | hgb");
    eval_cmd->add_option("--x", eval_args.x_spec, "severity widths (default 1..23, all required)");
    eval_cmd->add_option("--out", eval_args.out, "report output directory (protocol mode)");
    eval_cmd->add_option("--alpha", eval_args.alpha, "benign false-positive budget for mean_eps");
    eval_args.seed.add(eval_cmd, "--seed", "split/model seed (protocol mode)");
    add_ae_flags(eval_cmd, eval_args.ae);
    add_ensemble_flags(eval_cmd, eval_args.ensemble);
    eval_cmd->callback([&] { run = [&] { cmd_detect_eval(eval_args, strict); }; });

    // report
    ReportArgs report_args;
    CLI::App* report_cmd = app.add_subcommand("report", "join evaluation reports");
    report_cmd->add_option("--compare", report_args.inputs, "evaluation report CSVs")
        ->required()
        ->expected(-1);
    report_cmd->add_option("--out", report_args.out, "write the joined CSV here");
    report_cmd->add_option("--svg", report_args.svg_out, "write an F1-by-width chart here");
    report_cmd->callback([&] { run = [&] { cmd_report(report_args); }; });

    // inspect
    InspectArgs inspect_args;
    CLI::App* inspect_cmd =
        app.add_subcommand("inspect", "print bit-level views of a model's weights");
    inspect_cmd->add_option("--model", inspect_args.model_file, "model file (.mzw)")->required();
    inspect_cmd->add_option("--offset", inspect_args.offset, "first weight index");
    inspect_cmd->add_option("--count", inspect_args.count, "number of weights to print");
    inspect_cmd->add_option("--x", inspect_args.x, "mark the x low mantissa bits");
    inspect_cmd->callback([&] { run = [&] { cmd_inspect(inspect_args); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        run();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
