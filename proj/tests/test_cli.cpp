// End-to-end exercises of the command-line tool; each case launches the real
// binary (path injected at compile time) inside a scratch directory.
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <doctest.h>

#include "stegozoo/csv.hpp"
#include "stegozoo/detectkit.hpp"
#include "stegozoo/featurex.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/zooforge.hpp"
#include "support/oracles.hpp"

using namespace stegozoo;
namespace fs = std::filesystem;

#ifndef STEGOZOO_CLI_PATH
#error "STEGOZOO_CLI_PATH must point at the built binary"
#endif

namespace {

struct RunResult {
    int rc = -1;
    std::string output;  // stdout and stderr interleaved

    bool contains(const std::string& needle) const {
        return output.find(needle) != std::string::npos;
    }
};

RunResult run_cli(const std::string& args, const fs::path& home = {}) {
    std::string cmd;
    if (!home.empty()) cmd += "STEGOZOO_HOME=" + home.string() + " ";
    cmd += std::string(STEGOZOO_CLI_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got = 0;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
        r.output.append(buf.data(), got);
    }
    const int status = pclose(pipe);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// One scratch workspace with a generated + attacked zoo, shared by the
// pipeline cases below (built on first use).
struct Workspace {
    oracle::TempDir tmp{"cli_ws"};
    fs::path zoo_dir;

    Workspace() {
        zoo_dir = tmp.path() / "zoo";
        RunResult r = run_cli("zoo gen --out " + q(zoo_dir) + " --count 12 --seed 3");
        REQUIRE(r.rc == 0);
        r = run_cli("attack --zoo " + q(zoo_dir) + " --x 5 --payload-seed 9 --payload-bits 512");
        REQUIRE(r.rc == 0);
    }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("zoo gen builds the documented layout and reruns byte-identically") {
    const fs::path zoo = ws().zoo_dir;
    CHECK(fs::exists(zoo / "manifest.json"));
    CHECK(fs::exists(zoo / "benign" / "m0000.mzw"));
    CHECK(fs::exists(zoo / "benign" / "m0011.mzw"));
    CHECK(fs::exists(zoo / "run-config.json"));

    // The tool is a thin shell over the library: same manifest, same models.
    const zoo::Zoo want = zoo::generate_zoo(zoo::default_manifest(12, 3, "zoo"));
    const zoo::Zoo got = zoo::load_zoo(zoo);
    CHECK(got.manifest.to_json() == want.manifest.to_json());
    REQUIRE(got.benign.size() == want.benign.size());
    for (std::size_t i = 0; i < got.benign.size(); ++i) CHECK(got.benign[i] == want.benign[i]);

    const oracle::TempDir tmp2("cli_rerun");
    const fs::path zoo2 = tmp2.path() / "zoo";
    REQUIRE(run_cli("zoo gen --out " + q(zoo2) + " --count 12 --seed 3 --jobs 3").rc == 0);
    CHECK(csv::read_text_file(zoo2 / "manifest.json") ==
          csv::read_text_file(zoo / "manifest.json"));
    CHECK(csv::read_text_file(zoo2 / "benign" / "m0007.mzw") ==
          csv::read_text_file(zoo / "benign" / "m0007.mzw"));

    // The provenance record captures the actual invocation.
    const std::string rc2 = csv::read_text_file(zoo2 / "run-config.json");
    CHECK(rc2.find("\"command\": \"zoo gen\"") != std::string::npos);
    CHECK(rc2.find("\"jobs\": 3") != std::string::npos);
    CHECK(rc2.find("\"seed\": 3") != std::string::npos);
    CHECK(rc2.find("\"seed_source\": \"flag\"") != std::string::npos);
}

TEST_CASE("relative paths resolve against STEGOZOO_HOME") {
    const oracle::TempDir home("cli_home");
    const RunResult r = run_cli("zoo gen --out relzoo --count 2 --seed 1", home.path());
    CHECK(r.rc == 0);
    CHECK(fs::exists(home.path() / "relzoo" / "manifest.json"));
}

TEST_CASE("attack records the embedding and extract inverts it") {
    const fs::path zoo = ws().zoo_dir;
    CHECK(fs::exists(zoo / "attacked" / "x5" / "m0000.mzw"));
    CHECK(fs::exists(zoo / "attacked" / "x5" / "attack.json"));
    CHECK(fs::exists(zoo / "attacked" / "x5" / "run-config.json"));

    const attack::Payload payload = attack::Payload::random(9, 512);
    const RunResult bits = run_cli("extract --model " + q(zoo / "attacked" / "x5" / "m0000.mzw") +
                                   " --x 5 --bits 512");
    CHECK(bits.rc == 0);
    CHECK(bits.output == payload.to_bit_string() + "\n");

    const fs::path dump = ws().tmp.path() / "payload.bin";
    const RunResult file = run_cli("extract --model " + q(zoo / "attacked" / "x5" / "m0001.mzw") +
                                   " --x 5 --bits 512 --out " + q(dump));
    CHECK(file.rc == 0);
    CHECK(file.contains(payload.digest()));
    std::ifstream in(dump, std::ios::binary);
    const std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
    CHECK(raw == payload.bytes());
    CHECK(csv::read_text_file(fs::path(dump.string() + ".run.json"))
              .find("\"digest\": \"" + payload.digest() + "\"") != std::string::npos);
}

TEST_CASE("features exports one csv per requested severity") {
    const fs::path zoo = ws().zoo_dir;
    const RunResult r = run_cli("features --zoo " + q(zoo) + " --kind weights --x 5");
    CHECK(r.rc == 0);
    const fs::path csv_file = zoo / "features" / "weights_x5.csv";
    REQUIRE(fs::exists(csv_file));
    CHECK(fs::exists(zoo / "features" / "run-config.json"));

    const std::string text = csv::read_text_file(csv_file);
    CHECK(text.rfind("model_id,label,x_lsb,f0,", 0) == 0);

    const feat::FeatureDataset ds = feat::load_dataset(csv_file, feat::FeatureKind::Weights);
    const zoo::Zoo z = zoo::load_zoo(zoo);
    const feat::FeatureDataset want =
        feat::build_dataset(z.benign, zoo::load_attacked(zoo, 5), feat::FeatureKind::Weights);
    CHECK(ds == want);
}

TEST_CASE("detect train fits a threshold checkpoint that eval can score") {
    const oracle::TempDir tmp("cli_thr");
    feat::FeatureDataset ds;
    ds.kind = feat::FeatureKind::Loss;
    for (int i = 0; i < 12; ++i) {
        ds.rows.push_back({zoo::model_id(static_cast<std::size_t>(i)), "benign", 0,
                           {0.1 * static_cast<double>(i)}});
    }
    ds.rows.push_back({"m0012", "malicious", 8, {9.0}});
    ds.rows.push_back({"m0013", "malicious", 8, {0.2}});
    const fs::path data = tmp.path() / "loss.csv";
    feat::save_dataset(ds, data);

    const fs::path ckpt = tmp.path() / "thr.sdk";
    const RunResult train =
        run_cli("detect train --data " + q(data) + " --method mean_eps --out " + q(ckpt));
    CHECK(train.rc == 0);
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(tmp.path() / "thr.sdk.run.json"));
    CHECK(detect::detector_kind(ckpt) == "threshold");

    // The checkpoint matches an in-process fit on the benign rows.
    std::vector<double> benign_values;
    for (int i = 0; i < 12; ++i) benign_values.push_back(0.1 * i);
    const auto want = detect::fit_threshold(
        benign_values, detect::default_eps_grid(detect::stddev_of(benign_values)), 0.05);
    const auto got = detect::load_threshold(ckpt);
    CHECK(got.mu == want.mu);
    CHECK(got.eps == want.eps);

    const RunResult eval =
        run_cli("detect eval --detector " + q(ckpt) + " --data " + q(data));
    CHECK(eval.rc == 0);
    const auto m = detect::evaluate_threshold(got, ds);
    char head[128];
    std::snprintf(head, sizeof head, "tp=%zu fp=%zu tn=%zu fn=%zu (n=%zu)", m.tp, m.fp, m.tn,
                  m.fn, m.total());
    CHECK(eval.contains(head));
    CHECK(eval.contains("A="));
    CHECK(eval.contains("F1="));
}

TEST_CASE("protocol eval writes report artifacts that match the library") {
    const fs::path zoo = ws().zoo_dir;
    const fs::path rep = ws().tmp.path() / "rep";
    const RunResult r = run_cli("detect eval --zoo " + q(zoo) +
                                " --feature weights --method rf --rf-trees 20 --x 5 --seed 5 "
                                "--out " + q(rep));
    CHECK(r.rc == 0);
    REQUIRE(fs::exists(rep / "report.csv"));
    CHECK(fs::exists(rep / "report.svg"));
    CHECK(fs::exists(rep / "run-config.json"));
    CHECK(r.contains("weights"));

    const zoo::Zoo z = zoo::load_zoo(zoo);
    detect::ExperimentConfig cfg;
    cfg.feature = feat::FeatureKind::Weights;
    cfg.method = "rf";
    cfg.ensemble.rf_trees = 20;
    std::vector<detect::SeverityData> severities;
    severities.push_back({5, zoo::load_attacked(zoo, 5)});
    const detect::EvalReport want = detect::run_experiment(z.benign, severities, cfg, 5);
    CHECK(csv::read_text_file(rep / "report.csv") == want.to_csv());
}

TEST_CASE("report joins csvs, prints the table and renders the chart") {
    const fs::path rep = ws().tmp.path() / "rep" / "report.csv";
    REQUIRE(fs::exists(rep));  // produced by the protocol eval case
    const fs::path joined = ws().tmp.path() / "joined.csv";
    const fs::path chart = ws().tmp.path() / "chart.svg";
    const RunResult r = run_cli("report --compare " + q(rep) + " " + q(rep) + " --out " +
                                q(joined) + " --svg " + q(chart));
    CHECK(r.rc == 0);
    CHECK(r.contains("feature"));
    CHECK(r.contains("rf"));

    const auto lines = csv::read_rows(joined);
    REQUIRE(lines.size() == 3);  // header + the same row twice
    CHECK(csv::join(lines[0]) == "feature,method,x_lsb,A,R,P,F1,seed");
    CHECK(lines[1] == lines[2]);
    CHECK(fs::exists(ws().tmp.path() / "joined.csv.run.json"));
    const std::string svg_text = csv::read_text_file(chart);
    CHECK(svg_text.rfind("<svg", 0) == 0);
}

TEST_CASE("bad usage exits with 2 and real failures with 3") {
    const fs::path zoo = ws().zoo_dir;
    const oracle::TempDir tmp("cli_rc");

    CHECK(run_cli("zoo gen --help").rc == 0);
    CHECK(run_cli("defend").rc == 2);                       // unknown subcommand
    CHECK(run_cli("attack --x 3").rc == 2);                 // missing required --zoo
    CHECK(run_cli("attack --zoo " + q(zoo) + " --x 24 --payload-seed 1").rc == 2);
    CHECK(run_cli("--strict zoo gen --out " + q(tmp.path() / "z") + " --count 2").rc == 2);

    // Requesting a severity that was never attacked is a usage error...
    const RunResult missing = run_cli("detect eval --zoo " + q(zoo) +
                                      " --feature weights --method rf --x 7 --seed 1 --out " +
                                      q(tmp.path() / "rep"));
    CHECK(missing.rc == 2);
    CHECK(missing.contains("x7"));
    CHECK(missing.contains("stegozoo attack"));

    // ...while a missing zoo altogether is an operational failure.
    CHECK(run_cli("attack --zoo " + q(tmp.path() / "ghost") + " --x 3 --payload-seed 1").rc == 3);
    CHECK(run_cli("extract --model " + q(tmp.path() / "ghost.mzw") + " --x 3").rc == 3);
}
