#include "stegozoo/zooforge.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <json.hpp>

#include "stegozoo/csv.hpp"
#include "stegozoo/rng.hpp"

namespace stegozoo::zoo {

using nlohmann::json;

void ZooManifest::validate() const {
    if (count < 2) throw ConfigError("zoo count must be >= 2, got " + std::to_string(count));
    if (model_seeds.size() != count) {
        throw ConfigError("manifest has " + std::to_string(model_seeds.size()) +
                          " model seeds for count " + std::to_string(count));
    }
    std::set<std::uint64_t> distinct(model_seeds.begin(), model_seeds.end());
    if (distinct.size() != model_seeds.size()) {
        throw ConfigError("model seeds must be distinct");
    }
    if (arch.layers.size() < 2) throw ConfigError("arch needs at least two layers");
    if (arch.layers.front() != 2) {
        throw ConfigError("blobs task is 2-D; arch input size is " +
                          std::to_string(arch.layers.front()));
    }
    if (arch.layers.back() != task.classes) {
        throw ConfigError("arch output size " + std::to_string(arch.layers.back()) +
                          " != class count " + std::to_string(task.classes));
    }
    if (task.classes < 2 || task.blobs_per_class < 1 || task.samples < task.blob_count() ||
        task.spread <= 0.0 || task.radius <= 0.0) {
        throw ConfigError("bad task spec");
    }
    if (train.max_epochs < 1 || train.lr <= 0.0 || train.batch < 1 ||
        train.accuracy_floor < 0.0 || train.accuracy_floor > 1.0) {
        throw ConfigError("bad train spec");
    }
}

std::string ZooManifest::to_json() const {
    json j;
    j["name"] = name;
    j["arch"] = arch.layers_string();
    j["activations"] = arch.activations;
    j["count"] = count;
    j["seed"] = seed;
    j["task"] = {{"classes", task.classes},
                 {"blobs_per_class", task.blobs_per_class},
                 {"radius", task.radius},
                 {"spread", task.spread},
                 {"samples", task.samples}};
    j["train"] = {{"max_epochs", train.max_epochs},
                  {"lr", train.lr},
                  {"batch", train.batch},
                  {"accuracy_floor", train.accuracy_floor},
                  {"stop_at", train.stop_at}};
    j["model_seeds"] = model_seeds;
    return j.dump(2) + "\n";
}

ZooManifest ZooManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    try {
        ZooManifest m;
        m.name = j.at("name").get<std::string>();
        const auto acts = j.at("activations").get<std::vector<std::string>>();
        m.arch = store::Arch::parse(j.at("arch").get<std::string>());
        if (acts.size() != m.arch.activations.size()) {
            throw FormatError("manifest activations do not match arch");
        }
        m.arch.activations = acts;
        m.count = j.at("count").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const json& t = j.at("task");
        m.task.classes = t.at("classes").get<int>();
        m.task.blobs_per_class = t.at("blobs_per_class").get<int>();
        m.task.radius = t.at("radius").get<double>();
        m.task.spread = t.at("spread").get<double>();
        m.task.samples = t.at("samples").get<int>();
        const json& tr = j.at("train");
        m.train.max_epochs = tr.at("max_epochs").get<int>();
        m.train.lr = tr.at("lr").get<double>();
        m.train.batch = tr.at("batch").get<int>();
        m.train.accuracy_floor = tr.at("accuracy_floor").get<double>();
        m.train.stop_at = tr.at("stop_at").get<double>();
        m.model_seeds = j.at("model_seeds").get<std::vector<std::uint64_t>>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad manifest: ") + e.what());
    }
}

ZooManifest default_manifest(std::size_t count, std::uint64_t seed, const std::string& name) {
    ZooManifest m;
    m.name = name;
    m.arch = store::Arch::parse("2-8-8-2");
    m.count = count;
    m.seed = seed;
    m.model_seeds.reserve(count);
    for (std::size_t i = 0; i < count; ++i) m.model_seeds.push_back(derive_seed(seed, i));
    return m;
}

std::string model_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "m%04zu", index);
    return std::string(buf);
}

net::Dataset make_blobs(const TaskSpec& task, std::uint64_t seed) {
    const int blobs = task.blob_count();
    std::vector<std::pair<double, double>> centers(blobs);
    for (int k = 0; k < blobs; ++k) {
        const double angle = 2.0 * 3.14159265358979323846 * k / blobs;
        centers[k] = {task.radius * std::cos(angle), task.radius * std::sin(angle)};
    }
    Rng rng(seed);
    net::Dataset data;
    data.inputs.reserve(task.samples);
    data.targets.reserve(task.samples);
    for (int i = 0; i < task.samples; ++i) {
        const int k = i % blobs;  // balanced classes by construction
        const double x = centers[k].first + rng.normal(0.0, task.spread);
        const double y = centers[k].second + rng.normal(0.0, task.spread);
        data.inputs.push_back({x, y});
        std::vector<double> target(task.classes, 0.0);
        target[k % task.classes] = 1.0;
        data.targets.push_back(std::move(target));
    }
    return data;
}

namespace {

store::ModelRecord train_one(const ZooManifest& manifest, std::size_t i) {
    const std::uint64_t ms = manifest.model_seeds[i];
    const net::Dataset data = make_blobs(manifest.task, derive_seed(ms, 1));
    net::Network init(manifest.arch, derive_seed(ms, 2));
    net::TrainOptions opt;
    opt.epochs = manifest.train.max_epochs;
    opt.lr = manifest.train.lr;
    opt.batch = manifest.train.batch;
    opt.loss = net::Loss::CrossEntropy;
    opt.stop_at_accuracy = manifest.train.stop_at;
    const net::TrainResult r = net::train_sgd(std::move(init), data, opt, derive_seed(ms, 3));
    if (r.train_accuracy < manifest.train.accuracy_floor) {
        throw Error("zoo generation failed: model " + model_id(i) + " (seed " +
                    std::to_string(ms) + ") reached train accuracy " +
                    csv::format_double(r.train_accuracy) + " < floor " +
                    csv::format_double(manifest.train.accuracy_floor) + " after " +
                    std::to_string(r.epochs_run) + " epochs");
    }
    std::map<std::string, std::string> meta{
        {"id", model_id(i)},
        {"label", "benign"},
        {"seed", std::to_string(ms)},
        {"train_accuracy", csv::format_double(r.train_accuracy)},
    };
    return r.net.to_model_record(std::move(meta));
}

}  // namespace

Zoo generate_zoo(const ZooManifest& manifest, int jobs) {
    manifest.validate();
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    Zoo z{manifest, {}};
    if (jobs == 1 || manifest.count < 2 * static_cast<std::size_t>(jobs)) {
        z.benign.reserve(manifest.count);
        for (std::size_t i = 0; i < manifest.count; ++i) z.benign.push_back(train_one(manifest, i));
        return z;
    }

    std::vector<std::optional<store::ModelRecord>> slots(manifest.count);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.count) return;
            try {
                slots[i].emplace(train_one(manifest, i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    z.benign.reserve(manifest.count);
    for (auto& slot : slots) z.benign.push_back(std::move(*slot));
    return z;
}

std::vector<store::ModelRecord> attack_zoo(const std::vector<store::ModelRecord>& benign,
                                           int x, const attack::Payload& s) {
    const attack::AttackSpec spec(x, attack::AttackMode::Fill);
    std::vector<store::ModelRecord> out;
    out.reserve(benign.size());
    for (const store::ModelRecord& m : benign) {
        store::ModelRecord a = attack::embed_fill(m, spec, s);
        a.set_meta("label", "malicious");
        a.set_meta("x_lsb", std::to_string(x));
        out.push_back(std::move(a));
    }
    return out;
}

void save_zoo(const Zoo& z, const std::filesystem::path& dir) {
    z.manifest.validate();
    if (z.benign.size() != z.manifest.count) {
        throw ShapeError("zoo holds " + std::to_string(z.benign.size()) + " models, manifest says " +
                         std::to_string(z.manifest.count));
    }
    std::filesystem::create_directories(dir / "benign");
    csv::write_text_file(dir / "manifest.json", z.manifest.to_json());
    for (std::size_t i = 0; i < z.benign.size(); ++i) {
        store::save(z.benign[i], dir / "benign" / (model_id(i) + ".mzw"));
    }
}

Zoo load_zoo(const std::filesystem::path& dir) {
    Zoo z;
    z.manifest = ZooManifest::from_json(csv::read_text_file(dir / "manifest.json"));
    z.benign.reserve(z.manifest.count);
    for (std::size_t i = 0; i < z.manifest.count; ++i) {
        z.benign.push_back(store::load(dir / "benign" / (model_id(i) + ".mzw")));
    }
    return z;
}

void save_attacked(const std::filesystem::path& dir, int x,
                   const std::vector<store::ModelRecord>& attacked,
                   const attack::Payload& payload) {
    const std::filesystem::path sub = dir / "attacked" / ("x" + std::to_string(x));
    std::filesystem::create_directories(sub);
    for (std::size_t i = 0; i < attacked.size(); ++i) {
        store::save(attacked[i], sub / (model_id(i) + ".mzw"));
    }
    json j;
    j["x_lsb"] = x;
    j["payload_digest"] = payload.digest();
    j["payload_bits"] = payload.bit_count();
    j["models"] = attacked.size();
    csv::write_text_file(sub / "attack.json", j.dump(2) + "\n");
}

std::vector<store::ModelRecord> load_attacked(const std::filesystem::path& dir, int x) {
    const std::filesystem::path sub = dir / "attacked" / ("x" + std::to_string(x));
    json j;
    try {
        j = json::parse(csv::read_text_file(sub / "attack.json"));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("bad attack.json: ") + e.what());
    }
    const std::size_t n = j.at("models").get<std::size_t>();
    std::vector<store::ModelRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(store::load(sub / (model_id(i) + ".mzw")));
    }
    return out;
}

}  // namespace stegozoo::zoo
