#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stegozoo/netcore.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/tensorstore.hpp"

namespace stegozoo::zoo {

// Synthetic 2-D classification task: isotropic Gaussian blobs centered on a
// circle. Blob k is labeled class k % classes, so with blobs_per_class > 1
// each class owns blobs on opposite sides of the plane and the task needs a
// nonlinear boundary.
struct TaskSpec {
    int classes = 2;
    int blobs_per_class = 2;
    double radius = 1.5;
    double spread = 0.35;
    int samples = 256;

    int blob_count() const { return classes * blobs_per_class; }
};

struct TrainSpec {
    int max_epochs = 200;
    double lr = 0.05;
    int batch = 16;
    double accuracy_floor = 0.90;
    // Early stop once train accuracy reaches this value.
    double stop_at = 0.95;
};

// Everything needed to regenerate a zoo byte-for-byte.
struct ZooManifest {
    std::string name = "zoo";
    store::Arch arch;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    TaskSpec task;
    TrainSpec train;
    std::vector<std::uint64_t> model_seeds;  // one per model, all distinct

    // ConfigError on any violated invariant (count < 2, seed collisions,
    // arch/task mismatch, nonsensical hyperparameters).
    void validate() const;

    std::string to_json() const;
    static ZooManifest from_json(const std::string& text);
};

// Manifest for `count` models from one base seed: arch 2-8-8-2 with tanh
// hidden layers and softmax output, the default blobs task, per-model seeds
// derived from the base seed.
ZooManifest default_manifest(std::size_t count, std::uint64_t seed,
                             const std::string& name = "zoo");

// "m0000", "m0001", ...
std::string model_id(std::size_t index);

// Deterministic sample of task.samples labeled points (one-hot targets).
net::Dataset make_blobs(const TaskSpec& task, std::uint64_t seed);

struct Zoo {
    ZooManifest manifest;
    std::vector<store::ModelRecord> benign;  // meta: id, label=benign, seed, train_accuracy
};

// Trains manifest.count networks, one per model seed (independent init and
// data sampling). A model that misses train.accuracy_floor after
// train.max_epochs aborts generation with an error naming its seed. Models
// are independent, so `jobs` worker threads may train them concurrently;
// the result does not depend on scheduling.
Zoo generate_zoo(const ZooManifest& manifest, int jobs = 1);

// X-LSB-Attack-Fill on every model with the shared payload s; outputs carry
// meta label=malicious, x_lsb=X. Sources are left untouched.
std::vector<store::ModelRecord> attack_zoo(const std::vector<store::ModelRecord>& benign,
                                           int x, const attack::Payload& s);

// On-disk layout:
//   <dir>/manifest.json
//   <dir>/benign/<id>.mzw
//   <dir>/attacked/x<X>/<id>.mzw  plus attack.json (X, payload digest/bits)
void save_zoo(const Zoo& z, const std::filesystem::path& dir);
Zoo load_zoo(const std::filesystem::path& dir);

void save_attacked(const std::filesystem::path& dir, int x,
                   const std::vector<store::ModelRecord>& attacked,
                   const attack::Payload& payload);
std::vector<store::ModelRecord> load_attacked(const std::filesystem::path& dir, int x);

}  // namespace stegozoo::zoo
