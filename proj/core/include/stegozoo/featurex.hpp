#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stegozoo/netcore.hpp"
#include "stegozoo/tensorstore.hpp"

namespace stegozoo::feat {

enum class FeatureKind { Loss, Grads, Weights };

FeatureKind feature_kind_from_name(const std::string& name);  // loss | grads | weights
std::string feature_kind_name(FeatureKind kind);

// Defaults were tuned on the stock 200-model zoo: narrower hidden layers or
// smaller steps leave the held-out reconstruction loss near its initial
// value, which defeats both the convergence check and the detector built on
// top of the loss.
struct AeConfig {
    int hidden = 0;  // 0 -> max(8, n_W)
    int epochs = 500;
    double lr = 0.1;
    int batch = 16;

    int hidden_for(std::size_t n_w) const;
};

// Dense autoencoder n_W -> h -> n_W (tanh hidden, identity output) plus the
// per-dimension z-score statistics of the benign weights it was fit on.
class AutoencoderModel {
public:
    AutoencoderModel(net::Network network, std::vector<double> mu, std::vector<double> sigma);

    const net::Network& network() const { return net_; }
    std::size_t width() const { return mu_.size(); }
    const std::vector<double>& mu() const { return mu_; }
    const std::vector<double>& sigma() const { return sigma_; }

    std::vector<double> normalize(const store::WeightVector& w) const;

    // Mean-squared error between the normalized weight vector and its
    // reconstruction; ShapeError when m's parameter count differs.
    double reconstruction_loss(const store::ModelRecord& m) const;

    // MZW1 checkpoint; normalization stats ride in the metadata.
    void save(const std::filesystem::path& path) const;
    static AutoencoderModel load(const std::filesystem::path& path);

private:
    net::Network net_;
    std::vector<double> mu_;
    std::vector<double> sigma_;
};

// Untrained AE over the split's normalization stats, deterministic per seed.
// train_autoencoder starts from exactly this initialization.
AutoencoderModel make_untrained_autoencoder(const std::vector<store::ModelRecord>& split,
                                            const AeConfig& cfg, std::uint64_t seed);

struct AeTrainResult {
    AutoencoderModel model;
    std::vector<double> epoch_losses;
};

// Fits the AE on the given benign split (>= 10 models). Divergence raises a
// NumericError.
AeTrainResult train_autoencoder(const std::vector<store::ModelRecord>& split,
                                const AeConfig& cfg, std::uint64_t seed);

// Backprop gradient at x = zero vector, target = zero vector, mse loss,
// flattened in WeightVector order.
std::vector<double> gradient_feature(const store::ModelRecord& m);

// The flattened weight vector itself.
std::vector<double> weights_feature(const store::ModelRecord& m);

struct FeatureRow {
    std::string model_id;
    std::string label;  // benign | malicious
    int x_lsb = 0;      // 0 for benign rows
    std::vector<double> values;

    bool operator==(const FeatureRow&) const = default;
};

struct FeatureDataset {
    FeatureKind kind = FeatureKind::Weights;
    std::vector<FeatureRow> rows;

    std::size_t dim() const { return rows.empty() ? 0 : rows.front().values.size(); }

    bool operator==(const FeatureDataset&) const = default;
};

// One row per model, benign rows first. `ae` is required for (and only for)
// the loss feature; zoos must share one architecture.
FeatureDataset build_dataset(const std::vector<store::ModelRecord>& benign,
                             const std::vector<store::ModelRecord>& attacked,
                             FeatureKind kind, const AutoencoderModel* ae = nullptr);

// CSV with header model_id,label,x_lsb,f0..f{d-1}; floats as round-trip
// shortest decimals, so save/load is lossless. The file does not record the
// feature kind; pass it when it matters downstream.
void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path);
FeatureDataset load_dataset(const std::filesystem::path& path,
                            FeatureKind kind = FeatureKind::Weights);

}  // namespace stegozoo::feat
