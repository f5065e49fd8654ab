#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stegozoo/errors.hpp"
#include "stegozoo/tensorstore.hpp"

namespace stegozoo::net {

enum class Activation { Identity, Relu, Tanh, Sigmoid, Softmax };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

enum class Loss { Mse, CrossEntropy };

Loss loss_from_name(const std::string& name);

// Dense feedforward network. Parameters are stored as float32 (the carrier
// dtype); all forward/backward arithmetic accumulates in double.
class Network {
public:
    struct Layer {
        int in = 0;
        int out = 0;
        Activation act = Activation::Identity;
        std::vector<float> w;  // row-major [out][in]
        std::vector<float> b;  // [out]
    };

    // Fan-in scaled uniform init (biases zero), deterministic per seed.
    Network(store::Arch arch, std::uint64_t init_seed);

    static Network from_model_record(const store::ModelRecord& m);
    store::ModelRecord to_model_record(std::map<std::string, std::string> meta = {}) const;

    const store::Arch& arch() const { return arch_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t param_count() const { return arch_.param_count(); }
    int input_dim() const { return arch_.layers.front(); }
    int output_dim() const { return arch_.layers.back(); }

    std::vector<double> forward(std::span<const double> x) const;

    // Gradient of the loss w.r.t. every weight and bias, flattened in the
    // same order as store::flatten. Non-finite intermediates raise a
    // NumericError naming the offending layer.
    std::vector<double> backprop(std::span<const double> x, std::span<const double> target,
                                 Loss loss) const;

    double loss_value(std::span<const double> x, std::span<const double> target, Loss loss) const;

    // In-place parameter update: w <- float(double(w) - step * g), g in
    // flatten order.
    void apply_gradient(std::span<const double> grad, double step);

private:
    store::Arch arch_;
    std::vector<Layer> layers_;

    struct Trace {
        std::vector<std::vector<double>> z;  // pre-activation per layer
        std::vector<std::vector<double>> a;  // post-activation per layer
    };
    Trace run_forward(std::span<const double> x) const;

    friend double loss_of(const Network&, std::span<const double>, std::span<const double>, Loss);
};

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;

    std::size_t size() const { return inputs.size(); }
};

struct TrainOptions {
    int epochs = 200;
    double lr = 0.05;
    int batch = 16;
    Loss loss = Loss::CrossEntropy;
    // Stop once train accuracy reaches this value; negative disables.
    double stop_at_accuracy = -1.0;
};

struct TrainResult {
    Network net;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    int epochs_run = 0;
    std::vector<double> epoch_losses;  // mean train loss after each epoch
};

// Mini-batch SGD, deterministic given the seed. The incoming network is
// copied; divergence (non-finite loss) raises a NumericError.
TrainResult train_sgd(Network net, const Dataset& data, const TrainOptions& opt,
                      std::uint64_t seed);

// Fraction of rows whose argmax(output) matches argmax(target).
double accuracy(const Network& net, const Dataset& data);

}  // namespace stegozoo::net
