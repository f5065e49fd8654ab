#include "stegozoo/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stegozoo/rng.hpp"

namespace stegozoo::net {

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "identity";
}

Loss loss_from_name(const std::string& name) {
    if (name == "mse") return Loss::Mse;
    if (name == "cross_entropy") return Loss::CrossEntropy;
    throw ConfigError("unknown loss '" + name + "'");
}

namespace {

void apply_activation(Activation act, const std::vector<double>& z, std::vector<double>& a) {
    a.resize(z.size());
    switch (act) {
        case Activation::Identity:
            a = z;
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0 ? z[i] : 0.0;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::tanh(z[i]);
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) a[i] = 1.0 / (1.0 + std::exp(-z[i]));
            break;
        case Activation::Softmax: {
            const double zmax = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                a[i] = std::exp(z[i] - zmax);
                sum += a[i];
            }
            for (double& v : a) v /= sum;
            break;
        }
    }
}

// dJ/dz from dJ/da for an elementwise activation; softmax handled separately.
double activation_derivative(Activation act, double z, double a) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - a * a;
        case Activation::Sigmoid: return a * (1.0 - a);
        case Activation::Softmax: break;
    }
    return 1.0;
}

void check_finite(const std::vector<double>& v, const char* what, std::size_t layer) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite ") + what + " in layer " +
                               std::to_string(layer));
        }
    }
}

constexpr double kLogClamp = 1e-12;

}  // namespace

Network::Network(store::Arch arch, std::uint64_t init_seed) : arch_(std::move(arch)) {
    if (arch_.layers.size() < 2) throw ShapeError("network needs at least input and output layers");
    if (arch_.activations.size() + 1 != arch_.layers.size()) {
        throw ShapeError("activation count does not match layer count");
    }
    Rng rng(init_seed);
    for (std::size_t l = 1; l < arch_.layers.size(); ++l) {
        Layer layer;
        layer.in = arch_.layers[l - 1];
        layer.out = arch_.layers[l];
        layer.act = activation_from_name(arch_.activations[l - 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        layer.w.resize(static_cast<std::size_t>(layer.out) * layer.in);
        for (float& v : layer.w) v = static_cast<float>(rng.uniform(-bound, bound));
        layer.b.assign(static_cast<std::size_t>(layer.out), 0.0f);
        layers_.push_back(std::move(layer));
    }
}

Network Network::from_model_record(const store::ModelRecord& m) {
    Network net(m.arch(), 0);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
        net.layers_[l].w = m.layers()[2 * l].data;
        net.layers_[l].b = m.layers()[2 * l + 1].data;
    }
    return net;
}

store::ModelRecord Network::to_model_record(std::map<std::string, std::string> meta) const {
    std::vector<store::Tensor> tensors;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        store::Tensor w;
        w.name = "layer" + std::to_string(l) + ".weight";
        w.shape = {static_cast<std::size_t>(layers_[l].out), static_cast<std::size_t>(layers_[l].in)};
        w.data = layers_[l].w;
        tensors.push_back(std::move(w));
        store::Tensor b;
        b.name = "layer" + std::to_string(l) + ".bias";
        b.shape = {static_cast<std::size_t>(layers_[l].out)};
        b.data = layers_[l].b;
        tensors.push_back(std::move(b));
    }
    return store::ModelRecord(arch_, std::move(tensors), std::move(meta));
}

Network::Trace Network::run_forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim()) {
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_dim()));
    }
    Trace tr;
    tr.z.resize(layers_.size());
    tr.a.resize(layers_.size() + 1);
    tr.a[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const std::vector<double>& in = tr.a[l];
        std::vector<double>& z = tr.z[l];
        z.assign(static_cast<std::size_t>(layer.out), 0.0);
        for (int o = 0; o < layer.out; ++o) {
            double acc = static_cast<double>(layer.b[static_cast<std::size_t>(o)]);
            const float* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) {
                acc += static_cast<double>(wrow[i]) * in[static_cast<std::size_t>(i)];
            }
            z[static_cast<std::size_t>(o)] = acc;
        }
        check_finite(z, "pre-activation", l);
        apply_activation(layer.act, z, tr.a[l + 1]);
        check_finite(tr.a[l + 1], "activation", l);
    }
    return tr;
}

std::vector<double> Network::forward(std::span<const double> x) const {
    return run_forward(x).a.back();
}

double Network::loss_value(std::span<const double> x, std::span<const double> target,
                           Loss loss) const {
    const std::vector<double> out = forward(x);
    if (out.size() != target.size()) {
        throw ShapeError("target has dimension " + std::to_string(target.size()) + ", expected " +
                         std::to_string(out.size()));
    }
    if (loss == Loss::Mse) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out[i] - target[i];
            acc += d * d;
        }
        return acc / static_cast<double>(out.size());
    }
    // Cross-entropy over a softmax output.
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        acc -= target[i] * std::log(std::max(out[i], kLogClamp));
    }
    return acc;
}

std::vector<double> Network::backprop(std::span<const double> x, std::span<const double> target,
                                      Loss loss) const {
    const Trace tr = run_forward(x);
    const std::vector<double>& out = tr.a.back();
    if (out.size() != target.size()) {
        throw ShapeError("target has dimension " + std::to_string(target.size()) + ", expected " +
                         std::to_string(out.size()));
    }
    const Activation out_act = layers_.back().act;
    if (loss == Loss::CrossEntropy && out_act != Activation::Softmax) {
        throw ConfigError("cross_entropy loss requires a softmax output layer");
    }

    // delta at the output layer's pre-activation.
    std::vector<double> delta(out.size());
    if (loss == Loss::CrossEntropy) {
        for (std::size_t i = 0; i < out.size(); ++i) delta[i] = out[i] - target[i];
    } else {
        std::vector<double> dJda(out.size());
        const double scale = 2.0 / static_cast<double>(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) dJda[i] = scale * (out[i] - target[i]);
        if (out_act == Activation::Softmax) {
            // dz = diag(a) dJda - a (a . dJda)
            double dot = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) dot += out[i] * dJda[i];
            for (std::size_t i = 0; i < out.size(); ++i) delta[i] = out[i] * (dJda[i] - dot);
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) {
                delta[i] = dJda[i] * activation_derivative(out_act, tr.z.back()[i], out[i]);
            }
        }
    }

    std::vector<double> grad(param_count(), 0.0);
    // Offsets of each layer's weight block in the flattened vector.
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t pos = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = pos;
        pos += static_cast<std::size_t>(layers_[l].out) * layers_[l].in + layers_[l].out;
    }

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        const std::vector<double>& in = tr.a[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + static_cast<std::size_t>(layer.out) * layer.in;
        for (int o = 0; o < layer.out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            double* grow = gw + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) grow[i] = d * in[static_cast<std::size_t>(i)];
            gb[o] = d;
        }
        check_finite(delta, "gradient", l);
        if (l == 0) break;
        // delta^(l-1) = (W^l)^T delta^l  ⊙ act'(z_(l-1))
        const Layer& prev = layers_[l - 1];
        std::vector<double> next(static_cast<std::size_t>(layer.in), 0.0);
        for (int o = 0; o < layer.out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)];
            const float* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) {
                next[static_cast<std::size_t>(i)] += static_cast<double>(wrow[i]) * d;
            }
        }
        if (prev.act == Activation::Softmax) {
            const std::vector<double>& a = tr.a[l];
            double dot = 0.0;
            for (std::size_t i = 0; i < next.size(); ++i) dot += a[i] * next[i];
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = a[i] * (next[i] - dot);
        } else {
            for (std::size_t i = 0; i < next.size(); ++i) {
                next[i] *= activation_derivative(prev.act, tr.z[l - 1][i], tr.a[l][i]);
            }
        }
        delta = std::move(next);
    }
    return grad;
}

void Network::apply_gradient(std::span<const double> grad, double step) {
    if (grad.size() != param_count()) throw ShapeError("gradient length does not match n_W");
    std::size_t pos = 0;
    for (Layer& layer : layers_) {
        for (float& v : layer.w) {
            v = static_cast<float>(static_cast<double>(v) - step * grad[pos++]);
        }
        for (float& v : layer.b) {
            v = static_cast<float>(static_cast<double>(v) - step * grad[pos++]);
        }
    }
}

double accuracy(const Network& net, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<double> out = net.forward(data.inputs[i]);
        const auto pred = std::distance(out.begin(), std::max_element(out.begin(), out.end()));
        const auto& t = data.targets[i];
        const auto truth = std::distance(t.begin(), std::max_element(t.begin(), t.end()));
        if (pred == truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train_sgd(Network net, const Dataset& data, const TrainOptions& opt,
                      std::uint64_t seed) {
    if (data.size() == 0) throw ConfigError("train_sgd: empty dataset");
    if (data.inputs.size() != data.targets.size()) {
        throw ShapeError("train_sgd: inputs/targets size mismatch");
    }
    if (opt.batch < 1) throw ConfigError("train_sgd: batch must be >= 1");

    Rng rng(derive_seed(seed, 0x5d9));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult res{std::move(net), 0.0, 0.0, 0, {}};
    res.epoch_losses.reserve(static_cast<std::size_t>(opt.epochs));
    std::vector<double> batch_grad(res.net.param_count());

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                const std::vector<double> g = res.net.backprop(data.inputs[i], data.targets[i], opt.loss);
                for (std::size_t j = 0; j < g.size(); ++j) batch_grad[j] += g[j];
            }
            res.net.apply_gradient(batch_grad, opt.lr / static_cast<double>(end - start));
        }
        res.epochs_run = epoch + 1;

        double loss_sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            loss_sum += res.net.loss_value(data.inputs[i], data.targets[i], opt.loss);
        }
        res.final_loss = loss_sum / static_cast<double>(data.size());
        res.epoch_losses.push_back(res.final_loss);
        if (!std::isfinite(res.final_loss)) {
            throw NumericError("train_sgd: loss diverged at epoch " + std::to_string(epoch + 1));
        }
        res.train_accuracy = accuracy(res.net, data);
        if (opt.stop_at_accuracy >= 0.0 && res.train_accuracy >= opt.stop_at_accuracy) break;
    }
    return res;
}

}  // namespace stegozoo::net
