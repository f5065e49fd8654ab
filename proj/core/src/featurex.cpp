#include "stegozoo/featurex.hpp"

#include <algorithm>
#include <cmath>

#include "stegozoo/csv.hpp"
#include "stegozoo/rng.hpp"

namespace stegozoo::feat {

FeatureKind feature_kind_from_name(const std::string& name) {
    if (name == "loss") return FeatureKind::Loss;
    if (name == "grads") return FeatureKind::Grads;
    if (name == "weights") return FeatureKind::Weights;
    throw ConfigError("unknown feature kind '" + name + "' (expected loss|grads|weights)");
}

std::string feature_kind_name(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Loss: return "loss";
        case FeatureKind::Grads: return "grads";
        case FeatureKind::Weights: return "weights";
    }
    throw ConfigError("bad feature kind value");
}

int AeConfig::hidden_for(std::size_t n_w) const {
    if (hidden > 0) return hidden;
    return std::max<int>(8, static_cast<int>(n_w));
}

namespace {

constexpr std::uint64_t kAeInitStream = 11;
constexpr std::uint64_t kAeTrainStream = 13;

void norm_stats(const std::vector<store::ModelRecord>& split, std::vector<double>& mu,
                std::vector<double>& sigma) {
    if (split.empty()) throw ConfigError("autoencoder needs a non-empty benign split");
    const std::size_t n_w = split.front().weight_count();
    mu.assign(n_w, 0.0);
    sigma.assign(n_w, 0.0);
    std::vector<store::WeightVector> flat;
    flat.reserve(split.size());
    for (const auto& m : split) {
        if (m.weight_count() != n_w) {
            throw ShapeError("autoencoder split mixes parameter counts");
        }
        flat.push_back(store::flatten(m));
    }
    for (const auto& w : flat) {
        for (std::size_t j = 0; j < n_w; ++j) mu[j] += static_cast<double>(w[j]);
    }
    for (double& v : mu) v /= static_cast<double>(flat.size());
    for (const auto& w : flat) {
        for (std::size_t j = 0; j < n_w; ++j) {
            const double d = static_cast<double>(w[j]) - mu[j];
            sigma[j] += d * d;
        }
    }
    for (double& v : sigma) {
        v = std::sqrt(v / static_cast<double>(flat.size()));
        if (v < 1e-12) v = 1.0;  // constant dimension: leave it centered only
    }
}

std::string join_doubles(const std::vector<double>& v) {
    std::vector<std::string> fields;
    fields.reserve(v.size());
    for (double x : v) fields.push_back(csv::format_double(x));
    return csv::join(fields);
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    for (const std::string& f : csv::split_line(s)) out.push_back(csv::parse_double(f));
    return out;
}

}  // namespace

AutoencoderModel::AutoencoderModel(net::Network network, std::vector<double> mu,
                                   std::vector<double> sigma)
    : net_(std::move(network)), mu_(std::move(mu)), sigma_(std::move(sigma)) {
    if (mu_.size() != sigma_.size()) throw ShapeError("mu/sigma length mismatch");
    if (static_cast<std::size_t>(net_.input_dim()) != mu_.size() ||
        static_cast<std::size_t>(net_.output_dim()) != mu_.size()) {
        throw ShapeError("autoencoder width " + std::to_string(net_.input_dim()) + "->" +
                         std::to_string(net_.output_dim()) + " does not match stats length " +
                         std::to_string(mu_.size()));
    }
}

std::vector<double> AutoencoderModel::normalize(const store::WeightVector& w) const {
    if (w.size() != mu_.size()) {
        throw ShapeError("weight vector length " + std::to_string(w.size()) +
                         " does not match autoencoder width " + std::to_string(mu_.size()));
    }
    std::vector<double> z(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        z[j] = (static_cast<double>(w[j]) - mu_[j]) / sigma_[j];
    }
    return z;
}

double AutoencoderModel::reconstruction_loss(const store::ModelRecord& m) const {
    const std::vector<double> z = normalize(store::flatten(m));
    const std::vector<double> out = net_.forward(z);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double d = z[j] - out[j];
        sum += d * d;
    }
    return sum / static_cast<double>(z.size());
}

void AutoencoderModel::save(const std::filesystem::path& path) const {
    std::map<std::string, std::string> meta{
        {"kind", "autoencoder"},
        {"norm_mu", join_doubles(mu_)},
        {"norm_sigma", join_doubles(sigma_)},
    };
    store::save(net_.to_model_record(std::move(meta)), path);
}

AutoencoderModel AutoencoderModel::load(const std::filesystem::path& path) {
    const store::ModelRecord rec = store::load(path);
    const std::string mu_s = rec.meta_or("norm_mu", "");
    const std::string sigma_s = rec.meta_or("norm_sigma", "");
    if (mu_s.empty() || sigma_s.empty()) {
        throw FormatError(path.string() + " is not an autoencoder checkpoint (missing stats)");
    }
    return AutoencoderModel(net::Network::from_model_record(rec), split_doubles(mu_s),
                            split_doubles(sigma_s));
}

AutoencoderModel make_untrained_autoencoder(const std::vector<store::ModelRecord>& split,
                                            const AeConfig& cfg, std::uint64_t seed) {
    std::vector<double> mu, sigma;
    norm_stats(split, mu, sigma);
    const std::size_t n_w = mu.size();
    store::Arch arch;
    const int span = static_cast<int>(n_w);
    arch.layers = {span, cfg.hidden_for(n_w), span};
    arch.activations = {"tanh", "identity"};
    net::Network network(arch, derive_seed(seed, kAeInitStream));
    return AutoencoderModel(std::move(network), std::move(mu), std::move(sigma));
}

AeTrainResult train_autoencoder(const std::vector<store::ModelRecord>& split,
                                const AeConfig& cfg, std::uint64_t seed) {
    if (split.size() < 10) {
        throw ConfigError("autoencoder training needs >= 10 models, got " +
                          std::to_string(split.size()));
    }
    AutoencoderModel init = make_untrained_autoencoder(split, cfg, seed);
    net::Dataset data;
    data.inputs.reserve(split.size());
    for (const auto& m : split) {
        data.inputs.push_back(init.normalize(store::flatten(m)));
        data.targets.push_back(data.inputs.back());
    }
    net::TrainOptions opt;
    opt.epochs = cfg.epochs;
    opt.lr = cfg.lr;
    opt.batch = cfg.batch;
    opt.loss = net::Loss::Mse;
    net::TrainResult r =
        net::train_sgd(init.network(), data, opt, derive_seed(seed, kAeTrainStream));
    AutoencoderModel trained(std::move(r.net), init.mu(), init.sigma());
    return AeTrainResult{std::move(trained), std::move(r.epoch_losses)};
}

std::vector<double> gradient_feature(const store::ModelRecord& m) {
    const net::Network network = net::Network::from_model_record(m);
    const std::vector<double> x(network.input_dim(), 0.0);
    const std::vector<double> target(network.output_dim(), 0.0);
    return network.backprop(x, target, net::Loss::Mse);
}

std::vector<double> weights_feature(const store::ModelRecord& m) {
    const store::WeightVector w = store::flatten(m);
    return std::vector<double>(w.begin(), w.end());
}

FeatureDataset build_dataset(const std::vector<store::ModelRecord>& benign,
                             const std::vector<store::ModelRecord>& attacked,
                             FeatureKind kind, const AutoencoderModel* ae) {
    if (kind == FeatureKind::Loss && ae == nullptr) {
        throw ConfigError("loss feature requires an autoencoder");
    }
    FeatureDataset ds;
    ds.kind = kind;
    if (benign.empty() && attacked.empty()) return ds;
    const store::Arch& arch = benign.empty() ? attacked.front().arch() : benign.front().arch();

    auto extract = [&](const store::ModelRecord& m, const std::string& label, std::size_t idx) {
        if (!(m.arch() == arch)) {
            throw ShapeError("dataset mixes architectures: " + m.arch().layers_string() + " vs " +
                             arch.layers_string());
        }
        FeatureRow row;
        row.model_id = m.meta_or("id", (label == "benign" ? "b" : "a") + std::to_string(idx));
        row.label = label;
        row.x_lsb =
            label == "benign" ? 0 : static_cast<int>(csv::parse_int(m.meta_or("x_lsb", "0")));
        switch (kind) {
            case FeatureKind::Loss: row.values = {ae->reconstruction_loss(m)}; break;
            case FeatureKind::Grads: row.values = gradient_feature(m); break;
            case FeatureKind::Weights: row.values = weights_feature(m); break;
        }
        ds.rows.push_back(std::move(row));
    };

    for (std::size_t i = 0; i < benign.size(); ++i) extract(benign[i], "benign", i);
    for (std::size_t i = 0; i < attacked.size(); ++i) extract(attacked[i], "malicious", i);
    return ds;
}

void save_dataset(const FeatureDataset& ds, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.rows.size() + 1);
    std::vector<std::string> header{"model_id", "label", "x_lsb"};
    for (std::size_t j = 0; j < ds.dim(); ++j) header.push_back("f" + std::to_string(j));
    rows.push_back(std::move(header));
    for (const FeatureRow& r : ds.rows) {
        std::vector<std::string> fields{r.model_id, r.label, std::to_string(r.x_lsb)};
        for (double v : r.values) fields.push_back(csv::format_double(v));
        rows.push_back(std::move(fields));
    }
    csv::write_rows(path, rows);
}

FeatureDataset load_dataset(const std::filesystem::path& path, FeatureKind kind) {
    const auto rows = csv::read_rows(path);
    if (rows.empty()) throw FormatError(path.string() + ": missing header row");
    const auto& header = rows.front();
    if (header.size() < 3 || header[0] != "model_id" || header[1] != "label" ||
        header[2] != "x_lsb") {
        throw FormatError(path.string() + ": bad dataset header");
    }
    const std::size_t dim = header.size() - 3;
    FeatureDataset ds;
    ds.kind = kind;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& fields = rows[i];
        if (fields.size() != header.size()) {
            throw FormatError(path.string() + ": row " + std::to_string(i) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(header.size()));
        }
        FeatureRow r;
        r.model_id = fields[0];
        r.label = fields[1];
        if (r.label != "benign" && r.label != "malicious") {
            throw FormatError(path.string() + ": bad label '" + r.label + "' in row " +
                              std::to_string(i));
        }
        r.x_lsb = static_cast<int>(csv::parse_int(fields[2]));
        r.values.reserve(dim);
        for (std::size_t j = 3; j < fields.size(); ++j) {
            r.values.push_back(csv::parse_double(fields[j]));
        }
        ds.rows.push_back(std::move(r));
    }
    return ds;
}

}  // namespace stegozoo::feat
