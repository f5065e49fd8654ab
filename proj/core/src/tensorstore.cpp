#include "stegozoo/tensorstore.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace stegozoo::store {

using nlohmann::json;

std::size_t Arch::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l < layers.size(); ++l) {
        n += static_cast<std::size_t>(layers[l]) * static_cast<std::size_t>(layers[l - 1]);
        n += static_cast<std::size_t>(layers[l]);
    }
    return n;
}

std::string Arch::layers_string() const {
    std::string s;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i) s.push_back('-');
        s += std::to_string(layers[i]);
    }
    return s;
}

Arch Arch::parse(const std::string& s, const std::string& hidden_act,
                 const std::string& output_act) {
    Arch a;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '-')) {
        if (part.empty()) throw ConfigError("bad arch string '" + s + "'");
        for (char c : part) {
            if (c < '0' || c > '9') throw ConfigError("bad arch string '" + s + "'");
        }
        const long v = std::stol(part);
        if (v < 1 || v > 1'000'000) throw ConfigError("bad layer size in arch '" + s + "'");
        a.layers.push_back(static_cast<int>(v));
    }
    if (a.layers.size() < 2) throw ConfigError("arch '" + s + "' needs at least two layers");
    for (std::size_t l = 1; l < a.layers.size(); ++l) {
        a.activations.push_back(l + 1 == a.layers.size() ? output_act : hidden_act);
    }
    return a;
}

std::size_t Tensor::size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void validate_against_arch(const Arch& arch, const std::vector<Tensor>& tensors) {
    if (arch.layers.size() < 2) throw ShapeError("arch must have at least two layers");
    if (arch.activations.size() + 1 != arch.layers.size()) {
        throw ShapeError("arch has " + std::to_string(arch.activations.size()) +
                         " activations for " + std::to_string(arch.layers.size()) + " layers");
    }
    const std::size_t n_layers = arch.layers.size() - 1;
    if (tensors.size() != 2 * n_layers) {
        throw ShapeError("expected " + std::to_string(2 * n_layers) + " tensors (weight+bias per layer), got " +
                         std::to_string(tensors.size()));
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto out = static_cast<std::size_t>(arch.layers[l + 1]);
        const auto in = static_cast<std::size_t>(arch.layers[l]);
        const Tensor& w = tensors[2 * l];
        const Tensor& b = tensors[2 * l + 1];
        if (w.shape != std::vector<std::size_t>{out, in}) {
            throw ShapeError("tensor '" + w.name + "' shape mismatch for layer " + std::to_string(l));
        }
        if (b.shape != std::vector<std::size_t>{out}) {
            throw ShapeError("tensor '" + b.name + "' shape mismatch for layer " + std::to_string(l));
        }
        if (w.data.size() != w.size() || b.data.size() != b.size()) {
            throw ShapeError("tensor data size does not match its shape in layer " + std::to_string(l));
        }
    }
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) return false;
    return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

ModelRecord::ModelRecord(Arch arch, std::vector<Tensor> layer_tensors,
                         std::map<std::string, std::string> meta)
    : arch_(std::move(arch)), layers_(std::move(layer_tensors)), meta_(std::move(meta)) {
    validate_against_arch(arch_, layers_);
}

std::string ModelRecord::meta_or(const std::string& key, const std::string& fallback) const {
    auto it = meta_.find(key);
    return it == meta_.end() ? fallback : it->second;
}

bool ModelRecord::operator==(const ModelRecord& other) const {
    if (arch_ != other.arch_ || meta_ != other.meta_) return false;
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].name != other.layers_[i].name) return false;
        if (layers_[i].shape != other.layers_[i].shape) return false;
        if (!bitwise_equal(layers_[i].data, other.layers_[i].data)) return false;
    }
    return true;
}

WeightVector flatten(const ModelRecord& m) {
    WeightVector w;
    w.reserve(m.weight_count());
    for (const Tensor& t : m.layers()) {
        w.insert(w.end(), t.data.begin(), t.data.end());
    }
    return w;
}

ModelRecord unflatten(const ModelRecord& like, const WeightVector& w) {
    if (w.size() != like.weight_count()) {
        throw ShapeError("weight vector length " + std::to_string(w.size()) +
                         " does not match n_W=" + std::to_string(like.weight_count()));
    }
    std::vector<Tensor> tensors = like.layers();
    std::size_t pos = 0;
    for (Tensor& t : tensors) {
        std::copy(w.begin() + static_cast<std::ptrdiff_t>(pos),
                  w.begin() + static_cast<std::ptrdiff_t>(pos + t.size()), t.data.begin());
        pos += t.size();
    }
    return ModelRecord(like.arch(), std::move(tensors), like.meta());
}

BitMatrix to_bitmatrix(const WeightVector& w) {
    std::vector<std::uint32_t> rows;
    rows.reserve(w.size());
    for (float v : w) rows.push_back(std::bit_cast<std::uint32_t>(v));
    return BitMatrix(std::move(rows));
}

WeightVector from_bitmatrix(const BitMatrix& bm) {
    WeightVector w;
    w.reserve(bm.row_count());
    for (std::size_t i = 0; i < bm.row_count(); ++i) w.push_back(bm.row(i).value());
    return w;
}

namespace {

constexpr char kMagic[4] = {'M', 'Z', 'W', '1'};

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save(const ModelRecord& m, const std::filesystem::path& path) {
    json header;
    header["format"] = "MZW1";
    header["version"] = 1;
    header["arch"] = {{"layers", m.arch().layers}, {"activations", m.arch().activations}};
    json tensors = json::array();
    for (const Tensor& t : m.layers()) {
        tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "float32"}});
    }
    header["tensors"] = tensors;
    header["meta"] = m.meta();

    const std::string htext = header.dump();
    std::string blob;
    blob.append(kMagic, 4);
    put_u32le(blob, static_cast<std::uint32_t>(htext.size()));
    blob += htext;
    for (const Tensor& t : m.layers()) {
        for (float v : t.data) {
            put_u32le(blob, std::bit_cast<std::uint32_t>(v));
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw Error("short write to '" + path.string() + "'");
}

ModelRecord load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

    if (blob.size() < 8 || std::memcmp(blob.data(), kMagic, 4) != 0) {
        throw FormatError("'" + path.string() + "': bad magic, not an MZW1 file", 0);
    }
    const std::uint32_t hlen = get_u32le(p + 4);
    if (blob.size() < 8u + hlen) {
        throw FormatError("'" + path.string() + "': truncated header", blob.size());
    }

    json header;
    try {
        header = json::parse(blob.substr(8, hlen));
    } catch (const json::exception& e) {
        throw FormatError("'" + path.string() + "': bad header JSON: " + e.what(), 8);
    }

    Arch arch;
    std::map<std::string, std::string> meta;
    std::vector<Tensor> tensors;
    try {
        arch.layers = header.at("arch").at("layers").get<std::vector<int>>();
        arch.activations = header.at("arch").at("activations").get<std::vector<std::string>>();
        if (header.contains("meta")) {
            meta = header.at("meta").get<std::map<std::string, std::string>>();
        }
        for (const auto& jt : header.at("tensors")) {
            Tensor t;
            t.name = jt.at("name").get<std::string>();
            t.shape = jt.at("shape").get<std::vector<std::size_t>>();
            if (jt.at("dtype").get<std::string>() != "float32") {
                throw FormatError("'" + path.string() + "': unsupported dtype for tensor '" + t.name + "'", 8);
            }
            tensors.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw FormatError("'" + path.string() + "': malformed header: " + e.what(), 8);
    }

    std::size_t offset = 8u + hlen;
    for (Tensor& t : tensors) {
        const std::size_t n = t.size();
        const std::size_t bytes = n * 4;
        if (blob.size() < offset + bytes) {
            throw FormatError("'" + path.string() + "': truncated data for tensor '" + t.name + "'",
                              blob.size());
        }
        t.data.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            t.data[i] = std::bit_cast<float>(get_u32le(p + offset + 4 * i));
        }
        offset += bytes;
    }
    if (offset != blob.size()) {
        throw FormatError("'" + path.string() + "': trailing bytes after tensor data", offset);
    }

    try {
        return ModelRecord(std::move(arch), std::move(tensors), std::move(meta));
    } catch (const ShapeError& e) {
        throw FormatError("'" + path.string() + "': " + e.what(), 8);
    }
}

}  // namespace stegozoo::store
