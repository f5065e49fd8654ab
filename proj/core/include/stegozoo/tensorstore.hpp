#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stegozoo/bitview.hpp"
#include "stegozoo/errors.hpp"

namespace stegozoo::store {

// Dense feedforward architecture: layer sizes L0..Lk plus one activation
// name per non-input layer.
struct Arch {
    std::vector<int> layers;
    std::vector<std::string> activations;

    // Number of parameters n_W: per layer, out*in weights plus out biases.
    std::size_t param_count() const;

    // "2-8-8-2"
    std::string layers_string() const;
    // Parses "2-8-8-2"; activations filled with `hidden_act` for hidden
    // layers and `output_act` for the last layer.
    static Arch parse(const std::string& s, const std::string& hidden_act = "tanh",
                      const std::string& output_act = "softmax");

    bool operator==(const Arch&) const = default;
};

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;  // row-major

    std::size_t size() const;
};

// A model as carried on disk and through the attack: an architecture, the
// ordered layer tensors (layer0.weight, layer0.bias, layer1.weight, ...)
// and free-form string metadata. Tensors are validated against the arch at
// construction; all copies are bit-exact (no arithmetic ever touches the
// stored floats).
class ModelRecord {
public:
    ModelRecord(Arch arch, std::vector<Tensor> layer_tensors,
                std::map<std::string, std::string> meta = {});

    const Arch& arch() const { return arch_; }
    const std::vector<Tensor>& layers() const { return layers_; }
    const std::map<std::string, std::string>& meta() const { return meta_; }

    void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
    std::string meta_or(const std::string& key, const std::string& fallback) const;

    std::size_t weight_count() const { return arch_.param_count(); }

    // Bitwise equality of all tensors (NaN patterns included) plus arch and meta.
    bool operator==(const ModelRecord& other) const;

private:
    Arch arch_;
    std::vector<Tensor> layers_;
    std::map<std::string, std::string> meta_;
};

// The flattened weight vector W: layers in declared order, weight tensor
// before bias, row-major within a tensor.
using WeightVector = std::vector<float>;

WeightVector flatten(const ModelRecord& m);

// Rebuilds a model with `like`'s shapes and meta and `w` as its parameters.
ModelRecord unflatten(const ModelRecord& like, const WeightVector& w);

// n_W x 32 binary expansion of a weight vector. Rows are float32 words; the
// 32 columns are the abstract bit positions b32..b1 of each word.
class BitMatrix {
public:
    static constexpr int kCols = 32;

    explicit BitMatrix(std::vector<std::uint32_t> rows) : rows_(std::move(rows)) {}

    std::size_t row_count() const { return rows_.size(); }
    bits::Float32Word row(std::size_t i) const { return bits::Float32Word(rows_[i]); }
    void set_row(std::size_t i, bits::Float32Word w) { rows_[i] = w.raw(); }

    // b(column) of row i, column indexed one-based in [1,32], b1 least significant.
    int bit(std::size_t i, int b) const { return row(i).bit(b); }

private:
    std::vector<std::uint32_t> rows_;
};

BitMatrix to_bitmatrix(const WeightVector& w);
WeightVector from_bitmatrix(const BitMatrix& bm);

// MZW1 container: magic "MZW1", u32 little-endian header length, UTF-8 JSON
// header (arch, tensor names/shapes/dtypes, meta), then raw little-endian
// float32 tensor data in header order. Bit-exact round trip is part of the
// format contract.
void save(const ModelRecord& m, const std::filesystem::path& path);
ModelRecord load(const std::filesystem::path& path);

}  // namespace stegozoo::store
