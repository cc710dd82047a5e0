#pragma once

// Desk-scale dataset supply: seeded synthetic two-moons generation, IDX and
// CSV ingestion, and shuffled batch iteration. Datasets are immutable after
// construction and always carry their valid bounds, which the attack
// projection relies on.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "flatnn/errors.hpp"
#include "flatnn/rng.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

struct Dataset {
    Tensor inputs;  // n x d, every value within [lo, hi]
    std::vector<int> labels;
    int classes = 0;
    double lo = 0.0;
    double hi = 1.0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.shape[1]; }

    void validate() const {
        if (labels.empty() || inputs.rank() != 2 || inputs.shape[0] != labels.size())
            throw ValueError("Dataset: inputs " + shape_str(inputs.shape) + " do not match " +
                             std::to_string(labels.size()) + " labels");
        if (classes < 2) throw ValueError("Dataset: need at least 2 classes");
        if (!(lo < hi)) throw ValueError("Dataset: bounds must satisfy lo < hi");
        for (int l : labels)
            if (l < 0 || l >= classes) throw ValueError("Dataset: label " + std::to_string(l) + " out of range");
        for (double v : inputs.data)
            if (v < lo || v > hi) throw ValueError("Dataset: input value outside declared bounds");
    }
};

/// Contiguous row slice [begin, begin + count).
inline Dataset slice(const Dataset& ds, std::size_t begin, std::size_t count) {
    if (begin + count > ds.size()) throw ValueError("slice: range exceeds dataset size");
    const std::size_t d = ds.dim();
    Dataset out;
    out.inputs = Tensor::zeros({count, d});
    out.labels.assign(ds.labels.begin() + begin, ds.labels.begin() + begin + count);
    for (std::size_t i = 0; i < count * d; ++i) out.inputs.data[i] = ds.inputs.data[begin * d + i];
    out.classes = ds.classes;
    out.lo = ds.lo;
    out.hi = ds.hi;
    return out;
}

namespace detail {

// Raw interleaved half-circles before noise and rescaling: class 0 on
// (cos t, sin t), class 1 on (1 - cos t, 1/2 - sin t), t in [0, pi).
// Points are returned in raw coordinates, x in [-1, 2], y in [-1/2, 1].
inline void two_moons_points(std::size_t n, double noise, std::uint64_t seed, std::vector<double>& xy,
                             std::vector<int>& labels) {
    Rng rng(derive_seed(seed, 0x300d5));
    xy.resize(2 * n);
    labels.resize(n);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < n / 2 ? 0 : 1;
        const double t = rng.uniform01() * pi;
        double px = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double py = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
        if (noise > 0.0) {
            px += noise * rng.normal();
            py += noise * rng.normal();
        }
        xy[2 * i] = px;
        xy[2 * i + 1] = py;
        labels[i] = cls;
    }
}

inline std::uint32_t read_u32_be(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("truncated IDX file " + path + " at offset " + std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

/// Two interleaved half-circles with Gaussian noise, affinely rescaled into
/// [0,1]^2 (fixed map, independent of the draws) and clipped to the bounds.
/// Classes are exactly balanced; n must be even.
inline Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n == 0 || n % 2 != 0) throw ValueError("two_moons: n must be even and positive, got " + std::to_string(n));
    if (noise < 0.0) throw ValueError("two_moons: noise must be >= 0");

    std::vector<double> xy;
    std::vector<int> labels;
    detail::two_moons_points(n, noise, seed, xy, labels);

    Dataset ds;
    ds.inputs = Tensor::zeros({n, 2});
    ds.labels = std::move(labels);
    ds.classes = 2;
    for (std::size_t i = 0; i < n; ++i) {
        double px = (xy[2 * i] + 1.0) / 3.0;        // raw x range [-1, 2]
        double py = (xy[2 * i + 1] + 0.5) / 1.5;    // raw y range [-1/2, 1]
        ds.inputs(i, 0) = std::min(1.0, std::max(0.0, px));
        ds.inputs(i, 1) = std::min(1.0, std::max(0.0, py));
    }
    return ds;
}

/// Loads an IDX image/label pair (the canonical MNIST layout: big-endian
/// u32 magic and dims, then raw bytes). Pixels are scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError("cannot open IDX image file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError("cannot open IDX label file " + labels_path);

    const std::uint32_t img_magic = detail::read_u32_be(img, images_path, 0);
    if (img_magic != 0x00000803u)
        throw DataError("bad magic in " + images_path + " at offset 0: expected 0x00000803");
    const std::uint32_t count = detail::read_u32_be(img, images_path, 4);
    const std::uint32_t rows = detail::read_u32_be(img, images_path, 8);
    const std::uint32_t cols = detail::read_u32_be(img, images_path, 12);

    const std::uint32_t lab_magic = detail::read_u32_be(lab, labels_path, 0);
    if (lab_magic != 0x00000801u)
        throw DataError("bad magic in " + labels_path + " at offset 0: expected 0x00000801");
    const std::uint32_t lab_count = detail::read_u32_be(lab, labels_path, 4);
    if (count != lab_count)
        throw DataError("count mismatch: " + images_path + " has " + std::to_string(count) + " images but " +
                        labels_path + " has " + std::to_string(lab_count) + " labels");
    if (count == 0) throw DataError("empty dataset in " + images_path);

    const std::size_t d = std::size_t(rows) * cols;
    std::vector<unsigned char> pixels(std::size_t(count) * d);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
        throw DataError("truncated IDX file " + images_path + " at offset " +
                        std::to_string(16 + img.gcount()));
    std::vector<unsigned char> raw_labels(count);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(count)))
        throw DataError("truncated IDX file " + labels_path + " at offset " +
                        std::to_string(8 + lab.gcount()));

    Dataset ds;
    ds.inputs = Tensor::zeros({count, d});
    for (std::size_t i = 0; i < pixels.size(); ++i) ds.inputs.data[i] = pixels[i] / 255.0;
    ds.labels.resize(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        ds.labels[i] = raw_labels[i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = max_label + 1;
    return ds;
}

/// Loads a rectangular numeric CSV with the label in the first (or last)
/// column. Features already inside [0, 1] are kept as-is; otherwise they are
/// min-max rescaled into [0, 1]. Bounds are always (0, 1).
inline Dataset load_csv(const std::string& path, bool label_column_first) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0, col = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            std::string cell = line.substr(start, comma - start);
            ++col;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            while (end && *end == ' ') ++end;
            if (cell.empty() || end == cell.c_str() || *end != '\0')
                throw DataError("non-numeric cell in " + path + " at row " + std::to_string(line_no) +
                                ", column " + std::to_string(col));
            row.push_back(v);
            start = comma + 1;
            if (comma == line.size()) break;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError("ragged row in " + path + " at row " + std::to_string(line_no) + ": expected " +
                            std::to_string(rows.front().size()) + " cells, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("empty dataset in " + path);
    if (rows.front().size() < 2) throw DataError("CSV " + path + " needs a label column and features");

    const std::size_t n = rows.size();
    const std::size_t d = rows.front().size() - 1;
    const std::size_t label_col = label_column_first ? 0 : d;

    Dataset ds;
    ds.inputs = Tensor::zeros({n, d});
    ds.labels.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lv = rows[i][label_col];
        if (lv < 0.0 || lv != std::floor(lv))
            throw DataError("label must be a non-negative integer in " + path + " at row " +
                            std::to_string(i + 1));
        ds.labels[i] = static_cast<int>(lv);
        max_label = std::max(max_label, ds.labels[i]);
        std::size_t k = 0;
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            if (j != label_col) ds.inputs(i, k++) = rows[i][j];
    }
    ds.classes = max_label + 1;

    double fmin = ds.inputs.data[0], fmax = ds.inputs.data[0];
    for (double v : ds.inputs.data) {
        fmin = std::min(fmin, v);
        fmax = std::max(fmax, v);
    }
    if (fmin < 0.0 || fmax > 1.0) {
        const double span = fmax > fmin ? fmax - fmin : 1.0;
        for (double& v : ds.inputs.data) v = (v - fmin) / span;
    }
    for (double& v : ds.inputs.data) v = std::min(1.0, std::max(0.0, v));
    return ds;
}

struct Batch {
    Tensor x;  // b x d
    std::vector<int> y;
};

/// Splits the dataset into batches; with shuffle, the order comes from a
/// seeded Fisher-Yates permutation (derive the seed per epoch from
/// derive_seed(seed, epoch)). The final partial batch is included.
inline std::vector<Batch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                  bool shuffle) {
    if (batch_size == 0) throw ValueError("batches: batch_size must be >= 1");
    const std::size_t n = ds.size(), d = ds.dim();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (shuffle) {
        Rng rng(derive_seed(seed, 0x5caff1e));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    }

    std::vector<Batch> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t b = std::min(batch_size, n - start);
        Batch batch;
        batch.x = Tensor::zeros({b, d});
        batch.y.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
            const std::size_t src = order[start + i];
            for (std::size_t j = 0; j < d; ++j) batch.x(i, j) = ds.inputs(src, j);
            batch.y[i] = ds.labels[src];
        }
        out.push_back(std::move(batch));
    }
    return out;
}

}  // namespace flatnn
