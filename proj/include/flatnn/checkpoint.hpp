#pragma once

// Versioned binary model checkpoints:
//   magic "FLATCKPT" | u32 version | metadata | named tensors | u32 CRC32.
// All integers and the raw 64-bit float payloads are little-endian. The
// trailing checksum covers every preceding byte; save -> load -> save is
// byte-identical.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "flatnn/errors.hpp"
#include "flatnn/nn.hpp"
#include "flatnn/tensor.hpp"

namespace flatnn {

struct CheckpointMeta {
    std::uint64_t train_seed = 0;
    std::uint32_t epochs = 0;
    std::string config_echo;
};

struct Checkpoint {
    static constexpr std::uint32_t current_version = 1;

    std::uint32_t version = current_version;
    bool is_feedback = false;
    MlpSpec main_spec;
    MlpSpec controller_spec;  // meaningful only when is_feedback
    std::size_t unroll = 1;
    ControllerInput mode = ControllerInput::predictions_only;
    std::vector<std::pair<std::string, Tensor>> tensors;
    CheckpointMeta meta;
};

namespace detail {

constexpr char ckpt_magic[8] = {'F', 'L', 'A', 'T', 'C', 'K', 'P', 'T'};

inline std::uint32_t crc32(const unsigned char* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

struct ByteWriter {
    std::vector<unsigned char> bytes;

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void raw(const void* p, std::size_t n) {
        const unsigned char* c = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }
};

struct ByteReader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size())
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  "checkpoint payload ends prematurely at offset " + std::to_string(pos));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

inline void write_spec(ByteWriter& w, const MlpSpec& spec) {
    w.u64(spec.input);
    w.u64(spec.hidden.size());
    for (std::size_t h : spec.hidden) w.u64(h);
    w.u64(spec.output);
}

inline MlpSpec read_spec(ByteReader& r) {
    MlpSpec spec;
    spec.input = r.u64();
    const std::uint64_t nh = r.u64();
    if (nh > 1024)
        throw CheckpointError(CheckpointError::Kind::shape_mismatch, "implausible hidden layer count");
    for (std::uint64_t i = 0; i < nh; ++i) spec.hidden.push_back(r.u64());
    spec.output = r.u64();
    return spec;
}

inline void append_params(Checkpoint& ckpt, const std::string& prefix, const ModelParams& params) {
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        ckpt.tensors.emplace_back(prefix + ".w" + std::to_string(l), params.weights[l].detached());
        ckpt.tensors.emplace_back(prefix + ".b" + std::to_string(l), params.biases[l].detached());
    }
}

inline std::vector<unsigned char> encode(const Checkpoint& ckpt) {
    ByteWriter w;
    w.raw(ckpt_magic, 8);
    w.u32(ckpt.version);
    w.bytes.push_back(ckpt.is_feedback ? 1 : 0);
    write_spec(w, ckpt.main_spec);
    if (ckpt.is_feedback) {
        write_spec(w, ckpt.controller_spec);
        w.u64(ckpt.unroll);
        w.bytes.push_back(ckpt.mode == ControllerInput::predictions_only ? 0 : 1);
    }
    w.u64(ckpt.meta.train_seed);
    w.u32(ckpt.meta.epochs);
    w.str(ckpt.meta.config_echo);
    w.u64(ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) {
        w.str(name);
        w.u64(tensor.rank());
        for (std::size_t d : tensor.shape) w.u64(d);
        for (double v : tensor.data) w.f64(v);
    }
    w.u32(crc32(w.bytes.data(), w.bytes.size()));
    return w.bytes;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::vector<unsigned char> bytes = detail::encode(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "short write to " + path);
}

inline void save_checkpoint(const FeedbackModel& model, const CheckpointMeta& meta,
                            const std::string& path) {
    Checkpoint ckpt;
    ckpt.is_feedback = true;
    ckpt.main_spec = model.main_spec;
    ckpt.controller_spec = model.controller_spec;
    ckpt.unroll = model.unroll;
    ckpt.mode = model.mode;
    ckpt.meta = meta;
    detail::append_params(ckpt, "f", model.main);
    detail::append_params(ckpt, "g", model.controller);
    write_checkpoint(ckpt, path);
}

inline void save_checkpoint(const ModelParams& model, const MlpSpec& spec, const CheckpointMeta& meta,
                            const std::string& path) {
    Checkpoint ckpt;
    ckpt.is_feedback = false;
    ckpt.main_spec = spec;
    ckpt.meta = meta;
    detail::append_params(ckpt, "f", model);
    write_checkpoint(ckpt, path);
}

/// Parses and verifies a checkpoint: magic and version are checked first
/// (so a bumped version reports version_mismatch), then the whole-file
/// checksum, then the payload.
inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 16 || std::memcmp(bytes.data(), detail::ckpt_magic, 8) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic, "bad magic in " + path);
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= std::uint32_t(bytes[8 + i]) << (8 * i);
    if (version != Checkpoint::current_version)
        throw CheckpointError(CheckpointError::Kind::version_mismatch,
                              "checkpoint version " + std::to_string(version) + " is not supported (want " +
                                  std::to_string(Checkpoint::current_version) + ")");

    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (detail::crc32(bytes.data(), bytes.size() - 4) != stored)
        throw CheckpointError(CheckpointError::Kind::checksum, "checksum failure in " + path);

    detail::ByteReader r{bytes};
    r.pos = 12;
    Checkpoint ckpt;
    ckpt.version = version;
    r.need(1);
    ckpt.is_feedback = bytes[r.pos++] != 0;
    ckpt.main_spec = detail::read_spec(r);
    if (ckpt.is_feedback) {
        ckpt.controller_spec = detail::read_spec(r);
        ckpt.unroll = r.u64();
        r.need(1);
        ckpt.mode = bytes[r.pos++] == 0 ? ControllerInput::predictions_only
                                        : ControllerInput::features_and_predictions;
    }
    ckpt.meta.train_seed = r.u64();
    ckpt.meta.epochs = r.u32();
    ckpt.meta.config_echo = r.str();
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint64_t rank = r.u64();
        if (rank > 8)
            throw CheckpointError(CheckpointError::Kind::shape_mismatch, "implausible tensor rank");
        Shape shape;
        std::size_t total = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            shape.push_back(r.u64());
            total *= shape.back();
        }
        std::vector<double> data(total);
        for (double& v : data) v = r.f64();
        ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

namespace detail {

inline ModelParams params_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix,
                                          const MlpSpec& spec) {
    spec.validate();
    const std::vector<std::size_t> widths = spec.widths();
    ModelParams params;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const Tensor* w = nullptr;
        const Tensor* b = nullptr;
        for (const auto& [name, tensor] : ckpt.tensors) {
            if (name == prefix + ".w" + std::to_string(l)) w = &tensor;
            if (name == prefix + ".b" + std::to_string(l)) b = &tensor;
        }
        if (!w || !b)
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  "missing tensor " + prefix + " layer " + std::to_string(l));
        if (w->shape != Shape{widths[l], widths[l + 1]} || b->shape != Shape{widths[l + 1]})
            throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                                  "tensor shape does not match the architecture spec at " + prefix +
                                      " layer " + std::to_string(l));
        params.weights.push_back(w->detached());
        params.biases.push_back(b->detached());
    }
    return params;
}

}  // namespace detail

inline FeedbackModel feedback_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.is_feedback)
        throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                              "checkpoint holds a plain classifier, not a feedback model");
    FeedbackModel m;
    m.main_spec = ckpt.main_spec;
    m.controller_spec = ckpt.controller_spec;
    m.unroll = ckpt.unroll;
    m.mode = ckpt.mode;
    m.main = detail::params_from_checkpoint(ckpt, "f", ckpt.main_spec);
    m.controller = detail::params_from_checkpoint(ckpt, "g", ckpt.controller_spec);
    m.validate();
    return m;
}

inline ModelParams mlp_from_checkpoint(const Checkpoint& ckpt) {
    return detail::params_from_checkpoint(ckpt, "f", ckpt.main_spec);
}

}  // namespace flatnn
