#pragma once

#include <stdexcept>
#include <string>

namespace flatnn {

/// Tensor shape/dimension violations (reported with both shapes in the message).
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Scalar or argument range violations (epsilon out of (0,1), odd n, label out of range, ...).
class ValueError : public std::invalid_argument {
public:
    explicit ValueError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Closed-loop solve rejected because I - A*K is singular or near-singular.
/// Carries the gain ratio kappa/epsilon that produced the degeneracy.
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& msg, double gain_ratio)
        : std::runtime_error(msg), gain_ratio_(gain_ratio) {}
    double gain_ratio() const noexcept { return gain_ratio_; }

private:
    double gain_ratio_;
};

/// Analytic gain evaluated exactly at its pole (kappa == epsilon).
class PoleError : public std::domain_error {
public:
    explicit PoleError(const std::string& msg) : std::domain_error(msg) {}
};

/// Malformed input data (IDX/CSV loaders). Messages name the file and offset/row.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint parse/verify failures, with a distinct kind per failure mode.
class CheckpointError : public std::runtime_error {
public:
    enum class Kind { bad_magic, version_mismatch, checksum, shape_mismatch, io };

    CheckpointError(Kind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Config file parse errors; line() is the 1-based offending line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg), line_(0) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Training aborted (non-finite loss or gradient); message carries epoch/batch.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flatnn
