#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rebalance {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input violates an on-disk format. Carries the offending record index and
/// byte offset when known.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::optional<std::size_t> record = std::nullopt,
                std::optional<std::size_t> byte_offset = std::nullopt);

    std::optional<std::size_t> record() const { return record_; }
    std::optional<std::size_t> byte_offset() const { return byte_offset_; }

private:
    std::optional<std::size_t> record_;
    std::optional<std::size_t> byte_offset_;
};

/// An operation's precondition does not hold (bad argument, too few samples,
/// dimension mismatch, non-finite gradient, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Borderline-SMOTE found no DANGER samples in a class. Callers may fall back
/// to plain SMOTE.
class NoDangerSamplesError : public PreconditionError {
public:
    explicit NoDangerSamplesError(int label);
    int label() const { return label_; }

private:
    int label_;
};

}  // namespace rebalance
