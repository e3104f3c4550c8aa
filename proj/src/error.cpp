#include "rebalance/error.hpp"

namespace rebalance {

namespace {

std::string decorate(const std::string& what, std::optional<std::size_t> record,
                     std::optional<std::size_t> byte_offset) {
    std::string out = what;
    if (record) out += " (record " + std::to_string(*record) + ")";
    if (byte_offset) out += " (byte offset " + std::to_string(*byte_offset) + ")";
    return out;
}

}  // namespace

FormatError::FormatError(const std::string& what, std::optional<std::size_t> record,
                         std::optional<std::size_t> byte_offset)
    : Error(decorate(what, record, byte_offset)), record_(record), byte_offset_(byte_offset) {}

NoDangerSamplesError::NoDangerSamplesError(int label)
    : PreconditionError("borderline-smote: class " + std::to_string(label) +
                        " has no DANGER samples; fall back to smote"),
      label_(label) {}

}  // namespace rebalance
