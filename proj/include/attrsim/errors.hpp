#pragma once

#include <stdexcept>

namespace attrsim {

// One exception type per contract family, so callers and tests can tell
// API misuse apart from bad data or malformed files.

// Dimension or extent mismatch between tensors.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition other than a shape mismatch.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Identifier outside its valid range (attribute id, image id, row index).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset or index content is inconsistent (duplicate ids, missing labels).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A file on disk does not parse as the expected format.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A configuration value is unknown, unparsable, or out of range.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A stored artifact does not match the dimensions this model was built with.
struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace attrsim
