#pragma once

#include <stdexcept>
#include <string>

namespace dvq {

struct InvalidParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateBoneError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotReadyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerationFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dvq
