#pragma once

#include <stdexcept>
#include <string>

namespace ddcnn {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/layer dimension disagreement.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid user-supplied configuration (hyperparameters, resolutions, rates).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or semantically invalid input data (manifests, images, labels).
class DataError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failures: missing files, unreadable/unwritable paths.
class IoError : public Error {
public:
    using Error::Error;
};

// Weight container structural problems: bad magic, bad version, truncation.
class FormatError : public Error {
public:
    using Error::Error;
};

// Weight container and model graph disagree on tensor names or shapes.
class MismatchError : public Error {
public:
    using Error::Error;
};

} // namespace ddcnn
