#pragma once

#include <stdexcept>
#include <string>

namespace hlstm {

/// A file could not be opened, read, or written.
class FileError : public std::runtime_error {
public:
    FileError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A configuration document is malformed or violates a config invariant.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stored tensors do not match the shapes implied by a configuration.
class ShapeMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed content inside an otherwise readable file (PPM, JSON, checkpoint).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hlstm
