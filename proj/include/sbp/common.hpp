#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sbp {

using DocId = std::uint64_t;
using TokenId = std::uint32_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A referenced file or directory does not exist.
class MissingInputError : public Error {
public:
    explicit MissingInputError(std::string path)
        : Error("missing input: " + path), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// A configuration value failed validation.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error("config error in '" + field + "': " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

inline constexpr int kManifestSchemaVersion = 1;

}  // namespace sbp
