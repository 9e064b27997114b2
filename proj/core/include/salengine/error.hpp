#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace salengine {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not agree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A layer, graph or kernel parameter is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file is not in the expected format (magic, version, dtype, layout).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file is truncated or fails its checksum.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// A saliency or fixation map cannot be scored (all zeros, no fixations).
class DegenerateMapError : public Error {
 public:
  using Error::Error;
};

/// The caller combined arguments that do not belong together.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Weight store does not cover a graph. Carries every offending layer so the
/// caller can report all of them, not only the first.
class BindError : public Error {
 public:
  enum class Kind { kMissingWeight, kExtraWeight, kShapeMismatch };

  BindError(Kind kind, std::vector<std::string> missing,
            std::vector<std::string> extra,
            std::vector<std::string> mismatched);

  Kind kind() const noexcept { return kind_; }
  const std::vector<std::string>& missing() const noexcept { return missing_; }
  const std::vector<std::string>& extra() const noexcept { return extra_; }
  const std::vector<std::string>& mismatched() const noexcept {
    return mismatched_;
  }

 private:
  Kind kind_;
  std::vector<std::string> missing_;
  std::vector<std::string> extra_;
  std::vector<std::string> mismatched_;
};

const char* to_string(BindError::Kind kind) noexcept;

}  // namespace salengine
