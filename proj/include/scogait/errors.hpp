#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scogait {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class EmptySilhouette : public Error { public: using Error::Error; };
class EmptySequence : public Error { public: using Error::Error; };
class ManifestConflict : public Error { public: using Error::Error; };
class SplitError : public Error { public: using Error::Error; };
class RatioError : public Error { public: using Error::Error; };
class SamplerError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class CheckpointError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// Raised when a loss turns non-finite; message carries the batch composition.
class TrainingDiverged : public Error { public: using Error::Error; };

// Collects every problem found while validating a config so they can be
// reported at once.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace scogait
