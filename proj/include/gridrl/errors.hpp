#pragma once

#include <stdexcept>
#include <string>

namespace gridrl {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reduced susceptance matrix of the slack component could not be factorized.
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidEpisodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API misuse: stepping a terminal observation, non-scalar loss, bad index.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ShapeError : std::logic_error {
  using std::logic_error::logic_error;
};

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gridrl
