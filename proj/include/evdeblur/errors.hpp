#pragma once

#include <stdexcept>
#include <string>

namespace evdeblur {

// Base class for every error raised by the library. The CLI maps these to
// exit codes; library callers can catch the specific subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EVDEBLUR_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(std::string(#Name ": ") + what) {} \
  }

EVDEBLUR_DEFINE_ERROR(AngleNearPi);
EVDEBLUR_DEFINE_ERROR(OutOfDomain);
EVDEBLUR_DEFINE_ERROR(ShapeMismatch);
EVDEBLUR_DEFINE_ERROR(NonScalarOutput);
EVDEBLUR_DEFINE_ERROR(ZeroNorm);
EVDEBLUR_DEFINE_ERROR(ImageTooSmall);
EVDEBLUR_DEFINE_ERROR(ParseError);
EVDEBLUR_DEFINE_ERROR(ValidationError);
EVDEBLUR_DEFINE_ERROR(IoError);
EVDEBLUR_DEFINE_ERROR(VersionMismatch);
EVDEBLUR_DEFINE_ERROR(MissingGroundTruth);
EVDEBLUR_DEFINE_ERROR(ConfigError);

#undef EVDEBLUR_DEFINE_ERROR

}  // namespace evdeblur
