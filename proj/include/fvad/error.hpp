#pragma once

#include <stdexcept>
#include <string>

namespace fvad {

// Every failure the library reports is an fvad::Error; the subclass names
// the category so callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FVAD_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

FVAD_DEFINE_ERROR(InvalidInput);
FVAD_DEFINE_ERROR(InvalidConfig);
FVAD_DEFINE_ERROR(SampleRateMismatch);
FVAD_DEFINE_ERROR(ShapeError);
FVAD_DEFINE_ERROR(StateError);
FVAD_DEFINE_ERROR(ParseError);
FVAD_DEFINE_ERROR(IoError);
FVAD_DEFINE_ERROR(MissingStream);
FVAD_DEFINE_ERROR(FrameGridMismatch);
FVAD_DEFINE_ERROR(UndefinedMetric);
FVAD_DEFINE_ERROR(NumericalError);

#undef FVAD_DEFINE_ERROR

}  // namespace fvad
