#pragma once

#include <stdexcept>
#include <string>

namespace alchemy {

// Every failure the library reports derives from Error so callers can catch
// one type at the boundary (CLI, HTTP service) and still switch on the kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ALCHEMY_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

ALCHEMY_DEFINE_ERROR(ParseError);
ALCHEMY_DEFINE_ERROR(ValidationError);
ALCHEMY_DEFINE_ERROR(UnknownElement);
ALCHEMY_DEFINE_ERROR(SessionClosed);
ALCHEMY_DEFINE_ERROR(UnparseableReply);
ALCHEMY_DEFINE_ERROR(TransportError);
ALCHEMY_DEFINE_ERROR(SingularDesign);
ALCHEMY_DEFINE_ERROR(InsufficientTemperatureVariation);
ALCHEMY_DEFINE_ERROR(DegenerateSample);
ALCHEMY_DEFINE_ERROR(EmptyInput);
ALCHEMY_DEFINE_ERROR(NonFiniteLoss);
ALCHEMY_DEFINE_ERROR(DimensionMismatch);
ALCHEMY_DEFINE_ERROR(DegenerateTarget);
ALCHEMY_DEFINE_ERROR(UnknownLabel);
ALCHEMY_DEFINE_ERROR(GraphMismatch);
ALCHEMY_DEFINE_ERROR(LogCorrupt);

#undef ALCHEMY_DEFINE_ERROR

}  // namespace alchemy
