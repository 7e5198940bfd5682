#pragma once

#include <stdexcept>
#include <string>

namespace isco {

// Every recoverable failure in the library is one of these. The CLI maps
// InputError to exit code 2 and NumericError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

#define ISCO_DEFINE_ERROR(Name, Base) \
  class Name : public Base {          \
   public:                            \
    using Base::Base;                 \
  }

ISCO_DEFINE_ERROR(NonFiniteIntrinsics, InputError);
ISCO_DEFINE_ERROR(InvalidConfig, InputError);
ISCO_DEFINE_ERROR(EmptySilhouettes, InputError);
ISCO_DEFINE_ERROR(GridMismatch, InputError);
ISCO_DEFINE_ERROR(EmptyComposition, InputError);
ISCO_DEFINE_ERROR(EmptyPointSet, InputError);
ISCO_DEFINE_ERROR(ManifestParse, InputError);
ISCO_DEFINE_ERROR(ImageDecode, InputError);
ISCO_DEFINE_ERROR(DimensionMismatch, InputError);
ISCO_DEFINE_ERROR(NonRigidPose, InputError);
ISCO_DEFINE_ERROR(SchemaVersionMismatch, InputError);
ISCO_DEFINE_ERROR(ParameterOutOfBounds, InputError);
ISCO_DEFINE_ERROR(GenerationExhausted, Error);
ISCO_DEFINE_ERROR(DegenerateErrorField, Error);
ISCO_DEFINE_ERROR(NonFiniteGradient, NumericError);

#undef ISCO_DEFINE_ERROR

}  // namespace isco
