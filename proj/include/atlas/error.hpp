#pragma once

#include <stdexcept>
#include <string>

namespace atlas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ATLAS_DEFINE_ERROR(Name)                  \
    class Name : public Error {                   \
    public:                                       \
        using Error::Error;                       \
    }

ATLAS_DEFINE_ERROR(InvalidArgumentError);
ATLAS_DEFINE_ERROR(DimensionError);
ATLAS_DEFINE_ERROR(SizeMismatchError);
ATLAS_DEFINE_ERROR(InvalidPatternError);
ATLAS_DEFINE_ERROR(AlignmentError);
ATLAS_DEFINE_ERROR(EmptySeriesError);
ATLAS_DEFINE_ERROR(ParseError);
ATLAS_DEFINE_ERROR(MissingFrameError);
ATLAS_DEFINE_ERROR(NumericError);
ATLAS_DEFINE_ERROR(ConvergenceError);
ATLAS_DEFINE_ERROR(UnsupportedError);
ATLAS_DEFINE_ERROR(FormatVersionError);
ATLAS_DEFINE_ERROR(IoError);

#undef ATLAS_DEFINE_ERROR

}  // namespace atlas
