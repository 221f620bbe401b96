#pragma once

#include <stdexcept>
#include <string>

namespace fedlap {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define FEDLAP_DEFINE_ERROR(Name)                 \
    struct Name final : Error {                   \
        using Error::Error;                       \
    }

// graph
FEDLAP_DEFINE_ERROR(DuplicateEdge);
FEDLAP_DEFINE_ERROR(SelfLoop);
FEDLAP_DEFINE_ERROR(NegativeWeight);
FEDLAP_DEFINE_ERROR(IndexOutOfRange);
FEDLAP_DEFINE_ERROR(MissingLabelSets);

// models
FEDLAP_DEFINE_ERROR(DimensionMismatch);
FEDLAP_DEFINE_ERROR(EmptyData);
FEDLAP_DEFINE_ERROR(BatchTooLarge);

// data
FEDLAP_DEFINE_ERROR(InvalidConfig);
FEDLAP_DEFINE_ERROR(TooFewSamples);
FEDLAP_DEFINE_ERROR(ParseError);
FEDLAP_DEFINE_ERROR(SchemaError);

// engine
FEDLAP_DEFINE_ERROR(InvalidSampleSize);
FEDLAP_DEFINE_ERROR(NonFiniteParameter);
FEDLAP_DEFINE_ERROR(InvalidAlpha);

// analysis
FEDLAP_DEFINE_ERROR(PreconditionViolated);
FEDLAP_DEFINE_ERROR(SingularSystem);

#undef FEDLAP_DEFINE_ERROR

}  // namespace fedlap
