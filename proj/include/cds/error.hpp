#pragma once

#include <stdexcept>
#include <string>

namespace cds {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CDS_DEFINE_ERROR(Name)                      \
    class Name : public Error {                     \
    public:                                         \
        using Error::Error;                         \
    }

// market_data
CDS_DEFINE_ERROR(EmptyCurve);
CDS_DEFINE_ERROR(NonMonotoneTerms);
CDS_DEFINE_ERROR(OutOfRangeTerm);
CDS_DEFINE_ERROR(WrongCurveKind);
CDS_DEFINE_ERROR(ParseError);
CDS_DEFINE_ERROR(SchemaError);
CDS_DEFINE_ERROR(IOError);

// joint_default
CDS_DEFINE_ERROR(OutOfRange);
CDS_DEFINE_ERROR(AdmissibilityError);
CDS_DEFINE_ERROR(DimensionMismatch);
CDS_DEFINE_ERROR(DegenerateSeries);

// hazard
CDS_DEFINE_ERROR(InvalidParams);
CDS_DEFINE_ERROR(GridMismatch);
CDS_DEFINE_ERROR(NoRoot);
CDS_DEFINE_ERROR(CalibrationFailed);
CDS_DEFINE_ERROR(InvalidBounds);

// pricer
CDS_DEFINE_ERROR(RegressionSingular);
CDS_DEFINE_ERROR(NoBracket);
CDS_DEFINE_ERROR(InvalidContract);

#undef CDS_DEFINE_ERROR

}  // namespace cds
