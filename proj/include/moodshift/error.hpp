#pragma once

#include <stdexcept>
#include <string>

namespace moodshift {

// Base of every error raised by the library. Subclasses name the failure
// category so callers (and the CLI) can branch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

#define MOODSHIFT_ERROR(Name, Kind)                                  \
    class Name : public Error {                                      \
    public:                                                          \
        using Error::Error;                                          \
        const char* kind() const noexcept override { return Kind; }  \
    };

MOODSHIFT_ERROR(DomainError, "domain")
MOODSHIFT_ERROR(ContractError, "contract")
MOODSHIFT_ERROR(DegenerateVarianceError, "degenerate_variance")
MOODSHIFT_ERROR(IllConditionedTimeError, "ill_conditioned_time")
MOODSHIFT_ERROR(FormatError, "format")
MOODSHIFT_ERROR(MissingEmbeddingError, "missing_embedding")
MOODSHIFT_ERROR(DimensionMismatchError, "dimension_mismatch")
MOODSHIFT_ERROR(MissingBinError, "missing_bin")
MOODSHIFT_ERROR(DivergenceError, "divergence")
MOODSHIFT_ERROR(ManifestError, "manifest")
MOODSHIFT_ERROR(ConfigError, "config")
MOODSHIFT_ERROR(IoError, "io")

#undef MOODSHIFT_ERROR

}  // namespace moodshift
