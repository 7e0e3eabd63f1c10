#pragma once

#include <stdexcept>
#include <string>

namespace cyltomo {

/// Error classes; the numeric value doubles as the CLI exit code.
enum class errc : int {
    config = 2,
    io = 3,
    schema_mismatch = 4,
    size_mismatch = 5,
    degenerate_geometry = 6,
    numerical = 7,
    image = 8,
    empty_data = 9,
};

class error : public std::runtime_error {
  public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

  private:
    errc code_;
};

#define CYLTOMO_DEFINE_ERROR(name, code)                                       \
    class name : public error {                                                \
      public:                                                                  \
        explicit name(const std::string& what) : error(code, what) {}          \
    }

CYLTOMO_DEFINE_ERROR(ConfigError, errc::config);
CYLTOMO_DEFINE_ERROR(IoFailure, errc::io);
CYLTOMO_DEFINE_ERROR(SchemaMismatch, errc::schema_mismatch);
CYLTOMO_DEFINE_ERROR(SizeMismatch, errc::size_mismatch);

// geometry / posefit
CYLTOMO_DEFINE_ERROR(DegenerateRay, errc::degenerate_geometry);
CYLTOMO_DEFINE_ERROR(DegenerateAxis, errc::degenerate_geometry);
CYLTOMO_DEFINE_ERROR(IllPosed, errc::degenerate_geometry);
CYLTOMO_DEFINE_ERROR(FlatSignal, errc::numerical);

// projector / recon
CYLTOMO_DEFINE_ERROR(NonPositiveIntensity, errc::numerical);
CYLTOMO_DEFINE_ERROR(EmptyView, errc::empty_data);
CYLTOMO_DEFINE_ERROR(EmptyRoi, errc::empty_data);

// imgproc
CYLTOMO_DEFINE_ERROR(DegenerateHistogram, errc::image);
CYLTOMO_DEFINE_ERROR(EmptyResult, errc::image);
CYLTOMO_DEFINE_ERROR(DegenerateMask, errc::image);
CYLTOMO_DEFINE_ERROR(OutOfFrame, errc::image);

// mtf
CYLTOMO_DEFINE_ERROR(AllZero, errc::numerical);
CYLTOMO_DEFINE_ERROR(PeriodTooSmall, errc::config);

#undef CYLTOMO_DEFINE_ERROR

} // namespace cyltomo
