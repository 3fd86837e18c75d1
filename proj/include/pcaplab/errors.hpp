#pragma once

#include <stdexcept>
#include <string>

namespace pcaplab {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define PCAPLAB_DEFINE_ERROR(Name)                                         \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

PCAPLAB_DEFINE_ERROR(NonPositiveRadius);
PCAPLAB_DEFINE_ERROR(ProfileSingularAtOrigin);
PCAPLAB_DEFINE_ERROR(NoVolumeGrowth);
PCAPLAB_DEFINE_ERROR(InvalidProfile);
PCAPLAB_DEFINE_ERROR(InvalidDomain);
PCAPLAB_DEFINE_ERROR(ExponentOutOfRange);
PCAPLAB_DEFINE_ERROR(QuadratureFailure);
PCAPLAB_DEFINE_ERROR(RootNotBracketed);
PCAPLAB_DEFINE_ERROR(ExtrapolationDiverged);
PCAPLAB_DEFINE_ERROR(NonConvergence);
PCAPLAB_DEFINE_ERROR(GridTooCoarse);
PCAPLAB_DEFINE_ERROR(OutOfDomain);
PCAPLAB_DEFINE_ERROR(LevelOutOfRange);
PCAPLAB_DEFINE_ERROR(CriticalContact);
PCAPLAB_DEFINE_ERROR(BulkQuadratureUnderflow);
PCAPLAB_DEFINE_ERROR(NotConicalRegion);
PCAPLAB_DEFINE_ERROR(StepFailure);
PCAPLAB_DEFINE_ERROR(ConfigParse);

#undef PCAPLAB_DEFINE_ERROR

} // namespace pcaplab
