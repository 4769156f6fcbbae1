#pragma once

#include <stdexcept>
#include <string>

namespace cdm {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define CDM_DEFINE_ERROR(Name)                                                \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& message) : Error(#Name, message) {}  \
    };

CDM_DEFINE_ERROR(ParseError)
CDM_DEFINE_ERROR(UnknownNode)
CDM_DEFINE_ERROR(OverlappingSets)
CDM_DEFINE_ERROR(InvalidQuery)
CDM_DEFINE_ERROR(StateSpaceTooLarge)
CDM_DEFINE_ERROR(ZeroConditioningEvent)
CDM_DEFINE_ERROR(UnboundVariable)
CDM_DEFINE_ERROR(NoDataNode)
CDM_DEFINE_ERROR(SNotInGraph)
CDM_DEFINE_ERROR(RowMatchesNoStratum)
CDM_DEFINE_ERROR(NonfiniteLogLik)
CDM_DEFINE_ERROR(NonBinaryVariable)
CDM_DEFINE_ERROR(SharedSelectionUnsupported)
CDM_DEFINE_ERROR(UnsupportedDesign)
CDM_DEFINE_ERROR(NoInteriorPoint)
CDM_DEFINE_ERROR(WrongModelFamily)
CDM_DEFINE_ERROR(DataMismatch)
CDM_DEFINE_ERROR(ModelError)
CDM_DEFINE_ERROR(NotIdentifiable)

#undef CDM_DEFINE_ERROR

}  // namespace cdm
