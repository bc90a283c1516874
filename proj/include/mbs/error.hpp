#pragma once

#include <stdexcept>
#include <string>

namespace mbs {

enum class ErrorCode {
    InvalidArgument,
    OutOfDomain,
    SingularNormalizer,
    SingularNeighborhood,
    SingularDesign,
    FactorizationFailure,
    RankDeficient,
    Io,
    SchemaMismatch,
    NonFinite,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a message or exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace mbs
