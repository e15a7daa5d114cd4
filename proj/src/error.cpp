#include "sbo/error.hpp"

namespace sbo {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidDomain: return "invalid-domain";
    case ErrorKind::NonManifold: return "non-manifold";
    case ErrorKind::DegenerateElement: return "degenerate-element";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::SpectralFailure: return "spectral-failure";
    case ErrorKind::InvalidField: return "invalid-field";
    case ErrorKind::SingularExponent: return "singular-exponent";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace sbo
