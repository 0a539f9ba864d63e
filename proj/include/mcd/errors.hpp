#pragma once

#include <stdexcept>
#include <string>

namespace mcd {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A chain (or chain file) violates a structural invariant.
struct InvalidChain : Error {
    using Error::Error;
};

// Irreducibility / single-communicating-class requirement failed.
struct NonErgodic : Error {
    using Error::Error;
};

// The stationary linear solve degenerated (malformed chain).
struct SingularSystem : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct EmptySet : Error {
    using Error::Error;
};

// Restriction or termination broke the single communicating class.
struct ErgodicityLost : Error {
    using Error::Error;
};

// A subchain receives no inflow from the external weights it was given.
struct ZeroInflow : Error {
    using Error::Error;
};

// Single-input termination requested but several boundary states take inflow.
struct NotSingleInput : Error {
    using Error::Error;
};

// Signed cover condition violated: some state is not covered net-once.
struct CoverageViolation : Error {
    using Error::Error;
};

// No ratio path connects the requested pair of states.
struct MissingBeta : Error {
    using Error::Error;
};

// The plan's overlap/bridge graph does not connect all subchains.
struct DisconnectedPlan : Error {
    using Error::Error;
};

struct NoConvergence : Error {
    using Error::Error;
};

struct InvalidSpec : Error {
    using Error::Error;
};

struct InvalidParams : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

}  // namespace mcd
