#pragma once

#include <stdexcept>
#include <string>

namespace cotc {

// Root of the library's exception hierarchy. Every failure the toolkit can
// raise is a subclass, so callers can catch coarse (Error) or fine (one type).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ── trace_model ──────────────────────────────────────────────
struct SchemaError : Error { using Error::Error; };          // missing field, wrong type
struct AlignmentError : Error { using Error::Error; };       // tokens do not concatenate to raw_completion
struct ValueError : Error { using Error::Error; };           // negative entropy, malformed logprobs, bad kappa

// ── segmenter ────────────────────────────────────────────────
struct MissingThinkTags : Error { using Error::Error; };
struct MultipleThinkBlocks : Error { using Error::Error; };
struct TokenBoundaryError : Error { using Error::Error; };   // token carries content from two steps

// ── entropy_engine ───────────────────────────────────────────
struct RangeError : Error { using Error::Error; };
struct MissingEntropySource : Error { using Error::Error; }; // think token with neither entropy_bits nor top_logprobs

// ── pruner ───────────────────────────────────────────────────
struct PlanMismatch : Error { using Error::Error; };

// ── backend_gateway ──────────────────────────────────────────
struct BackendError : Error { using Error::Error; };
struct TransportError : BackendError { using BackendError::BackendError; };
struct AuthError : BackendError { using BackendError::BackendError; };
struct ProtocolError : BackendError { using BackendError::BackendError; };
struct NonTermination : Error { using Error::Error; };
struct ExplosionError : Error { using Error::Error; };       // exact enumeration bound exceeded

// ── experiment_runner ────────────────────────────────────────
struct CheckpointError : Error { using Error::Error; };
struct StructureError : Error { using Error::Error; };       // synthetic sequence does not match step layout

} // namespace cotc
