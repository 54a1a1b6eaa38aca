#include "cfx/errors.hpp"

namespace cfx {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "parse-error";
        case ErrorCode::EmptyInput: return "empty-input";
        case ErrorCode::InvalidMask: return "invalid-mask";
        case ErrorCode::TrainingDiverged: return "training-diverged";
        case ErrorCode::Checkpoint: return "checkpoint-error";
        case ErrorCode::HistoryTooSmall: return "history-too-small";
        case ErrorCode::ItemNotRanked: return "item-not-ranked";
        case ErrorCode::DegenerateNormalization: return "degenerate-normalization";
        case ErrorCode::SimulationFailed: return "simulation-failed";
        case ErrorCode::DegenerateTarget: return "degenerate-target";
        case ErrorCode::IncompatibleEmbedding: return "incompatible-embedding";
        case ErrorCode::TargetInHistory: return "target-in-history";
        case ErrorCode::EmptyCandidates: return "empty-candidates";
        case ErrorCode::InfluenceCg: return "influence-cg";
        case ErrorCode::OracleTooLarge: return "oracle-too-large";
        case ErrorCode::InsufficientSamples: return "insufficient-samples";
        case ErrorCode::InvalidId: return "invalid-id";
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::Io: return "io-error";
    }
    return "error";
}

}  // namespace cfx
