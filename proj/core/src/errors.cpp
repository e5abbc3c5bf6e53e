#include "gasgrid/errors.hpp"

namespace gasgrid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::duplicate_id: return "DuplicateId";
    case ErrorCode::dangling_endpoint: return "DanglingEndpoint";
    case ErrorCode::disconnected_graph: return "DisconnectedGraph";
    case ErrorCode::self_loop: return "SelfLoop";
    case ErrorCode::missing_flow: return "MissingFlow";
    case ErrorCode::missing_pressure: return "MissingPressure";
    case ErrorCode::nonpositive_pressure: return "NonpositivePressure";
    case ErrorCode::radicand_nonpositive: return "RadicandNonpositive";
    case ErrorCode::compressibility_out_of_range: return "CompressibilityOutOfRange";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::newton_diverged: return "NewtonDiverged";
    case ErrorCode::singular_jacobian_transpose: return "SingularJacobianTranspose";
    case ErrorCode::empty_field: return "EmptyField";
    case ErrorCode::missing_target: return "MissingTarget";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::unit_error: return "UnitError";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::qp_singular: return "QPSingular";
  }
  return "Unknown";
}

}  // namespace gasgrid
