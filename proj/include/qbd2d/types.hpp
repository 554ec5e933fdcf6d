#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace qbd2d {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;       // column vector
using RowVector = Eigen::RowVectorXd; // row vector (measures, left eigenvectors)

// Quadrant regions, by which coordinates are strictly positive.
// Origin = (0,0), Face1 = {x1>0, x2=0}, Face2 = {x1=0, x2>0}, Interior = both positive.
enum class Region { Origin = 0, Face1 = 1, Face2 = 2, Interior = 3 };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Origin: return "empty";
    case Region::Face1: return "b1";
    case Region::Face2: return "b2";
    case Region::Interior: return "interior";
  }
  return "?";
}

// Lattice direction with positive integer components.
struct Direction {
  int c1 = 1;
  int c2 = 1;
};

enum class ErrorCode {
  ParseError,
  NotConverged,
  ZeroMatrix,
  OutsideRange,
  VerticalTangent,
  NoRealCrossing,
  NotTangent,
  NotInvertible,
  SpectralRadiusAtLeastOne,
  NonPositive,
  WindowTooSmall,
  ZeroProbability,
  DivergentAtArgument,
  BackgroundNotErgodic,
  Unstable,
  InvalidArgument,
  StepUnderflow,
  EmptyDomain,
  NotTangencyRegime,
  BoundaryGFNotConverged,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::OutsideRange: return "OutsideRange";
    case ErrorCode::VerticalTangent: return "VerticalTangent";
    case ErrorCode::NoRealCrossing: return "NoRealCrossing";
    case ErrorCode::NotTangent: return "NotTangent";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::SpectralRadiusAtLeastOne: return "SpectralRadiusAtLeastOne";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::ZeroProbability: return "ZeroProbability";
    case ErrorCode::DivergentAtArgument: return "DivergentAtArgument";
    case ErrorCode::BackgroundNotErgodic: return "BackgroundNotErgodic";
    case ErrorCode::Unstable: return "Unstable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::EmptyDomain: return "EmptyDomain";
    case ErrorCode::NotTangencyRegime: return "NotTangencyRegime";
    case ErrorCode::BoundaryGFNotConverged: return "BoundaryGFNotConverged";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace qbd2d
