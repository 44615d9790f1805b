// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace olqr {

/// Failure categories. The CLI maps a subset of these onto process exit codes.
enum class ErrorCode {
  Config,
  Precondition,
  Symmetry,
  Shape,
  Mode,
  Grid,
  Covariance,
  Numerical,
  Excitation,
  Divergence,
  NonConvergence,
  Estimation,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Regression matrix lacks full column rank: the data was not rich enough.
class ExcitationError : public Error {
 public:
  ExcitationError(const std::string& what, int required, int achieved)
      : Error(ErrorCode::Excitation, what), required_(required), achieved_(achieved) {}
  int required() const noexcept { return required_; }
  int achieved() const noexcept { return achieved_; }
  int deficiency() const noexcept { return required_ - achieved_; }

 private:
  int required_;
  int achieved_;
};

/// State blew past the configured threshold (or went non-finite) during integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_valid_time, int episode = -1)
      : Error(ErrorCode::Divergence, what), last_valid_time_(last_valid_time), episode_(episode) {}
  double last_valid_time() const noexcept { return last_valid_time_; }
  /// -1 when raised outside an episode batch.
  int episode() const noexcept { return episode_; }

 private:
  double last_valid_time_;
  int episode_;
};

/// Process exit code for an error, per the CLI contract.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::Precondition:
      return 2;
    case ErrorCode::Excitation:
      return 3;
    case ErrorCode::Divergence:
      return 4;
    case ErrorCode::NonConvergence:
      return 5;
    default:
      return 1;
  }
}

}  // namespace olqr
