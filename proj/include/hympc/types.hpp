#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hympc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Index of a discrete state in the model's mode table.
struct ModeId
{
  std::size_t value = 0;
  auto operator<=>(const ModeId &) const = default;
};

/// Index of a discrete input value.
struct InputId
{
  std::size_t value = 0;
  auto operator<=>(const InputId &) const = default;
};

/// Thrown for malformed inputs: unknown ids, inconsistent dimensions.
class ModelError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Failure modes of a sequence-conditioned solve.
enum class SolveFailure { NoRoot, SingularSystem, OrderViolation };

inline const char * to_string(SolveFailure f)
{
  switch (f) {
    case SolveFailure::NoRoot: return "NoRoot";
    case SolveFailure::SingularSystem: return "SingularSystem";
    case SolveFailure::OrderViolation: return "OrderViolation";
  }
  return "unknown";
}

class SolveError : public std::runtime_error
{
public:
  SolveError(SolveFailure kind, const std::string & what)
  : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
  {}

  SolveFailure kind() const noexcept { return kind_; }

private:
  SolveFailure kind_;
};

}  // namespace hympc
