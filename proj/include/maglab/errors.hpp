#pragma once

#include <stdexcept>
#include <string>

namespace maglab {

// Every failure carries a stable machine-readable code; the CLI writes it to error.json.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error("invalid_argument", w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain_error", w) {}
};
struct NumericalDegeneracy : Error {
  explicit NumericalDegeneracy(const std::string& w) : Error("numerical_degeneracy", w) {}
};
struct NotHyperbolic : Error {
  explicit NotHyperbolic(const std::string& w) : Error("not_hyperbolic", w) {}
};
struct DegenerateOrbit : Error {
  explicit DegenerateOrbit(const std::string& w) : Error("degenerate_orbit", w) {}
};
struct NotClosed : Error {
  explicit NotClosed(const std::string& w) : Error("not_closed", w) {}
};
struct KindMismatch : Error {
  explicit KindMismatch(const std::string& w) : Error("kind_mismatch", w) {}
};
struct StructureViolation : Error {
  explicit StructureViolation(const std::string& w) : Error("structure_violation", w) {}
};
struct ResonanceError : Error {
  explicit ResonanceError(const std::string& w) : Error("resonance", w) {}
};
struct InsufficientModes : Error {
  explicit InsufficientModes(const std::string& w) : Error("insufficient_modes", w) {}
};
struct ConvergenceFailure : Error {
  explicit ConvergenceFailure(const std::string& w) : Error("convergence_failure", w) {}
};

struct IncompleteEnumeration : Error {
  IncompleteEnumeration(const std::string& w, double radius)
      : Error("incomplete_enumeration", w), achieved_radius(radius) {}
  double achieved_radius;
};

struct PreconditionError : Error {
  PreconditionError(const std::string& w, double v) : Error("precondition", w), violation(v) {}
  double violation;
};

}  // namespace maglab
