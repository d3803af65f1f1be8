#pragma once

#include <span>
#include <stdexcept>

#include "wdtcn/autodiff.h"

namespace wdtcn {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Guard added to both energies, relative to the estimate energy. Caps a
// perfect estimate at 10*log10((1 + eps) / eps) ~ 120 dB and floors an
// orthogonal one near -120 dB, without breaking scale invariance.
inline constexpr double kSisdrEps = 1e-12;

struct SisdrResult {
  double value_db = 0.0;
  double target_energy = 0.0;      // ||ref||^2
  double projection_energy = 0.0;  // ||<est,ref> ref / ||ref||^2||^2
  double residual_energy = 0.0;    // ||est - proj||^2
  double estimate_energy = 0.0;    // ||est||^2
};

// Scale-invariant SDR of `est` against `ref` (no mean removal).
// Throws DimensionError on length mismatch, DomainError on a zero reference.
SisdrResult sisdr(std::span<const double> est, std::span<const double> ref);

// Negative SI-SDR in dB as a scalar graph node; gradient flows into `est`.
// `est` may be rank 1 or a single-row rank-2 tensor.
Var sisdr_loss(const Var& est, std::span<const double> ref);

}  // namespace wdtcn
