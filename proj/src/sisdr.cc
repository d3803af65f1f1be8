#include "wdtcn/sisdr.h"

#include <cfloat>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace wdtcn {

namespace {

struct Energies {
  double ref_energy;
  double est_energy;
  double cross;  // <est, ref>
  double proj_energy;
  double resid_energy;
};

Energies energies(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) {
    throw DimensionError("sisdr: estimate has " + std::to_string(est.size()) +
                         " samples, reference has " +
                         std::to_string(ref.size()));
  }
  Energies e{};
  e.ref_energy = dot(ref, ref);
  if (e.ref_energy == 0.0) {
    throw DomainError("sisdr: reference signal is identically zero");
  }
  e.est_energy = dot(est, est);
  e.cross = dot(est, ref);
  const double alpha = e.cross / e.ref_energy;
  double proj = 0.0;
  double resid = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double p = alpha * ref[i];
    const double r = est[i] - p;
    proj += p * p;
    resid += r * r;
  }
  e.proj_energy = proj;
  e.resid_energy = resid;
  return e;
}

double guard(const Energies& e) { return kSisdrEps * e.est_energy + DBL_MIN; }

}  // namespace

SisdrResult sisdr(std::span<const double> est, std::span<const double> ref) {
  const Energies e = energies(est, ref);
  const double g = guard(e);
  SisdrResult r;
  r.target_energy = e.ref_energy;
  r.projection_energy = e.proj_energy;
  r.residual_energy = e.resid_energy;
  r.estimate_energy = e.est_energy;
  r.value_db = 10.0 * std::log10((e.proj_energy + g) / (e.resid_energy + g));
  return r;
}

Var sisdr_loss(const Var& est, std::span<const double> ref) {
  const Tensor& ev = est.value();
  if (ev.rank() == 2 && ev.shape()[0] != 1) {
    throw DimensionError("sisdr_loss: estimate must be a single row, got " +
                         shape_string(ev.shape()));
  }
  const Energies e = energies(ev.data(), ref);
  const double g = guard(e);
  const double num = e.proj_energy + g;
  const double den = e.resid_energy + g;
  const double loss = -10.0 * std::log10(num / den);
  check_finite(Tensor::scalar(loss), "sisdr_loss");

  std::vector<double> reference(ref.begin(), ref.end());
  return make_node(
      Tensor::scalar(loss), {est.node()},
      [reference = std::move(reference), e, num, den](Node& self) {
        const Tensor& x = self.parents[0]->value;
        Tensor& dx = self.parents[0]->grad_buffer();
        // d num = 2 proj + 2 eps est ; d den = 2 (est - proj) + 2 eps est.
        const double alpha = e.cross / e.ref_energy;
        const double k = -10.0 / std::numbers::ln10 * self.grad[0];
        for (std::size_t i = 0; i < reference.size(); ++i) {
          const double p = alpha * reference[i];
          const double ge = kSisdrEps * x[i];
          const double dnum = 2.0 * (p + ge);
          const double dden = 2.0 * (x[i] - p + ge);
          dx[i] += k * (dnum / num - dden / den);
        }
      });
}

}  // namespace wdtcn
