#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.h"
#include "wdtcn/sisdr.h"

using namespace wdtcn;

namespace {

std::vector<double> scaled(std::vector<double> v, double c) {
  for (auto& x : v) x *= c;
  return v;
}

}  // namespace

TEST_CASE("sisdr hand case") {
  const SisdrResult r = sisdr(std::vector<double>{1, 1}, std::vector<double>{1, 0});
  CHECK(std::abs(r.value_db) < 1e-9);
  CHECK(r.projection_energy == 1.0);
  CHECK(r.residual_energy == 1.0);
  CHECK(r.target_energy == 1.0);
}

TEST_CASE("sisdr scale invariance is exact") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ref = oracle::random_vector(257, s);
    const auto est = oracle::random_vector(257, s + 1000);
    const double base = sisdr(est, ref).value_db;
    for (double c : {0.5, 2.0, -1.0}) CHECK(sisdr(scaled(est, c), ref).value_db == base);
    for (double c : {0.5, 3.0}) {
      CHECK(std::abs(sisdr(est, scaled(ref, c)).value_db - base) < 1e-9);
    }
  }
}

TEST_CASE("sisdr energies agree with the value") {
  const auto ref = oracle::random_vector(100, 1);
  const auto est = oracle::random_vector(100, 2);
  const SisdrResult r = sisdr(est, ref);
  const double e = r.estimate_energy * kSisdrEps;
  CHECK(std::abs(r.value_db - 10 * std::log10((r.projection_energy + e) /
                                               (r.residual_energy + e))) < 1e-9);
  CHECK(std::abs(r.projection_energy + r.residual_energy - r.estimate_energy) <
        1e-9 * r.estimate_energy);
}

TEST_CASE("sisdr caps and floors") {
  const auto ref = oracle::random_vector(64, 3);
  const double cap = 10 * std::log10((1 + kSisdrEps) / kSisdrEps);
  CHECK(std::abs(sisdr(ref, ref).value_db - cap) < 1e-6);
  CHECK(std::abs(sisdr(scaled(ref, -4.0), ref).value_db - cap) < 1e-6);
  const double orth = sisdr(std::vector<double>{0, 1}, std::vector<double>{1, 0}).value_db;
  CHECK(std::isfinite(orth));
  CHECK(orth < -100.0);
}

TEST_CASE("sisdr errors") {
  CHECK_THROWS_AS(sisdr(std::vector<double>{1, 2}, std::vector<double>{0, 0}), DomainError);
  CHECK_THROWS_AS(sisdr(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
                  DimensionError);
}

TEST_CASE("sisdr decreases with added noise") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ref = oracle::random_vector(400, s);
    const auto noise = oracle::random_vector(400, s + 500);
    double prev = std::numeric_limits<double>::infinity();
    for (double level : {0.01, 0.1, 1.0}) {
      std::vector<double> est = ref;
      for (std::size_t i = 0; i < est.size(); ++i) est[i] += level * noise[i];
      const double v = sisdr(est, ref).value_db;
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("sisdr loss gradient") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ref = oracle::random_vector(31, s);
    const auto res = oracle::gradcheck(
        [&](const std::vector<Var>& v) { return sisdr_loss(v[0], ref); },
        {oracle::random_tensor({1, 31}, s + 7)});
    CHECK(res.max_rel_error < 1e-4);
  }

  // Scale-invariance makes the gradient orthogonal to the estimate.
  const auto ref = oracle::random_vector(50, 4);
  Var est = parameter(Tensor::vector(oracle::random_vector(50, 5)));
  backward(sisdr_loss(est, ref));
  const Tensor g = est.grad();
  const double along = dot(g.data(), est.value().data());
  CHECK(std::abs(along) < 1e-9 * std::sqrt(dot(g.data(), g.data())) *
                              std::sqrt(dot(est.value().data(), est.value().data())));

  Var perfect = parameter(Tensor::vector(ref));
  Var loss = sisdr_loss(perfect, ref);
  CHECK(loss.value()[0] < -119.0);
  backward(loss);
  CHECK(perfect.grad().max_abs() < 1e-6);
}
