#include <catch2/catch_amalgamated.hpp>

#include "forcerec/scenarios.hpp"
#include "support/oracles.hpp"

using namespace forcerec;

TEST_CASE("adversarial construction") {
  SECTION("dyadic source and derived sampling vector") {
    const AdversarialInstance inst = build_adversarial(3, {}, 1.0, 8);
    for (Eigen::Index k = 0; k < inst.dim; ++k) {
      CHECK_THAT(std::abs(inst.w(k)),
                 Catch::Matchers::WithinRel(std::pow(2.0, -(k + 1.0)), 1e-15));
      const double expected =
          (1.0 - inst.lambdas[static_cast<std::size_t>(k)]) *
          std::pow(2.0, -(k + 1.0));
      CHECK_THAT(std::abs(inst.g(k)), Catch::Matchers::WithinRel(expected, 1e-15));
      CHECK(std::abs(inst.g(k)) > 0.0);
    }
    for (std::size_t i = 0; i < inst.lambdas.size(); ++i) {
      CHECK(inst.lambdas[i] > 0.0);
      CHECK(inst.lambdas[i] < 1.0);
      for (std::size_t j = i + 1; j < inst.lambdas.size(); ++j)
        CHECK(inst.lambdas[i] != inst.lambdas[j]);
    }
  }
  SECTION("N = 1 degenerates to a zero initial state") {
    const AdversarialInstance inst = build_adversarial(1, {}, 2.0, 4);
    CHECK(inst.x0.norm() < 1e-14);
    const auto states = iterate(inst.system(), 2);
    CHECK(std::abs(inner(states[0], inst.g)) < 1e-14);
  }
  SECTION("three blind rows at the quoted parameters") {
    const AdversarialInstance inst = build_adversarial(3, {0.2, 0.5, 0.8}, 1.0, 8);
    const auto states = iterate(inst.system(), 5);
    for (int n = 0; n < 3; ++n)
      CHECK(std::abs(inner(states[static_cast<std::size_t>(n)], inst.g)) < 1e-12);
    CHECK(std::abs(inner(states[3], inst.g)) > 1e-6);
  }
  SECTION("the nulling coefficients are linear in c") {
    const AdversarialInstance one = build_adversarial(4, {}, 1.0, 8);
    const AdversarialInstance two = build_adversarial(4, {}, 2.0, 8);
    CHECK((two.x0 - 2.0 * one.x0).norm() <= 1e-10 * one.x0.norm());
  }
  SECTION("parameter validation") {
    CHECK_THROWS_AS(build_adversarial(2, {}, 0.0, 5), InvalidArgument);
    CHECK_THROWS_AS(build_adversarial(2, {0.5, 0.5}, 1.0, 5), InvalidArgument);
    CHECK_THROWS_AS(build_adversarial(2, {0.5, 1.5}, 1.0, 5), InvalidArgument);
    CHECK_THROWS_AS(build_adversarial(3, {}, 1.0, 3), InvalidArgument);
    CHECK_THROWS_AS(build_adversarial(2, {0.5, 0.5 + 1e-15}, 1.0, 5),
                    NumericalError);
  }
}

TEST_CASE("impossibility verification") {
  SECTION("N = 2 at c = 2") {
    const AdversarialInstance inst = build_adversarial(2, {0.3, 0.6}, 2.0, 5);
    const ImpossibilityReport rep = verify_impossibility(inst);
    CHECK(rep.blind_rows_vanish);
    CHECK(rep.indistinguishable_from_zero);
    CHECK(rep.recovered_beyond_horizon);
    CHECK(rep.all_pass);
    CHECK(rep.horizon_used > inst.n_blind);
  }
  SECTION("N = 5 in a larger ambient space") {
    const AdversarialInstance inst = build_adversarial(5, {}, 1.0, 16);
    const ImpossibilityReport rep = verify_impossibility(inst);
    CHECK(rep.all_pass);
    CHECK(rep.first_visible_sample > 1e-6);
  }
  SECTION("the blind-window least-squares system is rank deficient along (x0, c w)") {
    const AdversarialInstance inst = build_adversarial(3, {}, 1.0, 8);
    const auto states = iterate(inst.system(), inst.n_blind);
    const DataMatrix blind = sample(states, inst.sampling());
    const oracles::StackedLsq lsq =
        oracles::stacked_lsq(blind, inst.a, inst.sampling(), inst.source_space);
    CHECK(lsq.min_singular_value < 1e-8);
    // the constructed (x0, c) direction maps to (numerically) zero
    HVector direction(inst.dim + 1);
    direction.head(inst.dim) = inst.x0;
    direction(inst.dim) = inst.c * inst.w.norm();  // coords of c*w in the W basis
    const double image = (lsq.matrix * direction).norm();
    CHECK(image <= 1e-8 * std::max(1.0, lsq.matrix.norm() * direction.norm()));
  }
}

TEST_CASE("unstable recovery instance") {
  SECTION("exact recovery at dimension 2") {
    const UnstableInstance inst = build_unstable(2);
    Rng rng(601);
    const HVector w = rng.vector(2), x0 = rng.vector(2);
    DiscreteSystem sys(inst.a, Subspace::full(2), w, x0);
    const DataMatrix d = sample(iterate(sys, 2), inst.sampling);
    CHECK((inst.recovery(d) - w).norm() < 1e-12 * w.norm());
  }
  SECTION("bessel bound is 1, attained by the first basis vector") {
    const UnstableInstance inst = build_unstable(6);
    CHECK_THAT(bessel_bound(inst.sampling), Catch::Matchers::WithinAbs(1.0, 1e-13));
  }
  SECTION("the full-space lower frame bound decays like 1/d^2") {
    for (Eigen::Index d : {4, 8, 16}) {
      const UnstableInstance inst = build_unstable(d);
      const FrameBounds b = frame_bounds_on(inst.sampling, Subspace::full(d));
      CHECK_THAT(b.lower, Catch::Matchers::WithinRel(
                              1.0 / static_cast<double>(d * d), 1e-12));
    }
  }
  SECTION("exactness persists across dimensions") {
    for (Eigen::Index d : {4, 16, 64}) {
      const UnstableInstance inst = build_unstable(d);
      Rng rng(602 + static_cast<std::uint64_t>(d));
      const HVector w = rng.vector(d), x0 = rng.vector(d);
      DiscreteSystem sys(inst.a, Subspace::full(d), w, x0);
      const DataMatrix data = sample(iterate(sys, 2), inst.sampling);
      CHECK((inst.recovery(data) - w).norm() < 1e-10 * w.norm());
    }
  }
}

TEST_CASE("seeded random instances") {
  SECTION("same seed reproduces the instance bit for bit") {
    const RandomInstance a = random_instance(77, 12, 5, 0.4, 3);
    const RandomInstance b = random_instance(77, 12, 5, 0.4, 3);
    CHECK((a.system.a - b.system.a).norm() == 0.0);
    CHECK((a.system.w - b.system.w).norm() == 0.0);
    CHECK((a.system.x0 - b.system.x0).norm() == 0.0);
    CHECK((a.sampling.synthesis() - b.sampling.synthesis()).norm() == 0.0);
  }
  SECTION("the spectral radius lands on target") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const RandomInstance inst = random_instance(seed, 16, 6, 0.5, 4);
      CHECK_THAT(spectral_radius(inst.system.a),
                 Catch::Matchers::WithinAbs(0.5, 1e-6));
    }
  }
  SECTION("well-sampled instances satisfy the frame condition") {
    int holds = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
      if (random_instance(700 + seed, 8, 8, 0.5, 3).frame_condition) ++holds;
    CHECK(holds == 10);
  }
  SECTION("parameter validation") {
    CHECK_THROWS_AS(random_instance(1, 8, 4, 1.5, 2), InvalidArgument);
    CHECK_THROWS_AS(random_instance(1, 8, 4, 0.5, 9), InvalidArgument);
  }
}
