#include <catch2/catch_amalgamated.hpp>

#include "forcerec/dynamics.hpp"
#include "forcerec/random.hpp"
#include "forcerec/recovery.hpp"
#include "forcerec/scenarios.hpp"
#include "support/oracles.hpp"

using namespace forcerec;

namespace {

struct TwoSampleCase {
  DiscreteSystem sys;
  VectorSystem g;
  VectorSystem dual;
  DataMatrix data;
};

TwoSampleCase make_two_sample_case(std::uint64_t seed, Eigen::Index dim,
                                   Eigen::Index count) {
  Rng rng(seed);
  HOperator a = rng.matrix(dim, dim);
  a *= rng.uniform(0.2, 1.2) / operator_norm(a);
  DiscreteSystem sys(a, Subspace::full(dim), rng.unit_vector(dim), rng.vector(dim));
  VectorSystem g(rng.matrix(dim, count));
  VectorSystem dual = canonical_dual(g);
  DataMatrix data = sample(iterate(sys, 2), g);
  return {std::move(sys), std::move(g), std::move(dual), std::move(data)};
}

}  // namespace

TEST_CASE("two-sample recovery") {
  SECTION("zero dynamics with an orthonormal basis reads the source off row 1") {
    Rng rng(401);
    const Eigen::Index d = 6;
    const VectorSystem g = VectorSystem::orthonormal_basis(d);
    DiscreteSystem sys(HOperator::Zero(d, d), Subspace::full(d), rng.vector(d),
                       rng.vector(d));
    const DataMatrix data = sample(iterate(sys, 2), g);
    const RecoveryReport rep =
        recover_two_sample(data.row(0), data.row(1), sys.a, g, g);
    CHECK((rep.w_hat - sys.w).norm() < 1e-12 * sys.w.norm());
    CHECK(rep.residual < 1e-12);
  }
  SECTION("random frames recover exactly") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const TwoSampleCase c = make_two_sample_case(410 + seed, 16, 32);
      const RecoveryReport rep =
          recover_two_sample(c.data.row(0), c.data.row(1), c.sys.a, c.g, c.dual);
      CHECK((rep.w_hat - c.sys.w).norm() < 1e-9 * c.sys.w.norm());
      CHECK(rep.stability_constant > 0.0);
    }
  }
  SECTION("independent of the initial state") {
    Rng rng(421);
    const TwoSampleCase base = make_two_sample_case(420, 12, 24);
    HVector reference;
    for (int t = 0; t < 10; ++t) {
      DiscreteSystem sys(base.sys.a, Subspace::full(12), base.sys.w, rng.vector(12));
      const DataMatrix data = sample(iterate(sys, 2), base.g);
      const RecoveryReport rep =
          recover_two_sample(data.row(0), data.row(1), sys.a, base.g, base.dual);
      if (t == 0)
        reference = rep.w_hat;
      else
        CHECK((rep.w_hat - reference).norm() <= 1e-10 * base.sys.w.norm());
    }
  }
  SECTION("any consecutive pair agrees with the first pair") {
    const TwoSampleCase c = make_two_sample_case(430, 10, 20);
    const DataMatrix data = sample(iterate(c.sys, 8), c.g);
    const RecoveryReport first =
        recover_two_sample(data.row(0), data.row(1), c.sys.a, c.g, c.dual);
    for (Eigen::Index n = 1; n + 1 < data.row_count(); ++n) {
      const RecoveryReport later =
          recover_two_sample(data.row(n), data.row(n + 1), c.sys.a, c.g, c.dual);
      CHECK((later.w_hat - first.w_hat).norm() <= 1e-9 * (1.0 + first.w_hat.norm()));
    }
  }
  SECTION("a non-frame is rejected") {
    HVector e1 = HVector::Zero(2);
    e1(0) = 1.0;
    const VectorSystem g = VectorSystem::from_vectors({e1});
    CHECK_THROWS_AS(
        recover_two_sample(HVector::Zero(1), HVector::Zero(1),
                           HOperator::Zero(2, 2), g, g),
        FrameConditionError);
  }
}

TEST_CASE("general-form recovery on raw matrices") {
  const TwoSampleCase c = make_two_sample_case(440, 12, 24);
  SECTION("zero data maps to zero") {
    DataMatrix zero(c.g.count());
    zero.append_row(HVector::Zero(c.g.count()));
    zero.append_row(HVector::Zero(c.g.count()));
    CHECK(recover_general_form(zero, c.sys.a, c.g, c.dual).w_hat.norm() == 0.0);
  }
  SECTION("agrees with the two-sample formula on trajectory data") {
    const RecoveryReport direct =
        recover_two_sample(c.data.row(0), c.data.row(1), c.sys.a, c.g, c.dual);
    const RecoveryReport general =
        recover_general_form(c.data, c.sys.a, c.g, c.dual);
    CHECK((direct.w_hat - general.w_hat).norm() <= 1e-10 * (1.0 + direct.w_hat.norm()));
  }
  SECTION("perturbations are controlled by the reported constant") {
    Rng rng(441);
    const RecoveryReport clean = recover_general_form(c.data, c.sys.a, c.g, c.dual);
    for (int t = 0; t < 10; ++t) {
      DataMatrix noisy(c.data.col_count());
      double delta_norm_sq = 0.0;
      for (Eigen::Index n = 0; n < c.data.row_count(); ++n) {
        const HVector delta = 1e-6 * rng.vector(c.data.col_count());
        delta_norm_sq += delta.squaredNorm();
        noisy.append_row(c.data.row(n) + delta);
      }
      const RecoveryReport bumped = recover_general_form(noisy, c.sys.a, c.g, c.dual);
      CHECK((bumped.w_hat - clean.w_hat).norm() <=
            clean.stability_constant * std::sqrt(delta_norm_sq) * (1.0 + 1e-9));
    }
  }
  SECTION("the recovered vector is bounded by the finite norm") {
    Rng rng(442);
    for (int t = 0; t < 10; ++t) {
      DataMatrix raw(c.g.count());
      raw.append_row(rng.vector(c.g.count()));
      raw.append_row(rng.vector(c.g.count()));
      const RecoveryReport rep = recover_general_form(raw, c.sys.a, c.g, c.dual);
      CHECK(rep.w_hat.norm() <= rep.stability_constant * norm_finite(raw));
    }
  }
}

TEST_CASE("pair-averaged recovery") {
  const TwoSampleCase c = make_two_sample_case(445, 10, 20);
  SECTION("coincides with the two-row formula on noiseless data") {
    const DataMatrix data = sample(iterate(c.sys, 12), c.g);
    const RecoveryReport avg = recover_pair_averaged(data, c.sys.a, c.g, c.dual);
    const RecoveryReport two =
        recover_two_sample(data.row(0), data.row(1), c.sys.a, c.g, c.dual);
    CHECK((avg.w_hat - two.w_hat).norm() < 1e-9 * (1.0 + two.w_hat.norm()));
  }
  SECTION("shrinks independent row noise") {
    Rng rng(446);
    DiscreteSystem sys(0.5 * c.sys.a, Subspace::full(10), c.sys.w, c.sys.x0);
    DataMatrix noisy(c.g.count());
    for (const HVector& x : iterate(sys, 64))
      noisy.append_row(c.g.analyze(x) + 1e-4 * rng.vector(c.g.count()));
    const double avg_err =
        (recover_pair_averaged(noisy, sys.a, c.g, c.dual).w_hat - sys.w).norm();
    const double single_err =
        (recover_two_sample(noisy.row(0), noisy.row(1), sys.a, c.g, c.dual).w_hat -
         sys.w).norm();
    CHECK(avg_err < 0.5 * single_err);
  }
}

TEST_CASE("infinite-horizon recovery") {
  SECTION("stationary start is already recovered at every partial synthesis") {
    const RandomInstance inst = random_instance(450, 14, 5, 0.5, 3);
    const StationaryMap s = stationary_map(inst.system);
    DiscreteSystem pinned(inst.system.a, inst.system.source_space, inst.system.w,
                          HVector(s.forward * inst.system.w));
    const DataMatrix d = sample(iterate(pinned, 20), inst.sampling);
    const RecoveryReport rep = recover_infinite(
        d, inst.system.a, inst.sampling, inst.system.source_space, 1e-9);
    REQUIRE(!rep.trace.empty());
    for (double gap : rep.trace) CHECK(gap < 1e-9 * std::max(1.0, inst.system.w.norm()));
    CHECK((rep.w_hat - inst.system.w).norm() < 1e-9);
  }
  SECTION("few sampling vectors suffice when the derived system frames W") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const double rho = 0.3 + 0.1 * static_cast<double>(seed % 3);
      const Eigen::Index count = 1 + static_cast<Eigen::Index>(seed % 3);
      const RandomInstance inst = random_instance(460 + seed, 12, count, rho,
                                                  std::min<Eigen::Index>(count, 2));
      if (!inst.frame_condition) continue;
      const long horizon =
          static_cast<long>(std::ceil(40.0 / -std::log10(rho)));
      const DataMatrix d = sample(iterate(inst.system, horizon), inst.sampling);
      const RecoveryReport rep = recover_infinite(
          d, inst.system.a, inst.sampling, inst.system.source_space, 1e-10);
      CHECK((rep.w_hat - inst.system.w).norm() < 1e-7);
      CHECK(rep.subspace_coords.size() == inst.system.source_space.dim());
    }
  }
  SECTION("trace gaps decay at the spectral radius") {
    const RandomInstance inst = random_instance(470, 10, 4, 0.6, 2);
    REQUIRE(inst.frame_condition);
    const DataMatrix d = sample(iterate(inst.system, 80), inst.sampling);
    const RecoveryReport rep = recover_infinite(
        d, inst.system.a, inst.sampling, inst.system.source_space, 1e-10);
    const double top = *std::max_element(rep.trace.begin(), rep.trace.end());
    std::size_t a = 8, b = a;
    for (std::size_t n = a; n < rep.trace.size(); ++n)
      if (rep.trace[n] > top * 1e-10) b = n;
    REQUIRE(b > a + 5);
    CHECK_THAT(oracles::fitted_decay_ratio(rep.trace, a, b),
               Catch::Matchers::WithinAbs(0.6, 0.05));
  }
  SECTION("a failing frame condition is reported in recovery terms") {
    // sampling direction orthogonal to W makes the derived system degenerate
    const Eigen::Index d = 4;
    HVector e1 = HVector::Zero(d), e2 = HVector::Zero(d);
    e1(0) = 1.0;
    e2(1) = 1.0;
    const Subspace w_space = Subspace::span(std::vector<HVector>{e1});
    DataMatrix data(1);
    data.append_row(HVector::Zero(1));
    data.append_row(HVector::Zero(1));
    try {
      recover_infinite(data, HOperator::Zero(d, d),
                       VectorSystem::from_vectors({e2}), w_space, 1e-10);
      FAIL("expected FrameConditionError");
    } catch (const FrameConditionError& e) {
      CHECK(std::string(e.what()).find("recoverability condition fails") !=
            std::string::npos);
    }
  }
}

TEST_CASE("time-varying source recovery") {
  Rng rng(480);
  const Eigen::Index d = 10;
  HOperator a = rng.matrix(d, d);
  a *= 0.7 / operator_norm(a);
  const VectorSystem g(rng.matrix(d, 2 * d));
  const VectorSystem dual = canonical_dual(g);

  auto run_schedule = [&](const std::vector<HVector>& sources) {
    std::vector<HVector> states{rng.vector(d)};
    for (const HVector& w : sources)
      states.push_back(a * states.back() + w);
    return sample(states, g);
  };

  SECTION("constant schedule reduces to the constant-source formula") {
    const HVector w = rng.unit_vector(d);
    const std::vector<HVector> schedule(5, w);
    const DataMatrix data = run_schedule(schedule);
    const auto reports = recover_time_varying(data, a, g, dual);
    REQUIRE(reports.size() == 5);
    const RecoveryReport two =
        recover_two_sample(data.row(0), data.row(1), a, g, dual);
    for (const auto& rep : reports) {
      CHECK((rep.w_hat - w).norm() < 1e-9);
      CHECK((rep.w_hat - two.w_hat).norm() < 1e-9);
    }
  }
  SECTION("linearly growing schedule") {
    const HVector w = rng.unit_vector(d);
    std::vector<HVector> schedule;
    for (int n = 0; n < 6; ++n) schedule.push_back(static_cast<double>(n) * w);
    const auto reports = recover_time_varying(run_schedule(schedule), a, g, dual);
    for (std::size_t n = 0; n < reports.size(); ++n)
      CHECK((reports[n].w_hat - schedule[n]).norm() < 1e-9 * (1.0 + schedule[n].norm()));
  }
  SECTION("alternating signs are recovered exactly") {
    const HVector w = rng.unit_vector(d);
    std::vector<HVector> schedule;
    for (int n = 0; n < 6; ++n)
      schedule.push_back((n % 2 == 0 ? 1.0 : -1.0) * w);
    const auto reports = recover_time_varying(run_schedule(schedule), a, g, dual);
    for (std::size_t n = 0; n < reports.size(); ++n)
      CHECK((reports[n].w_hat - schedule[n]).norm() < 1e-9);
  }
}

TEST_CASE("continuous-time recovery") {
  Rng rng(490);

  auto curve_of = [](const HOperator& a, const HVector& x0, const HVector& w,
                     const VectorSystem& g, const std::vector<double>& ts) {
    SampledCurve curve;
    for (double t : ts) {
      curve.ts.push_back(t);
      curve.rows.push_back(g.analyze(continuous_state(a, x0, w, t)));
    }
    return curve;
  };

  SECTION("zero generator is exact at machine level") {
    const Eigen::Index d = 5;
    const VectorSystem g = VectorSystem::orthonormal_basis(d);
    const HVector w = rng.vector(d), x0 = rng.vector(d);
    const double h = 0.1;
    const SampledCurve curve =
        curve_of(HOperator::Zero(d, d), x0, w, g, {-h, 0.0, h});
    const RecoveryReport rep =
        recover_continuous(curve, HOperator::Zero(d, d), g, g, h);
    CHECK((rep.w_hat - w).norm() < 1e-12 * w.norm());
  }
  SECTION("forward differences halve the error when h halves") {
    const Eigen::Index d = 6;
    HVector lambdas(d);
    for (Eigen::Index k = 0; k < d; ++k)
      lambdas(k) = -0.9 + 0.35 * static_cast<double>(k);
    HOperator a = HOperator::Zero(d, d);
    a.diagonal() = lambdas;
    const VectorSystem g(rng.matrix(d, 2 * d));
    const VectorSystem dual = canonical_dual(g);
    const HVector w = rng.unit_vector(d), x0 = rng.vector(d);
    const double h = 0.05;
    const SampledCurve curve = curve_of(a, x0, w, g, {0.0, h / 2.0, h});
    const double e_coarse =
        (recover_continuous(curve, a, g, dual, h, DifferenceScheme::forward).w_hat - w)
            .norm();
    const double e_fine =
        (recover_continuous(curve, a, g, dual, h / 2.0, DifferenceScheme::forward)
             .w_hat - w)
            .norm();
    CHECK_THAT(e_coarse / e_fine, Catch::Matchers::WithinAbs(2.0, 0.2));
  }
  SECTION("central differences gain a factor of four per halving") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Rng local(491 + seed);
      const Eigen::Index d = 8;
      HOperator a = local.matrix(d, d);
      a *= 1.0 / operator_norm(a);
      const VectorSystem g(local.matrix(d, 2 * d));
      const VectorSystem dual = canonical_dual(g);
      const HVector w = local.unit_vector(d), x0 = local.vector(d);
      const double h = 0.08;
      const SampledCurve curve =
          curve_of(a, x0, w, g, {-h, -h / 2.0, 0.0, h / 2.0, h});
      const double e_coarse =
          (recover_continuous(curve, a, g, dual, h, DifferenceScheme::central).w_hat -
           w).norm();
      const double e_fine =
          (recover_continuous(curve, a, g, dual, h / 2.0, DifferenceScheme::central)
               .w_hat - w).norm();
      CHECK_THAT(e_coarse / e_fine, Catch::Matchers::WithinAbs(4.0, 0.5));
    }
  }
  SECTION("the doubled stencil yields a measured error estimate") {
    const Eigen::Index d = 5;
    Rng local(495);
    HOperator a = local.matrix(d, d);
    a *= 0.8 / operator_norm(a);
    const VectorSystem g(local.matrix(d, 2 * d));
    const VectorSystem dual = canonical_dual(g);
    const HVector w = local.unit_vector(d), x0 = local.vector(d);
    const double h = 0.05;
    const SampledCurve curve =
        curve_of(a, x0, w, g, {-2 * h, -h, 0.0, h, 2 * h});
    const RecoveryReport rep =
        recover_continuous(curve, a, g, dual, h, DifferenceScheme::central);
    const double true_error = (rep.w_hat - w).norm();
    CHECK(rep.residual > 0.1 * true_error);
    CHECK(rep.residual < 10.0 * true_error);
  }
  SECTION("missing stencil points are diagnosed") {
    const Eigen::Index d = 3;
    const VectorSystem g = VectorSystem::orthonormal_basis(d);
    SampledCurve curve;
    curve.ts = {0.0};
    curve.rows = {HVector::Zero(d)};
    CHECK_THROWS_AS(
        recover_continuous(curve, HOperator::Zero(d, d), g, g, 0.1),
        InvalidArgument);
    CHECK_THROWS_AS(
        recover_continuous(curve, HOperator::Zero(d, d), g, g, -0.1),
        InvalidArgument);
  }
}

TEST_CASE("stability estimation") {
  SECTION("orthonormal zero-dynamics map has unit norm, SVD confirms") {
    const Eigen::Index d = 6;
    const VectorSystem g = VectorSystem::orthonormal_basis(d);
    const HOperator a = HOperator::Zero(d, d);
    auto map = [&](const DataMatrix& data) {
      return recover_general_form(data, a, g, g).w_hat;
    };
    const double est = estimate_stability(map, 2, d, 6);
    const double exact = oracles::exact_map_norm(map, 2, d);
    CHECK_THAT(est, Catch::Matchers::WithinRel(exact, 1e-8));
    CHECK_THAT(est, Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK(est <= std::sqrt(2.0) + 1e-9);
  }
  SECTION("the unbounded example grows linearly with dimension") {
    const Eigen::Index d = 16;
    const UnstableInstance inst = build_unstable(d);
    const double est = estimate_stability(inst.recovery, 2, d, 6);
    CHECK(est >= static_cast<double>(d) * (1.0 - 1e-6));
    // witness: a single unit entry in the last column of row 1
    DataMatrix witness(d);
    witness.append_row(HVector::Zero(d));
    HVector top = HVector::Zero(d);
    top(d - 1) = 1.0;
    witness.append_row(top);
    CHECK_THAT(inst.recovery(witness).norm(),
               Catch::Matchers::WithinRel(static_cast<double>(d), 1e-12));
    const double est2 = estimate_stability(build_unstable(2 * d).recovery, 2, 2 * d, 6);
    CHECK_THAT(est2 / est, Catch::Matchers::WithinAbs(2.0, 1e-6));
  }
  SECTION("matches the SVD oracle on a generic recovery map") {
    const TwoSampleCase c = make_two_sample_case(499, 6, 9);
    auto map = [&](const DataMatrix& data) {
      return recover_general_form(data, c.sys.a, c.g, c.dual).w_hat;
    };
    const double est = estimate_stability(map, 2, 9, 6);
    const double exact = oracles::exact_map_norm(map, 2, 9);
    CHECK_THAT(est, Catch::Matchers::WithinRel(exact, 1e-7));
  }
}

TEST_CASE("formula recoveries agree with the stacked least-squares oracle") {
  SECTION("two-sample instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const TwoSampleCase c = make_two_sample_case(500 + seed, 10, 20);
      const RecoveryReport rep =
          recover_two_sample(c.data.row(0), c.data.row(1), c.sys.a, c.g, c.dual);
      const oracles::StackedLsq lsq =
          oracles::stacked_lsq(c.data, c.sys.a, c.g, Subspace::full(10));
      CHECK((rep.w_hat - lsq.w_hat).norm() < 1e-8 * (1.0 + lsq.w_hat.norm()));
    }
  }
  SECTION("infinite-horizon instances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const RandomInstance inst = random_instance(510 + seed, 12, 5, 0.5, 3);
      if (!inst.frame_condition) continue;
      const DataMatrix d = sample(iterate(inst.system, 60), inst.sampling);
      const RecoveryReport rep = recover_infinite(
          d, inst.system.a, inst.sampling, inst.system.source_space, 1e-10);
      const oracles::StackedLsq lsq =
          oracles::stacked_lsq(d, inst.system.a, inst.sampling,
                               inst.system.source_space);
      CHECK((rep.w_hat - lsq.w_hat).norm() < 1e-8 * (1.0 + lsq.w_hat.norm()));
    }
  }
}
