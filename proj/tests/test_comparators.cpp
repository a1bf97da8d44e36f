#include "support.hpp"

#include "zimed/comparators.hpp"
#include "zimed/error.hpp"
#include "zimed/pipeline.hpp"

#include <doctest.h>

using namespace zimed;

namespace {

struct Fixture {
  Dataset data;
  PipelineOptions opts;
  PipelineResult base;
  Fixture() {
    ScenarioConfig cfg;
    cfg.n = 150;
    cfg.beta0 = {0.0};
    data = generate_dataset(cfg, 21);
    base = run_pipeline(data, opts);
  }
};

} // namespace

TEST_CASE("delta intervals are symmetric Wald intervals") {
  const Fixture f;
  const auto iv = delta_ci(f.data, f.base, f.opts, 0.05);
  REQUIRE(iv.size() == 2);
  CHECK(iv[0].estimate == f.base.outcome.effects.nde);
  CHECK(iv[1].estimate == f.base.outcome.effects.nie(0));
  for (const auto &s : iv) {
    CHECK(s.method == IntervalMethod::Delta);
    CHECK(s.upper - s.estimate == doctest::Approx(s.estimate - s.lower));
    CHECK(s.width > 0.0);
  }
  // The WLS part alone is a lower bound on the NDE variance.
  const double z = 1.959963984540054;
  CHECK(iv[0].width / (2 * z) >= std::sqrt(f.base.outcome.cov(1, 1)) - 1e-12);
}

TEST_CASE("identity resampling collapses the bootstrap interval") {
  const Fixture f;
  NpbOptions o;
  o.reps = 200;
  o.identity_resample = true;
  const NpbResult r = npb_ci(f.data, f.base, f.opts, o);
  CHECK(r.effective == 200);
  for (std::size_t e = 0; e < r.intervals.size(); ++e) {
    CHECK(r.intervals[e].lower == doctest::Approx(r.intervals[e].estimate).epsilon(1e-6));
    CHECK(r.intervals[e].upper == doctest::Approx(r.intervals[e].estimate).epsilon(1e-6));
  }
}

TEST_CASE("bootstrap needs 200 resamples and is seed reproducible") {
  const Fixture f;
  NpbOptions o;
  o.reps = 199;
  CHECK_THROWS_AS(npb_ci(f.data, f.base, f.opts, o), UsageError);
  o.reps = 200;
  o.seed = 5;
  o.threads = 1;
  const NpbResult a = npb_ci(f.data, f.base, f.opts, o);
  o.threads = 2;
  const NpbResult b = npb_ci(f.data, f.base, f.opts, o);
  CHECK(a.estimates == b.estimates);
  CHECK(a.intervals[1].lower <= a.intervals[1].upper);
  CHECK(a.intervals[1].estimate == f.base.outcome.effects.nie(0));
}
