// tests/losses-test.cc

// Copyright 2026  The cllab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "fb/forward-backward.h"
#include "losses/losses.h"
#include "oracles.h"

namespace cllab {
namespace {

BigramLm UniformThirdsLm() {
  BigramLm lm(2);
  for (int32 ctx = 0; ctx <= 2; ++ctx)
    for (int32 succ = 0; succ <= 2; ++succ)
      lm.LogProb(ctx, succ) = std::log(1.0 / 3.0);
  return lm;
}

Matrix RandomNormalizedRows(Rng *rng, int32 t_max, int32 p) {
  Matrix y(t_max, p);
  for (int32 t = 0; t < t_max; ++t) {
    double sum = 0.0;
    for (int32 j = 0; j < p; ++j) {
      y(t, j) = 0.05 + rng->Uniform();
      sum += y(t, j);
    }
    for (int32 j = 0; j < p; ++j) y(t, j) /= sum;
  }
  return y;
}

Utterance MakeUtterance(const std::string &id, const Matrix &features,
                        const std::vector<int32> &labels) {
  Utterance u;
  u.id = id;
  u.features = features;
  u.labels = labels;
  u.domain = "test";
  u.is_test = false;
  return u;
}

TEST_CASE("mmi objective vanishes when both graphs are identical") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Rng rng(3);
  EmissionMatrix e = oracle::RandomEmissions(&rng, 3, 2);
  LossResult r = LfMmi(den, den, e);
  CHECK(std::fabs(r.objective) < 1e-12);
  for (double g : r.grad_wrt_emissions.Data()) CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("mmi objective is non-positive when the numerator is a subgraph") {
  // Same states and weights as the closure, but only the label-0 arcs and
  // the label-0 final survive: every numerator path is a denominator path.
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Graph num(3, 2, 2);
  num.AddArc({2, 0, 0, std::log(1.0 / 3.0)});
  num.AddArc({0, 0, 0, std::log(1.0 / 3.0)});
  num.SetFinal(0, std::log(1.0 / 3.0));
  num.Finish();
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    EmissionMatrix e = oracle::RandomEmissions(&rng, 3, 2);
    CHECK(LfMmi(num, den, e).objective <= 1e-12);
  }
}

TEST_CASE("mmi objective and gradient match the enumeration oracle") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Graph num = BuildNumeratorGraph({0, 1}, 2, false);
  Rng rng(7);
  EmissionMatrix e = oracle::RandomEmissions(&rng, 2, 2);
  oracle::Enumerated on = oracle::Enumerate(num, e);
  oracle::Enumerated od = oracle::Enumerate(den, e);
  LossResult r = LfMmi(num, den, e);
  CHECK(std::fabs(r.objective - (on.total - od.total)) < 1e-9);
  for (int32 t = 0; t < 2; ++t) {
    double row_sum = 0.0;
    for (int32 p = 0; p < 2; ++p) {
      double want = on.gamma(t, p) - od.gamma(t, p);
      CHECK(std::fabs(r.grad_wrt_emissions(t, p) - want) < 1e-9);
      row_sum += r.grad_wrt_emissions(t, p);
    }
    CHECK(std::fabs(row_sum) < 1e-9);
  }
}

TEST_CASE("mmi no-path failures name the offending graph") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Graph dead_den(2, 0, 2);
  dead_den.AddArc({0, 1, 0, 0.0});
  dead_den.SetFinal(1, 0.0);
  dead_den.Finish();
  EmissionMatrix e(2, 2);
  try {
    LfMmi(BuildNumeratorGraph({0, 1, 0}, 2, false), den, e);
    FAIL_CHECK("expected no-path failure");
  } catch (const NoPathError &err) {
    CHECK(err.Role() == "numerator graph");
  }
  try {
    LfMmi(BuildNumeratorGraph({0, 0}, 2, false), dead_den, e);
    FAIL_CHECK("expected no-path failure");
  } catch (const NoPathError &err) {
    CHECK(err.Role() == "denominator graph");
    CHECK(err.Frame() == 1);
  }
}

TEST_CASE("frame-level retention is flat where the model already matches") {
  Rng rng(11);
  EmissionMatrix e = oracle::RandomEmissions(&rng, 4, 3);
  Matrix y;
  SoftmaxRows(e, &y);
  double alpha = 2.0;
  LossResult r = Lwf(e, y, alpha);
  for (double g : r.grad_wrt_emissions.Data()) CHECK(std::fabs(g) < 1e-12);
  double neg_entropy = 0.0;
  for (double v : y.Data()) neg_entropy += v * std::log(v);
  CHECK(r.objective == doctest::Approx(alpha * neg_entropy).epsilon(1e-9));
}

TEST_CASE("frame-level retention hand example") {
  EmissionMatrix e(1, 2);
  e(0, 0) = 0.0;
  e(0, 1) = std::log(3.0);
  Matrix y_src(1, 2);
  y_src(0, 0) = 0.5;
  y_src(0, 1) = 0.5;
  LossResult r = Lwf(e, y_src, 1.0);
  double want = 0.5 * std::log(0.25) + 0.5 * std::log(0.75);
  CHECK(r.objective == doctest::Approx(want).epsilon(1e-12));
  CHECK(r.grad_wrt_emissions(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.grad_wrt_emissions(0, 1) == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("frame-level retention scale and input checks") {
  Rng rng(13);
  EmissionMatrix e = oracle::RandomEmissions(&rng, 3, 2);
  Matrix y = RandomNormalizedRows(&rng, 3, 2);
  LossResult zero = Lwf(e, y, 0.0);
  CHECK(zero.objective == 0.0);
  for (double g : zero.grad_wrt_emissions.Data()) CHECK(g == 0.0);

  LossResult r = Lwf(e, y, 1.7);
  for (int32 t = 0; t < 3; ++t) {
    double row_sum = 0.0;
    for (int32 p = 0; p < 2; ++p) row_sum += r.grad_wrt_emissions(t, p);
    CHECK(std::fabs(row_sum) < 1e-9);
  }

  Matrix bad(1, 2);
  bad(0, 0) = 0.6;
  bad(0, 1) = 0.6;
  EmissionMatrix e1(1, 2);
  CHECK_THROWS_AS(Lwf(e1, bad, 1.0), InvalidInputError);
}

TEST_CASE("sequence-level retention starts with a zero gradient") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Rng rng(17);
  EmissionMatrix e = oracle::RandomEmissions(&rng, 3, 2);
  OccupancyMatrix gamma_src = LogprobAndOccupancies(den, e).gamma;
  LossResult r = DenLwf(den, e, gamma_src, 0.6);
  for (double g : r.grad_wrt_emissions.Data()) CHECK(std::fabs(g) < 1e-9);

  LossResult off = DenLwf(den, e, gamma_src, 0.0);
  CHECK(off.objective == 0.0);
  for (double g : off.grad_wrt_emissions.Data()) CHECK(g == 0.0);
}

TEST_CASE("sequence-level retention gradient is the occupancy difference") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Rng rng(19);
  EmissionMatrix source = oracle::RandomEmissions(&rng, 2, 2);
  EmissionMatrix live = oracle::RandomEmissions(&rng, 2, 2);
  oracle::Enumerated oa = oracle::Enumerate(den, source);
  oracle::Enumerated ob = oracle::Enumerate(den, live);
  double alpha = 1.3;
  LossResult r = DenLwf(den, live, oa.gamma, alpha);
  double want_obj = 0.0;
  for (int32 t = 0; t < 2; ++t)
    for (int32 p = 0; p < 2; ++p) {
      double want = alpha * (oa.gamma(t, p) - ob.gamma(t, p));
      CHECK(std::fabs(r.grad_wrt_emissions(t, p) - want) < 1e-9);
      want_obj += oa.gamma(t, p) * live(t, p);
    }
  want_obj = alpha * (want_obj - ob.total);
  CHECK(r.objective == doctest::Approx(want_obj).epsilon(1e-9));
  for (int32 t = 0; t < 2; ++t) {
    double row_sum = 0.0;
    for (int32 p = 0; p < 2; ++p) row_sum += r.grad_wrt_emissions(t, p);
    CHECK(std::fabs(row_sum) < 1e-9);
  }
}

TEST_CASE("dropping the offset leaves an unbalanced boost") {
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  Rng rng(23);
  EmissionMatrix source = oracle::RandomEmissions(&rng, 3, 2);
  EmissionMatrix live = oracle::RandomEmissions(&rng, 3, 2);
  OccupancyMatrix gamma_src = LogprobAndOccupancies(den, source).gamma;
  double alpha = 0.8;
  LossResult r = DenLwf(den, live, gamma_src, alpha, false);
  double want_obj = 0.0;
  for (int32 t = 0; t < 3; ++t) {
    double row_sum = 0.0;
    for (int32 p = 0; p < 2; ++p) {
      CHECK(r.grad_wrt_emissions(t, p) ==
            doctest::Approx(alpha * gamma_src(t, p)).epsilon(1e-12));
      row_sum += r.grad_wrt_emissions(t, p);
      want_obj += gamma_src(t, p) * live(t, p);
    }
    // Rows sum to alpha, not zero: the term only pushes scores up.
    CHECK(row_sum == doctest::Approx(alpha).epsilon(1e-9));
  }
  CHECK(r.objective == doctest::Approx(alpha * want_obj).epsilon(1e-9));
}

TEST_CASE("parameter anchor is zero at the anchor and quadratic away") {
  std::vector<double> theta = {0.5, -1.0, 2.0};
  std::vector<ClSnapshot> snaps = {{0, theta, {1.0, 1.0, 1.0}}};
  std::vector<double> grad;
  CHECK(EwcPenalty(theta, snaps, 300.0, &grad) == 0.0);
  for (double g : grad) CHECK(g == 0.0);

  std::vector<double> v = {0.1, -0.2, 0.3};
  std::vector<double> moved(3);
  for (int j = 0; j < 3; ++j) moved[j] = theta[j] + v[j];
  double alpha = 2.5;
  double obj = EwcPenalty(moved, snaps, alpha, &grad);
  double norm2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  CHECK(obj == doctest::Approx(-alpha * norm2).epsilon(1e-12));
  for (int j = 0; j < 3; ++j)
    CHECK(grad[j] == doctest::Approx(-2.0 * alpha * v[j]).epsilon(1e-12));
}

TEST_CASE("parameter anchor matches an elementwise oracle on two snapshots") {
  Rng rng(29);
  int32 n = 7;
  std::vector<double> theta(n);
  ClSnapshot s1{1, std::vector<double>(n), std::vector<double>(n)};
  ClSnapshot s2{2, std::vector<double>(n), std::vector<double>(n)};
  for (int32 j = 0; j < n; ++j) {
    theta[j] = rng.Uniform(-1.0, 1.0);
    s1.params[j] = rng.Uniform(-1.0, 1.0);
    s2.params[j] = rng.Uniform(-1.0, 1.0);
    s1.fisher[j] = rng.Uniform(0.0, 2.0);
    s2.fisher[j] = rng.Uniform(0.0, 2.0);
  }
  double alpha = 1.7;
  std::vector<double> grad;
  double obj = EwcPenalty(theta, {s1, s2}, alpha, &grad);

  double want_obj = 0.0;
  std::vector<double> want_grad(n, 0.0);
  for (const ClSnapshot &s : {s1, s2}) {
    for (int32 j = 0; j < n; ++j) {
      double diff = s.params[j] - theta[j];
      want_obj -= alpha * s.fisher[j] * diff * diff;
      want_grad[j] -= 2.0 * alpha * s.fisher[j] * (theta[j] - s.params[j]);
    }
  }
  CHECK(obj == doctest::Approx(want_obj).epsilon(1e-12));
  CHECK(obj <= 0.0);
  for (int32 j = 0; j < n; ++j)
    CHECK(grad[j] == doctest::Approx(want_grad[j]).epsilon(1e-12));

  ClSnapshot short_snap{0, {0.0}, {1.0}};
  CHECK_THROWS_AS(EwcPenalty(theta, {short_snap}, 1.0, &grad),
                  InvalidInputError);
}

TEST_CASE("snapshots round-trip bit-exactly") {
  ClSnapshot s{3, {0.1, -0.2, 1e-17}, {1.0, 0.5, 2.0}};
  std::stringstream buf;
  WriteSnapshot(buf, s);
  CHECK(ReadSnapshot(buf) == s);
}

// A single-label problem makes numerator and denominator paths coincide, so
// every utterance has an exactly zero gradient.
TEST_CASE("fisher estimation skips normalization when all gradients vanish") {
  NetConfig c;
  c.feature_dim = 2;
  c.context_radius = 0;
  c.hidden_dims = {};
  c.num_labels = 1;
  Rng rng(31);
  Net net(c, &rng);
  BigramLm lm(1);
  lm.LogProb(1, 0) = 0.0;
  lm.LogProb(0, 0) = std::log(0.5);
  lm.LogProb(0, 1) = std::log(0.5);
  Graph den = BuildDenominatorGraph(lm);
  Matrix f(3, 2);
  f(0, 0) = 1.0;
  f(1, 1) = -1.0;
  Utterance u = MakeUtterance("u0", f, {0, 0});
  std::vector<double> fisher = EstimateFisher(net, {&u}, den, true);
  REQUIRE(static_cast<int64>(fisher.size()) == net.NumParams());
  for (double v : fisher) CHECK(v == 0.0);
}

struct FisherFixture {
  // Odd parameter count (9) so the median is a unique entry.
  NetConfig config;
  Net net;
  Graph den;

  FisherFixture()
      : config(MakeConfig()), net(MakeNet(config)), den(MakeDen()) {}

  static NetConfig MakeConfig() {
    NetConfig c;
    c.feature_dim = 2;
    c.context_radius = 0;
    c.hidden_dims = {};
    c.num_labels = 3;
    return c;
  }
  static Net MakeNet(const NetConfig &c) {
    Rng rng(37);
    return Net(c, &rng);
  }
  static Graph MakeDen() {
    return BuildDenominatorGraph(
        EstimateBigramLm({{0, 1}, {2, 0}}, 3, 0.5));
  }

  std::vector<double> SquaredGrad(const Utterance &u) const {
    ForwardCache cache;
    EmissionMatrix e = net.Forward(u.features, &cache);
    Graph num = BuildNumeratorGraph(u.labels, 3, true);
    std::vector<double> g =
        net.Backward(cache, LfMmi(num, den, e).grad_wrt_emissions);
    for (double &v : g) v *= v;
    return g;
  }

  static double Median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  }
};

TEST_CASE("single-utterance fisher is the squared gradient, median one") {
  FisherFixture fx;
  Rng rng(41);
  Matrix f(2, 2);
  for (double &v : f.Data()) v = rng.Uniform(-1.0, 1.0);
  Utterance u = MakeUtterance("u0", f, {0, 1});
  std::vector<double> fisher = EstimateFisher(fx.net, {&u}, fx.den, true);

  std::vector<double> sq = fx.SquaredGrad(u);
  double median = FisherFixture::Median(sq);
  REQUIRE(median > 1e-12);
  for (size_t j = 0; j < sq.size(); ++j)
    CHECK(fisher[j] == doctest::Approx(sq[j] / median).epsilon(1e-12));
  CHECK(FisherFixture::Median(fisher) == 1.0);
}

TEST_CASE("two-utterance fisher averages before normalizing") {
  FisherFixture fx;
  Rng rng(43);
  Matrix f1(2, 2), f2(3, 2);
  for (double &v : f1.Data()) v = rng.Uniform(-1.0, 1.0);
  for (double &v : f2.Data()) v = rng.Uniform(-1.0, 1.0);
  Utterance u1 = MakeUtterance("u1", f1, {0, 1});
  Utterance u2 = MakeUtterance("u2", f2, {2, 0});
  std::vector<double> fisher =
      EstimateFisher(fx.net, {&u1, &u2}, fx.den, true);

  std::vector<double> sq1 = fx.SquaredGrad(u1);
  std::vector<double> sq2 = fx.SquaredGrad(u2);
  std::vector<double> mean(sq1.size());
  for (size_t j = 0; j < mean.size(); ++j) mean[j] = 0.5 * (sq1[j] + sq2[j]);
  double median = FisherFixture::Median(mean);
  REQUIRE(median > 1e-12);
  for (size_t j = 0; j < mean.size(); ++j)
    CHECK(fisher[j] == doctest::Approx(mean[j] / median).epsilon(1e-12));
}

TEST_CASE("fisher estimation drops path-less utterances") {
  FisherFixture fx;
  Rng rng(47);
  Matrix good_f(2, 2), bad_f(2, 2);
  for (double &v : good_f.Data()) v = rng.Uniform(-1.0, 1.0);
  for (double &v : bad_f.Data()) v = rng.Uniform(-1.0, 1.0);
  Utterance good = MakeUtterance("good", good_f, {0, 1});
  // Three labels cannot align to two frames without self-loops.
  Utterance bad = MakeUtterance("bad", bad_f, {0, 1, 2});

  std::vector<double> with_bad =
      EstimateFisher(fx.net, {&good, &bad}, fx.den, false);
  std::vector<double> alone = EstimateFisher(fx.net, {&good}, fx.den, false);
  CHECK(with_bad == alone);
  CHECK_THROWS_AS(EstimateFisher(fx.net, {&bad}, fx.den, false),
                  InvalidInputError);
}

TEST_CASE("reference posteriors are softmax rows keyed by utterance id") {
  NetConfig c;
  c.feature_dim = 2;
  c.context_radius = 1;
  c.hidden_dims = {4};
  c.num_labels = 3;
  Matrix f(3, 2);
  f(0, 0) = 0.3;
  f(2, 1) = -0.4;
  Utterance u = MakeUtterance("utt-7", f, {0, 1, 2});

  Net zero(c);
  ReferenceCache uniform = ComputeReferencePosteriors(zero, {&u});
  REQUIRE(uniform.count("utt-7") == 1);
  for (double v : uniform["utt-7"].Data())
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Rng rng(53);
  Net net(c, &rng);
  ReferenceCache cache = ComputeReferencePosteriors(net, {&u});
  const Matrix &y = cache["utt-7"];
  for (int32 t = 0; t < 3; ++t) {
    double sum = 0.0;
    for (int32 p = 0; p < 3; ++p) {
      CHECK(y(t, p) >= 0.0);
      sum += y(t, p);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  ReferenceCache again = ComputeReferencePosteriors(net, {&u});
  CHECK(again == cache);
}

TEST_CASE("reference occupancies match forced and enumerated cases") {
  NetConfig c;
  c.feature_dim = 2;
  c.context_radius = 0;
  c.hidden_dims = {};
  c.num_labels = 1;
  Rng rng(59);
  Net single(c, &rng);
  BigramLm lm(1);
  lm.LogProb(1, 0) = 0.0;
  lm.LogProb(0, 0) = std::log(0.5);
  lm.LogProb(0, 1) = std::log(0.5);
  Graph den1 = BuildDenominatorGraph(lm);
  Matrix f(4, 2);
  Utterance u = MakeUtterance("a", f, {0});
  ReferenceCache forced = ComputeReferenceDenOccupancies(single, den1, {&u});
  for (double v : forced["a"].Data())
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  NetConfig c2 = c;
  c2.num_labels = 2;
  Net net(c2, &rng);
  Graph den = BuildDenominatorGraph(UniformThirdsLm());
  ReferenceCache cache = ComputeReferenceDenOccupancies(net, den, {&u});
  oracle::Enumerated want = oracle::Enumerate(den, net.Forward(f));
  const Matrix &gamma = cache["a"];
  for (int32 t = 0; t < 4; ++t) {
    double sum = 0.0;
    for (int32 p = 0; p < 2; ++p) {
      CHECK(std::fabs(gamma(t, p) - want.gamma(t, p)) < 1e-9);
      sum += gamma(t, p);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("path-less utterances are left out of the occupancy cache") {
  // This closure only accepts single-frame utterances.
  Graph tiny(2, 0, 2);
  tiny.AddArc({0, 1, 0, 0.0});
  tiny.AddArc({0, 1, 1, 0.0});
  tiny.SetFinal(1, 0.0);
  tiny.Finish();
  NetConfig c;
  c.feature_dim = 2;
  c.context_radius = 0;
  c.hidden_dims = {};
  c.num_labels = 2;
  Rng rng(61);
  Net net(c, &rng);
  Utterance ok = MakeUtterance("ok", Matrix(1, 2), {0});
  Utterance dead = MakeUtterance("dead", Matrix(2, 2), {0, 1});
  ReferenceCache cache =
      ComputeReferenceDenOccupancies(net, tiny, {&ok, &dead});
  CHECK(cache.count("ok") == 1);
  CHECK(cache.count("dead") == 0);
}

TEST_CASE("reference caches round-trip bit-exactly") {
  Rng rng(67);
  ReferenceCache cache;
  cache["first"] = oracle::RandomEmissions(&rng, 3, 2);
  cache["second"] = oracle::RandomEmissions(&rng, 1, 5);
  std::stringstream buf;
  WriteReferenceCache(buf, cache);
  CHECK(ReadReferenceCache(buf) == cache);

  std::string path = "losses-test-cache.bin";
  SaveReferenceCache(cache, path);
  CHECK(LoadReferenceCache(path) == cache);
  std::remove(path.c_str());

  std::stringstream corrupt("NOTENOUG");
  CHECK_THROWS_AS(ReadReferenceCache(corrupt), IoError);
}

TEST_CASE("rowwise softmax normalizes, shifts out, and may alias") {
  Matrix in(2, 2);
  in(0, 0) = 0.0;
  in(0, 1) = std::log(3.0);
  in(1, 0) = 100.0;  // large shift must not overflow
  in(1, 1) = 100.0 + std::log(3.0);
  Matrix out;
  SoftmaxRows(in, &out);
  for (int32 t = 0; t < 2; ++t) {
    CHECK(out(t, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out(t, 1) == doctest::Approx(0.75).epsilon(1e-12));
  }
  SoftmaxRows(in, &in);  // aliasing form
  CHECK(in == out);
}

}  // namespace
}  // namespace cllab
