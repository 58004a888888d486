// tests/eval-test.cc

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
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "eval/eval.h"
#include "oracles.h"

namespace cllab {
namespace {

TEST_CASE("edit distance handles the textbook cases") {
  CHECK(Levenshtein({}, {}) == 0);
  CHECK(Levenshtein({1, 2, 3}, {1, 2, 3}) == 0);
  CHECK(Levenshtein({1, 2, 3}, {}) == 3);
  CHECK(Levenshtein({}, {1, 2}) == 2);
  CHECK(Levenshtein({0, 1, 2}, {0, 2}) == 1);      // one deletion
  CHECK(Levenshtein({0, 1}, {0, 2, 1}) == 1);      // one insertion
  CHECK(Levenshtein({0, 1, 2}, {0, 7, 2}) == 1);   // one substitution
  CHECK(Levenshtein({0, 1, 0, 1}, {1, 0, 1, 0}) == 2);
}

TEST_CASE("edit distance agrees with an independent full-table oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int32> a(rng.RandInt(0, 8)), b(rng.RandInt(0, 8));
    for (int32 &v : a) v = rng.RandInt(0, 3);
    for (int32 &v : b) v = rng.RandInt(0, 3);
    CHECK(Levenshtein(a, b) == oracle::EditDistance(a, b));
  }
}

TEST_CASE("collapsing repeats keeps one copy per run") {
  CHECK(CollapseRepeats({}) == std::vector<int32>{});
  CHECK(CollapseRepeats({5}) == std::vector<int32>{5});
  CHECK(CollapseRepeats({0, 0, 1, 1, 1, 0}) == std::vector<int32>{0, 1, 0});
  CHECK(CollapseRepeats({2, 2, 2, 2}) == std::vector<int32>{2});
  CHECK(CollapseRepeats({0, 1, 2}) == std::vector<int32>{0, 1, 2});
}

// An identity net over one-hot features makes per-frame argmax decoding
// trivially controllable.
struct DecodeFixture {
  Net net;
  Graph decode_graph;

  DecodeFixture() : net(MakeNet()), decode_graph(MakeGraph()) {}

  static Net MakeNet() {
    NetConfig c;
    c.feature_dim = 3;
    c.context_radius = 0;
    c.hidden_dims = {};
    c.num_labels = 3;
    Net net(c);
    for (int32 o = 0; o < 3; ++o) (*net.MutableParams())[o * 3 + o] = 1.0;
    return net;
  }
  static Graph MakeGraph() {
    // Heavy smoothing: transitions are near-uniform, so decoding follows
    // the emissions.
    return BuildDenominatorGraph(
        EstimateBigramLm({{0, 1, 2}}, 3, 1e6));
  }

  static Utterance OneHot(const std::string &id,
                          const std::vector<int32> &frame_labels,
                          const std::vector<int32> &ref) {
    Utterance u;
    u.id = id;
    u.domain = "toy";
    u.is_test = true;
    u.labels = ref;
    u.features = Matrix(static_cast<int32>(frame_labels.size()), 3);
    for (size_t t = 0; t < frame_labels.size(); ++t)
      u.features(static_cast<int32>(t), frame_labels[t]) = 10.0;
    return u;
  }
};

TEST_CASE("a perfect decode scores zero errors") {
  DecodeFixture fx;
  Utterance u = fx.OneHot("u0", {0, 0, 1, 2, 2}, {0, 1, 2});
  DomainScore score =
      DecodeAndScore(fx.net, fx.decode_graph, "toy", {&u});
  CHECK(score.domain == "toy");
  CHECK(score.num_utts == 1);
  CHECK(score.num_no_path == 0);
  CHECK(score.total_ref_labels == 3);
  CHECK(score.total_edits == 0);
  CHECK(score.ErrorRatePercent() == 0.0);
}

TEST_CASE("a one-of-three decode error scores 33.33 percent") {
  DecodeFixture fx;
  // Decoded sequence collapses to [0, 2]: one deletion against [0, 1, 2].
  Utterance u = fx.OneHot("u0", {0, 2, 2}, {0, 1, 2});
  DomainScore score =
      DecodeAndScore(fx.net, fx.decode_graph, "toy", {&u});
  CHECK(score.total_edits == 1);
  CHECK(score.ErrorRatePercent() == doctest::Approx(100.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("utterances without a complete path count as full deletions") {
  DecodeFixture fx;
  // This graph only accepts one-frame utterances.
  Graph tiny(2, 0, 3);
  tiny.AddArc({0, 1, 0, 0.0});
  tiny.AddArc({0, 1, 1, 0.0});
  tiny.AddArc({0, 1, 2, 0.0});
  tiny.SetFinal(1, 0.0);
  tiny.Finish();
  Utterance ok = fx.OneHot("ok", {1}, {1});
  Utterance dead = fx.OneHot("dead", {0, 1}, {0, 1});
  DomainScore score = DecodeAndScore(fx.net, tiny, "toy", {&ok, &dead});
  CHECK(score.num_utts == 2);
  CHECK(score.num_no_path == 1);
  CHECK(score.total_ref_labels == 3);
  CHECK(score.total_edits == 2);  // both labels of the dead utterance
}

TEST_CASE("scores pool edits rather than averaging per-utterance rates") {
  DecodeFixture fx;
  // u1: 1 edit over 1 label (100%); u2: 0 edits over 9 labels (0%).
  // Micro-average: 1/10 = 10%, not the 50% a mean of rates would give.
  Utterance u1 = fx.OneHot("u1", {0}, {1});
  Utterance u2 = fx.OneHot(
      "u2", {0, 1, 2, 0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2, 0, 1, 2});
  DomainScore score = DecodeAndScore(fx.net, fx.decode_graph, "toy",
                                     {&u1, &u2});
  CHECK(score.total_edits == 1);
  CHECK(score.total_ref_labels == 10);
  CHECK(score.ErrorRatePercent() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("scoring does not depend on the thread count") {
  DecodeFixture fx;
  std::vector<Utterance> utts;
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    std::vector<int32> frames(rng.RandInt(1, 6));
    for (int32 &f : frames) f = rng.RandInt(0, 2);
    utts.push_back(fx.OneHot("u" + std::to_string(i), frames,
                             CollapseRepeats(frames)));
  }
  std::vector<const Utterance *> ptrs;
  for (const Utterance &u : utts) ptrs.push_back(&u);
  DomainScore one = DecodeAndScore(fx.net, fx.decode_graph, "toy", ptrs, 1);
  DomainScore four = DecodeAndScore(fx.net, fx.decode_graph, "toy", ptrs, 4);
  CHECK(one.total_edits == four.total_edits);
  CHECK(one.total_ref_labels == four.total_ref_labels);
  CHECK(one.num_no_path == four.num_no_path);
}

TEST_CASE("error rate over an empty reference is rejected") {
  DomainScore empty;
  empty.domain = "none";
  CHECK_THROWS_AS(empty.ErrorRatePercent(), InvalidInputError);
}

TEST_CASE("gap recovery reproduces the published arithmetic") {
  CHECK(GapRecovery(29.8, 17.7, 42.2) ==
        doctest::Approx(0.5061).epsilon(1e-4));
  CHECK(GapRecovery(27.0, 17.7, 42.2) ==
        doctest::Approx(0.6204).epsilon(1e-4));
  CHECK(GapRecovery(17.7, 17.7, 42.2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(GapRecovery(42.2, 17.7, 42.2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(GapRecovery(20.0, 30.0, 30.0), DegenerateGapError);
}

TEST_CASE("gap recovery is invariant to affine rescaling of the rates") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    double comb = rng.Uniform(5.0, 20.0);
    double ft = comb + rng.Uniform(1.0, 30.0);
    double cl = rng.Uniform(comb, ft + 5.0);
    double a = rng.Uniform(0.5, 3.0), b = rng.Uniform(-2.0, 2.0);
    CHECK(GapRecovery(a * cl + b, a * comb + b, a * ft + b) ==
          doctest::Approx(GapRecovery(cl, comb, ft)).epsilon(1e-9));
  }
}

TEST_CASE("relative learning and forgetting reproduce the published values") {
  CHECK(RelativeLearning(13.3, 15.6) == doctest::Approx(0.1474).epsilon(1e-4));
  CHECK(RelativeLearning(15.6, 15.6) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(RelativeLearning(0.0, 15.6) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(RelativeForgetting(30.6, 18.2) ==
        doctest::Approx(0.6813).epsilon(1e-4));
  CHECK(RelativeForgetting(18.2, 18.2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(RelativeForgetting(36.4, 18.2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(RelativeLearning(10.0, 0.0), InvalidInputError);
  CHECK_THROWS_AS(RelativeForgetting(10.0, 0.0), InvalidInputError);
}

TEST_CASE("the evaluation table prints a triangle with row averages") {
  EvalMatrix m;
  m.domains = {"A", "B", "C"};
  m.rows = {{10.0}, {12.5, 20.0}, {15.0, 22.5, 30.0}};
  CHECK(m.RowAverage(0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(m.RowAverage(1) == doctest::Approx(16.25).epsilon(1e-12));
  CHECK(m.RowAverage(2) == doctest::Approx(22.5).epsilon(1e-12));
  std::string want =
      "step,target,A,B,C,Avg\n"
      "0,A,10.0000,,,10.0000\n"
      "1,B,12.5000,20.0000,,16.2500\n"
      "2,C,15.0000,22.5000,30.0000,22.5000\n";
  CHECK(EvalMatrixCsv(m) == want);
}

TEST_CASE("the metrics table leaves gap recovery blank until it exists") {
  StepMetrics with;
  with.step = 1;
  with.method = "denlwf";
  with.has_gap_recovery = true;
  with.gap_recovery = 0.5061;
  with.rel_learning = 0.1474;
  with.rel_forgetting = 0.6813;
  StepMetrics without;
  without.step = 2;
  without.method = "denlwf";
  without.rel_learning = 0.25;
  without.rel_forgetting = 0.125;
  std::string csv = MetricsCsv({with, without});
  CHECK(csv ==
        "step,method,gap_recovery,rel_learning,rel_forgetting\n"
        "1,denlwf,0.5061,0.1474,0.6813\n"
        "2,denlwf,,0.2500,0.1250\n");
}

}  // namespace
}  // namespace cllab
