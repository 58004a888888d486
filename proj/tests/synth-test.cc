// tests/synth-test.cc

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
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "harness/harness.h"
#include "oracles.h"
#include "synth/synth.h"

namespace cllab {
namespace {

Matrix Identity(int32 n) {
  Matrix m(n, n);
  for (int32 i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// A lopsided 4-label language with a small end probability, normalized by
// construction.
BigramLm SpikyLm() {
  int32 p = 4;
  BigramLm lm(p);
  for (int32 a = 0; a < p; ++a) {
    double total = 0.0;
    std::vector<double> w(p);
    for (int32 b = 0; b < p; ++b) {
      w[b] = 1.0 + ((2 * a + b) % 4);
      total += w[b];
    }
    for (int32 b = 0; b < p; ++b)
      lm.LogProb(a, b) = std::log(0.96 * w[b] / total);
    lm.LogProb(a, p) = std::log(0.04);
  }
  for (int32 b = 0; b < p; ++b) lm.LogProb(p, b) = std::log(0.25);
  lm.CheckNormalized(1e-9);
  return lm;
}

DomainSpec SmallSpec() {
  DomainSpec spec;
  spec.name = "toy";
  spec.seed = 77;
  spec.num_utts = 40;
  spec.min_utt_len = 2;
  spec.max_utt_len = 5;
  spec.label_lm = SpikyLm();
  spec.emission_means = Matrix(4, 2);
  for (int32 i = 0; i < 4; ++i)
    for (int32 j = 0; j < 2; ++j)
      spec.emission_means(i, j) = 0.5 * i - 0.8 * j;
  spec.channel_transform = Identity(2);
  spec.channel_bias = {0.0, 0.0};
  spec.noise_std = 0.3;
  spec.min_frames_per_label = 1;
  spec.max_frames_per_label = 2;
  return spec;
}

bool SameDataset(const Dataset &a, const Dataset &b) {
  if (a.domain != b.domain || a.num_labels != b.num_labels ||
      a.feature_dim != b.feature_dim || a.utts.size() != b.utts.size())
    return false;
  for (size_t i = 0; i < a.utts.size(); ++i) {
    const Utterance &x = a.utts[i], &y = b.utts[i];
    if (x.id != y.id || x.domain != y.domain || x.is_test != y.is_test ||
        x.labels != y.labels || !(x.features == y.features))
      return false;
  }
  return true;
}

TEST_CASE("generation is deterministic in the spec seed") {
  DomainSpec spec = SmallSpec();
  Dataset a = GenerateDomain(spec);
  Dataset b = GenerateDomain(spec);
  CHECK(SameDataset(a, b));
  spec.seed = 78;
  CHECK(!SameDataset(a, GenerateDomain(spec)));
}

TEST_CASE("every tenth utterance is tagged as test") {
  Dataset d = GenerateDomain(SmallSpec());
  REQUIRE(d.utts.size() == 40);
  for (size_t i = 0; i < d.utts.size(); ++i)
    CHECK(d.utts[i].is_test == (i % 10 == 9));
  CHECK(d.Train().size() == 36);
  CHECK(d.Test().size() == 4);
  CHECK(d.TrainTranscripts().size() == 36);
  CHECK(d.TrainTranscripts()[0] == d.utts[0].labels);
}

TEST_CASE("utterances respect the configured shape limits") {
  Dataset d = GenerateDomain(SmallSpec());
  CHECK(d.num_labels == 4);
  CHECK(d.feature_dim == 2);
  for (const Utterance &u : d.utts) {
    CHECK(u.labels.size() >= 2);
    CHECK(u.labels.size() <= 5);
    CHECK(u.features.NumRows() >= static_cast<int32>(u.labels.size()));
    CHECK(u.features.NumRows() <= 2 * static_cast<int32>(u.labels.size()));
    CHECK(u.features.NumCols() == 2);
    for (int32 l : u.labels) {
      CHECK(l >= 0);
      CHECK(l < 4);
    }
  }
}

TEST_CASE("with vanishing noise every frame sits on its label mean") {
  DomainSpec spec = SmallSpec();
  spec.noise_std = 1e-12;
  spec.min_frames_per_label = 1;
  spec.max_frames_per_label = 1;  // frame t corresponds to labels[t]
  Dataset d = GenerateDomain(spec);
  for (const Utterance &u : d.utts) {
    REQUIRE(u.features.NumRows() == static_cast<int32>(u.labels.size()));
    for (int32 t = 0; t < u.features.NumRows(); ++t)
      for (int32 j = 0; j < 2; ++j)
        CHECK(std::fabs(u.features(t, j) -
                        spec.emission_means(u.labels[t], j)) < 1e-9);
  }
}

TEST_CASE("label frequencies match the chain's stationary distribution") {
  DomainSpec spec = SmallSpec();
  spec.num_utts = 10000;
  spec.min_utt_len = 40;
  spec.max_utt_len = 40;  // long utterances drown the start-state transient
  spec.min_frames_per_label = 1;
  spec.max_frames_per_label = 1;
  Dataset d = GenerateDomain(spec);
  std::vector<double> counts(4, 0.0);
  double total = 0.0;
  for (const Utterance &u : d.utts)
    for (int32 l : u.labels) {
      counts[l] += 1.0;
      total += 1.0;
    }
  std::vector<double> stationary = oracle::LabelChainStationary(spec.label_lm);
  for (int32 b = 0; b < 4; ++b)
    CHECK(std::fabs(counts[b] / total - stationary[b]) < 0.02);
}

TEST_CASE("degenerate specs are rejected") {
  auto broken = [](auto mutate) {
    DomainSpec spec = SmallSpec();
    mutate(&spec);
    CHECK_THROWS_AS(GenerateDomain(spec), InvalidInputError);
  };
  broken([](DomainSpec *s) { s->noise_std = 0.0; });
  broken([](DomainSpec *s) { s->num_utts = 0; });
  broken([](DomainSpec *s) { s->min_utt_len = 0; });
  broken([](DomainSpec *s) { s->max_utt_len = 1; });  // below min_utt_len
  broken([](DomainSpec *s) { s->min_frames_per_label = 0; });
  broken([](DomainSpec *s) { s->name.clear(); });
  broken([](DomainSpec *s) { s->emission_means = Matrix(3, 2); });
  broken([](DomainSpec *s) { s->channel_bias = {0.0}; });
  broken([](DomainSpec *s) { s->label_lm.LogProb(0, 0) += 0.5; });
}

TEST_CASE("datasets round-trip through the on-disk format bit-exactly") {
  namespace fs = std::filesystem;
  Dataset d = GenerateDomain(SmallSpec());
  fs::path dir = "synth-test-io";
  fs::create_directories(dir);
  SaveDataset(d, dir.string());
  Dataset back = LoadDataset(dir.string(), d.domain);
  CHECK(SameDataset(d, back));

  SaveDomainIndex({"A", "B", "C"}, dir.string());
  CHECK(LoadDomainIndex(dir.string()) ==
        std::vector<std::string>{"A", "B", "C"});
  CHECK_THROWS_AS(LoadDataset(dir.string(), "missing"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("the benchmark specs share one label set and feature space") {
  std::vector<DomainSpec> specs = DefaultPipelineSpecs(1);
  REQUIRE(specs.size() == 5);
  CHECK(specs[0].name == "A");
  CHECK(specs[0].num_utts == 2222);  // 90/10 split -> exactly 2000 train
  for (size_t i = 1; i < 5; ++i) CHECK(specs[i].num_utts == 555);
  for (const DomainSpec &s : specs) {
    CHECK(s.label_lm.num_labels == specs[0].label_lm.num_labels);
    CHECK(s.emission_means.NumRows() == specs[0].emission_means.NumRows());
    CHECK(s.emission_means.NumCols() == specs[0].emission_means.NumCols());
  }
  // B and C keep the seed language; D and E have their own.
  CHECK(specs[1].label_lm.log_probs == specs[0].label_lm.log_probs);
  CHECK(specs[2].label_lm.log_probs == specs[0].label_lm.log_probs);
  CHECK(specs[3].label_lm.log_probs != specs[0].label_lm.log_probs);
  CHECK(specs[4].label_lm.log_probs != specs[0].label_lm.log_probs);
}

TEST_CASE("benchmark spec generation is pure in the master seed") {
  std::vector<DomainSpec> a = DefaultPipelineSpecs(9);
  std::vector<DomainSpec> b = DefaultPipelineSpecs(9);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].num_utts == b[i].num_utts);
    CHECK(a[i].noise_std == b[i].noise_std);
    CHECK(a[i].label_lm.log_probs == b[i].label_lm.log_probs);
    CHECK(a[i].emission_means == b[i].emission_means);
    CHECK(a[i].channel_transform == b[i].channel_transform);
    CHECK(a[i].channel_bias == b[i].channel_bias);
  }
  std::vector<DomainSpec> other = DefaultPipelineSpecs(10);
  CHECK(a[0].emission_means != other[0].emission_means);
}

// Slow test: trains the seed model once on the default benchmark and checks
// the intended difficulty ordering of the expansion domains.
TEST_CASE("seed model finds the shifted-language domains hardest") {
  std::vector<Dataset> datasets;
  for (const DomainSpec &spec : DefaultPipelineSpecs(1))
    datasets.push_back(GenerateDomain(spec));
  PipelineConfig config;
  config.num_threads = 8;
  Graph decode_graph =
      BuildDecodeGraph(datasets, config.decode_lm_smoothing);
  std::vector<IterationRow> log;
  ClState state = TrainSeed(config, datasets, decode_graph, &log);

  REQUIRE(state.seed_eval_domains.size() == 5);
  std::map<std::string, double> err;
  for (size_t i = 0; i < state.seed_eval_domains.size(); ++i)
    err[state.seed_eval_domains[i]] = state.seed_eval_errors[i];
  CHECK(err["D"] > err["B"]);
  CHECK(err["D"] > err["C"]);
  CHECK(err["E"] > err["B"]);
  CHECK(err["E"] > err["C"]);
}

}  // namespace
}  // namespace cllab
