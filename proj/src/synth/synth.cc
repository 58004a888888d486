// synth/synth.cc

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

#include "synth/synth.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "base/io.h"

namespace cllab {

using nlohmann::json;

std::vector<const Utterance *> Dataset::Train() const {
  std::vector<const Utterance *> out;
  for (const Utterance &u : utts)
    if (!u.is_test) out.push_back(&u);
  return out;
}

std::vector<const Utterance *> Dataset::Test() const {
  std::vector<const Utterance *> out;
  for (const Utterance &u : utts)
    if (u.is_test) out.push_back(&u);
  return out;
}

std::vector<std::vector<int32>> Dataset::TrainTranscripts() const {
  std::vector<std::vector<int32>> out;
  for (const Utterance &u : utts)
    if (!u.is_test) out.push_back(u.labels);
  return out;
}

namespace {

void CheckSpec(const DomainSpec &spec) {
  int32 p = spec.label_lm.num_labels;
  if (spec.name.empty()) throw InvalidInputError("domain spec needs a name");
  if (spec.num_utts < 1) throw InvalidInputError("num_utts must be >= 1");
  if (spec.min_utt_len < 1 || spec.max_utt_len < spec.min_utt_len)
    throw InvalidInputError("bad utterance length range");
  if (spec.min_frames_per_label < 1 ||
      spec.max_frames_per_label < spec.min_frames_per_label)
    throw InvalidInputError("bad frames-per-label range");
  if (!(spec.noise_std > 0.0))
    throw InvalidInputError("noise_std must be positive");
  if (p < 1) throw InvalidInputError("label LM is empty");
  if (spec.emission_means.NumRows() != p)
    throw InvalidInputError("emission_means row count != num labels");
  int32 d = spec.emission_means.NumCols();
  if (d < 1 || spec.channel_transform.NumRows() != d ||
      spec.channel_transform.NumCols() != d ||
      static_cast<int32>(spec.channel_bias.size()) != d)
    throw InvalidInputError("channel transform/bias dimension mismatch");
  spec.label_lm.CheckNormalized(1e-9);
}

std::vector<int32> SampleLabels(const DomainSpec &spec, Rng *rng) {
  int32 p = spec.label_lm.num_labels;
  int32 boundary = spec.label_lm.BoundaryIndex();
  int32 len = rng->RandInt(spec.min_utt_len, spec.max_utt_len);
  std::vector<int32> labels;
  labels.reserve(len);
  std::vector<double> weights(p);
  int32 ctx = boundary;
  for (int32 i = 0; i < len; ++i) {
    // Successor weights restricted to labels (the length is fixed up front,
    // so the end event is excluded and the row renormalizes implicitly).
    for (int32 b = 0; b < p; ++b) {
      double lp = spec.label_lm.LogProb(ctx, b);
      weights[b] = (lp == kLogZero) ? 0.0 : std::exp(lp);
    }
    int32 next = rng->Categorical(weights);
    labels.push_back(next);
    ctx = next;
  }
  return labels;
}

}  // namespace

Dataset GenerateDomain(const DomainSpec &spec) {
  CheckSpec(spec);
  int32 d = spec.emission_means.NumCols();
  Rng rng(spec.seed);
  Dataset dataset;
  dataset.domain = spec.name;
  dataset.num_labels = spec.label_lm.num_labels;
  dataset.feature_dim = d;
  dataset.utts.reserve(spec.num_utts);

  std::vector<double> raw(d);
  for (int32 u = 0; u < spec.num_utts; ++u) {
    Utterance utt;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s_%06d", spec.name.c_str(), u);
    utt.id = idbuf;
    utt.domain = spec.name;
    utt.is_test = (u % 10 == 9);
    utt.labels = SampleLabels(spec, &rng);

    std::vector<int32> durations(utt.labels.size());
    int32 total_frames = 0;
    for (size_t i = 0; i < utt.labels.size(); ++i) {
      durations[i] =
          rng.RandInt(spec.min_frames_per_label, spec.max_frames_per_label);
      total_frames += durations[i];
    }
    utt.features = Matrix(total_frames, d);
    int32 t = 0;
    for (size_t i = 0; i < utt.labels.size(); ++i) {
      const double *mean = spec.emission_means.RowData(utt.labels[i]);
      for (int32 k = 0; k < durations[i]; ++k, ++t) {
        for (int32 j = 0; j < d; ++j)
          raw[j] = mean[j] + spec.noise_std * rng.Gauss();
        double *frame = utt.features.RowData(t);
        for (int32 j = 0; j < d; ++j) {
          double v = spec.channel_bias[j];
          const double *trow = spec.channel_transform.RowData(j);
          for (int32 k2 = 0; k2 < d; ++k2) v += trow[k2] * raw[k2];
          frame[j] = v;
        }
      }
    }
    dataset.utts.push_back(std::move(utt));
  }
  return dataset;
}

namespace {

constexpr int32 kNumLabels = 8;
constexpr int32 kFeatureDim = 6;

// Random bigram language with no immediate label repeats (decoding collapses
// runs of equal labels, so references must be repeat-free).
BigramLm RandomLabelLm(int32 p, Rng *rng) {
  BigramLm lm(p);
  int32 boundary = lm.BoundaryIndex();
  std::vector<double> weights(p + 1);
  for (int32 ctx = 0; ctx <= boundary; ++ctx) {
    int32 num_succ = (ctx == boundary) ? p : p + 1;
    double total = 0.0;
    for (int32 succ = 0; succ < num_succ; ++succ) {
      double w = (succ == ctx) ? 0.0 : std::exp(3.0 * rng->Uniform());
      weights[succ] = w;
      total += w;
    }
    for (int32 succ = 0; succ < num_succ; ++succ)
      lm.LogProb(ctx, succ) =
          (weights[succ] > 0.0) ? std::log(weights[succ] / total) : kLogZero;
  }
  return lm;
}

// I + strength * G with rows Gram-Schmidt orthonormalized: identity at
// strength 0, an increasingly arbitrary rotation as strength grows.
Matrix RandomRotation(int32 d, double strength, Rng *rng) {
  Matrix m(d, d);
  for (int32 i = 0; i < d; ++i)
    for (int32 j = 0; j < d; ++j)
      m(i, j) = (i == j ? 1.0 : 0.0) + strength * rng->Gauss();
  for (int32 i = 0; i < d; ++i) {
    double *row = m.RowData(i);
    for (int32 k = 0; k < i; ++k) {
      const double *prev = m.RowData(k);
      double dot = 0.0;
      for (int32 j = 0; j < d; ++j) dot += row[j] * prev[j];
      for (int32 j = 0; j < d; ++j) row[j] -= dot * prev[j];
    }
    double norm = 0.0;
    for (int32 j = 0; j < d; ++j) norm += row[j] * row[j];
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw NumericalError("degenerate rotation draw");
    for (int32 j = 0; j < d; ++j) row[j] /= norm;
  }
  return m;
}

std::vector<double> RandomBias(int32 d, double scale, Rng *rng) {
  std::vector<double> b(d);
  for (int32 j = 0; j < d; ++j) b[j] = scale * rng->Gauss();
  return b;
}

// Probability-space interpolation of two bigram languages. Domains that
// share one underlying language differ in style, not wholesale statistics,
// so "new" domain languages stay correlated with the seed language.
BigramLm BlendLm(const BigramLm &base_lm, const BigramLm &other, double w) {
  int32 boundary = base_lm.BoundaryIndex();
  BigramLm lm(boundary);
  for (int32 ctx = 0; ctx <= boundary; ++ctx) {
    for (int32 succ = 0; succ <= boundary; ++succ) {
      double p = (1.0 - w) * std::exp(base_lm.LogProb(ctx, succ)) +
                 w * std::exp(other.LogProb(ctx, succ));
      lm.LogProb(ctx, succ) = (p > 0.0) ? std::log(p) : kLogZero;
    }
  }
  return lm;
}

Matrix IdentityMatrix(int32 d) {
  Matrix m(d, d);
  for (int32 j = 0; j < d; ++j) m(j, j) = 1.0;
  return m;
}

}  // namespace

std::vector<DomainSpec> DefaultPipelineSpecs(uint64 master_seed) {
  Rng rng(Rng::DeriveSeed(master_seed, 0x646f6d61696e73ULL));
  Matrix means(kNumLabels, kFeatureDim);
  for (int32 i = 0; i < kNumLabels; ++i)
    for (int32 j = 0; j < kFeatureDim; ++j) means(i, j) = 0.8 * rng.Gauss();

  auto base = [&](const std::string &name, uint64 salt) {
    DomainSpec spec;
    spec.name = name;
    spec.seed = Rng::DeriveSeed(master_seed, 0x64617461ULL, salt);
    spec.min_utt_len = 4;
    spec.max_utt_len = 10;
    spec.min_frames_per_label = 1;
    spec.max_frames_per_label = 3;
    spec.emission_means = means;
    spec.channel_transform = IdentityMatrix(kFeatureDim);
    spec.channel_bias.assign(kFeatureDim, 0.0);
    spec.noise_std = 0.55;
    return spec;
  };

  std::vector<DomainSpec> specs;

  // Totals are chosen so the 90/10 split yields exactly 2000 train
  // utterances for the seed domain and 500 for each expansion domain.
  // B is a mild rotation of the seed channel; C rotates harder but is the
  // cleanest expansion domain; D and E combine rotation and bias shifts with
  // their own label languages (E also the noisiest), making them the hardest
  // domains for the seed model.
  DomainSpec a = base("A", 1);
  a.num_utts = 2222;
  a.label_lm = RandomLabelLm(kNumLabels, &rng);
  specs.push_back(a);

  DomainSpec b = base("B", 2);
  b.num_utts = 555;
  b.label_lm = a.label_lm;
  b.channel_transform = RandomRotation(kFeatureDim, 0.08, &rng);
  b.noise_std = 0.8;
  specs.push_back(b);

  DomainSpec c = base("C", 3);
  c.num_utts = 555;
  c.label_lm = a.label_lm;
  c.channel_transform = RandomRotation(kFeatureDim, 0.2, &rng);
  c.noise_std = 0.55;
  specs.push_back(c);

  DomainSpec dd = base("D", 4);
  dd.num_utts = 555;
  dd.label_lm = BlendLm(a.label_lm, RandomLabelLm(kNumLabels, &rng), 0.3);
  dd.channel_transform = RandomRotation(kFeatureDim, 0.10, &rng);
  dd.channel_bias = RandomBias(kFeatureDim, 0.16, &rng);
  dd.noise_std = 0.8;
  specs.push_back(dd);

  DomainSpec e = base("E", 5);
  e.num_utts = 555;
  e.label_lm = BlendLm(a.label_lm, RandomLabelLm(kNumLabels, &rng), 0.3);
  e.channel_transform = RandomRotation(kFeatureDim, 0.18, &rng);
  e.channel_bias = RandomBias(kFeatureDim, 0.1, &rng);
  e.noise_std = 1.15;
  specs.push_back(e);

  return specs;
}

void SaveDataset(const Dataset &dataset, const std::string &dir) {
  std::string base = dir + "/" + dataset.domain;
  std::ofstream features;
  OpenOrThrow(features, base + ".features.bin");
  std::ostringstream labels;
  json manifest;
  manifest["domain"] = dataset.domain;
  manifest["num_labels"] = dataset.num_labels;
  manifest["feature_dim"] = dataset.feature_dim;
  json utts = json::array();
  int64 offset = 0;
  int32 line = 0;
  for (const Utterance &u : dataset.utts) {
    json ju;
    ju["id"] = u.id;
    ju["split"] = u.is_test ? "test" : "train";
    ju["num_frames"] = u.features.NumRows();
    ju["feature_byte_offset"] = offset;
    ju["label_line"] = line;
    utts.push_back(ju);
    WriteF64Array(features, u.features.Data().data(),
                  static_cast<int64>(u.features.Data().size()));
    offset += static_cast<int64>(u.features.Data().size()) * 8;
    for (size_t i = 0; i < u.labels.size(); ++i) {
      if (i) labels << ' ';
      labels << u.labels[i];
    }
    labels << '\n';
    ++line;
  }
  manifest["utterances"] = std::move(utts);
  WriteTextFile(base + ".labels.txt", labels.str());
  WriteTextFile(base + ".manifest.json", manifest.dump(2) + "\n");
}

Dataset LoadDataset(const std::string &dir, const std::string &name) {
  std::string base = dir + "/" + name;
  json manifest = json::parse(ReadTextFile(base + ".manifest.json"));
  Dataset dataset;
  dataset.domain = manifest.at("domain").get<std::string>();
  dataset.num_labels = manifest.at("num_labels").get<int32>();
  dataset.feature_dim = manifest.at("feature_dim").get<int32>();

  std::ifstream features;
  OpenOrThrow(features, base + ".features.bin");
  std::istringstream labels(ReadTextFile(base + ".labels.txt"));

  for (const json &ju : manifest.at("utterances")) {
    Utterance u;
    u.id = ju.at("id").get<std::string>();
    u.domain = dataset.domain;
    u.is_test = ju.at("split").get<std::string>() == "test";
    int32 t = ju.at("num_frames").get<int32>();
    u.features = Matrix(t, dataset.feature_dim);
    ReadF64Array(features, u.features.Data().data(),
                 static_cast<int64>(u.features.Data().size()));
    std::string line;
    if (!std::getline(labels, line))
      throw IoError("label file shorter than manifest: " + base);
    std::istringstream ls(line);
    int32 l;
    while (ls >> l) u.labels.push_back(l);
    dataset.utts.push_back(std::move(u));
  }
  return dataset;
}

void SaveDomainIndex(const std::vector<std::string> &names,
                     const std::string &dir) {
  json j;
  j["domains"] = names;
  WriteTextFile(dir + "/domains.json", j.dump(2) + "\n");
}

std::vector<std::string> LoadDomainIndex(const std::string &dir) {
  json j = json::parse(ReadTextFile(dir + "/domains.json"));
  return j.at("domains").get<std::vector<std::string>>();
}

}  // namespace cllab
