// synth/synth.h

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

#ifndef CLLAB_SYNTH_SYNTH_H_
#define CLLAB_SYNTH_SYNTH_H_

#include <string>
#include <vector>

#include "base/matrix.h"
#include "base/rng.h"
#include "graph/graph.h"

namespace cllab {

struct Utterance {
  std::string id;
  Matrix features;             // T x feature_dim
  std::vector<int32> labels;   // reference label sequence
  std::string domain;
  bool is_test = false;
};

struct Dataset {
  std::string domain;
  int32 num_labels = 0;
  int32 feature_dim = 0;
  std::vector<Utterance> utts;

  std::vector<const Utterance *> Train() const;
  std::vector<const Utterance *> Test() const;
  std::vector<std::vector<int32>> TrainTranscripts() const;
};

// A synthetic domain: a label language (bigram LM) plus an emission process.
// Frames are channel_transform * (mean[label] + N(0, noise_std^2 I)) + bias,
// with a per-label duration drawn from frames_per_label range.
struct DomainSpec {
  std::string name;
  uint64 seed = 0;
  int32 num_utts = 0;              // total; every 10th utterance is test
  int32 min_utt_len = 1, max_utt_len = 1;
  BigramLm label_lm;
  Matrix emission_means;           // P x d
  Matrix channel_transform;        // d x d
  std::vector<double> channel_bias;  // d
  double noise_std = 0.0;
  int32 min_frames_per_label = 1, max_frames_per_label = 1;
};

// Deterministic in spec.seed.  Utterances with index % 10 == 9 carry the
// test tag (a 90/10 split).  Throws InvalidInputError on degenerate specs.
Dataset GenerateDomain(const DomainSpec &spec);

// The five-domain expansion benchmark, a pure function of master_seed.
// Domain A is the large seed domain; B reuses A's label language under a
// mild channel rotation; C rotates the channel harder but has the least
// noise; D and E combine rotation with bias shifts and their own label
// languages (E also the noisiest), the hardest targets for a model trained
// on A.
std::vector<DomainSpec> DefaultPipelineSpecs(uint64 master_seed);

// On-disk layout per domain under `dir`:
//   <name>.manifest.json   utterance table (id, split, frame counts, offsets)
//   <name>.features.bin    concatenated row-major T x d little-endian f64
//   <name>.labels.txt      one line of space-separated labels per utterance
// Round-trips bit-exactly.
void SaveDataset(const Dataset &dataset, const std::string &dir);
Dataset LoadDataset(const std::string &dir, const std::string &name);

// gen-data writes `domains.json` naming the pipeline domains in order; these
// helpers read/write it.
void SaveDomainIndex(const std::vector<std::string> &names,
                     const std::string &dir);
std::vector<std::string> LoadDomainIndex(const std::string &dir);

}  // namespace cllab

#endif  // CLLAB_SYNTH_SYNTH_H_
