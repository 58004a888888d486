// harness/harness.cc

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

#include "harness/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "base/io.h"
#include "base/parallel.h"
#include "base/rng.h"
#include "fb/forward-backward.h"

namespace cllab {

using nlohmann::json;

namespace {

constexpr char kStateMagic[8] = {'C', 'L', 'L', 'S', 'T', 'A', '0', '1'};
constexpr uint64 kNetInitTag = 0x6e6574696e6974ULL;
constexpr uint64 kShuffleTag = 0x73687566666c65ULL;
constexpr int32 kCombStage = 1000;

enum class Method { kFt, kEwc, kLwf, kDenLwf, kComb };

Method ParseMethod(const std::string &name) {
  if (name == "ft") return Method::kFt;
  if (name == "ewc") return Method::kEwc;
  if (name == "lwf") return Method::kLwf;
  if (name == "denlwf") return Method::kDenLwf;
  if (name == "comb") return Method::kComb;
  throw InvalidInputError("unknown method '" + name +
                          "' (expected ft|ewc|lwf|denlwf|comb)");
}

}  // namespace

double PipelineConfig::ActiveAlpha() const {
  switch (ParseMethod(method)) {
    case Method::kEwc:
      return alpha_ewc;
    case Method::kLwf:
      return alpha_lwf;
    case Method::kDenLwf:
      return alpha_denlwf;
    default:
      return 0.0;
  }
}

void PipelineConfig::Validate() const {
  ParseMethod(method);
  if (alpha_lwf < 0 || alpha_denlwf < 0 || alpha_ewc < 0)
    throw InvalidInputError("regularizer scales must be >= 0");
  if (seed_epochs < 0 || epochs_per_step < 0)
    throw InvalidInputError("epoch counts must be >= 0");
  if (!(learning_rate > 0))
    throw InvalidInputError("learning_rate must be positive");
  if (lr_final_factor < 0)
    throw InvalidInputError("lr_final_factor must be >= 0");
  if (momentum < 0 || momentum >= 1)
    throw InvalidInputError("momentum must be in [0, 1)");
  if (minibatch_size < 1)
    throw InvalidInputError("minibatch_size must be >= 1");
  if (max_param_change < 0)
    throw InvalidInputError("max_param_change must be >= 0");
  if (num_threads < 1) throw InvalidInputError("num_threads must be >= 1");
  if (context_radius < 0)
    throw InvalidInputError("context_radius must be >= 0");
  if (hidden_dims.empty())
    throw InvalidInputError("hidden_dims must name at least one layer");
  for (int32 h : hidden_dims)
    if (h < 1) throw InvalidInputError("hidden layer sizes must be >= 1");
  if (lm_smoothing < 0)
    throw InvalidInputError("lm_smoothing must be >= 0");
  if (decode_lm_smoothing < 0)
    throw InvalidInputError("decode_lm_smoothing must be >= 0");
}

std::string ConfigToJson(const PipelineConfig &c) {
  json j;
  j["method"] = c.method;
  j["alpha_lwf"] = c.alpha_lwf;
  j["alpha_denlwf"] = c.alpha_denlwf;
  j["alpha_ewc"] = c.alpha_ewc;
  j["seed_epochs"] = c.seed_epochs;
  j["epochs_per_step"] = c.epochs_per_step;
  j["learning_rate"] = c.learning_rate;
  j["lr_final_factor"] = c.lr_final_factor;
  j["momentum"] = c.momentum;
  j["minibatch_size"] = c.minibatch_size;
  j["max_param_change"] = c.max_param_change;
  j["master_seed"] = c.master_seed;
  j["num_threads"] = c.num_threads;
  j["context_radius"] = c.context_radius;
  j["hidden_dims"] = c.hidden_dims;
  j["numerator_self_loops"] = c.numerator_self_loops;
  j["denlwf_include_offset"] = c.denlwf_include_offset;
  j["gamma_src_prev_graph"] = c.gamma_src_prev_graph;
  j["freeze_den_graph"] = c.freeze_den_graph;
  j["lm_smoothing"] = c.lm_smoothing;
  j["decode_lm_smoothing"] = c.decode_lm_smoothing;
  return j.dump(2) + "\n";
}

PipelineConfig ConfigFromJson(const std::string &text) {
  json j = json::parse(text);
  PipelineConfig c;
  c.method = j.at("method").get<std::string>();
  c.alpha_lwf = j.at("alpha_lwf").get<double>();
  c.alpha_denlwf = j.at("alpha_denlwf").get<double>();
  c.alpha_ewc = j.at("alpha_ewc").get<double>();
  c.seed_epochs = j.at("seed_epochs").get<int32>();
  c.epochs_per_step = j.at("epochs_per_step").get<int32>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_final_factor = j.at("lr_final_factor").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.minibatch_size = j.at("minibatch_size").get<int32>();
  c.max_param_change = j.at("max_param_change").get<double>();
  c.master_seed = j.at("master_seed").get<uint64>();
  c.num_threads = j.at("num_threads").get<int32>();
  c.context_radius = j.at("context_radius").get<int32>();
  c.hidden_dims = j.at("hidden_dims").get<std::vector<int32>>();
  c.numerator_self_loops = j.at("numerator_self_loops").get<bool>();
  c.denlwf_include_offset = j.at("denlwf_include_offset").get<bool>();
  c.gamma_src_prev_graph = j.at("gamma_src_prev_graph").get<bool>();
  c.freeze_den_graph = j.at("freeze_den_graph").get<bool>();
  c.lm_smoothing = j.at("lm_smoothing").get<double>();
  c.decode_lm_smoothing = j.at("decode_lm_smoothing").get<double>();
  c.Validate();
  return c;
}

namespace {

std::string Trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool ParseBool(const std::string &v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidInputError("expected a boolean, got '" + v + "'");
}

double ParseDouble(const std::string &v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception &) {
    throw InvalidInputError("expected a number, got '" + v + "'");
  }
}

int32 ParseInt(const std::string &v) {
  try {
    size_t pos = 0;
    long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int32>(i);
  } catch (const std::exception &) {
    throw InvalidInputError("expected an integer, got '" + v + "'");
  }
}

uint64 ParseU64(const std::string &v) {
  try {
    size_t pos = 0;
    uint64 i = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception &) {
    throw InvalidInputError("expected an unsigned integer, got '" + v + "'");
  }
}

std::vector<int32> ParseIntList(const std::string &v) {
  std::vector<int32> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(ParseInt(Trim(item)));
  if (out.empty()) throw InvalidInputError("expected a comma-separated list");
  return out;
}

}  // namespace

void ApplyAssignment(PipelineConfig *c, const std::string &key,
                     const std::string &value) {
  if (key == "method") c->method = value;
  else if (key == "alpha_lwf") c->alpha_lwf = ParseDouble(value);
  else if (key == "alpha_denlwf") c->alpha_denlwf = ParseDouble(value);
  else if (key == "alpha_ewc") c->alpha_ewc = ParseDouble(value);
  else if (key == "seed_epochs") c->seed_epochs = ParseInt(value);
  else if (key == "epochs_per_step") c->epochs_per_step = ParseInt(value);
  else if (key == "learning_rate") c->learning_rate = ParseDouble(value);
  else if (key == "lr_final_factor") c->lr_final_factor = ParseDouble(value);
  else if (key == "momentum") c->momentum = ParseDouble(value);
  else if (key == "minibatch_size") c->minibatch_size = ParseInt(value);
  else if (key == "max_param_change")
    c->max_param_change = ParseDouble(value);
  else if (key == "master_seed") c->master_seed = ParseU64(value);
  else if (key == "num_threads") c->num_threads = ParseInt(value);
  else if (key == "context_radius") c->context_radius = ParseInt(value);
  else if (key == "hidden_dims") c->hidden_dims = ParseIntList(value);
  else if (key == "numerator_self_loops")
    c->numerator_self_loops = ParseBool(value);
  else if (key == "denlwf_include_offset")
    c->denlwf_include_offset = ParseBool(value);
  else if (key == "gamma_src_prev_graph")
    c->gamma_src_prev_graph = ParseBool(value);
  else if (key == "freeze_den_graph") c->freeze_den_graph = ParseBool(value);
  else if (key == "lm_smoothing") c->lm_smoothing = ParseDouble(value);
  else if (key == "decode_lm_smoothing")
    c->decode_lm_smoothing = ParseDouble(value);
  else
    throw InvalidInputError("unknown config key '" + key + "'");
}

void ApplyConfigFile(PipelineConfig *config, const std::string &text) {
  std::istringstream is(text);
  std::string line;
  int32 lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("config line " + std::to_string(lineno) +
                              " has no '='");
    ApplyAssignment(config, Trim(line.substr(0, eq)),
                    Trim(line.substr(eq + 1)));
  }
}

void SaveClState(const ClState &state, const std::string &path) {
  std::ofstream os;
  OpenOrThrow(os, path);
  WriteMagic(os, kStateMagic);
  state.model.Save(os);
  WriteI32(os, state.step);
  WriteI64(os, static_cast<int64>(state.domains_seen.size()));
  for (const std::string &d : state.domains_seen) WriteString(os, d);
  WriteI64(os, static_cast<int64>(state.snapshots.size()));
  for (const ClSnapshot &s : state.snapshots) WriteSnapshot(os, s);
  WriteReferenceCache(os, state.ref_posteriors);
  WriteReferenceCache(os, state.ref_den_occupancies);
  WriteU8(os, state.last_den_graph.NumStates() > 0 ? 1 : 0);
  if (state.last_den_graph.NumStates() > 0)
    WriteString(os, GraphToString(state.last_den_graph));
  WriteI64(os, static_cast<int64>(state.eval_history.domains.size()));
  for (const std::string &d : state.eval_history.domains) WriteString(os, d);
  WriteI64(os, static_cast<int64>(state.eval_history.rows.size()));
  for (const std::vector<double> &row : state.eval_history.rows) {
    WriteI64(os, static_cast<int64>(row.size()));
    WriteF64Array(os, row.data(), static_cast<int64>(row.size()));
  }
  WriteI64(os, static_cast<int64>(state.metrics.size()));
  for (const StepMetrics &m : state.metrics) {
    WriteI32(os, m.step);
    WriteString(os, m.method);
    WriteU8(os, m.has_gap_recovery ? 1 : 0);
    WriteF64(os, m.gap_recovery);
    WriteF64(os, m.rel_learning);
    WriteF64(os, m.rel_forgetting);
  }
  WriteI64(os, static_cast<int64>(state.seed_eval_domains.size()));
  for (size_t i = 0; i < state.seed_eval_domains.size(); ++i) {
    WriteString(os, state.seed_eval_domains[i]);
    WriteF64(os, state.seed_eval_errors[i]);
  }
  if (!os) throw IoError("failed writing " + path);
}

ClState LoadClState(const std::string &path) {
  std::ifstream is;
  OpenOrThrow(is, path);
  ExpectMagic(is, kStateMagic);
  ClState state;
  state.model = Net::Load(is);
  state.step = ReadI32(is);
  int64 n = ReadI64(is);
  for (int64 i = 0; i < n; ++i) state.domains_seen.push_back(ReadString(is));
  n = ReadI64(is);
  for (int64 i = 0; i < n; ++i) state.snapshots.push_back(ReadSnapshot(is));
  state.ref_posteriors = ReadReferenceCache(is);
  state.ref_den_occupancies = ReadReferenceCache(is);
  if (ReadU8(is)) state.last_den_graph = GraphFromString(ReadString(is));
  n = ReadI64(is);
  for (int64 i = 0; i < n; ++i)
    state.eval_history.domains.push_back(ReadString(is));
  n = ReadI64(is);
  for (int64 i = 0; i < n; ++i) {
    std::vector<double> row(ReadI64(is));
    ReadF64Array(is, row.data(), static_cast<int64>(row.size()));
    state.eval_history.rows.push_back(std::move(row));
  }
  n = ReadI64(is);
  for (int64 i = 0; i < n; ++i) {
    StepMetrics m;
    m.step = ReadI32(is);
    m.method = ReadString(is);
    m.has_gap_recovery = ReadU8(is) != 0;
    m.gap_recovery = ReadF64(is);
    m.rel_learning = ReadF64(is);
    m.rel_forgetting = ReadF64(is);
    state.metrics.push_back(m);
  }
  n = ReadI64(is);
  for (int64 i = 0; i < n; ++i) {
    state.seed_eval_domains.push_back(ReadString(is));
    state.seed_eval_errors.push_back(ReadF64(is));
  }
  return state;
}

std::string IterationCsv(const std::vector<IterationRow> &rows) {
  std::ostringstream os;
  os << "iteration,f_mmi,f_reg,lwf_ce\n";
  for (const IterationRow &r : rows) {
    os << r.iteration << ',' << FullPrecision(r.f_mmi) << ','
       << FullPrecision(r.f_reg) << ',';
    if (r.has_lwf_ce) os << FullPrecision(r.lwf_ce);
    os << '\n';
  }
  return os.str();
}

Graph BuildDecodeGraph(const std::vector<Dataset> &datasets,
                       double smoothing) {
  if (datasets.empty()) throw InvalidInputError("no datasets");
  std::vector<std::vector<int32>> transcripts;
  for (const Dataset &d : datasets) {
    if (d.num_labels != datasets[0].num_labels)
      throw InvalidInputError("datasets disagree on the label count");
    std::vector<std::vector<int32>> part = d.TrainTranscripts();
    for (std::vector<int32> &t : part) transcripts.push_back(std::move(t));
  }
  return BuildDenominatorGraph(
      EstimateBigramLm(transcripts, datasets[0].num_labels, smoothing));
}

Graph BuildStepDenGraph(const Dataset &dataset, double smoothing) {
  return BuildDenominatorGraph(
      EstimateBigramLm(dataset.TrainTranscripts(), dataset.num_labels,
                       smoothing));
}

const Dataset &FindDataset(const std::vector<Dataset> &datasets,
                           const std::string &name) {
  const Dataset *found = nullptr;
  for (const Dataset &d : datasets) {
    if (d.domain == name) {
      if (found) throw InvalidInputError("duplicate domain '" + name + "'");
      found = &d;
    }
  }
  if (!found) throw InvalidInputError("no dataset for domain '" + name + "'");
  return *found;
}

namespace {

struct TrainContext {
  Method method = Method::kFt;
  double alpha = 0.0;
  const Graph *den_graph = nullptr;
  const ReferenceCache *y_src = nullptr;      // lwf grad; lwf+denlwf logging
  const ReferenceCache *gamma_src = nullptr;  // denlwf grad
  const std::vector<ClSnapshot> *snapshots = nullptr;  // ewc
  bool include_offset = true;
  bool numerator_self_loops = true;
  int32 stage = 0;  // shuffle-stream index and error context
};

// Minibatch SGD over shuffled utterances; gradients are summed across the
// batch and applied in one ascent step.  Per-utterance work may run on
// several threads; the reduction is in slot order, so results match the
// single-threaded run bitwise.
void TrainOnUtterances(Net *net, const std::vector<const Utterance *> &train,
                       const TrainContext &ctx, const PipelineConfig &config,
                       int32 epochs, std::vector<IterationRow> *log) {
  struct Slot {
    std::vector<double> grad;
    double mmi = 0.0, reg = 0.0, ce = 0.0;
    int64 frames = 0;
    bool used = false;
    std::string skip_msg;
  };
  int32 n = static_cast<int32>(train.size());
  int32 batch = std::min(config.minibatch_size, n);
  int64 iters_per_epoch = (n + batch - 1) / batch;
  int64 total_iters = static_cast<int64>(epochs) * iters_per_epoch;
  bool want_ce = ctx.method == Method::kLwf || ctx.method == Method::kDenLwf;

  std::vector<int32> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(net->NumParams(), 0.0);
  std::vector<double> batch_grad(net->NumParams());
  std::vector<double> ewc_grad;
  int32 iteration = 0;

  for (int32 epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng(Rng::DeriveSeed(config.master_seed, kShuffleTag,
                                    static_cast<uint64>(ctx.stage),
                                    static_cast<uint64>(epoch)));
    shuffle_rng.Shuffle(&order);
    for (int32 begin = 0; begin < n; begin += batch) {
      int32 size = std::min(batch, n - begin);
      std::vector<Slot> slots(size);
      ParallelFor(size, config.num_threads, [&](int32 i) {
        const Utterance *utt = train[order[begin + i]];
        Slot &slot = slots[i];
        try {
          ForwardCache cache;
          EmissionMatrix emissions = net->Forward(utt->features, &cache);
          Graph num = BuildNumeratorGraph(utt->labels,
                                          net->Config().num_labels,
                                          ctx.numerator_self_loops);
          LossResult mmi = LfMmi(num, *ctx.den_graph, emissions);
          slot.mmi = mmi.objective;
          Matrix grad_em = std::move(mmi.grad_wrt_emissions);
          if (want_ce) {
            auto ref = ctx.y_src->find(utt->id);
            if (ref == ctx.y_src->end())
              throw InvalidInputError("missing reference posteriors for " +
                                      utt->id);
            LossResult unit = Lwf(emissions, ref->second, 1.0);
            slot.ce = unit.objective;
            if (ctx.method == Method::kLwf) {
              slot.reg = ctx.alpha * unit.objective;
              double *g = grad_em.Data().data();
              const double *r = unit.grad_wrt_emissions.Data().data();
              for (size_t k = 0; k < grad_em.Data().size(); ++k)
                g[k] += ctx.alpha * r[k];
            }
          }
          if (ctx.method == Method::kDenLwf) {
            auto ref = ctx.gamma_src->find(utt->id);
            if (ref != ctx.gamma_src->end()) {
              LossResult den = DenLwf(*ctx.den_graph, emissions, ref->second,
                                      ctx.alpha, ctx.include_offset);
              slot.reg = den.objective;
              double *g = grad_em.Data().data();
              const double *r = den.grad_wrt_emissions.Data().data();
              for (size_t k = 0; k < grad_em.Data().size(); ++k) g[k] += r[k];
            }
          }
          slot.frames = emissions.NumRows();
          slot.grad = net->Backward(cache, grad_em);
          slot.used = true;
        } catch (const NoPathError &e) {
          slot.skip_msg = "training: dropping " + utt->id + ": " + e.what();
        }
      });

      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      double mmi_sum = 0.0, reg_sum = 0.0, ce_sum = 0.0;
      int64 frames = 0;
      int32 used = 0;
      for (const Slot &slot : slots) {
        if (!slot.used) {
          LogWarn(slot.skip_msg);
          continue;
        }
        for (size_t k = 0; k < batch_grad.size(); ++k)
          batch_grad[k] += slot.grad[k];
        mmi_sum += slot.mmi;
        reg_sum += slot.reg;
        ce_sum += slot.ce;
        frames += slot.frames;
        ++used;
      }
      if (used == 0) {
        LogWarn("training: entire minibatch dropped at iteration " +
                std::to_string(iteration) + "; no update");
        continue;
      }
      if (ctx.method == Method::kEwc) {
        reg_sum = EwcPenalty(*net->MutableParams(), *ctx.snapshots, ctx.alpha,
                             &ewc_grad);
        for (size_t k = 0; k < batch_grad.size(); ++k)
          batch_grad[k] += ewc_grad[k];
      }
      if (!std::isfinite(mmi_sum) || !std::isfinite(reg_sum))
        throw NumericalError("objective diverged at stage " +
                             std::to_string(ctx.stage) + " iteration " +
                             std::to_string(iteration));
      double progress = total_iters > 1
                            ? static_cast<double>(iteration) /
                                  static_cast<double>(total_iters - 1)
                            : 0.0;
      double lr = config.learning_rate *
                  (1.0 + (config.lr_final_factor - 1.0) * progress);
      if (config.max_param_change > 0) {
        double norm2 = 0.0;
        for (size_t k = 0; k < batch_grad.size(); ++k) {
          double v = config.momentum * velocity[k] + batch_grad[k];
          norm2 += v * v;
        }
        double change = lr * std::sqrt(norm2);
        if (change > config.max_param_change)
          lr *= config.max_param_change / change;
      }
      SgdStep(net->MutableParams(), batch_grad, lr, config.momentum,
              &velocity);

      IterationRow row;
      row.iteration = iteration;
      row.f_mmi = mmi_sum / used;
      row.f_reg = ctx.method == Method::kEwc ? reg_sum : reg_sum / used;
      if (want_ce && frames > 0) {
        row.has_lwf_ce = true;
        row.lwf_ce = -ce_sum / static_cast<double>(frames);
      }
      if (log) log->push_back(row);
      ++iteration;
    }
  }
}

std::vector<double> EvaluateRow(const Net &net, const Graph &decode_graph,
                                const std::vector<Dataset> &datasets,
                                const std::vector<std::string> &names,
                                int32 num_threads) {
  std::vector<double> row;
  row.reserve(names.size());
  for (const std::string &name : names) {
    const Dataset &d = FindDataset(datasets, name);
    row.push_back(DecodeAndScore(net, decode_graph, name, d.Test(),
                                 num_threads)
                      .ErrorRatePercent());
  }
  return row;
}

}  // namespace

ClState TrainSeed(const PipelineConfig &config,
                  const std::vector<Dataset> &datasets,
                  const Graph &decode_graph, std::vector<IterationRow> *log) {
  config.Validate();
  if (datasets.empty()) throw InvalidInputError("train_seed: no datasets");
  const Dataset &seed_data = datasets[0];
  std::vector<const Utterance *> train = seed_data.Train();
  if (train.empty())
    throw InvalidInputError("train_seed: seed domain has no training data");

  NetConfig net_config;
  net_config.feature_dim = seed_data.feature_dim;
  net_config.num_labels = seed_data.num_labels;
  net_config.context_radius = config.context_radius;
  net_config.hidden_dims = config.hidden_dims;
  Rng init_rng(Rng::DeriveSeed(config.master_seed, kNetInitTag));

  ClState state;
  state.model = Net(net_config, &init_rng);
  Graph den = BuildStepDenGraph(seed_data, config.lm_smoothing);

  TrainContext ctx;  // plain LF-MMI regardless of config.method
  ctx.den_graph = &den;
  ctx.numerator_self_loops = config.numerator_self_loops;
  ctx.stage = 0;
  TrainOnUtterances(&state.model, train, ctx, config, config.seed_epochs,
                    log);

  state.step = 0;
  state.domains_seen = {seed_data.domain};
  state.last_den_graph = std::move(den);
  for (const Dataset &d : datasets) {
    state.seed_eval_domains.push_back(d.domain);
    state.seed_eval_errors.push_back(
        DecodeAndScore(state.model, decode_graph, d.domain, d.Test(),
                       config.num_threads)
            .ErrorRatePercent());
  }
  state.eval_history.domains = {seed_data.domain};
  state.eval_history.rows = {{state.seed_eval_errors[0]}};
  return state;
}

void ExpandStep(ClState *state, const Dataset &target,
                const std::vector<Dataset> &datasets,
                const Graph &decode_graph, const PipelineConfig &config,
                std::vector<IterationRow> *log) {
  config.Validate();
  Method method = ParseMethod(config.method);
  if (method == Method::kComb)
    throw InvalidInputError("comb is a joint baseline, not an expansion "
                            "method");
  if (state->domains_seen.empty())
    throw InvalidInputError("expand_step: state has no trained model");
  std::vector<const Utterance *> train = target.Train();
  if (train.empty())
    throw InvalidInputError("expand_step: target '" + target.domain +
                            "' has no training data");
  int32 new_step = state->step + 1;

  Graph den = config.freeze_den_graph
                  ? state->last_den_graph
                  : BuildStepDenGraph(target, config.lm_smoothing);

  double cwer_src = DecodeAndScore(state->model, decode_graph, target.domain,
                                   target.Test(), config.num_threads)
                        .ErrorRatePercent();

  state->ref_posteriors.clear();
  state->ref_den_occupancies.clear();
  if (method == Method::kLwf || method == Method::kDenLwf)
    state->ref_posteriors = ComputeReferencePosteriors(state->model, train);
  if (method == Method::kDenLwf) {
    const Graph &src_graph =
        config.gamma_src_prev_graph ? state->last_den_graph : den;
    state->ref_den_occupancies =
        ComputeReferenceDenOccupancies(state->model, src_graph, train);
  }
  if (method == Method::kEwc) {
    bool present = false;
    for (const ClSnapshot &s : state->snapshots)
      if (s.step == state->step) present = true;
    if (!present) {
      const Dataset &source = FindDataset(datasets,
                                          state->domains_seen.back());
      ClSnapshot snap;
      snap.step = state->step;
      snap.params = state->model.Params();
      snap.fisher = EstimateFisher(state->model, source.Train(),
                                   state->last_den_graph,
                                   config.numerator_self_loops);
      state->snapshots.push_back(std::move(snap));
    }
  }

  TrainContext ctx;
  ctx.method = method;
  ctx.alpha = config.ActiveAlpha();
  ctx.den_graph = &den;
  ctx.y_src = &state->ref_posteriors;
  ctx.gamma_src = &state->ref_den_occupancies;
  ctx.snapshots = &state->snapshots;
  ctx.include_offset = config.denlwf_include_offset;
  ctx.numerator_self_loops = config.numerator_self_loops;
  ctx.stage = new_step;
  TrainOnUtterances(&state->model, train, ctx, config,
                    config.epochs_per_step, log);

  state->step = new_step;
  state->domains_seen.push_back(target.domain);
  state->last_den_graph = std::move(den);
  state->eval_history.domains.push_back(target.domain);
  std::vector<double> row = EvaluateRow(state->model, decode_graph, datasets,
                                        state->domains_seen,
                                        config.num_threads);
  state->eval_history.rows.push_back(row);

  StepMetrics m;
  m.step = new_step;
  m.method = config.method;
  m.rel_learning = RelativeLearning(row.back(), cwer_src);
  double past = 0.0;
  for (size_t i = 0; i + 1 < row.size(); ++i) past += row[i];
  past /= static_cast<double>(row.size() - 1);
  m.rel_forgetting =
      RelativeForgetting(past, state->eval_history.RowAverage(new_step - 1));
  state->metrics.push_back(m);
}

CombResult TrainCombined(const PipelineConfig &config,
                         const std::vector<Dataset> &datasets,
                         const Graph &decode_graph,
                         std::vector<IterationRow> *log) {
  config.Validate();
  if (datasets.empty()) throw InvalidInputError("train_combined: no datasets");
  std::vector<const Utterance *> train;
  for (const Dataset &d : datasets) {
    if (d.num_labels != datasets[0].num_labels ||
        d.feature_dim != datasets[0].feature_dim)
      throw InvalidInputError("datasets disagree on label/feature dims");
    for (const Utterance *u : d.Train()) train.push_back(u);
  }
  if (train.empty())
    throw InvalidInputError("train_combined: no training data");

  NetConfig net_config;
  net_config.feature_dim = datasets[0].feature_dim;
  net_config.num_labels = datasets[0].num_labels;
  net_config.context_radius = config.context_radius;
  net_config.hidden_dims = config.hidden_dims;
  Rng init_rng(Rng::DeriveSeed(config.master_seed, kNetInitTag));

  CombResult result;
  result.model = Net(net_config, &init_rng);
  Graph den = BuildDecodeGraph(datasets, config.lm_smoothing);
  TrainContext ctx;
  ctx.den_graph = &den;  // all-domain bigram at training smoothing
  ctx.numerator_self_loops = config.numerator_self_loops;
  ctx.stage = kCombStage;
  TrainOnUtterances(&result.model, train, ctx, config, config.seed_epochs,
                    log);

  for (const Dataset &d : datasets) result.domains.push_back(d.domain);
  result.errors = EvaluateRow(result.model, decode_graph, datasets,
                              result.domains, config.num_threads);
  result.triangle.domains = result.domains;
  for (size_t k = 0; k < result.domains.size(); ++k)
    result.triangle.rows.emplace_back(result.errors.begin(),
                                      result.errors.begin() + k + 1);
  return result;
}

std::vector<SweepRow> SweepAlpha(const PipelineConfig &config,
                                 const ClState &source, const Dataset &target,
                                 const std::vector<Dataset> &datasets,
                                 const Graph &decode_graph,
                                 const std::vector<double> &alphas,
                                 const std::vector<std::string> &methods) {
  if (alphas.empty() || methods.empty())
    throw InvalidInputError("sweep needs at least one alpha and one method");
  std::vector<SweepRow> rows;
  for (const std::string &method : methods) {
    for (double alpha : alphas) {
      PipelineConfig c = config;
      c.method = method;
      switch (ParseMethod(method)) {
        case Method::kEwc: c.alpha_ewc = alpha; break;
        case Method::kLwf: c.alpha_lwf = alpha; break;
        case Method::kDenLwf: c.alpha_denlwf = alpha; break;
        case Method::kFt: break;
        case Method::kComb:
          throw InvalidInputError("comb cannot be swept");
      }
      ClState state = source;
      ExpandStep(&state, target, datasets, decode_graph, c, nullptr);
      SweepRow row;
      row.method = method;
      row.alpha = alpha;
      row.errors = state.eval_history.rows.back();
      row.average = state.eval_history.RowAverage(state.step);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow> &rows,
                     const std::vector<std::string> &domains) {
  std::ostringstream os;
  os << "method,alpha";
  for (const std::string &d : domains) os << ',' << d;
  os << ",avg\n";
  for (const SweepRow &r : rows) {
    if (r.errors.size() != domains.size())
      throw InvalidInputError("sweep row domain count mismatch");
    os << r.method << ',' << FullPrecision(r.alpha);
    for (double e : r.errors) os << ',' << FullPrecision(e);
    os << ',' << FullPrecision(r.average) << '\n';
  }
  return os.str();
}

namespace {

json StateSummaryJson(const ClState &state, const PipelineConfig &config) {
  json j;
  j["method"] = config.method;
  j["alpha"] = config.ActiveAlpha();
  j["master_seed"] = config.master_seed;
  j["domains"] = state.eval_history.domains;
  j["seed_eval_domains"] = state.seed_eval_domains;
  j["seed_eval_errors"] = state.seed_eval_errors;
  j["eval_rows"] = state.eval_history.rows;
  std::vector<double> averages;
  for (size_t k = 0; k < state.eval_history.rows.size(); ++k)
    averages.push_back(state.eval_history.RowAverage(static_cast<int32>(k)));
  j["row_averages"] = averages;
  json metrics = json::array();
  for (const StepMetrics &m : state.metrics) {
    json jm;
    jm["step"] = m.step;
    jm["method"] = m.method;
    jm["rel_learning"] = m.rel_learning;
    jm["rel_forgetting"] = m.rel_forgetting;
    metrics.push_back(std::move(jm));
  }
  j["metrics"] = std::move(metrics);
  return j;
}

std::string StepTag(int32 step) { return "step_" + std::to_string(step); }

void EnsureRunDirs(const std::string &run_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  fs::create_directories(fs::path(run_dir) / "state");
  fs::create_directories(fs::path(run_dir) / "logs");
  fs::create_directories(fs::path(run_dir) / "results");
}

}  // namespace

void WriteRunConfig(const PipelineConfig &config, const std::string &run_dir) {
  EnsureRunDirs(run_dir);
  WriteTextFile(run_dir + "/config.json", ConfigToJson(config));
}

void WriteStepArtifacts(const ClState &state,
                        const std::vector<IterationRow> &log,
                        const std::string &run_dir) {
  EnsureRunDirs(run_dir);
  std::string tag = StepTag(state.step);
  state.model.SaveFile(run_dir + "/checkpoints/" + tag + ".bin");
  SaveClState(state, run_dir + "/state/" + tag + ".clstate");
  WriteTextFile(run_dir + "/logs/" + tag + "_iters.csv", IterationCsv(log));
}

void WriteResults(const ClState &state, const PipelineConfig &config,
                  const std::string &run_dir) {
  EnsureRunDirs(run_dir);
  WriteTextFile(run_dir + "/results/eval_matrix.csv",
                EvalMatrixCsv(state.eval_history));
  WriteTextFile(run_dir + "/results/metrics.csv", MetricsCsv(state.metrics));
  WriteTextFile(run_dir + "/results/summary.json",
                StateSummaryJson(state, config).dump(2) + "\n");
}

ClState RunMethodPipeline(const PipelineConfig &config,
                          const std::vector<Dataset> &datasets,
                          const std::string &run_dir) {
  config.Validate();
  if (ParseMethod(config.method) == Method::kComb)
    throw InvalidInputError("use RunCombPipeline for the comb baseline");
  WriteRunConfig(config, run_dir);
  Graph decode_graph = BuildDecodeGraph(datasets, config.decode_lm_smoothing);
  std::vector<IterationRow> log;
  ClState state = TrainSeed(config, datasets, decode_graph, &log);
  WriteStepArtifacts(state, log, run_dir);
  for (size_t k = 1; k < datasets.size(); ++k) {
    log.clear();
    ExpandStep(&state, datasets[k], datasets, decode_graph, config, &log);
    WriteStepArtifacts(state, log, run_dir);
  }
  WriteResults(state, config, run_dir);
  return state;
}

CombResult RunCombPipeline(const PipelineConfig &config,
                           const std::vector<Dataset> &datasets,
                           const std::string &run_dir) {
  config.Validate();
  WriteRunConfig(config, run_dir);
  Graph decode_graph = BuildDecodeGraph(datasets, config.decode_lm_smoothing);
  std::vector<IterationRow> log;
  CombResult result = TrainCombined(config, datasets, decode_graph, &log);
  result.model.SaveFile(run_dir + "/checkpoints/comb.bin");
  WriteTextFile(run_dir + "/logs/comb_iters.csv", IterationCsv(log));
  WriteTextFile(run_dir + "/results/eval_matrix.csv",
                EvalMatrixCsv(result.triangle));
  json j;
  j["method"] = config.method;
  j["alpha"] = 0.0;
  j["master_seed"] = config.master_seed;
  j["domains"] = result.domains;
  j["errors"] = result.errors;
  j["eval_rows"] = result.triangle.rows;
  std::vector<double> averages;
  for (size_t k = 0; k < result.triangle.rows.size(); ++k)
    averages.push_back(result.triangle.RowAverage(static_cast<int32>(k)));
  j["row_averages"] = averages;
  j["metrics"] = json::array();
  WriteTextFile(run_dir + "/results/summary.json", j.dump(2) + "\n");
  return result;
}

void RunPipeline(const PipelineConfig &config,
                 const std::vector<Dataset> &datasets,
                 const std::string &run_dir) {
  if (ParseMethod(config.method) == Method::kComb)
    RunCombPipeline(config, datasets, run_dir);
  else
    RunMethodPipeline(config, datasets, run_dir);
}

namespace {

json LoadSummary(const std::string &run_dir) {
  return json::parse(ReadTextFile(run_dir + "/results/summary.json"));
}

std::string Fixed2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void WriteReport(const std::string &run_dir, const std::string &ft_run,
                 const std::string &comb_run) {
  json summary = LoadSummary(run_dir);
  std::string method = summary.at("method").get<std::string>();
  std::vector<std::string> domains =
      summary.at("domains").get<std::vector<std::string>>();
  std::vector<std::vector<double>> rows =
      summary.at("eval_rows").get<std::vector<std::vector<double>>>();
  std::vector<double> averages =
      summary.at("row_averages").get<std::vector<double>>();

  bool have_refs = !ft_run.empty() && !comb_run.empty();
  std::vector<double> ft_avg, comb_avg;
  if (have_refs) {
    json ft = LoadSummary(ft_run);
    json comb = LoadSummary(comb_run);
    if (ft.at("method").get<std::string>() != "ft")
      throw InvalidInputError("--ft-run does not point at an ft run");
    if (comb.at("method").get<std::string>() != "comb")
      throw InvalidInputError("--comb-run does not point at a comb run");
    ft_avg = ft.at("row_averages").get<std::vector<double>>();
    comb_avg = comb.at("row_averages").get<std::vector<double>>();
    if (ft_avg.size() < rows.size() || comb_avg.size() < rows.size())
      throw InvalidInputError("reference runs cover fewer steps than the "
                              "reported run");
    if (ft.at("master_seed") != summary.at("master_seed") ||
        comb.at("master_seed") != summary.at("master_seed"))
      LogWarn("report: reference runs use a different master_seed");
  } else if (!ft_run.empty() || !comb_run.empty()) {
    throw InvalidInputError("gap recovery needs both --ft-run and "
                            "--comb-run");
  }

  std::vector<StepMetrics> metrics;
  for (const json &jm : summary.at("metrics")) {
    StepMetrics m;
    m.step = jm.at("step").get<int32>();
    m.method = jm.at("method").get<std::string>();
    m.rel_learning = jm.at("rel_learning").get<double>();
    m.rel_forgetting = jm.at("rel_forgetting").get<double>();
    if (have_refs) {
      m.has_gap_recovery = true;
      m.gap_recovery = GapRecovery(averages.at(m.step), comb_avg.at(m.step),
                                   ft_avg.at(m.step));
    }
    metrics.push_back(m);
  }
  WriteTextFile(run_dir + "/results/metrics.csv", MetricsCsv(metrics));

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "- method: " << method << "\n";
  md << "- master_seed: " << summary.at("master_seed") << "\n";
  md << "- alpha: " << summary.at("alpha").get<double>() << "\n\n";
  md << "## Error rates (%)\n\n";
  md << "| step | target |";
  for (const std::string &d : domains) md << ' ' << d << " |";
  md << " Avg |\n|---|---|";
  for (size_t d = 0; d < domains.size(); ++d) md << "---|";
  md << "---|\n";
  for (size_t k = 0; k < rows.size(); ++k) {
    md << "| " << k << " | " << domains[k] << " |";
    for (size_t d = 0; d < domains.size(); ++d) {
      if (d < rows[k].size()) md << ' ' << Fixed2(rows[k][d]) << " |";
      else md << "  |";
    }
    md << ' ' << Fixed2(averages[k]) << " |\n";
  }
  md << "\n## Continual-learning metrics\n\n";
  if (metrics.empty()) {
    md << "No expansion steps in this run.\n";
  } else {
    md << "| step | method | gap_recovery | rel_learning | rel_forgetting "
          "|\n|---|---|---|---|---|\n";
    for (const StepMetrics &m : metrics) {
      md << "| " << m.step << " | " << m.method << " | ";
      if (m.has_gap_recovery) md << Fixed2(m.gap_recovery);
      else md << "n/a";
      md << " | " << Fixed2(m.rel_learning) << " | "
         << Fixed2(m.rel_forgetting) << " |\n";
    }
    if (!have_refs)
      md << "\ngap_recovery needs reference runs; pass --ft-run and "
            "--comb-run.\n";
  }
  WriteTextFile(run_dir + "/results/report.md", md.str());
}

}  // namespace cllab
