#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "av/dataset.hpp"
#include "av/graph.hpp"

namespace av {

enum class Backbone { ToyA, ToyV, ToyR };
enum class Fusion { Sum, Concat };

char backbone_initial(Backbone b);

// Audio-visual classifier spec. The grid uses visual in {ToyV, ToyR} and
// audio in {ToyA, ToyR}; capacity ordering is ToyA < ToyV < ToyR.
struct ModelSpec {
  Backbone visual = Backbone::ToyV;
  Backbone audio = Backbone::ToyA;
  Fusion fusion = Fusion::Sum;
  size_t n_classes = 6;
  size_t feat_dim = 32;
  // Input geometry. Audio spectrogram frames are viewed as square
  // (1, r, r) maps with r = sqrt(bins) so every backbone is convolutional.
  size_t channels = 1, height = 16, width = 16, bins = 16;

  void validate() const;
  size_t fused_dim() const { return fusion == Fusion::Sum ? feat_dim : 2 * feat_dim; }
};

// "{visual}{fusion}{audio}", e.g. (ToyV, Sum, ToyA) -> "VsA".
std::string model_id(const ModelSpec& spec);

struct AVModel {
  ModelSpec spec;
  uint64_t seed = 0;
  std::map<std::string, Tensor> params;  // name -> tensor, iteration order fixed

  std::string id() const { return model_id(spec); }
};

// Parameters drawn uniform in +-1/sqrt(fan_in) per tensor, float32-quantized.
// Reconstruction from (spec, seed) is exact.
AVModel build_model(const ModelSpec& spec, uint64_t seed);

bool params_equal(const AVModel& a, const AVModel& b);

struct ForwardTrace {
  Tensor feat_v, feat_a;      // per-frame features, (T, d)
  Tensor pooled_v, pooled_a;  // temporal means, (d)
  Tensor fused;               // (d) or (2d)
  Tensor logits;              // (n_classes)
  int prediction() const;
};

// Graph handles exposed by a forward build; inputs and parameters are the
// caller's leaves, so the same builder serves training (grad wrt params) and
// attacks (grad wrt inputs).
struct ForwardVars {
  Var x_v, x_a;
  Var feat_v, feat_a;
  Var pooled_v, pooled_a, fused, logits;
};

std::map<std::string, Var> param_vars(Graph& g, const AVModel& m, bool needs_grad);

ForwardVars build_forward(Graph& g, const AVModel& m, Var x_v, Var x_a,
                          const std::map<std::string, Var>& pv,
                          const Tensor* fusion_mask = nullptr, double keep_scale = 1.0);

ForwardTrace trace_from_vars(const ForwardVars& fv);

// Bernoulli keep mask over the fused vector; keep probability 1 - rho_f.
Tensor make_fusion_mask(size_t dim, double rho_f, Rng& rng);

// Plain inference. With rho_f > 0 an rng must be supplied and a fresh dropout
// mask (inverted scaling) is applied to the fused vector; with rho_f == 0 the
// pass is fully deterministic.
ForwardTrace forward(const AVModel& m, const Tensor& x_v, const Tensor& x_a,
                     double dropout_rho_f = 0.0, Rng* rng = nullptr);

int predict(const AVModel& m, const AVSample& s);
double accuracy(const AVModel& m, const std::vector<AVSample>& data);

// One SGD step on mean cross-entropy over an (already perturbed) batch.
// Per-sample gradients are computed in parallel and reduced in index order,
// so the result does not depend on the worker count. Returns the mean loss.
double sgd_step(AVModel& m, const std::vector<const AVSample*>& batch, double lr);

struct TrainResult {
  AVModel model;
  std::vector<double> train_acc;  // per epoch
  std::vector<double> val_acc;    // per epoch
};

// Minibatch SGD with a seeded shuffle. Throws on non-finite loss, naming the
// step. epochs == 0 returns the model unchanged.
TrainResult train_clean(const AVModel& m, const DatasetSplits& data, size_t epochs,
                        double lr, size_t batch, uint64_t seed);

// The eight grid specs: visual {V,R} x fusion {s,c} x audio {A,R}.
std::vector<ModelSpec> grid_specs(size_t n_classes = 6, size_t feat_dim = 32);

// Untrained grid keyed by id; per-model seeds derived from `seed`.
std::map<std::string, AVModel> model_grid(uint64_t seed);

}  // namespace av
