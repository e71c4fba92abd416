#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "av/common.hpp"
#include "av/tensor.hpp"

namespace av {

// One audio-visual event: video frames (T, C, H, W) and spectrogram frames
// (T, F), all values in [0, 1], plus a class label.
struct AVSample {
  Tensor x_v;
  Tensor x_a;
  int label = 0;
  size_t frames() const { return x_v.ndim() ? x_v.dim(0) : 0; }
};

struct GenConfig {
  size_t n_classes = 6;
  size_t samples_per_class = 60;
  size_t frames = 8;  // T
  uint64_t seed = 0;
  double redundancy = 0.7;   // temporal low-pass strength, r in [0,1]
  double correlation = 0.9;  // audio-visual phase coupling, kappa in [0,1]
  double noise = 0.03;       // additive noise sigma >= 0
  // Amplitude of a fixed class-keyed micro-pattern mixed into both channels.
  // It is a highly predictive shortcut that sits inside typical attack
  // budgets, so clean-trained models are breakable at small eps while the
  // blob/harmonic structure stays available for robust training.
  double pattern_strength = 0.028;
  // Geometry, matched to the toy encoders.
  size_t height = 16, width = 16, channels = 1, bins = 16;

  void validate() const;
};

struct DatasetSplits {
  std::vector<AVSample> train, val, test;
  GenConfig cfg;
};

// Each class is a latent oscillation (class-specific frequency and waveform).
// Video renders a moving, pulsing blob whose row encodes the class; audio
// renders a harmonic stack on a class fundamental whose amplitude follows the
// same oscillation, phase-coupled by kappa. The audio channel gets extra noise
// so models lean on vision. Split is 7:2:1 per class. Deterministic per seed;
// values are float32-quantized so file round-trips are exact.
DatasetSplits generate_dataset(const GenConfig& cfg);

AVSample make_sample(const GenConfig& cfg, int label, uint64_t sample_seed);

enum class MaskTarget { AudioOnly, VisualOnly, BothSync, BothAsync };

const char* mask_target_name(MaskTarget t);

// Zeroes floor(rho * T) frames of the targeted modalities. BothSync uses one
// index set for both; BothAsync draws independent sets.
AVSample temporal_mask(const AVSample& s, double rho, MaskTarget target, uint64_t seed);

enum class TransformKind { Scale, Mask, Blur, Mixup };
enum class TransformMode { Audio, Visual, BothSync, BothAsync };

const char* transform_kind_name(TransformKind k);

struct TransformParams {
  double scale_factor = 1.0;                    // (0, 1]
  double mask_ratio = 0.0;                      // [0, 1)
  std::vector<double> kernel{0.25, 0.5, 0.25};  // odd tap count
  double mixup_w = 1.0;                         // [0, 1]
  const AVSample* partner = nullptr;            // required for Mixup
};

// Fully materialized transform: every random choice is already drawn, so the
// same plan can be replayed on raw tensors or inside a gradient graph.
struct TransformPlan {
  TransformKind kind = TransformKind::Scale;
  TransformMode mode = TransformMode::BothSync;
  bool identity = false;
  double scale_v = 1.0, scale_a = 1.0;
  std::vector<size_t> mask_frames_v, mask_frames_a;
  std::vector<double> kernel;
  double mixup_w_v = 1.0, mixup_w_a = 1.0;
  std::shared_ptr<const AVSample> partner;
};

struct TransformPolicy {
  std::vector<TransformKind> kinds{TransformKind::Scale, TransformKind::Mask,
                                   TransformKind::Blur};
  std::vector<TransformMode> modes{TransformMode::Audio, TransformMode::Visual,
                                   TransformMode::BothSync, TransformMode::BothAsync};
  std::array<double, 2> scale_range{0.8, 1.0};
  std::array<double, 2> mask_ratio_range{0.0, 0.3};
  std::vector<double> kernel{0.25, 0.5, 0.25};
  std::array<double, 2> mixup_w_range{0.6, 1.0};
  // Pool to draw mixup partners from; required if kinds contains Mixup.
  std::shared_ptr<const std::vector<AVSample>> mixup_pool;
};

TransformPlan make_plan(size_t frames, TransformKind kind, const TransformParams& params,
                        TransformMode mode, uint64_t seed);

// Sync draws one parameter set for both modalities, async draws per modality.
TransformPlan draw_plan(const TransformPolicy& policy, size_t frames, Rng& rng);

AVSample apply_plan(const AVSample& s, const TransformPlan& plan);

// Label-preserving input transformation; values stay in [0, 1].
AVSample transform(const AVSample& s, TransformKind kind, const TransformParams& params,
                   TransformMode mode, uint64_t seed);

// Plan list for n_copies diversified views; plan 0 is always the identity.
std::vector<TransformPlan> diversify_plans(size_t n_copies, const TransformPolicy& policy,
                                           size_t frames, uint64_t seed);

std::vector<AVSample> diversify(const AVSample& s, size_t n_copies,
                                const TransformPolicy& policy, uint64_t seed);

// Mean frame value per time step, used for correlation diagnostics.
std::vector<double> frame_energy_video(const AVSample& s);
std::vector<double> frame_energy_audio(const AVSample& s);

}  // namespace av
