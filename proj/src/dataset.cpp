#include "av/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace av {

void GenConfig::validate() const {
  check(n_classes >= 2, "gen: n_classes must be >= 2");
  check(samples_per_class >= 1, "gen: samples_per_class must be >= 1");
  check(frames >= 1, "gen: frames must be >= 1");
  check(redundancy >= 0.0 && redundancy <= 1.0, "gen: redundancy must be in [0,1]");
  check(correlation >= 0.0 && correlation <= 1.0, "gen: correlation must be in [0,1]");
  check(noise >= 0.0, "gen: noise must be >= 0");
  check(pattern_strength >= 0.0 && pattern_strength < 0.5,
        "gen: pattern_strength must be in [0, 0.5)");
  check(height >= 4 && width >= 4 && channels >= 1, "gen: frame geometry too small");
  check(bins >= 4, "gen: need at least 4 spectrogram bins");
}

namespace {

// Class waveform: even classes ride a sine, odd classes a triangle wave, each
// with its own frequency. Output in [0, 1].
double latent(int label, double theta) {
  if (label % 2 == 0) return 0.5 + 0.5 * std::sin(theta);
  double u = theta / (2.0 * kPi);
  u -= std::floor(u);
  return std::fabs(2.0 * u - 1.0);
}

double class_freq(int label) { return 1.0 + 0.5 * static_cast<double>(label); }

constexpr double kAudioNoiseMult = 2.0;    // vision is the cleaner channel
constexpr double kAudioPatternMult = 0.75; // and carries the stronger shortcut

// Fixed +-1 pattern per (dataset seed, class, channel tag), constant over
// 4x4 pixel blocks so it survives convolution and pooling.
std::vector<double> video_pattern(uint64_t seed, int label, size_t h, size_t w) {
  Rng rng(mix_seed(seed, {hash_str("pattern"), hash_str("v"), static_cast<uint64_t>(label)}));
  size_t bh = (h + 3) / 4, bw = (w + 3) / 4;
  std::vector<double> signs(bh * bw);
  for (double& s : signs) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
  std::vector<double> p(h * w);
  for (size_t i = 0; i < h; ++i)
    for (size_t j = 0; j < w; ++j) p[i * w + j] = signs[(i / 4) * bw + j / 4];
  return p;
}

// Audio bins are viewed as a sqrt(F) x sqrt(F) map by the encoders; keep the
// pattern constant over each 2x2 window of that view.
std::vector<double> audio_pattern(uint64_t seed, int label, size_t bins) {
  Rng rng(mix_seed(seed, {hash_str("pattern"), hash_str("a"), static_cast<uint64_t>(label)}));
  size_t side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(bins))));
  if (side * side != bins) side = 0;
  if (side >= 2) {
    size_t bs = (side + 1) / 2;
    std::vector<double> signs(bs * bs);
    for (double& s : signs) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    std::vector<double> p(bins);
    for (size_t k = 0; k < bins; ++k) {
      size_t r = k / side, c = k % side;
      p[k] = signs[(r / 2) * bs + c / 2];
    }
    return p;
  }
  std::vector<double> p(bins);
  for (double& v : p) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return p;
}

}  // namespace

AVSample make_sample(const GenConfig& cfg, int label, uint64_t sample_seed) {
  Rng rng(sample_seed);
  size_t T = cfg.frames, H = cfg.height, W = cfg.width, C = cfg.channels, F = cfg.bins;

  double phase_v = rng.uniform(0.0, 2.0 * kPi);
  double dphase = rng.uniform(-kPi, kPi);
  double phase_a = phase_v + (1.0 - cfg.correlation) * dphase;
  double freq = class_freq(label);

  std::vector<double> s_v(T), s_a(T);
  for (size_t t = 0; t < T; ++t) {
    double theta = 2.0 * kPi * freq * static_cast<double>(t) / static_cast<double>(T);
    s_v[t] = latent(label, theta + phase_v);
    s_a[t] = latent(label, theta + phase_a);
  }

  AVSample s;
  s.label = label;
  s.x_v = Tensor({T, C, H, W});
  s.x_a = Tensor({T, F});

  // Video: base level plus a gaussian blob whose column and size follow the
  // latent series; the class micro-pattern rides on top. The row is shared by
  // all classes, so position alone identifies nothing: the class must be read
  // from the motion statistics or the pattern.
  std::vector<double> pat_v = video_pattern(cfg.seed, label, H, W);
  double beta_v = cfg.pattern_strength;
  double margin = 2.5;
  double row = (static_cast<double>(H) - 1.0) / 2.0;
  for (size_t t = 0; t < T; ++t) {
    double col = margin + s_v[t] * (static_cast<double>(W) - 1.0 - 2.0 * margin);
    double sigma = 1.1 + 0.9 * s_v[t];
    for (size_t c = 0; c < C; ++c)
      for (size_t i = 0; i < H; ++i)
        for (size_t j = 0; j < W; ++j) {
          double dy = static_cast<double>(i) - row;
          double dx = static_cast<double>(j) - col;
          double blob = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
          s.x_v[((t * C + c) * H + i) * W + j] =
              0.15 + 0.8 * blob + beta_v * pat_v[i * W + j];
        }
  }

  // Audio: base level plus a harmonic stack, amplitude modulated by the
  // (phase-coupled) latent series. The fundamental is shared by class pairs
  // (label and label+3), so audio narrows the class to a pair at best.
  std::vector<double> pat_a = audio_pattern(cfg.seed, label, F);
  double beta_a = kAudioPatternMult * cfg.pattern_strength;
  int f0 = 1 + 2 * (label % 3);
  for (size_t t = 0; t < T; ++t) {
    double amp = 0.2 + 0.6 * s_a[t];
    for (size_t k = 0; k < F; ++k)
      s.x_a[t * F + k] = 0.1 + beta_a * pat_a[k];
    for (int h = 1; h <= 3; ++h) {
      double center = static_cast<double>(h * f0);
      if (center > static_cast<double>(F) - 1.0) break;
      for (size_t k = 0; k < F; ++k) {
        double d = static_cast<double>(k) - center;
        s.x_a[t * F + k] += (amp / static_cast<double>(h)) * std::exp(-d * d / 0.5);
      }
    }
  }

  // Additive noise, then temporal low-pass toward the per-sample mean frame,
  // so redundancy 1 collapses every frame to the same image.
  for (size_t i = 0; i < s.x_v.size(); ++i) s.x_v[i] += cfg.noise * rng.normal();
  for (size_t i = 0; i < s.x_a.size(); ++i)
    s.x_a[i] += kAudioNoiseMult * cfg.noise * rng.normal();

  double r = cfg.redundancy;
  if (r > 0.0 && T > 1) {
    auto lowpass = [&](Tensor& x) {
      size_t chunk = x.size() / T;
      std::vector<double> mean(chunk, 0.0);
      for (size_t t = 0; t < T; ++t)
        for (size_t i = 0; i < chunk; ++i) mean[i] += x[t * chunk + i];
      for (size_t i = 0; i < chunk; ++i) mean[i] /= static_cast<double>(T);
      for (size_t t = 0; t < T; ++t)
        for (size_t i = 0; i < chunk; ++i)
          x[t * chunk + i] = (1.0 - r) * x[t * chunk + i] + r * mean[i];
    };
    lowpass(s.x_v);
    lowpass(s.x_a);
  }

  clamp_inplace(s.x_v, 0.0, 1.0);
  clamp_inplace(s.x_a, 0.0, 1.0);
  s.x_v.quantize_f32();
  s.x_a.quantize_f32();
  return s;
}

DatasetSplits generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  DatasetSplits out;
  out.cfg = cfg;
  size_t n = cfg.samples_per_class;
  size_t n_train = 7 * n / 10;
  size_t n_val = 2 * n / 10;
  for (size_t c = 0; c < cfg.n_classes; ++c) {
    for (size_t i = 0; i < n; ++i) {
      uint64_t s = mix_seed(cfg.seed, {hash_str("sample"), c, i});
      AVSample sample = make_sample(cfg, static_cast<int>(c), s);
      if (i < n_train)
        out.train.push_back(std::move(sample));
      else if (i < n_train + n_val)
        out.val.push_back(std::move(sample));
      else
        out.test.push_back(std::move(sample));
    }
  }
  return out;
}

const char* mask_target_name(MaskTarget t) {
  switch (t) {
    case MaskTarget::AudioOnly: return "audio_only";
    case MaskTarget::VisualOnly: return "visual_only";
    case MaskTarget::BothSync: return "both_sync";
    case MaskTarget::BothAsync: return "both_async";
  }
  return "?";
}

const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Scale: return "scale";
    case TransformKind::Mask: return "mask";
    case TransformKind::Blur: return "blur";
    case TransformKind::Mixup: return "mixup";
  }
  return "?";
}

namespace {

void zero_frames(Tensor& x, size_t T, const std::vector<size_t>& frames) {
  size_t chunk = x.size() / T;
  for (size_t t : frames)
    for (size_t i = 0; i < chunk; ++i) x[t * chunk + i] = 0.0;
}

}  // namespace

AVSample temporal_mask(const AVSample& s, double rho, MaskTarget target, uint64_t seed) {
  check(rho >= 0.0 && rho < 1.0, "temporal_mask: rho must be in [0,1)");
  size_t T = s.frames();
  size_t k = static_cast<size_t>(rho * static_cast<double>(T));
  AVSample out = s;
  if (k == 0) return out;
  Rng rng(seed);
  switch (target) {
    case MaskTarget::AudioOnly:
      zero_frames(out.x_a, T, rng.sample_without_replacement(T, k));
      break;
    case MaskTarget::VisualOnly:
      zero_frames(out.x_v, T, rng.sample_without_replacement(T, k));
      break;
    case MaskTarget::BothSync: {
      std::vector<size_t> idx = rng.sample_without_replacement(T, k);
      zero_frames(out.x_v, T, idx);
      zero_frames(out.x_a, T, idx);
      break;
    }
    case MaskTarget::BothAsync: {
      std::vector<size_t> iv = rng.sample_without_replacement(T, k);
      std::vector<size_t> ia = rng.sample_without_replacement(T, k);
      zero_frames(out.x_v, T, iv);
      zero_frames(out.x_a, T, ia);
      break;
    }
  }
  return out;
}

namespace {

bool touches_visual(TransformMode m) {
  return m == TransformMode::Visual || m == TransformMode::BothSync ||
         m == TransformMode::BothAsync;
}
bool touches_audio(TransformMode m) {
  return m == TransformMode::Audio || m == TransformMode::BothSync ||
         m == TransformMode::BothAsync;
}

void validate_kernel(const std::vector<double>& kernel) {
  check(!kernel.empty() && kernel.size() % 2 == 1,
        "transform: blur kernel must have odd tap count, got " +
            std::to_string(kernel.size()));
}

// 1-D "same" convolution with zero padding along the last axis of rows.
void blur_rows(Tensor& x, size_t rows, size_t row_len, const std::vector<double>& kernel) {
  long half = static_cast<long>(kernel.size() / 2);
  std::vector<double> tmp(row_len);
  for (size_t r = 0; r < rows; ++r) {
    double* row = x.data() + r * row_len;
    for (size_t i = 0; i < row_len; ++i) {
      double acc = 0.0;
      for (size_t k = 0; k < kernel.size(); ++k) {
        long j = static_cast<long>(i) + static_cast<long>(k) - half;
        if (j < 0 || j >= static_cast<long>(row_len)) continue;
        acc += kernel[k] * row[j];
      }
      tmp[i] = acc;
    }
    std::copy(tmp.begin(), tmp.end(), row);
  }
}

// Separable 2-D blur of every (H, W) plane of a (T, C, H, W) tensor.
void blur_video(Tensor& x, const std::vector<double>& kernel) {
  size_t ndim = x.ndim();
  size_t W = x.dim(ndim - 1), H = x.dim(ndim - 2);
  size_t planes = x.size() / (H * W);
  blur_rows(x, planes * H, W, kernel);  // along width
  // along height: walk columns
  long half = static_cast<long>(kernel.size() / 2);
  std::vector<double> tmp(H);
  for (size_t p = 0; p < planes; ++p) {
    double* plane = x.data() + p * H * W;
    for (size_t j = 0; j < W; ++j) {
      for (size_t i = 0; i < H; ++i) {
        double acc = 0.0;
        for (size_t k = 0; k < kernel.size(); ++k) {
          long r = static_cast<long>(i) + static_cast<long>(k) - half;
          if (r < 0 || r >= static_cast<long>(H)) continue;
          acc += kernel[k] * plane[r * W + j];
        }
        tmp[i] = acc;
      }
      for (size_t i = 0; i < H; ++i) plane[i * W + j] = tmp[i];
    }
  }
}

}  // namespace

TransformPlan make_plan(size_t frames, TransformKind kind, const TransformParams& params,
                        TransformMode mode, uint64_t seed) {
  TransformPlan plan;
  plan.kind = kind;
  plan.mode = mode;
  Rng rng(seed);
  size_t T = frames;
  switch (kind) {
    case TransformKind::Scale:
      check(params.scale_factor > 0.0 && params.scale_factor <= 1.0,
            "transform: scale factor must be in (0,1]");
      if (touches_visual(mode)) plan.scale_v = params.scale_factor;
      if (touches_audio(mode)) plan.scale_a = params.scale_factor;
      break;
    case TransformKind::Mask: {
      check(params.mask_ratio >= 0.0 && params.mask_ratio < 1.0,
            "transform: mask ratio must be in [0,1)");
      size_t k = static_cast<size_t>(params.mask_ratio * static_cast<double>(T));
      if (k > 0) {
        if (mode == TransformMode::BothSync) {
          std::vector<size_t> idx = rng.sample_without_replacement(T, k);
          plan.mask_frames_v = idx;
          plan.mask_frames_a = idx;
        } else {
          if (touches_visual(mode)) plan.mask_frames_v = rng.sample_without_replacement(T, k);
          if (touches_audio(mode)) plan.mask_frames_a = rng.sample_without_replacement(T, k);
        }
      }
      break;
    }
    case TransformKind::Blur:
      validate_kernel(params.kernel);
      plan.kernel = params.kernel;
      break;
    case TransformKind::Mixup:
      check(params.mixup_w >= 0.0 && params.mixup_w <= 1.0,
            "transform: mixup weight must be in [0,1]");
      check(params.partner != nullptr, "transform: mixup requires a partner sample");
      if (touches_visual(mode)) plan.mixup_w_v = params.mixup_w;
      if (touches_audio(mode)) plan.mixup_w_a = params.mixup_w;
      plan.partner = std::make_shared<AVSample>(*params.partner);
      break;
  }
  return plan;
}

TransformPlan draw_plan(const TransformPolicy& policy, size_t frames, Rng& rng) {
  check(!policy.kinds.empty(), "diversify: transform policy has no kinds");
  check(!policy.modes.empty(), "diversify: transform policy has no modes");
  TransformPlan plan;
  plan.kind = policy.kinds[rng.uniform_index(policy.kinds.size())];
  plan.mode = policy.modes[rng.uniform_index(policy.modes.size())];
  bool async = plan.mode == TransformMode::BothAsync;
  switch (plan.kind) {
    case TransformKind::Scale: {
      double f = rng.uniform(policy.scale_range[0], policy.scale_range[1]);
      double f2 = async ? rng.uniform(policy.scale_range[0], policy.scale_range[1]) : f;
      if (touches_visual(plan.mode)) plan.scale_v = f;
      if (touches_audio(plan.mode)) plan.scale_a = f2;
      break;
    }
    case TransformKind::Mask: {
      double rho = rng.uniform(policy.mask_ratio_range[0], policy.mask_ratio_range[1]);
      size_t k = static_cast<size_t>(rho * static_cast<double>(frames));
      if (k > 0) {
        std::vector<size_t> idx = rng.sample_without_replacement(frames, k);
        if (plan.mode == TransformMode::BothSync) {
          plan.mask_frames_v = idx;
          plan.mask_frames_a = idx;
        } else {
          if (touches_visual(plan.mode)) plan.mask_frames_v = idx;
          if (touches_audio(plan.mode))
            plan.mask_frames_a = async ? rng.sample_without_replacement(frames, k) : idx;
        }
      }
      break;
    }
    case TransformKind::Blur:
      validate_kernel(policy.kernel);
      plan.kernel = policy.kernel;
      break;
    case TransformKind::Mixup: {
      check(policy.mixup_pool && !policy.mixup_pool->empty(),
            "diversify: mixup requires a partner pool");
      double w = rng.uniform(policy.mixup_w_range[0], policy.mixup_w_range[1]);
      double w2 = async ? rng.uniform(policy.mixup_w_range[0], policy.mixup_w_range[1]) : w;
      if (touches_visual(plan.mode)) plan.mixup_w_v = w;
      if (touches_audio(plan.mode)) plan.mixup_w_a = w2;
      const std::vector<AVSample>& pool = *policy.mixup_pool;
      plan.partner = std::shared_ptr<const AVSample>(
          policy.mixup_pool, &pool[rng.uniform_index(pool.size())]);
      break;
    }
  }
  return plan;
}

AVSample apply_plan(const AVSample& s, const TransformPlan& plan) {
  AVSample out = s;
  if (plan.identity) return out;
  size_t T = s.frames();
  switch (plan.kind) {
    case TransformKind::Scale:
      if (plan.scale_v != 1.0)
        for (size_t i = 0; i < out.x_v.size(); ++i) out.x_v[i] *= plan.scale_v;
      if (plan.scale_a != 1.0)
        for (size_t i = 0; i < out.x_a.size(); ++i) out.x_a[i] *= plan.scale_a;
      break;
    case TransformKind::Mask:
      zero_frames(out.x_v, T, plan.mask_frames_v);
      zero_frames(out.x_a, T, plan.mask_frames_a);
      break;
    case TransformKind::Blur:
      if (touches_visual(plan.mode)) blur_video(out.x_v, plan.kernel);
      if (touches_audio(plan.mode))
        blur_rows(out.x_a, T, out.x_a.size() / T, plan.kernel);
      break;
    case TransformKind::Mixup: {
      const AVSample& p = *plan.partner;
      check(p.x_v.same_shape(s.x_v) && p.x_a.same_shape(s.x_a),
            "transform: mixup partner shape mismatch");
      if (plan.mixup_w_v != 1.0)
        for (size_t i = 0; i < out.x_v.size(); ++i)
          out.x_v[i] = plan.mixup_w_v * out.x_v[i] + (1.0 - plan.mixup_w_v) * p.x_v[i];
      if (plan.mixup_w_a != 1.0)
        for (size_t i = 0; i < out.x_a.size(); ++i)
          out.x_a[i] = plan.mixup_w_a * out.x_a[i] + (1.0 - plan.mixup_w_a) * p.x_a[i];
      break;
    }
  }
  return out;
}

AVSample transform(const AVSample& s, TransformKind kind, const TransformParams& params,
                   TransformMode mode, uint64_t seed) {
  return apply_plan(s, make_plan(s.frames(), kind, params, mode, seed));
}

std::vector<TransformPlan> diversify_plans(size_t n_copies, const TransformPolicy& policy,
                                           size_t frames, uint64_t seed) {
  check(n_copies >= 1, "diversify: need at least one copy");
  std::vector<TransformPlan> plans;
  TransformPlan id;
  id.identity = true;
  plans.push_back(id);
  if (n_copies > 1)
    check(!policy.kinds.empty(), "diversify: transform policy has no kinds");
  Rng rng(seed);
  for (size_t i = 1; i < n_copies; ++i) plans.push_back(draw_plan(policy, frames, rng));
  return plans;
}

std::vector<AVSample> diversify(const AVSample& s, size_t n_copies,
                                const TransformPolicy& policy, uint64_t seed) {
  std::vector<TransformPlan> plans = diversify_plans(n_copies, policy, s.frames(), seed);
  std::vector<AVSample> out;
  out.reserve(plans.size());
  for (const TransformPlan& p : plans) out.push_back(apply_plan(s, p));
  return out;
}

std::vector<double> frame_energy_video(const AVSample& s) {
  size_t T = s.frames();
  size_t chunk = s.x_v.size() / T;
  std::vector<double> e(T, 0.0);
  for (size_t t = 0; t < T; ++t) {
    for (size_t i = 0; i < chunk; ++i) e[t] += s.x_v[t * chunk + i];
    e[t] /= static_cast<double>(chunk);
  }
  return e;
}

std::vector<double> frame_energy_audio(const AVSample& s) {
  size_t T = s.frames();
  size_t chunk = s.x_a.size() / T;
  std::vector<double> e(T, 0.0);
  for (size_t t = 0; t < T; ++t) {
    for (size_t i = 0; i < chunk; ++i) e[t] += s.x_a[t * chunk + i];
    e[t] /= static_cast<double>(chunk);
  }
  return e;
}

}  // namespace av
