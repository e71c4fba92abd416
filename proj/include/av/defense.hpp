#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "av/attack.hpp"

namespace av {

enum class SchedulerKind { None, Constant, Cyclic, Linear, Cosine };

const char* scheduler_name(SchedulerKind k);
std::optional<SchedulerKind> scheduler_from(const std::string& name);

struct ScheduleConfig {
  SchedulerKind kind = SchedulerKind::Cyclic;
  double lo = 0.05, hi = 0.20;  // curriculum range for rho_x (= rho_f)
  size_t period = 32;           // cyclic period, in steps
  double constant = 0.20;
  size_t k_lo = 1, k_hi = 5;  // inner attack step range, same phase as rho

  void validate() const;
};

struct CurriculumState {
  size_t step = 0;
  double rho_x = 1.0;  // data-level temporal sampling ratio
  double rho_f = 0.0;  // fusion dropout ratio, synchronized with rho_x
  size_t k = 1;        // inner attack steps
};

// Pure schedule lookup; t_max = total_steps - 1, so linear/cosine reach hi on
// the last step exactly. Cyclic is a triangular wave lo -> hi -> lo per
// period. None disables the curriculum (rho_x = 1, rho_f = 0, k = k_hi).
CurriculumState schedule_at(const ScheduleConfig& cfg, size_t step, size_t total_steps);

enum class CraftMode { SegmentUniversal, FullPerFrame };

struct DefenseConfig {
  size_t segments = 2;
  double alpha = 0.15;  // per-segment frame sampling ratio
  AttackConfig inner;   // crafting objective and budget
  ScheduleConfig sched;
  CraftMode craft = CraftMode::SegmentUniversal;
  size_t epochs = 10;
  double lr = 0.08;
  size_t batch = 16;
  uint64_t seed = 0;
  // When false the model passed to adversarial_train should be untrained;
  // when true the caller hands over a clean-pretrained model.
  bool warm_start = false;

  void validate(size_t frames) const;
};

struct SegmentSelection {
  // [lo, hi) frame ranges, contiguous, disjoint, covering [0, T)
  std::vector<std::pair<size_t, size_t>> bounds;
  // crafting frames chosen inside each segment
  std::vector<std::vector<size_t>> selected;
};

// S near-equal contiguous segments; ceil(alpha * len) frames sampled without
// replacement in each.
SegmentSelection segment_and_sample(size_t frames, size_t segments, double alpha,
                                    uint64_t seed);

// Curriculum variant: first keeps ceil(rho_x * len) frames per segment, then
// samples ceil(alpha * kept) of those, so segments never go empty.
SegmentSelection segment_and_sample_curriculum(size_t frames, size_t segments, double alpha,
                                               double rho_x, uint64_t seed);

// One shared perturbation per segment (single-frame shape per modality).
struct SegmentPerturbation {
  Tensor dv;  // (C, H, W)
  Tensor da;  // (F)
};

// Projected ascent of the attack objective, with the expectation taken over
// the segment's selected frames; the tied delta is applied to each of them.
// rho_f > 0 turns on fusion dropout in the crafting forward passes, with a
// fresh mask per ascent step.
std::vector<SegmentPerturbation> craft_universal(const AVModel& model, const AVSample& s,
                                                 const SegmentSelection& sel,
                                                 const AttackConfig& inner, size_t k_steps,
                                                 double rho_f, uint64_t seed,
                                                 PassCounter* passes);

// Broadcasts every segment perturbation to all frames of its segment.
void propagate(const std::vector<SegmentPerturbation>& segs, const SegmentSelection& sel,
               Tensor& dv_full, Tensor& da_full);

struct DefenseLogRow {
  size_t epoch = 0;
  double clean_acc = 0.0;   // validation split
  double robust_acc = 0.0;  // quick inner-attack eval on a validation slice
  double rho_x = 0.0, rho_f = 0.0;
  size_t k = 0;
  uint64_t fwd_passes = 0, bwd_passes = 0;  // cumulative crafting passes
};

struct DefenseResult {
  AVModel model;
  std::vector<DefenseLogRow> log;
  uint64_t fwd_passes = 0, bwd_passes = 0;
  std::vector<CurriculumState> schedule_trace;  // one entry per training step
};

// Min-max training: per batch, read the schedule, craft perturbations
// (segment-universal or full per-frame), take one SGD step on the perturbed
// batch. With eps = 0 this reduces exactly to train_clean under the same
// seed. Throws on non-finite loss, naming the step.
DefenseResult adversarial_train(const AVModel& m, const DatasetSplits& data,
                                const DefenseConfig& cfg);

// Classification success rate under each white-box attack in the suite.
std::vector<std::pair<std::string, double>> evaluate_defense(
    const AVModel& m, const std::vector<std::pair<std::string, AttackConfig>>& suite,
    const std::vector<AVSample>& test);

}  // namespace av
