#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "av/model.hpp"

namespace av {

inline constexpr double kDefaultEps = 8.0 / 255.0;

// L-inf budget and step schedule for projected sign ascent.
struct Budget {
  double eps_v = kDefaultEps, eps_a = kDefaultEps;
  double alpha_v = kDefaultEps / 4.0, alpha_a = kDefaultEps / 4.0;
  size_t iters = 10;
  double momentum = 1.0;  // decay mu; used by the momentum family

  void validate() const;
};

enum class AttackMethod { Fgsm, Ifgsm, Mifgsm, Nifgsm, Tia, Mma, Tma };

const char* attack_method_name(AttackMethod m);
std::optional<AttackMethod> attack_method_from(const std::string& name);

struct AttackConfig {
  AttackMethod method = AttackMethod::Tma;
  Budget budget;
  double lambda1 = 1.0, lambda2 = 1.0;
  // Input diversification for the temporal-regularized methods; copy 0 is
  // always the untransformed view.
  TransformPolicy policy;
  size_t n_copies = 1;
  // When set, copies 1..N-1 are temporal masks at this ratio instead of
  // policy draws (the masked-copy gradient averaging study).
  std::optional<double> masked_copy_rho;
  MaskTarget masked_copy_target = MaskTarget::BothSync;
  uint64_t seed = 0;

  bool uses_momentum() const {
    return method != AttackMethod::Fgsm && method != AttackMethod::Ifgsm;
  }
  // lambda1 only steers Tia/Tma, lambda2 only Mma/Tma.
  double eff_lambda1() const {
    return (method == AttackMethod::Tia || method == AttackMethod::Tma) ? lambda1 : 0.0;
  }
  double eff_lambda2() const {
    return (method == AttackMethod::Mma || method == AttackMethod::Tma) ? lambda2 : 0.0;
  }
  void validate() const;
};

// Method defaults: single step for FGSM, diversified copies for Tia/Tma.
AttackConfig default_attack_config(AttackMethod m);

struct AttackResult {
  Tensor delta_v, delta_a;
  // objective value at delta_0 .. delta_K (K+1 entries)
  std::vector<double> objective_trace;
  // feasibility after every iterate: max |delta| per modality and the range
  // of the perturbed inputs
  std::vector<double> max_abs_dv, max_abs_da, adv_min, adv_max;
  bool success = false;  // every surrogate misclassifies at the reported delta
  size_t best_iter = 0;
};

// Coordinate-wise clamp into the eps ball (the L-inf nearest-point projection).
void project_linf(Tensor& delta, double eps);

// Temporal-variance regularizer: population variance over frames of the
// per-frame feature means, summed over both modalities. Needs T >= 2.
double tia_loss(const ForwardTrace& tr);
// Cross-modal cosine of the pooled feature vectors (norms floored at 1e-12).
double mma_loss(const ForwardTrace& tr);

// Frame-level pass accounting: one unit is one audio-visual frame pair put
// through one model. Atomic so parallel crafting stays exact.
struct PassCounter {
  std::atomic<uint64_t> forward{0};
  std::atomic<uint64_t> backward{0};
  void reset() {
    forward = 0;
    backward = 0;
  }
};

// Replays a transform plan inside a graph so gradients flow to the inputs.
// Plan parameters are constants.
std::pair<Var, Var> apply_plan_graph(Graph& g, Var x_v, Var x_a, const TransformPlan& plan);

// Transform plans for one objective evaluation: the identity copy first, then
// masked copies (when masked_copy_rho is set) or policy draws. Fresh draws per
// eval_idx, deterministic in cfg.seed.
std::vector<TransformPlan> attack_plans(const AttackConfig& cfg, size_t frames,
                                        uint64_t eval_idx);

struct BuiltObjective {
  Var total;                     // mean over models and copies
  std::vector<int> clean_preds;  // per-model prediction on the untransformed copy
};

// Mean over models and plans of [CE - lambda1 * L_R - lambda2 * L_M] at the
// given adversarial inputs.
BuiltObjective build_attack_objective(Graph& g, const std::vector<const AVModel*>& models,
                                      int label, Var x_adv_v, Var x_adv_a,
                                      const std::vector<TransformPlan>& plans,
                                      double lambda1, double lambda2,
                                      const Tensor* fusion_mask = nullptr,
                                      double keep_scale = 1.0);

// Objective value at (dv, da) with the given config, plans drawn from
// cfg.seed. Exposed for oracle tests.
double attack_objective(const std::vector<const AVModel*>& models, const AVSample& s,
                        const Tensor& dv, const Tensor& da, const AttackConfig& cfg);

// Generic projected sign-ascent core. The objective callback evaluates at
// (dv, da), optionally filling input gradients and the white-box success flag
// at that point. Used by the model attacks and, with a tied delta, by the
// segment-universal crafting; the analytic unit tests drive it directly.
struct CoreObjective {
  std::function<double(const Tensor& dv, const Tensor& da, Tensor* gv, Tensor* ga,
                       bool* success)>
      eval;
};

// x_v / x_a are the clean inputs used for the [0,1] box; delta shapes follow
// them. Keeps the best iterate (successful ones first, then by objective).
// box_clip=false skips the [0,1] pullback: segment-universal crafting shares
// one delta across frames with different pixel values, so the box is enforced
// where the delta is applied instead.
AttackResult run_attack_core(const CoreObjective& obj, const Tensor& x_v, const Tensor& x_a,
                             const Budget& budget, bool use_momentum, bool nesterov,
                             bool box_clip = true);

// Crafts (delta_v, delta_a) for one sample against one or more surrogates
// (mean objective over models). Deterministic per cfg.seed.
AttackResult run_attack(const std::vector<const AVModel*>& models, const AVSample& s,
                        const AttackConfig& cfg, PassCounter* passes = nullptr);

AVSample apply_delta(const AVSample& s, const Tensor& dv, const Tensor& da);

// ---- grid studies ----------------------------------------------------------

struct TransferRun {
  std::vector<std::string> ids;  // victim order == surrogate order
  // [surrogate][victim] attack success rate; diagonal is white-box.
  std::vector<std::vector<double>> asr;
  // per-surrogate mean cross-modal cosine of adversarial features (measured
  // on the surrogate), and mean black-box ASR over the other victims
  std::vector<double> mean_cosine;
  std::vector<double> mean_blackbox_asr;
  std::vector<size_t> eligible;  // per victim: clean-correct test samples
};

// Crafts on every surrogate over initially victim-correct test samples and
// evaluates every victim. ASR denominators are the victim's clean-correct
// sets so columns are comparable across surrogates.
TransferRun transfer_matrix(const std::map<std::string, AVModel>& grid,
                            const std::vector<AVSample>& samples, const AttackConfig& cfg);

struct EnsembleRun {
  std::string victim;
  double asr = 0.0;
  size_t eligible = 0;
};

// All grid models except the victim act as surrogates.
EnsembleRun ensemble_attack(const std::map<std::string, AVModel>& grid,
                            const std::string& victim_id,
                            const std::vector<AVSample>& samples, const AttackConfig& cfg);

struct CosineAsrRow {
  AttackMethod method;
  double mean_cosine = 0.0;
  double mean_blackbox_asr = 0.0;
};

// Paired statistics for the misalignment-transferability hypothesis: craft on
// one surrogate, measure adversarial feature cosine there and ASR on the
// other models.
std::vector<CosineAsrRow> cosine_vs_asr(const std::map<std::string, AVModel>& grid,
                                        const std::string& surrogate_id,
                                        const std::vector<AVSample>& samples,
                                        const std::vector<AttackConfig>& method_cfgs);

}  // namespace av
