#include "av/attack.hpp"

#include <algorithm>
#include <cmath>

#include "av/parallel.hpp"

namespace av {

void Budget::validate() const {
  check(eps_v >= 0.0 && eps_a >= 0.0, "attack: budgets must be >= 0");
  check(iters >= 1, "attack: need at least one iteration");
  check(alpha_v > 0.0 && alpha_a > 0.0, "attack: step sizes must be positive");
  check(momentum >= 0.0, "attack: momentum decay must be >= 0");
}

const char* attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::Fgsm: return "FGSM";
    case AttackMethod::Ifgsm: return "IFGSM";
    case AttackMethod::Mifgsm: return "MIFGSM";
    case AttackMethod::Nifgsm: return "NIFGSM";
    case AttackMethod::Tia: return "TIA";
    case AttackMethod::Mma: return "MMA";
    case AttackMethod::Tma: return "TMA";
  }
  return "?";
}

std::optional<AttackMethod> attack_method_from(const std::string& name) {
  for (AttackMethod m : {AttackMethod::Fgsm, AttackMethod::Ifgsm, AttackMethod::Mifgsm,
                         AttackMethod::Nifgsm, AttackMethod::Tia, AttackMethod::Mma,
                         AttackMethod::Tma})
    if (name == attack_method_name(m)) return m;
  return std::nullopt;
}

void AttackConfig::validate() const {
  budget.validate();
  check(lambda1 >= 0.0 && lambda2 >= 0.0, "attack: loss coefficients must be >= 0");
  check(n_copies >= 1, "attack: n_copies must be >= 1");
  if (method == AttackMethod::Fgsm)
    check(budget.iters == 1, "attack: FGSM is single-step (iters must be 1)");
  if (masked_copy_rho)
    check(*masked_copy_rho >= 0.0 && *masked_copy_rho < 1.0,
          "attack: masked-copy ratio must be in [0,1)");
}

AttackConfig default_attack_config(AttackMethod m) {
  AttackConfig cfg;
  cfg.method = m;
  switch (m) {
    case AttackMethod::Fgsm:
      cfg.budget.iters = 1;
      cfg.budget.alpha_v = cfg.budget.eps_v;
      cfg.budget.alpha_a = cfg.budget.eps_a;
      break;
    case AttackMethod::Tia:
    case AttackMethod::Tma:
      cfg.n_copies = 4;
      break;
    default:
      break;
  }
  return cfg;
}

void project_linf(Tensor& delta, double eps) {
  check(eps >= 0.0, "project: eps must be >= 0");
  double* p = delta.data();
  for (size_t i = 0; i < delta.size(); ++i) p[i] = std::clamp(p[i], -eps, eps);
}

double tia_loss(const ForwardTrace& tr) {
  check(tr.feat_v.ndim() == 2 && tr.feat_a.ndim() == 2, "tia_loss: trace has no frame axis");
  size_t T = tr.feat_v.dim(0);
  check(T >= 2, "tia_loss: needs at least 2 frames, got " + std::to_string(T));
  auto var_of_frame_means = [](const Tensor& feat) {
    size_t T2 = feat.dim(0), d = feat.dim(1);
    std::vector<double> m(T2, 0.0);
    for (size_t t = 0; t < T2; ++t) {
      for (size_t j = 0; j < d; ++j) m[t] += feat[t * d + j];
      m[t] /= static_cast<double>(d);
    }
    double mean = 0.0;
    for (double x : m) mean += x;
    mean /= static_cast<double>(T2);
    double var = 0.0;
    for (double x : m) var += (x - mean) * (x - mean);
    return var / static_cast<double>(T2);
  };
  return var_of_frame_means(tr.feat_a) + var_of_frame_means(tr.feat_v);
}

double mma_loss(const ForwardTrace& tr) {
  double dot = 0.0, na = 0.0, nv = 0.0;
  check(tr.pooled_a.size() == tr.pooled_v.size() && tr.pooled_a.size() > 0,
        "mma_loss: pooled feature size mismatch");
  for (size_t i = 0; i < tr.pooled_a.size(); ++i) {
    dot += tr.pooled_a[i] * tr.pooled_v[i];
    na += tr.pooled_a[i] * tr.pooled_a[i];
    nv += tr.pooled_v[i] * tr.pooled_v[i];
  }
  double fa = std::max(std::sqrt(na), 1e-12);
  double fv = std::max(std::sqrt(nv), 1e-12);
  return dot / (fa * fv);
}

namespace {

// Single-channel 2-D blur kernel from 1-D taps (outer product), as a conv2d
// weight (1,1,k,k).
Tensor blur_kernel2d(const std::vector<double>& taps) {
  size_t k = taps.size();
  Tensor w(std::vector<size_t>{1, 1, k, k});
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) w[i * k + j] = taps[i] * taps[j];
  return w;
}

Tensor frame_mask_tensor(const std::vector<size_t>& shape,
                         const std::vector<size_t>& masked_frames) {
  Tensor m(shape, 1.0);
  size_t T = shape[0];
  size_t chunk = m.size() / T;
  for (size_t t : masked_frames)
    for (size_t i = 0; i < chunk; ++i) m[t * chunk + i] = 0.0;
  return m;
}

}  // namespace

std::pair<Var, Var> apply_plan_graph(Graph& g, Var x_v, Var x_a, const TransformPlan& plan) {
  if (plan.identity) return {x_v, x_a};
  const Tensor& xv = x_v.value();
  const Tensor& xa = x_a.value();
  size_t T = xv.dim(0);
  switch (plan.kind) {
    case TransformKind::Scale: {
      Var ov = plan.scale_v != 1.0 ? scale(x_v, plan.scale_v) : x_v;
      Var oa = plan.scale_a != 1.0 ? scale(x_a, plan.scale_a) : x_a;
      return {ov, oa};
    }
    case TransformKind::Mask: {
      Var ov = x_v, oa = x_a;
      if (!plan.mask_frames_v.empty()) {
        Var m = g.constant(frame_mask_tensor(xv.shape(), plan.mask_frames_v));
        ov = dropout_mask_apply(x_v, m, 1.0);
      }
      if (!plan.mask_frames_a.empty()) {
        Var m = g.constant(frame_mask_tensor(xa.shape(), plan.mask_frames_a));
        oa = dropout_mask_apply(x_a, m, 1.0);
      }
      return {ov, oa};
    }
    case TransformKind::Blur: {
      size_t half = plan.kernel.size() / 2;
      Var ov = x_v, oa = x_a;
      bool vis = plan.mode == TransformMode::Visual || plan.mode == TransformMode::BothSync ||
                 plan.mode == TransformMode::BothAsync;
      bool aud = plan.mode == TransformMode::Audio || plan.mode == TransformMode::BothSync ||
                 plan.mode == TransformMode::BothAsync;
      if (vis) {
        check(xv.dim(1) == 1, "transform: graph blur supports single-channel video");
        Var w = g.constant(blur_kernel2d(plan.kernel));
        Var b = g.constant(Tensor(std::vector<size_t>{1}, 0.0));
        std::vector<Var> frames;
        frames.reserve(T);
        for (size_t t = 0; t < T; ++t)
          frames.push_back(conv2d(select0(x_v, t), w, b, 1, half, half));
        ov = stack0(frames);
      }
      if (aud) {
        size_t F = xa.dim(1);
        Tensor w1(std::vector<size_t>{1, 1, 1, plan.kernel.size()});
        for (size_t i = 0; i < plan.kernel.size(); ++i) w1[i] = plan.kernel[i];
        Var w = g.constant(w1);
        Var b = g.constant(Tensor(std::vector<size_t>{1}, 0.0));
        std::vector<Var> frames;
        frames.reserve(T);
        for (size_t t = 0; t < T; ++t) {
          Var row = reshape(select0(x_a, t), {1, 1, F});
          frames.push_back(reshape(conv2d(row, w, b, 1, 0, half), {F}));
        }
        oa = stack0(frames);
      }
      return {ov, oa};
    }
    case TransformKind::Mixup: {
      const AVSample& p = *plan.partner;
      Var ov = x_v, oa = x_a;
      if (plan.mixup_w_v != 1.0) {
        Tensor part = p.x_v;
        for (size_t i = 0; i < part.size(); ++i) part[i] *= (1.0 - plan.mixup_w_v);
        ov = add(scale(x_v, plan.mixup_w_v), g.constant(std::move(part)));
      }
      if (plan.mixup_w_a != 1.0) {
        Tensor part = p.x_a;
        for (size_t i = 0; i < part.size(); ++i) part[i] *= (1.0 - plan.mixup_w_a);
        oa = add(scale(x_a, plan.mixup_w_a), g.constant(std::move(part)));
      }
      return {ov, oa};
    }
  }
  return {x_v, x_a};
}

BuiltObjective build_attack_objective(Graph& g, const std::vector<const AVModel*>& models,
                                      int label, Var x_adv_v, Var x_adv_a,
                                      const std::vector<TransformPlan>& plans,
                                      double lambda1, double lambda2,
                                      const Tensor* fusion_mask, double keep_scale) {
  check(!models.empty(), "attack: no surrogate models");
  check(!plans.empty(), "attack: no transform plans");
  BuiltObjective bo;
  Var sum;
  bool first = true;
  for (const AVModel* m : models) {
    std::map<std::string, Var> pv = param_vars(g, *m, false);
    for (size_t pi = 0; pi < plans.size(); ++pi) {
      auto [txv, txa] = apply_plan_graph(g, x_adv_v, x_adv_a, plans[pi]);
      ForwardVars fv = build_forward(g, *m, txv, txa, pv, fusion_mask, keep_scale);
      if (pi == 0) {
        const Tensor& logits = fv.logits.value();
        int best = 0;
        for (size_t i = 1; i < logits.size(); ++i)
          if (logits[i] > logits[best]) best = static_cast<int>(i);
        bo.clean_preds.push_back(best);
      }
      Var term = cross_entropy(softmax(fv.logits), static_cast<size_t>(label));
      if (lambda1 != 0.0) {
        Var frame_means_v = mean_axis(fv.feat_v, 1);
        Var frame_means_a = mean_axis(fv.feat_a, 1);
        Var temporal_var = add(var_axis(frame_means_a, 0), var_axis(frame_means_v, 0));
        term = sub(term, scale(temporal_var, lambda1));
      }
      if (lambda2 != 0.0) {
        Var cosine = cosine_similarity(fv.pooled_a, fv.pooled_v);
        term = sub(term, scale(cosine, lambda2));
      }
      sum = first ? term : add(sum, term);
      first = false;
    }
  }
  bo.total = scale(sum, 1.0 / static_cast<double>(models.size() * plans.size()));
  return bo;
}

namespace {

TransformMode mode_of(MaskTarget t) {
  switch (t) {
    case MaskTarget::AudioOnly: return TransformMode::Audio;
    case MaskTarget::VisualOnly: return TransformMode::Visual;
    case MaskTarget::BothSync: return TransformMode::BothSync;
    case MaskTarget::BothAsync: return TransformMode::BothAsync;
  }
  return TransformMode::BothSync;
}

Tensor clamped_adv(const Tensor& x, const Tensor& delta) {
  Tensor adv = x;
  for (size_t i = 0; i < adv.size(); ++i)
    adv[i] = std::clamp(adv[i] + delta[i], 0.0, 1.0);
  return adv;
}

void sign_step(Tensor& delta, const Tensor& dir, double alpha) {
  for (size_t i = 0; i < delta.size(); ++i) {
    if (dir[i] > 0.0)
      delta[i] += alpha;
    else if (dir[i] < 0.0)
      delta[i] -= alpha;
  }
}

void l1_normalize(Tensor& g) {
  double n = 0.0;
  for (size_t i = 0; i < g.size(); ++i) n += std::fabs(g[i]);
  double inv = 1.0 / std::max(n, 1e-12);
  for (size_t i = 0; i < g.size(); ++i) g[i] *= inv;
}

// Pull delta back to the intersection of the eps ball and the [0,1] box
// around x. Both clamps only shrink coordinates, so the budget stays exact.
void project_feasible(Tensor& delta, const Tensor& x, double eps) {
  project_linf(delta, eps);
  for (size_t i = 0; i < delta.size(); ++i)
    delta[i] = std::clamp(x[i] + delta[i], 0.0, 1.0) - x[i];
}

}  // namespace

std::vector<TransformPlan> attack_plans(const AttackConfig& cfg, size_t frames,
                                        uint64_t eval_idx) {
  std::vector<TransformPlan> plans;
  TransformPlan id;
  id.identity = true;
  plans.push_back(id);
  if (cfg.n_copies <= 1) return plans;
  uint64_t seed = mix_seed(cfg.seed, {hash_str("plans"), eval_idx});
  if (cfg.masked_copy_rho) {
    Rng rng(seed);
    TransformParams params;
    params.mask_ratio = *cfg.masked_copy_rho;
    for (size_t i = 1; i < cfg.n_copies; ++i)
      plans.push_back(make_plan(frames, TransformKind::Mask, params,
                                mode_of(cfg.masked_copy_target), rng.next()));
    return plans;
  }
  return diversify_plans(cfg.n_copies, cfg.policy, frames, seed);
}

AttackResult run_attack_core(const CoreObjective& obj, const Tensor& x_v, const Tensor& x_a,
                             const Budget& budget, bool use_momentum, bool nesterov,
                             bool box_clip) {
  budget.validate();
  Tensor dv(x_v.shape(), 0.0), da(x_a.shape(), 0.0);
  Tensor mv(x_v.shape(), 0.0), ma(x_a.shape(), 0.0);

  AttackResult res;
  res.delta_v = dv;
  res.delta_a = da;
  double best_obj = -1e300;
  bool best_success = false;

  auto record_feasibility = [&]() {
    res.max_abs_dv.push_back(dv.max_abs());
    res.max_abs_da.push_back(da.max_abs());
    Tensor av = clamped_adv(x_v, dv);
    Tensor aa = clamped_adv(x_a, da);
    res.adv_min.push_back(std::min(av.min(), aa.min()));
    res.adv_max.push_back(std::max(av.max(), aa.max()));
  };
  auto consider = [&](double val, bool succ, size_t iter) {
    if ((succ && !best_success) || (succ == best_success && val > best_obj)) {
      best_obj = val;
      best_success = succ;
      res.best_iter = iter;
      res.delta_v = dv;
      res.delta_a = da;
    }
  };

  record_feasibility();
  for (size_t k = 0; k < budget.iters; ++k) {
    Tensor gv(x_v.shape(), 0.0), ga(x_a.shape(), 0.0);
    bool succ = false;
    double val;
    if (nesterov) {
      val = obj.eval(dv, da, nullptr, nullptr, &succ);
      Tensor lv = dv, la = da;
      for (size_t i = 0; i < lv.size(); ++i) lv[i] += budget.alpha_v * budget.momentum * mv[i];
      for (size_t i = 0; i < la.size(); ++i) la[i] += budget.alpha_a * budget.momentum * ma[i];
      obj.eval(lv, la, &gv, &ga, nullptr);
    } else {
      val = obj.eval(dv, da, &gv, &ga, &succ);
    }
    check(std::isfinite(val), "attack: non-finite objective at iteration " + std::to_string(k));
    check(gv.all_finite() && ga.all_finite(),
          "attack: non-finite gradient at iteration " + std::to_string(k));
    res.objective_trace.push_back(val);
    consider(val, succ, k);

    Tensor *dir_v = &gv, *dir_a = &ga;
    if (use_momentum) {
      l1_normalize(gv);
      l1_normalize(ga);
      for (size_t i = 0; i < mv.size(); ++i) mv[i] = budget.momentum * mv[i] + gv[i];
      for (size_t i = 0; i < ma.size(); ++i) ma[i] = budget.momentum * ma[i] + ga[i];
      dir_v = &mv;
      dir_a = &ma;
    }
    sign_step(dv, *dir_v, budget.alpha_v);
    sign_step(da, *dir_a, budget.alpha_a);
    if (box_clip) {
      project_feasible(dv, x_v, budget.eps_v);
      project_feasible(da, x_a, budget.eps_a);
    } else {
      project_linf(dv, budget.eps_v);
      project_linf(da, budget.eps_a);
    }
    record_feasibility();
  }
  {
    bool succ = false;
    double val = obj.eval(dv, da, nullptr, nullptr, &succ);
    res.objective_trace.push_back(val);
    consider(val, succ, budget.iters);
  }
  res.success = best_success;
  return res;
}

AttackResult run_attack(const std::vector<const AVModel*>& models, const AVSample& s,
                        const AttackConfig& cfg, PassCounter* passes) {
  cfg.validate();
  check(!models.empty(), "attack: no surrogate models");
  size_t T = s.frames();
  uint64_t eval_idx = 0;

  CoreObjective obj;
  obj.eval = [&, T](const Tensor& dv, const Tensor& da, Tensor* gv, Tensor* ga,
                    bool* success) -> double {
    std::vector<TransformPlan> plans = attack_plans(cfg, T, eval_idx++);
    Graph g;
    Tensor adv_v = clamped_adv(s.x_v, dv);
    Tensor adv_a = clamped_adv(s.x_a, da);
    bool want_grad = gv != nullptr;
    Var xv = want_grad ? g.input(std::move(adv_v)) : g.constant(std::move(adv_v));
    Var xa = want_grad ? g.input(std::move(adv_a)) : g.constant(std::move(adv_a));
    BuiltObjective bo = build_attack_objective(g, models, s.label, xv, xa, plans,
                                               cfg.eff_lambda1(), cfg.eff_lambda2());
    if (passes)
      passes->forward += static_cast<uint64_t>(T) * plans.size() * models.size();
    if (want_grad) {
      g.backward(bo.total);
      *gv = xv.grad();
      *ga = xa.grad();
      if (passes)
        passes->backward += static_cast<uint64_t>(T) * plans.size() * models.size();
    }
    if (success) {
      bool all_fooled = true;
      for (int pred : bo.clean_preds)
        if (pred == s.label) all_fooled = false;
      *success = all_fooled;
    }
    return bo.total.value()[0];
  };

  return run_attack_core(obj, s.x_v, s.x_a, cfg.budget, cfg.uses_momentum(),
                         cfg.method == AttackMethod::Nifgsm);
}

double attack_objective(const std::vector<const AVModel*>& models, const AVSample& s,
                        const Tensor& dv, const Tensor& da, const AttackConfig& cfg) {
  cfg.validate();
  std::vector<TransformPlan> plans = attack_plans(cfg, s.frames(), 0);
  Graph g;
  Var xv = g.constant(clamped_adv(s.x_v, dv));
  Var xa = g.constant(clamped_adv(s.x_a, da));
  BuiltObjective bo = build_attack_objective(g, models, s.label, xv, xa, plans,
                                             cfg.eff_lambda1(), cfg.eff_lambda2());
  return bo.total.value()[0];
}

AVSample apply_delta(const AVSample& s, const Tensor& dv, const Tensor& da) {
  AVSample adv = s;
  adv.x_v = clamped_adv(s.x_v, dv);
  adv.x_a = clamped_adv(s.x_a, da);
  return adv;
}

namespace {

// Crafted adversarial test set for one surrogate set, plus the surrogate-side
// feature cosine of every adversarial example.
struct CraftedSet {
  std::vector<AVSample> adv;
  std::vector<double> cosine;
};

CraftedSet craft_set(const std::vector<const AVModel*>& surrogates,
                     const AVModel& measure_model, const std::vector<AVSample>& samples,
                     const AttackConfig& cfg, uint64_t salt) {
  CraftedSet out;
  out.adv.resize(samples.size());
  out.cosine.resize(samples.size(), 0.0);
  parallel_for(samples.size(), [&](size_t i) {
    AttackConfig c = cfg;
    c.seed = mix_seed(cfg.seed, {salt, i});
    AttackResult r = run_attack(surrogates, samples[i], c);
    out.adv[i] = apply_delta(samples[i], r.delta_v, r.delta_a);
    ForwardTrace tr = forward(measure_model, out.adv[i].x_v, out.adv[i].x_a);
    out.cosine[i] = mma_loss(tr);
  });
  return out;
}

std::vector<char> clean_correct_mask(const AVModel& victim,
                                     const std::vector<AVSample>& samples) {
  std::vector<char> ok(samples.size(), 0);
  parallel_for(samples.size(), [&](size_t i) {
    ok[i] = predict(victim, samples[i]) == samples[i].label ? 1 : 0;
  });
  return ok;
}

// Misclassification rate of the victim over its clean-correct samples.
double asr_against(const AVModel& victim, const std::vector<AVSample>& adv,
                   const std::vector<AVSample>& samples, const std::vector<char>& eligible) {
  std::vector<char> fooled(adv.size(), 0);
  parallel_for(adv.size(), [&](size_t i) {
    if (!eligible[i]) return;
    fooled[i] = predict(victim, adv[i]) != samples[i].label ? 1 : 0;
  });
  size_t n = 0, hits = 0;
  for (size_t i = 0; i < adv.size(); ++i) {
    if (!eligible[i]) continue;
    ++n;
    hits += static_cast<size_t>(fooled[i]);
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

TransferRun transfer_matrix(const std::map<std::string, AVModel>& grid,
                            const std::vector<AVSample>& samples, const AttackConfig& cfg) {
  check(!grid.empty(), "transfer: empty model grid");
  check(!samples.empty(), "transfer: empty evaluation set");
  TransferRun run;
  for (const auto& [id, m] : grid) run.ids.push_back(id);
  size_t n = run.ids.size();

  std::vector<std::vector<char>> eligible(n);
  run.eligible.resize(n);
  for (size_t v = 0; v < n; ++v) {
    eligible[v] = clean_correct_mask(grid.at(run.ids[v]), samples);
    run.eligible[v] = static_cast<size_t>(
        std::count(eligible[v].begin(), eligible[v].end(), 1));
    check(run.eligible[v] > 0, "transfer: victim " + run.ids[v] +
                                   " classifies no test sample correctly");
  }

  run.asr.assign(n, std::vector<double>(n, 0.0));
  run.mean_cosine.resize(n, 0.0);
  run.mean_blackbox_asr.resize(n, 0.0);
  for (size_t si = 0; si < n; ++si) {
    const AVModel& surrogate = grid.at(run.ids[si]);
    CraftedSet crafted = craft_set({&surrogate}, surrogate, samples, cfg,
                                   mix_seed(cfg.seed, {hash_str(run.ids[si])}));
    double csum = 0.0;
    for (double c : crafted.cosine) csum += c;
    run.mean_cosine[si] = csum / static_cast<double>(samples.size());
    double bb = 0.0;
    for (size_t vi = 0; vi < n; ++vi) {
      run.asr[si][vi] =
          asr_against(grid.at(run.ids[vi]), crafted.adv, samples, eligible[vi]);
      if (vi != si) bb += run.asr[si][vi];
    }
    run.mean_blackbox_asr[si] = n > 1 ? bb / static_cast<double>(n - 1) : 0.0;
  }
  return run;
}

EnsembleRun ensemble_attack(const std::map<std::string, AVModel>& grid,
                            const std::string& victim_id,
                            const std::vector<AVSample>& samples, const AttackConfig& cfg) {
  check(grid.count(victim_id) == 1, "ensemble: unknown victim " + victim_id);
  std::vector<const AVModel*> surrogates;
  for (const auto& [id, m] : grid)
    if (id != victim_id) surrogates.push_back(&m);
  check(!surrogates.empty(), "ensemble: no surrogates besides the victim");

  const AVModel& victim = grid.at(victim_id);
  std::vector<char> eligible = clean_correct_mask(victim, samples);
  CraftedSet crafted = craft_set(surrogates, *surrogates.front(), samples, cfg,
                                 mix_seed(cfg.seed, {hash_str("ens"), hash_str(victim_id)}));
  EnsembleRun out;
  out.victim = victim_id;
  out.eligible =
      static_cast<size_t>(std::count(eligible.begin(), eligible.end(), 1));
  out.asr = asr_against(victim, crafted.adv, samples, eligible);
  return out;
}

std::vector<CosineAsrRow> cosine_vs_asr(const std::map<std::string, AVModel>& grid,
                                        const std::string& surrogate_id,
                                        const std::vector<AVSample>& samples,
                                        const std::vector<AttackConfig>& method_cfgs) {
  check(method_cfgs.size() >= 2, "cosine_vs_asr: need at least two methods");
  check(grid.count(surrogate_id) == 1, "cosine_vs_asr: unknown surrogate " + surrogate_id);
  const AVModel& surrogate = grid.at(surrogate_id);

  std::vector<std::string> victims;
  std::vector<std::vector<char>> eligible;
  for (const auto& [id, m] : grid) {
    if (id == surrogate_id) continue;
    victims.push_back(id);
    eligible.push_back(clean_correct_mask(m, samples));
  }

  std::vector<CosineAsrRow> rows;
  for (const AttackConfig& cfg : method_cfgs) {
    CraftedSet crafted =
        craft_set({&surrogate}, surrogate, samples, cfg,
                  mix_seed(cfg.seed, {hash_str("cos"), hash_str(attack_method_name(cfg.method))}));
    CosineAsrRow row;
    row.method = cfg.method;
    double csum = 0.0;
    for (double c : crafted.cosine) csum += c;
    row.mean_cosine = csum / static_cast<double>(samples.size());
    double bb = 0.0;
    for (size_t vi = 0; vi < victims.size(); ++vi)
      bb += asr_against(grid.at(victims[vi]), crafted.adv, samples, eligible[vi]);
    row.mean_blackbox_asr = bb / static_cast<double>(victims.size());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace av
