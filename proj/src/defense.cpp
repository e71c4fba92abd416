#include "av/defense.hpp"

#include <algorithm>
#include <cmath>

#include "av/parallel.hpp"

namespace av {

const char* scheduler_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::None: return "none";
    case SchedulerKind::Constant: return "constant";
    case SchedulerKind::Cyclic: return "cyclic";
    case SchedulerKind::Linear: return "linear";
    case SchedulerKind::Cosine: return "cosine";
  }
  return "?";
}

std::optional<SchedulerKind> scheduler_from(const std::string& name) {
  for (SchedulerKind k : {SchedulerKind::None, SchedulerKind::Constant, SchedulerKind::Cyclic,
                          SchedulerKind::Linear, SchedulerKind::Cosine})
    if (name == scheduler_name(k)) return k;
  return std::nullopt;
}

void ScheduleConfig::validate() const {
  if (kind == SchedulerKind::None) return;
  if (kind == SchedulerKind::Constant)
    check(constant > 0.0 && constant < 1.0, "schedule: constant ratio must be in (0,1)");
  else
    check(lo > 0.0 && lo <= hi && hi < 1.0, "schedule: need 0 < lo <= hi < 1");
  if (kind == SchedulerKind::Cyclic) check(period >= 2, "schedule: cyclic period must be >= 2");
  check(k_lo >= 1 && k_lo <= k_hi, "schedule: need 1 <= k_lo <= k_hi");
}

CurriculumState schedule_at(const ScheduleConfig& cfg, size_t step, size_t total_steps) {
  cfg.validate();
  check(total_steps >= 1, "schedule: total_steps must be >= 1");
  CurriculumState st;
  st.step = step;
  double t_max = total_steps > 1 ? static_cast<double>(total_steps - 1) : 1.0;
  double phase = 1.0;
  switch (cfg.kind) {
    case SchedulerKind::None:
      st.rho_x = 1.0;
      st.rho_f = 0.0;
      st.k = cfg.k_hi;
      return st;
    case SchedulerKind::Constant:
      st.rho_x = cfg.constant;
      st.rho_f = cfg.constant;
      st.k = cfg.k_hi;
      return st;
    case SchedulerKind::Cyclic: {
      double u = static_cast<double>(step % cfg.period) / static_cast<double>(cfg.period);
      phase = 1.0 - std::fabs(2.0 * u - 1.0);  // triangular: lo -> hi -> lo
      break;
    }
    case SchedulerKind::Linear:
      phase = std::min(1.0, static_cast<double>(step) / t_max);
      break;
    case SchedulerKind::Cosine:
      phase = (1.0 - std::cos(kPi * std::min(1.0, static_cast<double>(step) / t_max))) / 2.0;
      break;
  }
  st.rho_x = cfg.lo + (cfg.hi - cfg.lo) * phase;
  st.rho_f = st.rho_x;
  long k = std::lround(static_cast<double>(cfg.k_lo) +
                       (static_cast<double>(cfg.k_hi) - static_cast<double>(cfg.k_lo)) * phase);
  st.k = static_cast<size_t>(std::max<long>(1, k));
  return st;
}

void DefenseConfig::validate(size_t frames) const {
  check(segments >= 1, "defense: need at least one segment");
  check(segments <= frames, "defense: segments (" + std::to_string(segments) +
                                ") exceed frame count (" + std::to_string(frames) + ")");
  check(alpha > 0.0 && alpha <= 1.0, "defense: sampling ratio must be in (0,1]");
  check(lr > 0.0, "defense: lr must be positive");
  check(batch >= 1, "defense: batch must be >= 1");
  inner.validate();
  sched.validate();
}

namespace {

size_t ceil_ratio(double ratio, size_t len) {
  if (len == 0) return 0;
  size_t k = static_cast<size_t>(std::ceil(ratio * static_cast<double>(len) - 1e-9));
  return std::clamp<size_t>(k, 1, len);
}

}  // namespace

SegmentSelection segment_and_sample(size_t frames, size_t segments, double alpha,
                                    uint64_t seed) {
  check(segments >= 1, "segment: need at least one segment");
  check(segments <= frames, "segment: segments (" + std::to_string(segments) +
                                ") exceed frame count (" + std::to_string(frames) + ")");
  check(alpha > 0.0 && alpha <= 1.0, "segment: sampling ratio must be in (0,1]");
  SegmentSelection sel;
  for (size_t i = 0; i < segments; ++i) {
    size_t lo = frames * i / segments;
    size_t hi = frames * (i + 1) / segments;
    sel.bounds.emplace_back(lo, hi);
    size_t len = hi - lo;
    Rng rng(mix_seed(seed, {hash_str("segment"), i}));
    std::vector<size_t> pick = rng.sample_without_replacement(len, ceil_ratio(alpha, len));
    for (size_t& p : pick) p += lo;
    sel.selected.push_back(std::move(pick));
  }
  return sel;
}

SegmentSelection segment_and_sample_curriculum(size_t frames, size_t segments, double alpha,
                                               double rho_x, uint64_t seed) {
  check(rho_x > 0.0 && rho_x <= 1.0, "segment: rho_x must be in (0,1]");
  SegmentSelection sel;
  check(segments >= 1 && segments <= frames, "segment: bad segment count");
  check(alpha > 0.0 && alpha <= 1.0, "segment: sampling ratio must be in (0,1]");
  for (size_t i = 0; i < segments; ++i) {
    size_t lo = frames * i / segments;
    size_t hi = frames * (i + 1) / segments;
    sel.bounds.emplace_back(lo, hi);
    size_t len = hi - lo;
    Rng rng(mix_seed(seed, {hash_str("segment"), i}));
    std::vector<size_t> kept = rng.sample_without_replacement(len, ceil_ratio(rho_x, len));
    std::vector<size_t> within = rng.sample_without_replacement(
        kept.size(), ceil_ratio(alpha, kept.size()));
    std::vector<size_t> pick;
    pick.reserve(within.size());
    for (size_t w : within) pick.push_back(lo + kept[w]);
    std::sort(pick.begin(), pick.end());
    sel.selected.push_back(std::move(pick));
  }
  return sel;
}

namespace {

AVSample gather_frames(const AVSample& s, const std::vector<size_t>& frames) {
  size_t T = s.frames();
  size_t cv = s.x_v.size() / T, ca = s.x_a.size() / T;
  std::vector<size_t> sv = s.x_v.shape(), sa = s.x_a.shape();
  sv[0] = frames.size();
  sa[0] = frames.size();
  AVSample out;
  out.label = s.label;
  out.x_v = Tensor(sv);
  out.x_a = Tensor(sa);
  for (size_t i = 0; i < frames.size(); ++i) {
    std::copy(s.x_v.data() + frames[i] * cv, s.x_v.data() + (frames[i] + 1) * cv,
              out.x_v.data() + i * cv);
    std::copy(s.x_a.data() + frames[i] * ca, s.x_a.data() + (frames[i] + 1) * ca,
              out.x_a.data() + i * ca);
  }
  return out;
}

}  // namespace

std::vector<SegmentPerturbation> craft_universal(const AVModel& model, const AVSample& s,
                                                 const SegmentSelection& sel,
                                                 const AttackConfig& inner, size_t k_steps,
                                                 double rho_f, uint64_t seed,
                                                 PassCounter* passes) {
  check(!sel.selected.empty(), "craft: no segments");
  size_t T = s.frames();
  size_t cv = s.x_v.size() / T, ca = s.x_a.size() / T;
  std::vector<size_t> frame_shape_v(s.x_v.shape().begin() + 1, s.x_v.shape().end());
  std::vector<size_t> frame_shape_a(s.x_a.shape().begin() + 1, s.x_a.shape().end());

  Budget budget = inner.budget;
  budget.iters = std::max<size_t>(1, k_steps);

  std::vector<SegmentPerturbation> out;
  for (size_t si = 0; si < sel.selected.size(); ++si) {
    const std::vector<size_t>& frames = sel.selected[si];
    check(!frames.empty(), "craft: segment " + std::to_string(si) + " has no sampled frames");
    AVSample sub = gather_frames(s, frames);
    size_t n = frames.size();

    Rng drop_rng(mix_seed(seed, {hash_str("dropout"), si}));
    uint64_t eval_idx = 0;

    CoreObjective obj;
    obj.eval = [&](const Tensor& dv, const Tensor& da, Tensor* gv, Tensor* ga,
                   bool* success) -> double {
      std::vector<TransformPlan> plans = attack_plans(inner, n, eval_idx++);
      Graph g;
      bool want_grad = gv != nullptr;
      // one leaf per sampled frame so the tied delta's gradient is the sum
      std::vector<Var> leaves_v, leaves_a;
      leaves_v.reserve(n);
      leaves_a.reserve(n);
      for (size_t i = 0; i < n; ++i) {
        Tensor fv(frame_shape_v), fa(frame_shape_a);
        for (size_t k = 0; k < cv; ++k)
          fv[k] = std::clamp(sub.x_v[i * cv + k] + dv[k], 0.0, 1.0);
        for (size_t k = 0; k < ca; ++k)
          fa[k] = std::clamp(sub.x_a[i * ca + k] + da[k], 0.0, 1.0);
        leaves_v.push_back(want_grad ? g.input(std::move(fv)) : g.constant(std::move(fv)));
        leaves_a.push_back(want_grad ? g.input(std::move(fa)) : g.constant(std::move(fa)));
      }
      Var xv = stack0(leaves_v);
      Var xa = stack0(leaves_a);

      Tensor mask;
      const Tensor* mask_ptr = nullptr;
      double keep = 1.0;
      if (rho_f > 0.0) {
        mask = make_fusion_mask(model.spec.fused_dim(), rho_f, drop_rng);
        keep = 1.0 / (1.0 - rho_f);
        mask_ptr = &mask;
      }
      BuiltObjective bo =
          build_attack_objective(g, {&model}, s.label, xv, xa, plans, inner.eff_lambda1(),
                                 inner.eff_lambda2(), mask_ptr, keep);
      if (passes) passes->forward += static_cast<uint64_t>(n) * plans.size();
      if (want_grad) {
        g.backward(bo.total);
        *gv = Tensor(dv.shape(), 0.0);
        *ga = Tensor(da.shape(), 0.0);
        for (size_t i = 0; i < n; ++i) {
          const Tensor& lgv = leaves_v[i].grad();
          const Tensor& lga = leaves_a[i].grad();
          for (size_t k = 0; k < cv; ++k) (*gv)[k] += lgv[k];
          for (size_t k = 0; k < ca; ++k) (*ga)[k] += lga[k];
        }
        if (passes) passes->backward += static_cast<uint64_t>(n) * plans.size();
      }
      if (success) {
        bool fooled = true;
        for (int pred : bo.clean_preds)
          if (pred == s.label) fooled = false;
        *success = fooled;
      }
      return bo.total.value()[0];
    };

    Tensor zero_v(frame_shape_v, 0.0), zero_a(frame_shape_a, 0.0);
    AttackResult r = run_attack_core(obj, zero_v, zero_a, budget, inner.uses_momentum(),
                                     inner.method == AttackMethod::Nifgsm,
                                     /*box_clip=*/false);
    out.push_back({r.delta_v, r.delta_a});
  }
  return out;
}

void propagate(const std::vector<SegmentPerturbation>& segs, const SegmentSelection& sel,
               Tensor& dv_full, Tensor& da_full) {
  check(segs.size() == sel.bounds.size(), "propagate: one perturbation per segment required");
  check(dv_full.ndim() >= 1 && da_full.ndim() >= 1, "propagate: bad output tensors");
  size_t T = dv_full.dim(0);
  check(da_full.dim(0) == T, "propagate: modality frame counts differ");
  check(!sel.bounds.empty() && sel.bounds.back().second == T,
        "propagate: segments do not cover the timeline");
  size_t cv = dv_full.size() / T, ca = da_full.size() / T;
  for (size_t si = 0; si < segs.size(); ++si) {
    check(segs[si].dv.size() == cv && segs[si].da.size() == ca,
          "propagate: segment " + std::to_string(si) + " perturbation shape mismatch");
    for (size_t t = sel.bounds[si].first; t < sel.bounds[si].second; ++t) {
      for (size_t k = 0; k < cv; ++k) dv_full[t * cv + k] = segs[si].dv[k];
      for (size_t k = 0; k < ca; ++k) da_full[t * ca + k] = segs[si].da[k];
    }
  }
}

namespace {

// Full-sequence per-frame crafting (vanilla PGD inner step), with optional
// fusion dropout and frame-level pass accounting.
std::pair<Tensor, Tensor> craft_full(const AVModel& model, const AVSample& s,
                                     const AttackConfig& inner, size_t k_steps, double rho_f,
                                     uint64_t seed, PassCounter* passes) {
  size_t T = s.frames();
  Budget budget = inner.budget;
  budget.iters = std::max<size_t>(1, k_steps);
  Rng drop_rng(mix_seed(seed, {hash_str("dropout")}));
  uint64_t eval_idx = 0;

  CoreObjective obj;
  obj.eval = [&](const Tensor& dv, const Tensor& da, Tensor* gv, Tensor* ga,
                 bool* success) -> double {
    std::vector<TransformPlan> plans = attack_plans(inner, T, eval_idx++);
    Graph g;
    bool want_grad = gv != nullptr;
    Tensor adv_v = s.x_v, adv_a = s.x_a;
    for (size_t i = 0; i < adv_v.size(); ++i)
      adv_v[i] = std::clamp(adv_v[i] + dv[i], 0.0, 1.0);
    for (size_t i = 0; i < adv_a.size(); ++i)
      adv_a[i] = std::clamp(adv_a[i] + da[i], 0.0, 1.0);
    Var xv = want_grad ? g.input(std::move(adv_v)) : g.constant(std::move(adv_v));
    Var xa = want_grad ? g.input(std::move(adv_a)) : g.constant(std::move(adv_a));
    Tensor mask;
    const Tensor* mask_ptr = nullptr;
    double keep = 1.0;
    if (rho_f > 0.0) {
      mask = make_fusion_mask(model.spec.fused_dim(), rho_f, drop_rng);
      keep = 1.0 / (1.0 - rho_f);
      mask_ptr = &mask;
    }
    BuiltObjective bo = build_attack_objective(g, {&model}, s.label, xv, xa, plans,
                                               inner.eff_lambda1(), inner.eff_lambda2(),
                                               mask_ptr, keep);
    if (passes) passes->forward += static_cast<uint64_t>(T) * plans.size();
    if (want_grad) {
      g.backward(bo.total);
      *gv = xv.grad();
      *ga = xa.grad();
      if (passes) passes->backward += static_cast<uint64_t>(T) * plans.size();
    }
    if (success) {
      bool fooled = true;
      for (int pred : bo.clean_preds)
        if (pred == s.label) fooled = false;
      *success = fooled;
    }
    return bo.total.value()[0];
  };

  AttackResult r = run_attack_core(obj, s.x_v, s.x_a, budget, inner.uses_momentum(),
                                   inner.method == AttackMethod::Nifgsm);
  return {r.delta_v, r.delta_a};
}

AVSample craft_adversarial_sample(const AVModel& model, const AVSample& s,
                                  const DefenseConfig& cfg, const CurriculumState& st,
                                  uint64_t craft_seed, PassCounter* passes) {
  Tensor dv_full(s.x_v.shape(), 0.0), da_full(s.x_a.shape(), 0.0);
  if (cfg.craft == CraftMode::SegmentUniversal) {
    SegmentSelection sel = segment_and_sample_curriculum(
        s.frames(), cfg.segments, cfg.alpha, st.rho_x, craft_seed);
    std::vector<SegmentPerturbation> segs =
        craft_universal(model, s, sel, cfg.inner, st.k, st.rho_f, craft_seed, passes);
    propagate(segs, sel, dv_full, da_full);
  } else {
    auto [dv, da] = craft_full(model, s, cfg.inner, st.k, st.rho_f, craft_seed, passes);
    dv_full = dv;
    da_full = da;
  }
  return apply_delta(s, dv_full, da_full);
}

}  // namespace

DefenseResult adversarial_train(const AVModel& m, const DatasetSplits& data,
                                const DefenseConfig& cfg) {
  check(!data.train.empty(), "defense: empty training split");
  cfg.validate(data.train.front().frames());

  DefenseResult res;
  res.model = m;
  if (cfg.epochs == 0) return res;

  PassCounter passes;
  Rng order_rng(mix_seed(cfg.seed, {hash_str("order")}));
  std::vector<size_t> idx(data.train.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  size_t steps_per_epoch = (data.train.size() + cfg.batch - 1) / cfg.batch;
  size_t total_steps = cfg.epochs * steps_per_epoch;

  const std::vector<AVSample>& eval_split = data.val.empty() ? data.train : data.val;
  std::vector<AVSample> robust_probe(
      eval_split.begin(),
      eval_split.begin() + std::min<size_t>(16, eval_split.size()));

  size_t step = 0;
  CurriculumState last_state;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(idx);
    for (size_t start = 0; start < idx.size(); start += cfg.batch) {
      size_t end = std::min(start + cfg.batch, idx.size());
      CurriculumState st = schedule_at(cfg.sched, step, total_steps);
      res.schedule_trace.push_back(st);
      last_state = st;

      std::vector<AVSample> adv(end - start);
      parallel_for(end - start, [&](size_t bi) {
        const AVSample& s = data.train[idx[start + bi]];
        uint64_t craft_seed = mix_seed(cfg.seed, {hash_str("craft"), step, bi});
        adv[bi] = craft_adversarial_sample(res.model, s, cfg, st, craft_seed, &passes);
      });
      std::vector<const AVSample*> batch_ptrs;
      batch_ptrs.reserve(adv.size());
      for (const AVSample& a : adv) batch_ptrs.push_back(&a);
      double loss = sgd_step(res.model, batch_ptrs, cfg.lr);
      check(std::isfinite(loss),
            "defense: diverged (non-finite loss) at step " + std::to_string(step));
      ++step;
    }

    DefenseLogRow row;
    row.epoch = epoch;
    row.clean_acc = accuracy(res.model, eval_split);
    {
      AttackConfig probe_cfg = cfg.inner;
      probe_cfg.budget.iters = cfg.sched.k_hi;
      size_t correct = 0;
      std::vector<char> ok(robust_probe.size(), 0);
      parallel_for(robust_probe.size(), [&](size_t i) {
        AttackConfig c = probe_cfg;
        c.seed = mix_seed(cfg.seed, {hash_str("probe"), epoch, i});
        AttackResult r = run_attack({&res.model}, robust_probe[i], c);
        AVSample a = apply_delta(robust_probe[i], r.delta_v, r.delta_a);
        ok[i] = predict(res.model, a) == a.label ? 1 : 0;
      });
      for (char c : ok) correct += static_cast<size_t>(c);
      row.robust_acc = robust_probe.empty()
                           ? 0.0
                           : static_cast<double>(correct) / static_cast<double>(robust_probe.size());
    }
    row.rho_x = last_state.rho_x;
    row.rho_f = last_state.rho_f;
    row.k = last_state.k;
    row.fwd_passes = passes.forward.load();
    row.bwd_passes = passes.backward.load();
    res.log.push_back(row);
  }

  for (auto& [name, t] : res.model.params) t.quantize_f32();
  res.fwd_passes = passes.forward.load();
  res.bwd_passes = passes.backward.load();
  return res;
}

std::vector<std::pair<std::string, double>> evaluate_defense(
    const AVModel& m, const std::vector<std::pair<std::string, AttackConfig>>& suite,
    const std::vector<AVSample>& test) {
  check(!test.empty(), "evaluate_defense: empty test set");
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& [name, cfg] : suite) {
    std::vector<char> ok(test.size(), 0);
    parallel_for(test.size(), [&](size_t i) {
      AttackConfig c = cfg;
      c.seed = mix_seed(cfg.seed, {hash_str("evald"), hash_str(name), i});
      AttackResult r = run_attack({&m}, test[i], c);
      AVSample adv = apply_delta(test[i], r.delta_v, r.delta_a);
      ok[i] = predict(m, adv) == adv.label ? 1 : 0;
    });
    size_t correct = 0;
    for (char c : ok) correct += static_cast<size_t>(c);
    rows.emplace_back(name, static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  return rows;
}

}  // namespace av
