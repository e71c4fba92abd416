#include "av/model.hpp"

#include <algorithm>
#include <cmath>

#include "av/parallel.hpp"

namespace av {

char backbone_initial(Backbone b) {
  switch (b) {
    case Backbone::ToyA: return 'A';
    case Backbone::ToyV: return 'V';
    case Backbone::ToyR: return 'R';
  }
  return '?';
}

namespace {

size_t isqrt_exact(size_t n, const char* what) {
  size_t r = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  check(r * r == n, std::string(what) + ": " + std::to_string(n) + " is not a perfect square");
  return r;
}

constexpr size_t kConvChannels = 8;

}  // namespace

void ModelSpec::validate() const {
  check(n_classes >= 2, "model: n_classes must be >= 2");
  check(feat_dim >= 1, "model: feat_dim must be >= 1");
  check(height >= 2 && width >= 2 && channels >= 1, "model: video frame geometry too small");
  size_t r = isqrt_exact(bins, "model: audio bins");
  check(r >= 2, "model: audio frame side must be >= 2 after reshape");
  // Sum fusion needs equal modality feature dims; both encoders emit feat_dim
  // here, so that holds by construction.
}

std::string model_id(const ModelSpec& spec) {
  std::string id;
  id += backbone_initial(spec.visual);
  id += (spec.fusion == Fusion::Sum) ? 's' : 'c';
  id += backbone_initial(spec.audio);
  return id;
}

namespace {

struct LayerDef {
  std::string name;
  std::vector<size_t> shape;
  size_t fan_in;
};

void backbone_layers(Backbone kind, const std::string& prefix, size_t in_ch, size_t h,
                     size_t w, size_t feat_dim, std::vector<LayerDef>& out) {
  size_t cc = kConvChannels;
  size_t flat = cc * (h / 2) * (w / 2);
  out.push_back({prefix + ".conv1.w", {cc, in_ch, 3, 3}, in_ch * 9});
  out.push_back({prefix + ".conv1.b", {cc}, in_ch * 9});
  if (kind == Backbone::ToyV || kind == Backbone::ToyR) {
    out.push_back({prefix + ".conv2.w", {cc, cc, 3, 3}, cc * 9});
    out.push_back({prefix + ".conv2.b", {cc}, cc * 9});
  }
  if (kind == Backbone::ToyR) {
    out.push_back({prefix + ".res1.w", {cc, cc, 3, 3}, cc * 9});
    out.push_back({prefix + ".res1.b", {cc}, cc * 9});
    out.push_back({prefix + ".res2.w", {cc, cc, 3, 3}, cc * 9});
    out.push_back({prefix + ".res2.b", {cc}, cc * 9});
  }
  out.push_back({prefix + ".fc.w", {feat_dim, flat}, flat});
  out.push_back({prefix + ".fc.b", {feat_dim}, flat});
}

std::vector<LayerDef> model_layers(const ModelSpec& spec) {
  std::vector<LayerDef> defs;
  size_t ar = isqrt_exact(spec.bins, "model: audio bins");
  backbone_layers(spec.visual, "v", spec.channels, spec.height, spec.width, spec.feat_dim,
                  defs);
  backbone_layers(spec.audio, "a", 1, ar, ar, spec.feat_dim, defs);
  size_t fused = spec.fused_dim();
  defs.push_back({"u.fc.w", {spec.n_classes, fused}, fused});
  defs.push_back({"u.fc.b", {spec.n_classes}, fused});
  return defs;
}

}  // namespace

AVModel build_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  AVModel m;
  m.spec = spec;
  m.seed = seed;
  for (const LayerDef& def : model_layers(spec)) {
    Rng rng(mix_seed(seed, {hash_str(def.name)}));
    double bound = 1.0 / std::sqrt(static_cast<double>(def.fan_in));
    Tensor t(def.shape);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    t.quantize_f32();
    m.params.emplace(def.name, std::move(t));
  }
  return m;
}

bool params_equal(const AVModel& a, const AVModel& b) {
  if (a.params.size() != b.params.size()) return false;
  for (const auto& [name, t] : a.params) {
    auto it = b.params.find(name);
    if (it == b.params.end() || !it->second.same_shape(t)) return false;
    for (size_t i = 0; i < t.size(); ++i)
      if (t[i] != it->second[i]) return false;
  }
  return true;
}

int ForwardTrace::prediction() const {
  int best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

std::map<std::string, Var> param_vars(Graph& g, const AVModel& m, bool needs_grad) {
  std::map<std::string, Var> pv;
  for (const auto& [name, t] : m.params)
    pv.emplace(name, needs_grad ? g.input(t) : g.constant(t));
  return pv;
}

namespace {

const Var& pvar(const std::map<std::string, Var>& pv, const std::string& name) {
  auto it = pv.find(name);
  check(it != pv.end(), "forward: missing parameter " + name);
  return it->second;
}

// Frame encoder: conv stack ending in a feat_dim vector.
Var backbone_forward(Backbone kind, const std::string& prefix,
                     const std::map<std::string, Var>& pv, Var frame) {
  Var h = relu(conv2d(frame, pvar(pv, prefix + ".conv1.w"), pvar(pv, prefix + ".conv1.b"),
                      1, 1, 1));
  h = maxpool2(h);
  if (kind == Backbone::ToyV || kind == Backbone::ToyR) {
    h = relu(conv2d(h, pvar(pv, prefix + ".conv2.w"), pvar(pv, prefix + ".conv2.b"), 1, 1,
                    1));
  }
  if (kind == Backbone::ToyR) {
    Var r = relu(conv2d(h, pvar(pv, prefix + ".res1.w"), pvar(pv, prefix + ".res1.b"), 1, 1,
                        1));
    r = conv2d(r, pvar(pv, prefix + ".res2.w"), pvar(pv, prefix + ".res2.b"), 1, 1, 1);
    h = relu(add(h, r));
  }
  h = reshape(h, {h.value().size()});
  return linear(h, pvar(pv, prefix + ".fc.w"), pvar(pv, prefix + ".fc.b"));
}

}  // namespace

ForwardVars build_forward(Graph& g, const AVModel& m, Var x_v, Var x_a,
                          const std::map<std::string, Var>& pv, const Tensor* fusion_mask,
                          double keep_scale) {
  const ModelSpec& spec = m.spec;
  const Tensor& xv = x_v.value();
  const Tensor& xa = x_a.value();
  check(xv.ndim() == 4, "forward: video input must be (T,C,H,W), got " + xv.shape_str());
  check(xa.ndim() == 2, "forward: audio input must be (T,F), got " + xa.shape_str());
  check(xv.dim(0) == xa.dim(0),
        "forward: frame count mismatch: video T=" + std::to_string(xv.dim(0)) +
            ", audio T=" + std::to_string(xa.dim(0)));
  check(xa.dim(1) == spec.bins, "forward: audio has " + std::to_string(xa.dim(1)) +
                                    " bins, model expects " + std::to_string(spec.bins));
  size_t T = xv.dim(0);
  size_t ar = isqrt_exact(spec.bins, "forward: audio bins");

  ForwardVars fv;
  fv.x_v = x_v;
  fv.x_a = x_a;
  std::vector<Var> feats_v, feats_a;
  feats_v.reserve(T);
  feats_a.reserve(T);
  for (size_t t = 0; t < T; ++t) {
    Var frame_v = select0(x_v, t);
    feats_v.push_back(backbone_forward(spec.visual, "v", pv, frame_v));
    Var frame_a = reshape(select0(x_a, t), {1, ar, ar});
    feats_a.push_back(backbone_forward(spec.audio, "a", pv, frame_a));
  }
  fv.feat_v = stack0(feats_v);
  fv.feat_a = stack0(feats_a);
  fv.pooled_v = mean_axis(fv.feat_v, 0);
  fv.pooled_a = mean_axis(fv.feat_a, 0);
  fv.fused = (spec.fusion == Fusion::Sum) ? add(fv.pooled_v, fv.pooled_a)
                                          : concat(fv.pooled_v, fv.pooled_a);
  if (fusion_mask != nullptr) {
    Var mask = g.constant(*fusion_mask);
    fv.fused = dropout_mask_apply(fv.fused, mask, keep_scale);
  }
  fv.logits = linear(fv.fused, pvar(pv, "u.fc.w"), pvar(pv, "u.fc.b"));
  return fv;
}

ForwardTrace trace_from_vars(const ForwardVars& fv) {
  ForwardTrace tr;
  tr.feat_v = fv.feat_v.value();
  tr.feat_a = fv.feat_a.value();
  tr.pooled_v = fv.pooled_v.value();
  tr.pooled_a = fv.pooled_a.value();
  tr.fused = fv.fused.value();
  tr.logits = fv.logits.value();
  return tr;
}

Tensor make_fusion_mask(size_t dim, double rho_f, Rng& rng) {
  check(rho_f >= 0.0 && rho_f < 1.0, "forward: dropout ratio must be in [0,1)");
  Tensor mask(std::vector<size_t>{dim}, 1.0);
  for (size_t i = 0; i < dim; ++i)
    if (rng.uniform() < rho_f) mask[i] = 0.0;
  return mask;
}

ForwardTrace forward(const AVModel& m, const Tensor& x_v, const Tensor& x_a,
                     double dropout_rho_f, Rng* rng) {
  Graph g;
  Var xv = g.constant(x_v);
  Var xa = g.constant(x_a);
  std::map<std::string, Var> pv = param_vars(g, m, false);
  if (dropout_rho_f > 0.0) {
    check(rng != nullptr, "forward: dropout needs an rng");
    Tensor mask = make_fusion_mask(m.spec.fused_dim(), dropout_rho_f, *rng);
    double keep = 1.0 / (1.0 - dropout_rho_f);
    ForwardVars fv = build_forward(g, m, xv, xa, pv, &mask, keep);
    return trace_from_vars(fv);
  }
  ForwardVars fv = build_forward(g, m, xv, xa, pv);
  return trace_from_vars(fv);
}

int predict(const AVModel& m, const AVSample& s) {
  return forward(m, s.x_v, s.x_a).prediction();
}

double accuracy(const AVModel& m, const std::vector<AVSample>& data) {
  check(!data.empty(), "accuracy: empty dataset");
  std::vector<int> correct(data.size(), 0);
  parallel_for(data.size(), [&](size_t i) {
    correct[i] = (predict(m, data[i]) == data[i].label) ? 1 : 0;
  });
  size_t n = 0;
  for (int c : correct) n += static_cast<size_t>(c);
  return static_cast<double>(n) / static_cast<double>(data.size());
}

double sgd_step(AVModel& m, const std::vector<const AVSample*>& batch, double lr) {
  check(!batch.empty(), "sgd_step: empty batch");
  std::vector<std::string> names;
  names.reserve(m.params.size());
  for (const auto& [name, t] : m.params) names.push_back(name);

  std::vector<std::vector<Tensor>> grads(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  parallel_for(batch.size(), [&](size_t i) {
    const AVSample& s = *batch[i];
    Graph g;
    Var xv = g.constant(s.x_v);
    Var xa = g.constant(s.x_a);
    std::map<std::string, Var> pv = param_vars(g, m, true);
    ForwardVars fv = build_forward(g, m, xv, xa, pv);
    Var loss = cross_entropy(softmax(fv.logits), static_cast<size_t>(s.label));
    losses[i] = loss.value()[0];
    g.backward(loss);
    grads[i].reserve(names.size());
    for (const std::string& name : names) grads[i].push_back(pv.at(name).grad());
  });

  double mean_loss = 0.0;
  for (double l : losses) mean_loss += l;
  mean_loss /= static_cast<double>(batch.size());

  double scale = lr / static_cast<double>(batch.size());
  for (size_t pi = 0; pi < names.size(); ++pi) {
    Tensor& p = m.params.at(names[pi]);
    for (size_t bi = 0; bi < batch.size(); ++bi) {
      const Tensor& gt = grads[bi][pi];
      for (size_t k = 0; k < p.size(); ++k) p[k] -= scale * gt[k];
    }
  }
  return mean_loss;
}

TrainResult train_clean(const AVModel& m, const DatasetSplits& data, size_t epochs,
                        double lr, size_t batch, uint64_t seed) {
  check(!data.train.empty(), "train: empty training split");
  check(lr > 0.0, "train: lr must be positive");
  check(batch >= 1, "train: batch must be >= 1");
  TrainResult res;
  res.model = m;
  if (epochs == 0) return res;

  Rng order_rng(mix_seed(seed, {hash_str("order")}));
  std::vector<size_t> idx(data.train.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  size_t step = 0;
  for (size_t epoch = 0; epoch < epochs; ++epoch) {
    order_rng.shuffle(idx);
    for (size_t start = 0; start < idx.size(); start += batch) {
      size_t end = std::min(start + batch, idx.size());
      std::vector<const AVSample*> b;
      b.reserve(end - start);
      for (size_t i = start; i < end; ++i) b.push_back(&data.train[idx[i]]);
      double loss = sgd_step(res.model, b, lr);
      check(std::isfinite(loss),
            "train: diverged (non-finite loss) at step " + std::to_string(step));
      ++step;
    }
    res.train_acc.push_back(accuracy(res.model, data.train));
    if (!data.val.empty()) res.val_acc.push_back(accuracy(res.model, data.val));
  }
  for (auto& [name, t] : res.model.params) t.quantize_f32();
  return res;
}

std::vector<ModelSpec> grid_specs(size_t n_classes, size_t feat_dim) {
  std::vector<ModelSpec> specs;
  for (Backbone vis : {Backbone::ToyV, Backbone::ToyR})
    for (Fusion fus : {Fusion::Sum, Fusion::Concat})
      for (Backbone aud : {Backbone::ToyA, Backbone::ToyR}) {
        ModelSpec spec;
        spec.visual = vis;
        spec.audio = aud;
        spec.fusion = fus;
        spec.n_classes = n_classes;
        spec.feat_dim = feat_dim;
        specs.push_back(spec);
      }
  return specs;
}

std::map<std::string, AVModel> model_grid(uint64_t seed) {
  std::map<std::string, AVModel> grid;
  for (const ModelSpec& spec : grid_specs()) {
    std::string id = model_id(spec);
    grid.emplace(id, build_model(spec, mix_seed(seed, {hash_str(id)})));
  }
  check(grid.size() == 8, "model_grid: expected 8 distinct ids");
  return grid;
}

}  // namespace av
