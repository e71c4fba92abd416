#include "av/graph.hpp"

#include <algorithm>
#include <cmath>

#include "av/common.hpp"

namespace av {

const Tensor& Var::value() const { return g_->node(id_).value; }
const Tensor& Var::grad() const { return g_->node(id_).grad; }

Var Graph::emplace(Tensor value, std::vector<int> parents, bool needs_grad,
                   std::function<void(Graph&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::note_kink(double margin) { kink_margin_ = std::min(kink_margin_, margin); }

Var Graph::input(Tensor v) { return emplace(std::move(v), {}, true, nullptr); }
Var Graph::constant(Tensor v) { return emplace(std::move(v), {}, false, nullptr); }

void Graph::backward(const Var& root) {
  check(root.valid() && root.graph() == this, "backward: root from a different graph");
  check(root.value().size() == 1, "backward: root must be scalar, got shape " +
                                      root.value().shape_str());
  int rid = root.id();
  for (int id = 0; id <= rid; ++id) {
    Node& n = nodes_[id];
    if (n.needs_grad) n.grad = Tensor(n.value.shape(), 0.0);
  }
  if (!nodes_[rid].needs_grad) return;  // nothing reachable wants gradients
  nodes_[rid].grad[0] = 1.0;
  for (int id = rid; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && n.needs_grad) n.back(*this, id);
  }
}

namespace {

bool any_needs_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs)
    if (v.graph()->node(v.id()).needs_grad) return true;
  return false;
}

Graph& same_graph(std::initializer_list<Var> vs, const char* op) {
  Graph* g = nullptr;
  for (const Var& v : vs) {
    check(v.valid(), std::string(op) + ": invalid operand");
    if (!g) g = v.graph();
    check(v.graph() == g, std::string(op) + ": operands from different graphs");
  }
  return *g;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  check(a.value().same_shape(b.value()),
        std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
            b.value().shape_str());
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = same_graph({a, b}, "add");
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  int ia = a.id(), ib = b.id();
  return g.emplace(std::move(out), {ia, ib}, any_needs_grad({a, b}),
                   [ia, ib](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     if (gr.node(ia).needs_grad) {
                       Tensor& ga = gr.node(ia).grad;
                       for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
                     }
                   });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph({a, b}, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  int ia = a.id(), ib = b.id();
  return g.emplace(std::move(out), {ia, ib}, any_needs_grad({a, b}),
                   [ia, ib](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     if (gr.node(ia).needs_grad) {
                       Tensor& ga = gr.node(ia).grad;
                       for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       for (size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
                     }
                   });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph({a, b}, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  int ia = a.id(), ib = b.id();
  return g.emplace(std::move(out), {ia, ib}, any_needs_grad({a, b}),
                   [ia, ib](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     const Tensor& av = gr.node(ia).value;
                     const Tensor& bvv = gr.node(ib).value;
                     if (gr.node(ia).needs_grad) {
                       Tensor& ga = gr.node(ia).grad;
                       for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bvv[i];
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
                     }
                   });
}

Var scale(Var a, double c) {
  Graph& g = same_graph({a}, "scale");
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
  int ia = a.id();
  return g.emplace(std::move(out), {ia}, any_needs_grad({a}), [ia, c](Graph& gr, int self) {
    const Tensor& go = gr.node(self).grad;
    if (!gr.node(ia).needs_grad) return;
    Tensor& ga = gr.node(ia).grad;
    for (size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
  });
}

Var relu(Var x) {
  Graph& g = same_graph({x}, "relu");
  const Tensor& xv = x.value();
  Tensor out = xv;
  double margin = 1e300;
  for (size_t i = 0; i < out.size(); ++i) {
    margin = std::min(margin, std::fabs(out[i]));
    if (out[i] < 0.0) out[i] = 0.0;
  }
  g.note_kink(margin);
  int ix = x.id();
  return g.emplace(std::move(out), {ix}, any_needs_grad({x}), [ix](Graph& gr, int self) {
    if (!gr.node(ix).needs_grad) return;
    const Tensor& go = gr.node(self).grad;
    const Tensor& xvv = gr.node(ix).value;
    Tensor& gx = gr.node(ix).grad;
    for (size_t i = 0; i < go.size(); ++i)
      if (xvv[i] > 0.0) gx[i] += go[i];
  });
}

Var linear(Var x, Var w, Var b) {
  Graph& g = same_graph({x, w, b}, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  check(xv.ndim() == 1 && wv.ndim() == 2 && bv.ndim() == 1,
        "linear: expected x(1-d), w(2-d), b(1-d), got x" + xv.shape_str() + " w" +
            wv.shape_str() + " b" + bv.shape_str());
  size_t out_dim = wv.dim(0), in_dim = wv.dim(1);
  check(xv.dim(0) == in_dim, "linear: x has " + std::to_string(xv.dim(0)) +
                                 " features, weight expects " + std::to_string(in_dim));
  check(bv.dim(0) == out_dim, "linear: bias has " + std::to_string(bv.dim(0)) +
                                  " rows, weight produces " + std::to_string(out_dim));
  Tensor out(std::vector<size_t>{out_dim});
  const double* xp = xv.data();
  const double* wp = wv.data();
  for (size_t i = 0; i < out_dim; ++i) {
    double acc = bv[i];
    const double* row = wp + i * in_dim;
    for (size_t j = 0; j < in_dim; ++j) acc += row[j] * xp[j];
    out[i] = acc;
  }
  int ix = x.id(), iw = w.id(), ib = b.id();
  return g.emplace(std::move(out), {ix, iw, ib}, any_needs_grad({x, w, b}),
                   [ix, iw, ib, out_dim, in_dim](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     const Tensor& xvv = gr.node(ix).value;
                     const Tensor& wvv = gr.node(iw).value;
                     if (gr.node(ix).needs_grad) {
                       Tensor& gx = gr.node(ix).grad;
                       for (size_t i = 0; i < out_dim; ++i) {
                         const double* row = wvv.data() + i * in_dim;
                         double gi = go[i];
                         for (size_t j = 0; j < in_dim; ++j) gx[j] += gi * row[j];
                       }
                     }
                     if (gr.node(iw).needs_grad) {
                       Tensor& gw = gr.node(iw).grad;
                       for (size_t i = 0; i < out_dim; ++i) {
                         double gi = go[i];
                         double* row = gw.data() + i * in_dim;
                         for (size_t j = 0; j < in_dim; ++j) row[j] += gi * xvv[j];
                       }
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       for (size_t i = 0; i < out_dim; ++i) gb[i] += go[i];
                     }
                   });
}

Var conv2d(Var x, Var w, Var b, size_t stride, size_t pad_h, size_t pad_w) {
  Graph& g = same_graph({x, w, b}, "conv2d");
  check(stride >= 1, "conv2d: stride must be >= 1");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  check(xv.ndim() == 3 && wv.ndim() == 4 && bv.ndim() == 1,
        "conv2d: expected x(C,H,W), w(OC,IC,KH,KW), b(OC), got x" + xv.shape_str() + " w" +
            wv.shape_str() + " b" + bv.shape_str());
  size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  size_t OC = wv.dim(0), IC = wv.dim(1), KH = wv.dim(2), KW = wv.dim(3);
  check(IC == C, "conv2d: input has " + std::to_string(C) + " channels, weight expects " +
                     std::to_string(IC));
  check(bv.dim(0) == OC, "conv2d: bias has " + std::to_string(bv.dim(0)) +
                             " channels, weight produces " + std::to_string(OC));
  check(H + 2 * pad_h >= KH && W + 2 * pad_w >= KW,
        "conv2d: kernel (" + std::to_string(KH) + "," + std::to_string(KW) +
            ") larger than padded input " + xv.shape_str());
  size_t OH = (H + 2 * pad_h - KH) / stride + 1;
  size_t OW = (W + 2 * pad_w - KW) / stride + 1;

  Tensor out(std::vector<size_t>{OC, OH, OW});
  const double* xp = xv.data();
  const double* wp = wv.data();
  for (size_t oc = 0; oc < OC; ++oc) {
    for (size_t oh = 0; oh < OH; ++oh) {
      for (size_t ow = 0; ow < OW; ++ow) {
        double acc = bv[oc];
        for (size_t ic = 0; ic < IC; ++ic) {
          for (size_t kh = 0; kh < KH; ++kh) {
            long ih = static_cast<long>(oh * stride + kh) - static_cast<long>(pad_h);
            if (ih < 0 || ih >= static_cast<long>(H)) continue;
            const double* xrow = xp + (ic * H + ih) * W;
            const double* wrow = wp + ((oc * IC + ic) * KH + kh) * KW;
            for (size_t kw = 0; kw < KW; ++kw) {
              long iw = static_cast<long>(ow * stride + kw) - static_cast<long>(pad_w);
              if (iw < 0 || iw >= static_cast<long>(W)) continue;
              acc += wrow[kw] * xrow[iw];
            }
          }
        }
        out[(oc * OH + oh) * OW + ow] = acc;
      }
    }
  }

  int ix = x.id(), iw = w.id(), ib = b.id();
  auto back = [ix, iw, ib, stride, pad_h, pad_w, C, H, W, OC, IC, KH, KW, OH,
               OW](Graph& gr, int self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& xvv = gr.node(ix).value;
    const Tensor& wvv = gr.node(iw).value;
    bool nx = gr.node(ix).needs_grad, nw = gr.node(iw).needs_grad, nb = gr.node(ib).needs_grad;
    Tensor* gx = nx ? &gr.node(ix).grad : nullptr;
    Tensor* gw = nw ? &gr.node(iw).grad : nullptr;
    Tensor* gb = nb ? &gr.node(ib).grad : nullptr;
    for (size_t oc = 0; oc < OC; ++oc) {
      for (size_t oh = 0; oh < OH; ++oh) {
        for (size_t ow = 0; ow < OW; ++ow) {
          double gi = go[(oc * OH + oh) * OW + ow];
          if (gi == 0.0) continue;
          if (gb) (*gb)[oc] += gi;
          if (!nx && !nw) continue;
          for (size_t ic = 0; ic < IC; ++ic) {
            for (size_t kh = 0; kh < KH; ++kh) {
              long ih = static_cast<long>(oh * stride + kh) - static_cast<long>(pad_h);
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              for (size_t kw = 0; kw < KW; ++kw) {
                long iw2 = static_cast<long>(ow * stride + kw) - static_cast<long>(pad_w);
                if (iw2 < 0 || iw2 >= static_cast<long>(W)) continue;
                size_t xi = (ic * H + ih) * W + iw2;
                size_t wi = ((oc * IC + ic) * KH + kh) * KW + kw;
                if (gx) (*gx)[xi] += gi * wvv[wi];
                if (gw) (*gw)[wi] += gi * xvv[xi];
              }
            }
          }
        }
      }
    }
  };
  return g.emplace(std::move(out), {ix, iw, ib}, any_needs_grad({x, w, b}), std::move(back));
}

Var maxpool2(Var x) {
  Graph& g = same_graph({x}, "maxpool");
  const Tensor& xv = x.value();
  check(xv.ndim() == 3, "maxpool: expected (C,H,W), got " + xv.shape_str());
  size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  size_t OH = H / 2, OW = W / 2;
  check(OH >= 1 && OW >= 1, "maxpool: input " + xv.shape_str() + " too small for 2x2 window");
  Tensor out(std::vector<size_t>{C, OH, OW});
  std::vector<size_t> argmax(out.size());
  double margin = 1e300;
  for (size_t c = 0; c < C; ++c) {
    for (size_t oh = 0; oh < OH; ++oh) {
      for (size_t ow = 0; ow < OW; ++ow) {
        size_t best_i = 0;
        double best = -1e300, second = -1e300;
        for (size_t dh = 0; dh < 2; ++dh) {
          for (size_t dw = 0; dw < 2; ++dw) {
            size_t xi = (c * H + oh * 2 + dh) * W + ow * 2 + dw;
            double v = xv[xi];
            if (v > best) {
              second = best;
              best = v;
              best_i = xi;
            } else if (v > second) {
              second = v;
            }
          }
        }
        // all-zero windows are dead paths, not kinks
        if (!(best == 0.0 && second == 0.0)) margin = std::min(margin, best - second);
        size_t oi = (c * OH + oh) * OW + ow;
        out[oi] = best;
        argmax[oi] = best_i;
      }
    }
  }
  g.note_kink(margin);
  int ix = x.id();
  return g.emplace(std::move(out), {ix}, any_needs_grad({x}),
                   [ix, argmax = std::move(argmax)](Graph& gr, int self) {
                     if (!gr.node(ix).needs_grad) return;
                     const Tensor& go = gr.node(self).grad;
                     Tensor& gx = gr.node(ix).grad;
                     for (size_t i = 0; i < go.size(); ++i) gx[argmax[i]] += go[i];
                   });
}

Var reshape(Var x, std::vector<size_t> shape) {
  Graph& g = same_graph({x}, "reshape");
  check(shape_numel(shape) == x.value().size(),
        "reshape: cannot view " + x.value().shape_str() + " as " +
            Tensor(shape).shape_str());
  Tensor out = x.value();
  Tensor reshaped;
  {
    std::vector<double> vals(out.data(), out.data() + out.size());
    reshaped = Tensor::from(std::move(shape), std::move(vals));
  }
  int ix = x.id();
  return g.emplace(std::move(reshaped), {ix}, any_needs_grad({x}), [ix](Graph& gr, int self) {
    if (!gr.node(ix).needs_grad) return;
    const Tensor& go = gr.node(self).grad;
    Tensor& gx = gr.node(ix).grad;
    for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
}

Var select0(Var x, size_t i) {
  Graph& g = same_graph({x}, "select");
  const Tensor& xv = x.value();
  check(xv.ndim() >= 1, "select: scalar has no leading axis");
  check(i < xv.dim(0), "select: index " + std::to_string(i) + " out of range for " +
                           xv.shape_str());
  std::vector<size_t> shape(xv.shape().begin() + 1, xv.shape().end());
  size_t chunk = shape_numel(shape);
  std::vector<double> vals(xv.data() + i * chunk, xv.data() + (i + 1) * chunk);
  Tensor out = Tensor::from(std::move(shape), std::move(vals));
  int ix = x.id();
  return g.emplace(std::move(out), {ix}, any_needs_grad({x}),
                   [ix, i, chunk](Graph& gr, int self) {
                     if (!gr.node(ix).needs_grad) return;
                     const Tensor& go = gr.node(self).grad;
                     Tensor& gx = gr.node(ix).grad;
                     for (size_t k = 0; k < chunk; ++k) gx[i * chunk + k] += go[k];
                   });
}

Var stack0(const std::vector<Var>& parts) {
  check(!parts.empty(), "stack: no parts");
  Graph& g = *parts[0].graph();
  const std::vector<size_t>& s0 = parts[0].value().shape();
  size_t chunk = parts[0].value().size();
  std::vector<size_t> shape;
  shape.push_back(parts.size());
  shape.insert(shape.end(), s0.begin(), s0.end());
  Tensor out(std::move(shape));
  std::vector<int> ids;
  bool needs = false;
  for (size_t p = 0; p < parts.size(); ++p) {
    check(parts[p].graph() == &g, "stack: operands from different graphs");
    check(parts[p].value().shape() == s0,
          "stack: part " + std::to_string(p) + " has shape " + parts[p].value().shape_str() +
              ", expected " + parts[0].value().shape_str());
    const Tensor& pv = parts[p].value();
    std::copy(pv.data(), pv.data() + chunk, out.data() + p * chunk);
    ids.push_back(parts[p].id());
    needs = needs || g.node(parts[p].id()).needs_grad;
  }
  std::vector<int> parents = ids;
  return g.emplace(std::move(out), std::move(parents), needs,
                   [ids, chunk](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     for (size_t p = 0; p < ids.size(); ++p) {
                       if (!gr.node(ids[p]).needs_grad) continue;
                       Tensor& gp = gr.node(ids[p]).grad;
                       for (size_t k = 0; k < chunk; ++k) gp[k] += go[p * chunk + k];
                     }
                   });
}

Var concat(Var a, Var b) {
  Graph& g = same_graph({a, b}, "concat");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.ndim() == 1 && bv.ndim() == 1,
        "concat: expected two vectors, got " + av.shape_str() + " and " + bv.shape_str());
  size_t n = av.dim(0), m = bv.dim(0);
  Tensor out(std::vector<size_t>{n + m});
  std::copy(av.data(), av.data() + n, out.data());
  std::copy(bv.data(), bv.data() + m, out.data() + n);
  int ia = a.id(), ib = b.id();
  return g.emplace(std::move(out), {ia, ib}, any_needs_grad({a, b}),
                   [ia, ib, n, m](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     if (gr.node(ia).needs_grad) {
                       Tensor& ga = gr.node(ia).grad;
                       for (size_t i = 0; i < n; ++i) ga[i] += go[i];
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       for (size_t i = 0; i < m; ++i) gb[i] += go[n + i];
                     }
                   });
}

Var sum_all(Var x) {
  Graph& g = same_graph({x}, "sum");
  const Tensor& xv = x.value();
  double s = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) s += xv[i];
  int ix = x.id();
  return g.emplace(Tensor::scalar(s), {ix}, any_needs_grad({x}), [ix](Graph& gr, int self) {
    if (!gr.node(ix).needs_grad) return;
    double go = gr.node(self).grad[0];
    Tensor& gx = gr.node(ix).grad;
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  });
}

Var mean_all(Var x) {
  check(x.value().size() > 0, "mean: empty input");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {

// Decomposes shape for a single-axis reduction.
struct AxisSplit {
  size_t outer, len, inner;
  std::vector<size_t> reduced_shape;
};

AxisSplit split_axis(const Tensor& t, size_t axis, const char* op) {
  check(axis < t.ndim(), std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for " + t.shape_str());
  AxisSplit s{1, t.dim(axis), 1, {}};
  for (size_t i = 0; i < axis; ++i) s.outer *= t.dim(i);
  for (size_t i = axis + 1; i < t.ndim(); ++i) s.inner *= t.dim(i);
  for (size_t i = 0; i < t.ndim(); ++i)
    if (i != axis) s.reduced_shape.push_back(t.dim(i));
  check(s.len > 0, std::string(op) + ": reduced axis is empty in " + t.shape_str());
  return s;
}

}  // namespace

Var mean_axis(Var x, size_t axis) {
  Graph& g = same_graph({x}, "mean");
  const Tensor& xv = x.value();
  AxisSplit s = split_axis(xv, axis, "mean");
  Tensor out(s.reduced_shape);
  for (size_t o = 0; o < s.outer; ++o)
    for (size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < s.len; ++j) acc += xv[(o * s.len + j) * s.inner + i];
      out[o * s.inner + i] = acc / static_cast<double>(s.len);
    }
  int ix = x.id();
  return g.emplace(std::move(out), {ix}, any_needs_grad({x}), [ix, s](Graph& gr, int self) {
    if (!gr.node(ix).needs_grad) return;
    const Tensor& go = gr.node(self).grad;
    Tensor& gx = gr.node(ix).grad;
    double inv = 1.0 / static_cast<double>(s.len);
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t i = 0; i < s.inner; ++i) {
        double gi = go[o * s.inner + i] * inv;
        for (size_t j = 0; j < s.len; ++j) gx[(o * s.len + j) * s.inner + i] += gi;
      }
  });
}

Var var_axis(Var x, size_t axis) {
  Graph& g = same_graph({x}, "var");
  const Tensor& xv = x.value();
  AxisSplit s = split_axis(xv, axis, "var");
  Tensor out(s.reduced_shape);
  for (size_t o = 0; o < s.outer; ++o)
    for (size_t i = 0; i < s.inner; ++i) {
      double mean = 0.0;
      for (size_t j = 0; j < s.len; ++j) mean += xv[(o * s.len + j) * s.inner + i];
      mean /= static_cast<double>(s.len);
      double acc = 0.0;
      for (size_t j = 0; j < s.len; ++j) {
        double d = xv[(o * s.len + j) * s.inner + i] - mean;
        acc += d * d;
      }
      out[o * s.inner + i] = acc / static_cast<double>(s.len);
    }
  int ix = x.id();
  return g.emplace(std::move(out), {ix}, any_needs_grad({x}), [ix, s](Graph& gr, int self) {
    if (!gr.node(ix).needs_grad) return;
    const Tensor& go = gr.node(self).grad;
    const Tensor& xvv = gr.node(ix).value;
    Tensor& gx = gr.node(ix).grad;
    double inv = 1.0 / static_cast<double>(s.len);
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t i = 0; i < s.inner; ++i) {
        double mean = 0.0;
        for (size_t j = 0; j < s.len; ++j) mean += xvv[(o * s.len + j) * s.inner + i];
        mean *= inv;
        double gi = go[o * s.inner + i] * 2.0 * inv;
        for (size_t j = 0; j < s.len; ++j) {
          size_t xi = (o * s.len + j) * s.inner + i;
          gx[xi] += gi * (xvv[xi] - mean);
        }
      }
  });
}

Var softmax(Var z) {
  Graph& g = same_graph({z}, "softmax");
  const Tensor& zv = z.value();
  check(zv.ndim() == 1 && zv.size() > 0, "softmax: expected nonempty vector, got " +
                                             zv.shape_str());
  double m = zv.max();
  Tensor out(zv.shape());
  double s = 0.0;
  for (size_t i = 0; i < zv.size(); ++i) {
    out[i] = std::exp(zv[i] - m);
    s += out[i];
  }
  for (size_t i = 0; i < out.size(); ++i) out[i] /= s;
  int iz = z.id();
  return g.emplace(std::move(out), {iz}, any_needs_grad({z}), [iz](Graph& gr, int self) {
    if (!gr.node(iz).needs_grad) return;
    const Tensor& go = gr.node(self).grad;
    const Tensor& p = gr.node(self).value;
    Tensor& gz = gr.node(iz).grad;
    double dot = 0.0;
    for (size_t i = 0; i < p.size(); ++i) dot += go[i] * p[i];
    for (size_t i = 0; i < p.size(); ++i) gz[i] += p[i] * (go[i] - dot);
  });
}

Var cross_entropy(Var p, size_t label) {
  Graph& g = same_graph({p}, "cross_entropy");
  const Tensor& pv = p.value();
  check(pv.ndim() == 1, "cross_entropy: expected probability vector, got " + pv.shape_str());
  check(label < pv.dim(0), "cross_entropy: label " + std::to_string(label) +
                               " out of range for " + pv.shape_str());
  double py = std::max(pv[label], 1e-300);
  int ip = p.id();
  return g.emplace(Tensor::scalar(-std::log(py)), {ip}, any_needs_grad({p}),
                   [ip, label](Graph& gr, int self) {
                     if (!gr.node(ip).needs_grad) return;
                     double go = gr.node(self).grad[0];
                     double py2 = std::max(gr.node(ip).value[label], 1e-300);
                     gr.node(ip).grad[label] += -go / py2;
                   });
}

Var cosine_similarity(Var a, Var b) {
  Graph& g = same_graph({a, b}, "cosine_similarity");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check(av.size() == bv.size() && av.size() > 0,
        "cosine_similarity: size mismatch " + av.shape_str() + " vs " + bv.shape_str());
  double dot = 0.0, naa = 0.0, nbb = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    naa += av[i] * av[i];
    nbb += bv[i] * bv[i];
  }
  constexpr double kNormFloor = 1e-12;
  double na = std::sqrt(naa), nb = std::sqrt(nbb);
  double fa = std::max(na, kNormFloor), fb = std::max(nb, kNormFloor);
  double cosv = dot / (fa * fb);
  int ia = a.id(), ib = b.id();
  return g.emplace(Tensor::scalar(cosv), {ia, ib}, any_needs_grad({a, b}),
                   [ia, ib](Graph& gr, int self) {
                     const Tensor& av2 = gr.node(ia).value;
                     const Tensor& bv2 = gr.node(ib).value;
                     double go = gr.node(self).grad[0];
                     double cosv2 = gr.node(self).value[0];
                     double naa2 = 0.0, nbb2 = 0.0;
                     for (size_t i = 0; i < av2.size(); ++i) {
                       naa2 += av2[i] * av2[i];
                       nbb2 += bv2[i] * bv2[i];
                     }
                     double na2 = std::sqrt(naa2), nb2 = std::sqrt(nbb2);
                     double fa2 = std::max(na2, 1e-12), fb2 = std::max(nb2, 1e-12);
                     if (gr.node(ia).needs_grad) {
                       Tensor& ga = gr.node(ia).grad;
                       bool live = na2 > 1e-12;
                       for (size_t i = 0; i < av2.size(); ++i) {
                         double d = bv2[i] / (fa2 * fb2);
                         if (live) d -= cosv2 * av2[i] / (fa2 * fa2);
                         ga[i] += go * d;
                       }
                     }
                     if (gr.node(ib).needs_grad) {
                       Tensor& gb = gr.node(ib).grad;
                       bool live = nb2 > 1e-12;
                       for (size_t i = 0; i < bv2.size(); ++i) {
                         double d = av2[i] / (fa2 * fb2);
                         if (live) d -= cosv2 * bv2[i] / (fb2 * fb2);
                         gb[i] += go * d;
                       }
                     }
                   });
}

Var dropout_mask_apply(Var x, Var mask, double keep_scale) {
  Graph& g = same_graph({x, mask}, "dropout_mask_apply");
  require_same_shape(x, mask, "dropout_mask_apply");
  const Tensor& xv = x.value();
  const Tensor& mv = mask.value();
  Tensor out(xv.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mv[i] * keep_scale;
  int ix = x.id(), im = mask.id();
  return g.emplace(std::move(out), {ix, im}, any_needs_grad({x, mask}),
                   [ix, im, keep_scale](Graph& gr, int self) {
                     const Tensor& go = gr.node(self).grad;
                     const Tensor& mv2 = gr.node(im).value;
                     if (gr.node(ix).needs_grad) {
                       Tensor& gx = gr.node(ix).grad;
                       for (size_t i = 0; i < go.size(); ++i)
                         gx[i] += go[i] * mv2[i] * keep_scale;
                     }
                     if (gr.node(im).needs_grad) {
                       const Tensor& xv2 = gr.node(ix).value;
                       Tensor& gm = gr.node(im).grad;
                       for (size_t i = 0; i < go.size(); ++i)
                         gm[i] += go[i] * xv2[i] * keep_scale;
                     }
                   });
}

}  // namespace av
