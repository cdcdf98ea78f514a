#include "r2i/nn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace r2i::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXf>;
using MapVec = Eigen::Map<Eigen::VectorXf>;

thread_local bool g_grad_enabled = true;

void check(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// Builds the output node. Backward is attached only when a parent needs grad.
Var make_result(Tensor value, std::vector<NodePtr> parents,
                std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                           [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

template <typename F>
Var unary_map(const Var& x, F fwd_and_deriv) {
  Tensor out(x.shape());
  std::vector<float> deriv(out.size());
  const auto& in = x.value().data;
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, dy] = fwd_and_deriv(in[i]);
    out.data[i] = y;
    deriv[i] = dy;
  }
  return make_result(std::move(out), {x.node()},
                     [deriv = std::move(deriv)](Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv[i];
                     });
}

void im2col(const float* img, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            float* col) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((ci * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * wo, row + (oy + 1) * wo, 0.0f);
            continue;
          }
          const float* src = img + (ci * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            row[oy * wo + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo,
            float* img) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((ci * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          float* dst = img + (ci * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, float fill) : shape(std::move(s)), data(numel(shape), fill) {}

Tensor::Tensor(Shape s, FloatBuffer values) : shape(std::move(s)), data(std::move(values)) {
  check(data.size() == numel(shape), "tensor data size does not match shape " + shape_str(shape));
}

Tensor::Tensor(Shape s, const std::vector<float>& values) : Tensor(std::move(s), FloatBuffer(values.begin(), values.end())) {}

FloatBuffer& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
  return grad;
}

Var Var::constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return Var(std::move(node));
}

Var Var::parameter(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = true;
  return Var(std::move(node));
}

void Var::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

void backward(const std::vector<std::pair<Var, std::vector<float>>>& seeds) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<std::pair<Node*, std::size_t>> stack;
  for (const auto& [root, seed] : seeds) {
    if (!root.requires_grad()) continue;
    check(seed.size() == root.value().size(), "gradient seed size mismatch");
    Node* r = root.node().get();
    if (!visited.insert(r).second) continue;
    stack.emplace_back(r, 0);
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }
  for (const auto& [root, seed] : seeds) {
    if (!root.requires_grad()) continue;
    auto& g = root.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  // Free intermediate gradients; leaves (parameters) keep theirs.
  for (Node* n : order) {
    if (n->backward) FloatBuffer().swap(n->grad);
  }
}

Var detach(const Var& x) { return Var::constant(x.value()); }

Var reshape(const Var& x, Shape shape) {
  check(numel(shape) == x.value().size(),
        "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor out(std::move(shape), x.value().data);
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "add shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) { return add(a, affine(b, -1.0f, 0.0f)); }

Var mul(const Var& a, const Var& b) {
  check(a.shape() == b.shape(), "mul shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value.data[i];
    }
  });
}

Var affine(const Var& x, float alpha, float beta) {
  return unary_map(x, [=](float v) { return std::pair{alpha * v + beta, alpha}; });
}

Var exp(const Var& x) {
  return unary_map(x, [](float v) {
    float e = std::exp(v);
    return std::pair{e, e};
  });
}

Var tanh(const Var& x) {
  return unary_map(x, [](float v) {
    float t = std::tanh(v);
    return std::pair{t, 1.0f - t * t};
  });
}

Var sigmoid(const Var& x) {
  return unary_map(x, [](float v) {
    float s = v >= 0 ? 1.0f / (1.0f + std::exp(-v)) : std::exp(v) / (1.0f + std::exp(v));
    return std::pair{s, s * (1.0f - s)};
  });
}

Var relu(const Var& x) {
  return unary_map(x, [](float v) { return v > 0 ? std::pair{v, 1.0f} : std::pair{0.0f, 0.0f}; });
}

Var leaky_relu(const Var& x, float slope) {
  return unary_map(x, [=](float v) { return v > 0 ? std::pair{v, 1.0f} : std::pair{slope * v, slope}; });
}

Var matmul(const Var& a, const Var& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
        "matmul shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  MapMat(out.data.data(), m, n).noalias() =
      ConstMapMat(a.value().data.data(), m, k) * ConstMapMat(b.value().data.data(), k, n);
  return make_result(std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    ConstMapMat dc(self.grad.data(), m, n);
    if (pa.requires_grad) {
      MapMat(pa.grad_buffer().data(), m, k).noalias() +=
          dc * ConstMapMat(pb.value.data.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapMat(pb.grad_buffer().data(), k, n).noalias() +=
          ConstMapMat(pa.value.data.data(), m, k).transpose() * dc;
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check(x.shape().size() == 2 && w.shape().size() == 2 && b.shape().size() == 1 &&
            x.shape()[1] == w.shape()[0] && w.shape()[1] == b.shape()[0],
        "linear shape mismatch x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) + " b" +
            shape_str(b.shape()));
  const int m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  Tensor out({m, n});
  MapMat y(out.data.data(), m, n);
  y.noalias() = ConstMapMat(x.value().data.data(), m, k) * ConstMapMat(w.value().data.data(), k, n);
  y.rowwise() += ConstMapVec(b.value().data.data(), n).transpose();
  return make_result(std::move(out), {x.node(), w.node(), b.node()}, [m, k, n](Node& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    ConstMapMat dy(self.grad.data(), m, n);
    if (px.requires_grad) {
      MapMat(px.grad_buffer().data(), m, k).noalias() +=
          dy * ConstMapMat(pw.value.data.data(), k, n).transpose();
    }
    if (pw.requires_grad) {
      MapMat(pw.grad_buffer().data(), k, n).noalias() +=
          ConstMapMat(px.value.data.data(), m, k).transpose() * dy;
    }
    if (pb.requires_grad) {
      MapVec(pb.grad_buffer().data(), n) += dy.colwise().sum().transpose();
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat of nothing");
  const Shape& s0 = parts[0].shape();
  check(s0.size() >= 2, "concat needs rank >= 2");
  const int batch = s0[0];
  std::size_t inner = 1;
  for (std::size_t d = 2; d < s0.size(); ++d) inner *= s0[d];
  std::vector<std::size_t> widths;
  int channels = 0;
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    check(s.size() == s0.size() && s[0] == batch, "concat batch/rank mismatch");
    for (std::size_t d = 2; d < s.size(); ++d) check(s[d] == s0[d], "concat trailing dims mismatch");
    channels += s[1];
    widths.push_back(static_cast<std::size_t>(s[1]) * inner);
    nodes.push_back(p.node());
  }
  Shape os = s0;
  os[1] = channels;
  Tensor out(os);
  const std::size_t row = static_cast<std::size_t>(channels) * inner;
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& src = parts[i].value().data;
    for (int n = 0; n < batch; ++n)
      std::copy_n(src.begin() + n * widths[i], widths[i], out.data.begin() + n * row + off);
    off += widths[i];
  }
  return make_result(std::move(out), std::move(nodes), [widths, batch, row](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      auto& p = *self.parents[i];
      if (p.requires_grad) {
        auto& g = p.grad_buffer();
        for (int n = 0; n < batch; ++n)
          for (std::size_t j = 0; j < widths[i]; ++j) g[n * widths[i] + j] += self.grad[n * row + off + j];
      }
      off += widths[i];
    }
  });
}

Var slice_cols(const Var& x, int start, int len) {
  check(x.shape().size() == 2 && start >= 0 && len >= 0 && start + len <= x.shape()[1],
        "slice_cols out of range");
  const int rows = x.shape()[0], cols = x.shape()[1];
  Tensor out({rows, len});
  for (int r = 0; r < rows; ++r)
    std::copy_n(x.value().data.begin() + r * cols + start, len, out.data.begin() + r * len);
  return make_result(std::move(out), {x.node()}, [rows, cols, start, len](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < len; ++c) g[r * cols + start + c] += self.grad[r * len + c];
  });
}

Var gather_rows(const Var& x, std::span<const int> rows) {
  check(x.shape().size() == 2, "gather_rows needs a matrix");
  const int n = x.shape()[0], d = x.shape()[1];
  std::vector<int> idx(rows.begin(), rows.end());
  Tensor out({static_cast<int>(idx.size()), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < n, "gather_rows index out of range");
    std::copy_n(x.value().data.begin() + idx[i] * d, d, out.data.begin() + i * d);
  }
  return make_result(std::move(out), {x.node()}, [idx = std::move(idx), d](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int c = 0; c < d; ++c) g[idx[i] * d + c] += self.grad[i * d + c];
  });
}

Var row_scale(const Var& x, std::span<const float> scale) {
  check(x.shape().size() == 2 && static_cast<int>(scale.size()) == x.shape()[0], "row_scale size mismatch");
  const int d = x.shape()[1];
  std::vector<float> s(scale.begin(), scale.end());
  Tensor out(x.shape());
  for (std::size_t r = 0; r < s.size(); ++r)
    for (int c = 0; c < d; ++c) out.data[r * d + c] = x.value().data[r * d + c] * s[r];
  return make_result(std::move(out), {x.node()}, [s = std::move(s), d](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < s.size(); ++r)
      for (int c = 0; c < d; ++c) g[r * d + c] += self.grad[r * d + c] * s[r];
  });
}

Var segment_weighted_sum(const Var& x, int segments, std::span<const float> weights) {
  check(x.shape().size() == 2 && segments > 0 && x.shape()[0] % segments == 0 &&
            static_cast<int>(weights.size()) == x.shape()[0],
        "segment_weighted_sum shape mismatch");
  const int rows = x.shape()[0], d = x.shape()[1], len = rows / segments;
  std::vector<float> w(weights.begin(), weights.end());
  Tensor out({segments, d});
  for (int r = 0; r < rows; ++r) {
    if (w[r] == 0.0f) continue;
    for (int c = 0; c < d; ++c) out.data[(r / len) * d + c] += w[r] * x.value().data[r * d + c];
  }
  return make_result(std::move(out), {x.node()}, [w = std::move(w), d, len](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < w.size(); ++r) {
      if (w[r] == 0.0f) continue;
      for (int c = 0; c < d; ++c) g[r * d + c] += w[r] * self.grad[(r / len) * d + c];
    }
  });
}

Var embedding_lookup(const Var& table, std::span<const int> ids) { return gather_rows(table, ids); }

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  check(xs.size() == 4 && ws.size() == 4 && ws[1] == xs[1] && ws[2] == ws[3] && b.shape().size() == 1 &&
            b.shape()[0] == ws[0],
        "conv2d shape mismatch x" + shape_str(xs) + " w" + shape_str(ws));
  check(stride >= 1 && pad >= 0, "conv2d stride/pad");
  const int n = xs[0], c = xs[1], h = xs[2], wd = xs[3];
  const int o = ws[0], k = ws[2];
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  check(ho > 0 && wo > 0, "conv2d output would be empty for input " + shape_str(xs));
  const int ckk = c * k * k, hw = ho * wo;
  Tensor out({n, o, ho, wo});
  FloatBuffer col(static_cast<std::size_t>(ckk) * hw);
  ConstMapMat wm(w.value().data.data(), o, ckk);
  ConstMapVec bv(b.value().data.data(), o);
  for (int i = 0; i < n; ++i) {
    im2col(x.value().data.data() + static_cast<std::size_t>(i) * c * h * wd, c, h, wd, k, stride, pad, ho, wo,
           col.data());
    MapMat y(out.data.data() + static_cast<std::size_t>(i) * o * hw, o, hw);
    y.noalias() = wm * ConstMapMat(col.data(), ckk, hw);
    y.colwise() += bv;
  }
  return make_result(std::move(out), {x.node(), w.node(), b.node()},
                     [=](Node& self) {
                       auto& px = *self.parents[0];
                       auto& pw = *self.parents[1];
                       auto& pb = *self.parents[2];
                       FloatBuffer col(static_cast<std::size_t>(ckk) * hw);
                       ConstMapMat wm(pw.value.data.data(), o, ckk);
                       for (int i = 0; i < n; ++i) {
                         ConstMapMat dy(self.grad.data() + static_cast<std::size_t>(i) * o * hw, o, hw);
                         if (pw.requires_grad) {
                           im2col(px.value.data.data() + static_cast<std::size_t>(i) * c * h * wd, c, h, wd, k,
                                  stride, pad, ho, wo, col.data());
                           MapMat(pw.grad_buffer().data(), o, ckk).noalias() +=
                               dy * ConstMapMat(col.data(), ckk, hw).transpose();
                         }
                         if (pb.requires_grad) MapVec(pb.grad_buffer().data(), o) += dy.rowwise().sum();
                         if (px.requires_grad) {
                           MapMat(col.data(), ckk, hw).noalias() = wm.transpose() * dy;
                           col2im(col.data(), c, h, wd, k, stride, pad, ho, wo,
                                  px.grad_buffer().data() + static_cast<std::size_t>(i) * c * h * wd);
                         }
                       }
                     });
}

Var upsample_nearest2x(const Var& x) {
  const Shape& s = x.shape();
  check(s.size() == 4, "upsample needs NCHW");
  const int planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor out({s[0], s[1], 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx)
        out.data[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx] =
            x.value().data[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2];
  return make_result(std::move(out), {x.node()}, [planes, h, w](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int p = 0; p < planes; ++p)
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx)
          g[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2] +=
              self.grad[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx];
  });
}

Var avg_pool2x(const Var& x) {
  const Shape& s = x.shape();
  check(s.size() == 4 && s[2] % 2 == 0 && s[3] % 2 == 0, "avg_pool2x needs NCHW with even sides");
  const int planes = s[0] * s[1], h = s[2] / 2, w = s[3] / 2;
  Tensor out({s[0], s[1], h, w});
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const float* src = x.value().data.data() + (static_cast<std::size_t>(p) * 2 * h + 2 * y) * 2 * w + 2 * xx;
        out.data[(static_cast<std::size_t>(p) * h + y) * w + xx] = 0.25f * (src[0] + src[1] + src[2 * w] + src[2 * w + 1]);
      }
  return make_result(std::move(out), {x.node()}, [planes, h, w](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int p = 0; p < planes; ++p)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          float d = 0.25f * self.grad[(static_cast<std::size_t>(p) * h + y) * w + xx];
          float* dst = g.data() + (static_cast<std::size_t>(p) * 2 * h + 2 * y) * 2 * w + 2 * xx;
          dst[0] += d;
          dst[1] += d;
          dst[2 * w] += d;
          dst[2 * w + 1] += d;
        }
  });
}

Var broadcast_spatial(const Var& x, int h, int w) {
  check(x.shape().size() == 2 && h > 0 && w > 0, "broadcast_spatial needs [N,C]");
  const int n = x.shape()[0], c = x.shape()[1], hw = h * w;
  Tensor out({n, c, h, w});
  for (int i = 0; i < n * c; ++i) std::fill_n(out.data.begin() + static_cast<std::size_t>(i) * hw, hw, x.value().data[i]);
  return make_result(std::move(out), {x.node()}, [n, c, hw](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < n * c; ++i) {
      float acc = 0.0f;
      for (int j = 0; j < hw; ++j) acc += self.grad[static_cast<std::size_t>(i) * hw + j];
      g[i] += acc;
    }
  });
}

}  // namespace r2i::nn
