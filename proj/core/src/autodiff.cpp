#include "pft/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pft/errors.hpp"

namespace pft::ad {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(*this);
}

void Tape::check_owned(Var v) const {
  if (&v.tape() != this || v.id() >= nodes_.size()) throw Error("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, recording()});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Tensor& parameter) {
  if (auto it = params_.find(&parameter); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{Tensor{}, &parameter, {}, {}, recording()});
  params_.emplace(&parameter, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  if (recording()) {
    for (const auto& v : inputs) {
      check_owned(v);
      needs = needs || nodes_[v.id()].needs_grad;
    }
  }
  Node node{std::move(value), nullptr, {}, {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.external ? *n.external : n.value;
}

std::span<double> Tape::grad(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad.assign(value(v).size(), 0.0);
  return n.grad;
}

Tensor Tape::grad_tensor(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(value(v).shape(), 0.0);
  return Tensor(value(v).shape(), n.grad);
}

void Tape::backward(Var root) {
  check_owned(root);
  if (value(root).size() != 1) {
    throw ShapeError("backward root must hold one element, got " + shape_str(value(root).shape()));
  }
  if (!nodes_[root.id()].needs_grad) return;
  grad(root)[0] += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, n.external ? *n.external : n.value, n.grad);
  }
  for (auto& n : nodes_) {
    if (n.external && !n.grad.empty()) {
      auto g = n.external->ensure_grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// outer/extent/inner decomposition of a shape around one axis.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " + shape_str(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Var elementwise(ElementwiseKind kind, Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape("elementwise", av, bv);
  Tensor out(av.shape());
  const std::size_t n = av.size();
  switch (kind) {
    case ElementwiseKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
      break;
    case ElementwiseKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
      break;
    case ElementwiseKind::mul:
    case ElementwiseKind::scale:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
      break;
  }
  return a.tape().push(std::move(out), {a, b}, [a, b, kind](Tape& t, const Tensor&, std::span<const double> g) {
    const std::size_t n = g.size();
    const bool product = kind == ElementwiseKind::mul || kind == ElementwiseKind::scale;
    if (t.needs_grad(a)) {
      auto ga = t.grad(a);
      if (product) {
        const Tensor& bv = b.value();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
      } else {
        accumulate(ga, g);
      }
    }
    if (t.needs_grad(b)) {
      auto gb = t.grad(b);
      if (product) {
        const Tensor& av = a.value();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
      } else if (kind == ElementwiseKind::sub) {
        for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
      } else {
        accumulate(gb, g);
      }
    }
  });
}

Var elementwise(ElementwiseKind kind, Var a, double b) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  const std::size_t n = av.size();
  const bool product = kind == ElementwiseKind::mul || kind == ElementwiseKind::scale;
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case ElementwiseKind::add: out[i] = av[i] + b; break;
      case ElementwiseKind::sub: out[i] = av[i] - b; break;
      default: out[i] = av[i] * b; break;
    }
  }
  return a.tape().push(std::move(out), {a}, [a, b, product](Tape& t, const Tensor&, std::span<const double> g) {
    auto ga = t.grad(a);
    if (product) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b;
    } else {
      accumulate(ga, g);
    }
  });
}

Var add(Var a, Var b) { return elementwise(ElementwiseKind::add, a, b); }
Var sub(Var a, Var b) { return elementwise(ElementwiseKind::sub, a, b); }
Var mul(Var a, Var b) { return elementwise(ElementwiseKind::mul, a, b); }
Var scale(Var a, double factor) { return elementwise(ElementwiseKind::scale, a, factor); }

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require_rank("add_row", xv, 2);
  if (rv.shape() != Shape{1, xv.cols()}) {
    throw ShapeError("add_row: row shape " + shape_str(rv.shape()) + " does not broadcast over " + shape_str(xv.shape()));
  }
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = xv.at(i, j) + rv[j];
  return x.tape().push(std::move(out), {x, row}, [x, row, r, c](Tape& t, const Tensor&, std::span<const double> g) {
    if (t.needs_grad(x)) accumulate(t.grad(x), g);
    if (t.needs_grad(row)) {
      auto gr = t.grad(row);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", av, 2);
  require_rank("matmul", bv, 2);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  Tensor out({m, n});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return a.tape().push(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor&, std::span<const double> g) {
    const double* G = g.data();
    if (t.needs_grad(a)) {
      // dA = dC * B^T
      const double* B = b.value().data().data();
      double* GA = t.grad(a).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          GA[i * k + p] += s;
        }
      }
    }
    if (t.needs_grad(b)) {
      // dB = A^T * dC
      const double* A = a.value().data().data();
      double* GB = t.grad(b).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          double* gbrow = GB + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank("transpose", av, 2);
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return a.tape().push(std::move(out), {a}, [a, r, c](Tape& t, const Tensor&, std::span<const double> g) {
    auto ga = t.grad(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisView v = axis_view("softmax", xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = xv[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xv[base + e * v.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double ex = std::exp(xv[base + e * v.inner] - mx);
        out[base + e * v.inner] = ex;
        total += ex;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= total;
    }
  }
  return x.tape().push(std::move(out), {x}, [x, v](Tape& t, const Tensor& y, std::span<const double> g) {
    auto gx = t.grad(x);
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.extent * v.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * y[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t k = base + e * v.inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  require_rank("layer_norm", xv, 2);
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.value().shape() != Shape{1, c} || bias.value().shape() != Shape{1, c}) {
    throw ShapeError("layer_norm: gain/bias must be " + shape_str({1, c}) + ", got " +
                     shape_str(gain.value().shape()) + " and " + shape_str(bias.value().shape()));
  }
  if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be positive");
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor normalized({r, c});
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) normalized.at(i, j) = (xv.at(i, j) - mu) * inv_std[i];
  }
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = normalized.at(i, j) * gv[j] + bv[j];
  return x.tape().push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, r, c, xhat = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, const Tensor&, std::span<const double> g) {
        if (t.needs_grad(gain) || t.needs_grad(bias)) {
          auto gg = t.grad(gain);
          auto gb = t.grad(bias);
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              gg[j] += g[i * c + j] * xhat.at(i, j);
              gb[j] += g[i * c + j];
            }
          }
        }
        if (t.needs_grad(x)) {
          const Tensor& gv = gain.value();
          auto gx = t.grad(x);
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gv[j];
              mean_d += d;
              mean_dx += d * xhat.at(i, j);
            }
            mean_d *= inv_c;
            mean_dx *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gv[j];
              gx[i * c + j] += inv_std[i] * (d - mean_d - xhat.at(i, j) * mean_dx);
            }
          }
        }
      });
}

Var batch_norm(Var x, Var gain, double eps) {
  const Tensor& xv = x.value();
  require_rank("batch_norm", xv, 2);
  const std::size_t r = xv.rows(), c = xv.cols();
  if (r < 2) throw ShapeError("batch_norm: needs at least 2 rows, got " + shape_str(xv.shape()));
  if (gain.value().shape() != Shape{1, c}) {
    throw ShapeError("batch_norm: gain must be " + shape_str({1, c}) + ", got " + shape_str(gain.value().shape()));
  }
  if (!(eps > 0.0)) throw ShapeError("batch_norm: eps must be positive");
  const Tensor& gv = gain.value();
  Tensor xhat({r, c});
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < r; ++i) mu += xv.at(i, j);
    mu /= static_cast<double>(r);
    double var = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double d = xv.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(r);
    inv_std[j] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < r; ++i) xhat.at(i, j) = (xv.at(i, j) - mu) * inv_std[j];
  }
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = xhat.at(i, j) * gv[j];
  return x.tape().push(
      std::move(out), {x, gain},
      [x, gain, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor&,
                                                                            std::span<const double> g) {
        if (t.needs_grad(gain)) {
          auto gg = t.grad(gain);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat.at(i, j);
        }
        if (t.needs_grad(x)) {
          const Tensor& gv = gain.value();
          auto gx = t.grad(x);
          const double inv_r = 1.0 / static_cast<double>(r);
          for (std::size_t j = 0; j < c; ++j) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
              mean_d += g[i * c + j];
              mean_dx += g[i * c + j] * xhat.at(i, j);
            }
            mean_d *= inv_r;
            mean_dx *= inv_r;
            for (std::size_t i = 0; i < r; ++i) {
              gx[i * c + j] += gv[j] * inv_std[j] * (g[i * c + j] - mean_d - xhat.at(i, j) * mean_dx);
            }
          }
        }
      });
}

Var gelu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 * 0.5));
  }
  return x.tape().push(std::move(out), {x}, [x](Tape& t, const Tensor&, std::span<const double> g) {
    const Tensor& xv = x.value();
    auto gx = t.grad(x);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 * 0.5));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const AxisView v = axis_view("slice", xv.shape(), axis);
  if (begin >= end || end > v.extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_str(xv.shape()));
  }
  Shape shape = xv.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  const std::size_t len = (end - begin) * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* src = xv.data().data() + (o * v.extent + begin) * v.inner;
    std::copy(src, src + len, out.data().data() + o * len);
  }
  return x.tape().push(std::move(out), {x}, [x, v, begin, len](Tape& t, const Tensor&, std::span<const double> g) {
    auto gx = t.grad(x);
    for (std::size_t o = 0; o < v.outer; ++o) {
      double* dst = gx.data() + (o * v.extent + begin) * v.inner;
      const double* src = g.data() + o * len;
      for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].value().shape();
  axis_view("concat", first, axis);
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.value().shape();
    bool compatible = s.size() == first.size();
    for (std::size_t d = 0; compatible && d < s.size(); ++d) compatible = d == axis || s[d] == first[d];
    if (!compatible) {
      throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(first) + " along axis " +
                       std::to_string(axis));
    }
    shape[axis] += s[axis];
  }
  const AxisView out_view = axis_view("concat", shape, axis);
  Tensor out(shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t len = pv.dim(axis) * out_view.inner;
    for (std::size_t o = 0; o < out_view.outer; ++o) {
      std::copy(pv.data().data() + o * len, pv.data().data() + (o + 1) * len,
                out.data().data() + o * out_view.extent * out_view.inner + offset * out_view.inner);
    }
    offsets.push_back(offset);
    offset += pv.dim(axis);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().push(
      std::move(out), std::span<const Var>(inputs),
      [inputs, offsets, out_view, axis](Tape& t, const Tensor&, std::span<const double> g) {
        for (std::size_t p = 0; p < inputs.size(); ++p) {
          if (!t.needs_grad(inputs[p])) continue;
          auto gp = t.grad(inputs[p]);
          const std::size_t len = inputs[p].value().dim(axis) * out_view.inner;
          for (std::size_t o = 0; o < out_view.outer; ++o) {
            const double* src = g.data() + o * out_view.extent * out_view.inner + offsets[p] * out_view.inner;
            double* dst = gp.data() + o * len;
            for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
          }
        }
      });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().push(std::move(out), {x}, [x](Tape& t, const Tensor&, std::span<const double> g) {
    accumulate(t.grad(x), g);
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  require_rank("gather_rows", xv, 2);
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t c = xv.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " + shape_str(xv.shape()));
    }
    std::copy_n(xv.data().data() + rows[i] * c, c, out.data().data() + i * c);
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return x.tape().push(std::move(out), {x}, [x, c, index = std::move(index)](Tape& t, const Tensor&, std::span<const double> g) {
    auto gx = t.grad(x);
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gx[index[i] * c + j] += g[i * c + j];
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return x.tape().push(Tensor({1}, s), {x}, [x](Tape& t, const Tensor&, std::span<const double> g) {
    for (auto& v : t.grad(x)) v += g[0];
  });
}

Var mean(Var x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

}  // namespace pft::ad
