#include "framerepeat/tape.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "framerepeat/errors.hpp"

namespace framerepeat::numerics {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": shape mismatch");
}

}  // namespace

Var Tape::push(DenseArray value, std::vector<std::size_t> inputs, Backward backward) {
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward)});
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(std::vector<DenseArray>& grads, std::size_t id, const DenseArray& delta,
                      const DenseArray& like) {
  DenseArray& g = grads[id];
  if (g.size() == 0 && like.size() != 0) g = DenseArray::zeros_like(like);
  auto dst = g.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var Tape::constant(DenseArray value) { return push(std::move(value), {}, nullptr); }

Var Tape::parameter(DenseArray value) { return push(std::move(value), {}, nullptr); }

Var Tape::matmul(Var a, Var b) {
  DenseArray out = numerics::matmul(value(a), value(b));
  return push(std::move(out), {a.id, b.id}, [this, a, b](const DenseArray& g, auto& grads) {
    const DenseArray& av = nodes_[a.id].value;
    const DenseArray& bv = nodes_[b.id].value;
    accumulate(grads, a.id, numerics::matmul(g, transpose(bv)), av);
    accumulate(grads, b.id, numerics::matmul(transpose(av), g), bv);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  DenseArray out = numerics::matmul(value(a), transpose(value(b)));
  return push(std::move(out), {a.id, b.id}, [this, a, b](const DenseArray& g, auto& grads) {
    const DenseArray& av = nodes_[a.id].value;
    const DenseArray& bv = nodes_[b.id].value;
    accumulate(grads, a.id, numerics::matmul(g, bv), av);
    accumulate(grads, b.id, numerics::matmul(transpose(g), av), bv);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  DenseArray out = value(a);
  auto o = out.data();
  auto bv = value(b).data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return push(std::move(out), {a.id, b.id}, [this, a, b](const DenseArray& g, auto& grads) {
    accumulate(grads, a.id, g, nodes_[a.id].value);
    accumulate(grads, b.id, g, nodes_[b.id].value);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  DenseArray out = value(a);
  auto o = out.data();
  auto bv = value(b).data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return push(std::move(out), {a.id, b.id}, [this, a, b](const DenseArray& g, auto& grads) {
    accumulate(grads, a.id, g, nodes_[a.id].value);
    DenseArray neg = g;
    for (double& v : neg.data()) v = -v;
    accumulate(grads, b.id, neg, nodes_[b.id].value);
  });
}

Var Tape::add_row(Var m, Var bias) {
  const DenseArray& mv = value(m);
  const DenseArray& bv = value(bias);
  if (mv.rank() != 2 || bv.size() != mv.cols()) throw DimensionError("add_row: bias length");
  DenseArray out = mv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return push(std::move(out), {m.id, bias.id}, [this, m, bias](const DenseArray& g, auto& grads) {
    accumulate(grads, m.id, g, nodes_[m.id].value);
    DenseArray db = DenseArray::zeros_like(nodes_[bias.id].value);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    accumulate(grads, bias.id, db, nodes_[bias.id].value);
  });
}

Var Tape::scale(Var a, double factor) {
  DenseArray out = value(a);
  for (double& v : out.data()) v *= factor;
  return push(std::move(out), {a.id}, [this, a, factor](const DenseArray& g, auto& grads) {
    DenseArray d = g;
    for (double& v : d.data()) v *= factor;
    accumulate(grads, a.id, d, nodes_[a.id].value);
  });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const DenseArray& av = value(a);
  DenseArray out(std::move(shape), std::vector<double>(av.data().begin(), av.data().end()));
  return push(std::move(out), {a.id}, [this, a](const DenseArray& g, auto& grads) {
    const DenseArray& like = nodes_[a.id].value;
    accumulate(grads, a.id,
               DenseArray(like.shape(), std::vector<double>(g.data().begin(), g.data().end())),
               like);
  });
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const DenseArray& av = value(a);
  if (av.rank() != 2 || begin + count > av.cols()) throw DimensionError("slice_cols: range");
  DenseArray out = DenseArray::zeros(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  return push(std::move(out), {a.id}, [this, a, begin, count](const DenseArray& g, auto& grads) {
    const DenseArray& like = nodes_[a.id].value;
    DenseArray d = DenseArray::zeros_like(like);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) d(r, begin + c) = g(r, c);
    accumulate(grads, a.id, d, like);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total = 0;
  for (Var p : parts) {
    if (value(p).rank() != 2 || value(p).rows() != rows) throw DimensionError("concat_cols: rows");
    total += value(p).cols();
  }
  DenseArray out = DenseArray::zeros(rows, total);
  std::size_t offset = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    const DenseArray& pv = value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, offset + c) = pv(r, c);
    offset += pv.cols();
    ids.push_back(p.id);
  }
  return push(std::move(out), ids, [this, ids](const DenseArray& g, auto& grads) {
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const DenseArray& like = nodes_[id].value;
      DenseArray d = DenseArray::zeros_like(like);
      for (std::size_t r = 0; r < like.rows(); ++r)
        for (std::size_t c = 0; c < like.cols(); ++c) d(r, c) = g(r, off + c);
      off += like.cols();
      accumulate(grads, id, d, like);
    }
  });
}

Var Tape::softmax_rows(Var a) {
  DenseArray out = numerics::softmax_rows(value(a));
  const std::size_t self = nodes_.size();
  return push(std::move(out), {a.id}, [this, a, self](const DenseArray& g, auto& grads) {
    const DenseArray& y = nodes_[self].value;
    DenseArray d = DenseArray::zeros_like(y);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      const double inner = dot(yr, gr);
      auto dr = d.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dr[c] = yr[c] * (gr[c] - inner);
    }
    accumulate(grads, a.id, d, nodes_[a.id].value);
  });
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const DenseArray& xv = value(x);
  DenseArray out = numerics::layer_norm_rows(xv, value(gain), value(bias), eps);
  return push(std::move(out), {x.id, gain.id, bias.id},
              [this, x, gain, bias, eps](const DenseArray& g, auto& grads) {
                const DenseArray& xv = nodes_[x.id].value;
                const DenseArray& gv = nodes_[gain.id].value;
                const std::size_t d = xv.cols();
                const double n = static_cast<double>(d);
                DenseArray dx = DenseArray::zeros_like(xv);
                DenseArray dgain = DenseArray::zeros_like(gv);
                DenseArray dbias = DenseArray::zeros_like(nodes_[bias.id].value);
                std::vector<double> xhat(d), dxhat(d);
                for (std::size_t r = 0; r < xv.rows(); ++r) {
                  auto xr = xv.row(r);
                  auto gr = g.row(r);
                  const double mu = mean(xr);
                  double var = 0.0;
                  for (double v : xr) var += (v - mu) * (v - mu);
                  var /= n;
                  const double inv = 1.0 / std::sqrt(var + eps);
                  double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                  for (std::size_t j = 0; j < d; ++j) {
                    xhat[j] = (xr[j] - mu) * inv;
                    dxhat[j] = gr[j] * gv[j];
                    dgain[j] += gr[j] * xhat[j];
                    dbias[j] += gr[j];
                    mean_dxhat += dxhat[j];
                    mean_dxhat_xhat += dxhat[j] * xhat[j];
                  }
                  mean_dxhat /= n;
                  mean_dxhat_xhat /= n;
                  auto dr = dx.row(r);
                  for (std::size_t j = 0; j < d; ++j)
                    dr[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                }
                accumulate(grads, x.id, dx, xv);
                accumulate(grads, gain.id, dgain, gv);
                accumulate(grads, bias.id, dbias, nodes_[bias.id].value);
              });
}

Var Tape::gelu(Var a) {
  DenseArray out = value(a);
  for (double& v : out.data()) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    v = 0.5 * v * (1.0 + t);
  }
  return push(std::move(out), {a.id}, [this, a](const DenseArray& g, auto& grads) {
    const DenseArray& av = nodes_[a.id].value;
    DenseArray d = DenseArray::zeros_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double x = av[i];
      const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      d[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
    accumulate(grads, a.id, d, av);
  });
}

Var Tape::relu(Var a) {
  DenseArray out = value(a);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), {a.id}, [this, a](const DenseArray& g, auto& grads) {
    const DenseArray& av = nodes_[a.id].value;
    DenseArray d = DenseArray::zeros_like(av);
    for (std::size_t i = 0; i < av.size(); ++i) d[i] = av[i] > 0.0 ? g[i] : 0.0;
    accumulate(grads, a.id, d, av);
  });
}

Var Tape::gather(Var a, std::span<const std::size_t> indices) {
  const DenseArray& av = value(a);
  std::vector<double> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= av.size()) throw DimensionError("gather: index out of range");
    picked.push_back(av[i]);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return push(DenseArray::vector(std::move(picked)), {a.id},
              [this, a, idx](const DenseArray& g, auto& grads) {
                const DenseArray& like = nodes_[a.id].value;
                DenseArray d = DenseArray::zeros_like(like);
                for (std::size_t k = 0; k < idx.size(); ++k) d[idx[k]] += g[k];
                accumulate(grads, a.id, d, like);
              });
}

Var Tape::sum(Var a) {
  double total = 0.0;
  for (double v : value(a).data()) total += v;
  return push(DenseArray::vector({total}), {a.id}, [this, a](const DenseArray& g, auto& grads) {
    const DenseArray& like = nodes_[a.id].value;
    accumulate(grads, a.id, DenseArray(like.shape(), g[0]), like);
  });
}

Var Tape::mean_square(Var a) {
  const DenseArray& av = value(a);
  if (av.size() == 0) throw DegenerateInputError("mean_square: empty input");
  double total = 0.0;
  for (double v : av.data()) total += v * v;
  const double n = static_cast<double>(av.size());
  return push(DenseArray::vector({total / n}), {a.id}, [this, a, n](const DenseArray& g, auto& grads) {
    const DenseArray& like = nodes_[a.id].value;
    DenseArray d = like;
    for (double& v : d.data()) v *= 2.0 * g[0] / n;
    accumulate(grads, a.id, d, like);
  });
}

Var Tape::standardize(Var x, double eps) {
  const DenseArray& xv = value(x);
  if (xv.size() < 2) throw DegenerateInputError("standardize: need at least 2 values");
  const double mu = mean(xv.data());
  const double sigma = stddev(xv.data());
  const double denom = sigma + eps;
  DenseArray out({xv.size()}, 0.0);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = (xv[i] - mu) / denom;
  return push(std::move(out), {x.id}, [this, x, mu, sigma, denom](const DenseArray& g, auto& grads) {
    const DenseArray& xv = nodes_[x.id].value;
    const double n = static_cast<double>(xv.size());
    const double mean_g = mean(g.data());
    double g_dot_c = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) g_dot_c += g[i] * (xv[i] - mu);
    DenseArray d({xv.size()}, 0.0);
    for (std::size_t j = 0; j < xv.size(); ++j) {
      const double c = xv[j] - mu;
      d[j] = (g[j] - mean_g) / denom;
      if (sigma > 0.0) d[j] -= g_dot_c / (denom * denom) * c / (n * sigma);
    }
    accumulate(grads, x.id, DenseArray(xv.shape(), std::vector<double>(d.data().begin(), d.data().end())), xv);
  });
}

Var Tape::pairwise_hinge(Var scores, std::span<const std::size_t> pos,
                         std::span<const std::size_t> neg, double margin) {
  const DenseArray& sv = value(scores);
  for (std::size_t i : pos)
    if (i >= sv.size()) throw DimensionError("pairwise_hinge: positive index out of range");
  for (std::size_t j : neg)
    if (j >= sv.size()) throw DimensionError("pairwise_hinge: negative index out of range");
  std::vector<std::size_t> p(pos.begin(), pos.end()), q(neg.begin(), neg.end());
  double loss = 0.0;
  if (!p.empty() && !q.empty()) {
    for (std::size_t i : p)
      for (std::size_t j : q) loss += std::max(0.0, sv[j] - sv[i] + margin);
    loss /= static_cast<double>(p.size() * q.size());
  }
  return push(DenseArray::vector({loss}), {scores.id},
              [this, scores, p, q, margin](const DenseArray& g, auto& grads) {
                const DenseArray& sv = nodes_[scores.id].value;
                DenseArray d = DenseArray::zeros_like(sv);
                if (!p.empty() && !q.empty()) {
                  const double w = g[0] / static_cast<double>(p.size() * q.size());
                  for (std::size_t i : p)
                    for (std::size_t j : q)
                      if (sv[j] - sv[i] + margin > 0.0) {
                        d[j] += w;
                        d[i] -= w;
                      }
                }
                accumulate(grads, scores.id, d, sv);
              });
}

std::vector<DenseArray> Tape::gradients(Var loss, std::span<const Var> wrt) const {
  if (loss.id >= nodes_.size()) throw InternalError("gradients: unknown loss node");
  if (value(loss).size() != 1) throw DimensionError("gradients: loss must be a scalar");
  std::vector<DenseArray> grads(nodes_.size());
  grads[loss.id] = DenseArray(value(loss).shape(), 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    for (std::size_t in : node.inputs) {
      if (in >= id) throw InternalError("gradients: tape is not topologically ordered (cycle)");
    }
    if (!node.backward || grads[id].size() == 0) continue;
    node.backward(grads[id], grads);
  }
  std::vector<DenseArray> out;
  out.reserve(wrt.size());
  for (Var v : wrt) {
    if (v.id >= nodes_.size()) throw InternalError("gradients: unknown node");
    out.push_back(grads[v.id].size() == 0 ? DenseArray::zeros_like(nodes_[v.id].value)
                                          : grads[v.id]);
  }
  return out;
}

}  // namespace framerepeat::numerics
