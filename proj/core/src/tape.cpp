#include "vsgmn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "vsgmn/errors.hpp"

namespace vsgmn {

namespace {

std::string& fault_kernel_storage() {
  static std::string name;
  return name;
}

Tape* require_tape(const Var& v, const char* op) {
  if (!v.valid()) {
    throw ContractError(std::string(op) + ": operand is an empty Var");
  }
  return v.tape();
}

Tape* require_same_tape(const Var& a, const Var& b, const char* op) {
  Tape* t = require_tape(a, op);
  if (t != require_tape(b, op)) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
  return t;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": operand must be rank 2, got " +
                         t.shape_str());
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void accumulate_scaled(Tensor& dst, double c, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
}

}  // namespace

namespace testing {

void set_backward_fault(const std::string& kernel) {
  fault_kernel_storage() = kernel;
}

void clear_backward_fault() { fault_kernel_storage().clear(); }

}  // namespace testing

const Tensor& Var::value() const {
  if (!valid()) throw ContractError("value(): empty Var");
  return tape_->value(id_);
}

Tensor GradientMap::grad(const Var& v) const {
  if (!v.valid()) throw ContractError("grad(): empty Var");
  if (v.id() < adjoints_.size() && adjoints_[v.id()].size() > 0) {
    return adjoints_[v.id()];
  }
  return Tensor::zeros(v.value().shape());  // root does not depend on v
}

Tensor& GradientMap::buffer(std::size_t id,
                            const std::vector<std::size_t>& shape) {
  if (id >= adjoints_.size()) {
    throw ContractError("gradient buffer: node id out of range");
  }
  if (adjoints_[id].size() == 0) adjoints_[id] = Tensor::zeros(shape);
  return adjoints_[id];
}

bool GradientMap::has(std::size_t id) const {
  return id < adjoints_.size() && adjoints_[id].size() > 0;
}

const Tensor& GradientMap::at(std::size_t id) const { return adjoints_[id]; }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* kernel, Tensor value, Backprop backprop) {
  nodes_.push_back(Node{std::move(value), kernel, std::move(backprop)});
  return Var(this, nodes_.size() - 1);
}

GradientMap Tape::backward(const Var& root) const {
  if (!root.valid() || root.tape() != this) {
    throw ContractError("backward: root does not live on this tape");
  }
  if (root.value().size() != 1) {
    throw ContractError("backward: root is " + root.value().shape_str() +
                        ", expected a single element");
  }
  GradientMap grads;
  grads.adjoints_.resize(nodes_.size());
  grads.buffer(root.id(), root.value().shape())[0] = 1.0;

  const std::string& fault = fault_kernel_storage();
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    if (!grads.has(id)) continue;  // root does not depend on this node
    const Node& node = nodes_[id];
    if (!node.backprop) continue;  // leaf
    if (!fault.empty() && fault == node.kernel) {
      Tensor corrupted = grads.at(id);
      for (std::size_t i = 0; i < corrupted.size(); ++i) corrupted[i] *= 1.5;
      node.backprop(*this, id, corrupted, grads);
    } else {
      node.backprop(*this, id, grads.at(id), grads);
    }
  }
  return grads;
}

// --- elementwise and arithmetic kernels --------------------------------------

Var add(const Var& a, const Var& b) {
  Tape* t = require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  const std::size_t aid = a.id(), bid = b.id();
  return t->record("add", std::move(out),
                   [aid, bid](const Tape& tp, std::size_t, const Tensor& adj,
                              GradientMap& g) {
                     accumulate(g.buffer(aid, tp.value(aid).shape()), adj);
                     accumulate(g.buffer(bid, tp.value(bid).shape()), adj);
                   });
}

Var sub(const Var& a, const Var& b) {
  Tape* t = require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  accumulate_scaled(out, -1.0, b.value());
  const std::size_t aid = a.id(), bid = b.id();
  return t->record("sub", std::move(out),
                   [aid, bid](const Tape& tp, std::size_t, const Tensor& adj,
                              GradientMap& g) {
                     accumulate(g.buffer(aid, tp.value(aid).shape()), adj);
                     accumulate_scaled(g.buffer(bid, tp.value(bid).shape()),
                                       -1.0, adj);
                   });
}

Var mul(const Var& a, const Var& b) {
  Tape* t = require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t aid = a.id(), bid = b.id();
  return t->record(
      "mul", std::move(out),
      [aid, bid](const Tape& tp, std::size_t, const Tensor& adj,
                 GradientMap& g) {
        const Tensor& av = tp.value(aid);
        const Tensor& bv = tp.value(bid);
        Tensor& da = g.buffer(aid, av.shape());
        for (std::size_t i = 0; i < adj.size(); ++i) da[i] += adj[i] * bv[i];
        Tensor& db = g.buffer(bid, bv.shape());
        for (std::size_t i = 0; i < adj.size(); ++i) db[i] += adj[i] * av[i];
      });
}

Var scalar_mul(const Var& a, double c) {
  Tape* t = require_tape(a, "scalar_mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  const std::size_t aid = a.id();
  return t->record("scalar_mul", std::move(out),
                   [aid, c](const Tape& tp, std::size_t, const Tensor& adj,
                            GradientMap& g) {
                     accumulate_scaled(g.buffer(aid, tp.value(aid).shape()), c,
                                       adj);
                   });
}

Var add_row_broadcast(const Var& a, const Var& row) {
  Tape* t = require_same_tape(a, row, "add_row_broadcast");
  require_rank2(a.value(), "add_row_broadcast");
  if (row.value().rank() != 1 || row.value().size() != a.value().cols()) {
    throw DimensionError("add_row_broadcast: row " + row.value().shape_str() +
                         " does not match " + a.value().shape_str());
  }
  const std::size_t m = a.value().rows(), n = a.value().cols();
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += row.value()[j];
  const std::size_t aid = a.id(), rid = row.id();
  return t->record(
      "add_row_broadcast", std::move(out),
      [aid, rid, m, n](const Tape& tp, std::size_t, const Tensor& adj,
                       GradientMap& g) {
        accumulate(g.buffer(aid, tp.value(aid).shape()), adj);
        Tensor& dr = g.buffer(rid, tp.value(rid).shape());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dr[j] += adj[i * n + j];
      });
}

Var matmul(const Var& a, const Var& b) {
  Tape* t = require_same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());  // shape checks live here
  const std::size_t aid = a.id(), bid = b.id();
  return t->record(
      "matmul", std::move(out),
      [aid, bid](const Tape& tp, std::size_t, const Tensor& adj,
                 GradientMap& g) {
        const Tensor& av = tp.value(aid);
        const Tensor& bv = tp.value(bid);
        accumulate(g.buffer(aid, av.shape()), matmul(adj, transpose(bv)));
        accumulate(g.buffer(bid, bv.shape()), matmul(transpose(av), adj));
      });
}

Var transpose(const Var& a) {
  Tape* t = require_tape(a, "transpose");
  Tensor out = transpose(a.value());
  const std::size_t aid = a.id();
  return t->record("transpose", std::move(out),
                   [aid](const Tape& tp, std::size_t, const Tensor& adj,
                         GradientMap& g) {
                     accumulate(g.buffer(aid, tp.value(aid).shape()),
                                transpose(adj));
                   });
}

Var relu(const Var& a) {
  Tape* t = require_tape(a, "relu");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  const std::size_t aid = a.id();
  return t->record("relu", std::move(out),
                   [aid](const Tape& tp, std::size_t, const Tensor& adj,
                         GradientMap& g) {
                     const Tensor& av = tp.value(aid);
                     Tensor& da = g.buffer(aid, av.shape());
                     for (std::size_t i = 0; i < adj.size(); ++i)
                       if (av[i] > 0.0) da[i] += adj[i];
                   });
}

Var exp(const Var& a) {
  Tape* t = require_tape(a, "exp");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  const std::size_t aid = a.id();
  return t->record("exp", std::move(out),
                   [aid](const Tape& tp, std::size_t self, const Tensor& adj,
                         GradientMap& g) {
                     const Tensor& y = tp.value(self);
                     Tensor& da = g.buffer(aid, tp.value(aid).shape());
                     for (std::size_t i = 0; i < adj.size(); ++i)
                       da[i] += adj[i] * y[i];
                   });
}

Var log(const Var& a) {
  Tape* t = require_tape(a, "log");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  const std::size_t aid = a.id();
  return t->record("log", std::move(out),
                   [aid](const Tape& tp, std::size_t, const Tensor& adj,
                         GradientMap& g) {
                     const Tensor& av = tp.value(aid);
                     Tensor& da = g.buffer(aid, av.shape());
                     for (std::size_t i = 0; i < adj.size(); ++i)
                       da[i] += adj[i] / av[i];
                   });
}

Var sum(const Var& a) {
  Tape* t = require_tape(a, "sum");
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::size_t aid = a.id();
  return t->record("sum", Tensor::scalar(s),
                   [aid](const Tape& tp, std::size_t, const Tensor& adj,
                         GradientMap& g) {
                     Tensor& da = g.buffer(aid, tp.value(aid).shape());
                     for (std::size_t i = 0; i < da.size(); ++i)
                       da[i] += adj[0];
                   });
}

Var mean(const Var& a) {
  Tape* t = require_tape(a, "mean");
  if (a.value().size() == 0) throw ContractError("mean: empty tensor");
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const double inv = 1.0 / static_cast<double>(a.value().size());
  const std::size_t aid = a.id();
  return t->record("mean", Tensor::scalar(s * inv),
                   [aid, inv](const Tape& tp, std::size_t, const Tensor& adj,
                              GradientMap& g) {
                     Tensor& da = g.buffer(aid, tp.value(aid).shape());
                     for (std::size_t i = 0; i < da.size(); ++i)
                       da[i] += adj[0] * inv;
                   });
}

// --- row-wise normalizations --------------------------------------------------

namespace {

// Shared softmax forward/backward; `keep` may be empty (no mask).
Var softmax_impl(const Var& a, const Tensor* keep) {
  Tape* t = require_tape(a, "row_softmax");
  require_rank2(a.value(), "row_softmax");
  if (keep != nullptr) require_same_shape(a.value(), *keep, "row_softmax mask");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (keep == nullptr || (*keep)(i, j) != 0.0)
        hi = std::max(hi, a.value()(i, j));
    }
    if (!std::isfinite(hi)) {
      throw DegenerateRowError("row_softmax: row " + std::to_string(i) +
                               " has no unmasked entries");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool kept = keep == nullptr || (*keep)(i, j) != 0.0;
      out(i, j) = kept ? std::exp(a.value()(i, j) - hi) : 0.0;
      z += out(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= z;
  }
  const std::size_t aid = a.id();
  // Excluded entries carry probability exactly 0, which also zeroes their
  // backward contribution, so one formula covers both overloads.
  return t->record(
      "row_softmax", std::move(out),
      [aid, m, n](const Tape& tp, std::size_t self, const Tensor& adj,
                  GradientMap& g) {
        const Tensor& s = tp.value(self);
        Tensor& da = g.buffer(aid, tp.value(aid).shape());
        for (std::size_t i = 0; i < m; ++i) {
          double dotp = 0.0;
          for (std::size_t j = 0; j < n; ++j) dotp += adj(i, j) * s(i, j);
          for (std::size_t j = 0; j < n; ++j)
            da(i, j) += s(i, j) * (adj(i, j) - dotp);
        }
      });
}

}  // namespace

Var row_softmax(const Var& a) { return softmax_impl(a, nullptr); }

Var row_softmax(const Var& a, const Tensor& keep) {
  return softmax_impl(a, &keep);
}

Var row_log_softmax(const Var& a) {
  Tape* t = require_tape(a, "row_log_softmax");
  require_rank2(a.value(), "row_log_softmax");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (n == 0) throw DegenerateRowError("row_log_softmax: rows are empty");
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double hi = a.value()(i, 0);
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, a.value()(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(a.value()(i, j) - hi);
    const double lse = hi + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a.value()(i, j) - lse;
  }
  const std::size_t aid = a.id();
  return t->record(
      "row_log_softmax", std::move(out),
      [aid, m, n](const Tape& tp, std::size_t self, const Tensor& adj,
                  GradientMap& g) {
        const Tensor& y = tp.value(self);
        Tensor& da = g.buffer(aid, tp.value(aid).shape());
        for (std::size_t i = 0; i < m; ++i) {
          double rowsum = 0.0;
          for (std::size_t j = 0; j < n; ++j) rowsum += adj(i, j);
          for (std::size_t j = 0; j < n; ++j)
            da(i, j) += adj(i, j) - std::exp(y(i, j)) * rowsum;
        }
      });
}

Var l2_normalize_rows(const Var& a) {
  Tape* t = require_tape(a, "l2_normalize_rows");
  Tensor out = l2_normalize_rows(a.value());  // rank check lives here
  const std::size_t m = a.value().rows(), n = a.value().cols();
  const std::size_t aid = a.id();
  return t->record(
      "l2_normalize_rows", std::move(out),
      [aid, m, n](const Tape& tp, std::size_t self, const Tensor& adj,
                  GradientMap& g) {
        const Tensor& x = tp.value(aid);
        const Tensor& y = tp.value(self);
        Tensor& da = g.buffer(aid, x.shape());
        for (std::size_t i = 0; i < m; ++i) {
          double sq = 0.0;
          for (std::size_t j = 0; j < n; ++j) sq += x(i, j) * x(i, j);
          const double norm = std::sqrt(sq);
          if (norm < 1e-12) {  // pass-through row backprops as identity
            for (std::size_t j = 0; j < n; ++j) da(i, j) += adj(i, j);
            continue;
          }
          double dotp = 0.0;
          for (std::size_t j = 0; j < n; ++j) dotp += adj(i, j) * y(i, j);
          for (std::size_t j = 0; j < n; ++j)
            da(i, j) += (adj(i, j) - y(i, j) * dotp) / norm;
        }
      });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias) {
  constexpr double kEps = 1e-5;
  Tape* t = require_same_tape(x, gain, "layer_norm_rows");
  require_same_tape(x, bias, "layer_norm_rows");
  require_rank2(x.value(), "layer_norm_rows");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (gain.value().rank() != 1 || gain.value().size() != n ||
      bias.value().rank() != 1 || bias.value().size() != n) {
    throw DimensionError("layer_norm_rows: gain " + gain.value().shape_str() +
                         " / bias " + bias.value().shape_str() +
                         " do not match " + x.value().shape_str());
  }
  const double invn = 1.0 / static_cast<double>(n);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x.value()(i, j);
    mu *= invn;
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x.value()(i, j) - mu;
      var += d * d;
    }
    var *= invn;
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t j = 0; j < n; ++j) {
      const double yhat = (x.value()(i, j) - mu) * inv;
      out(i, j) = yhat * gain.value()[j] + bias.value()[j];
    }
  }
  const std::size_t xid = x.id(), gid = gain.id(), bid = bias.id();
  return t->record(
      "layer_norm_rows", std::move(out),
      [xid, gid, bid, m, n, invn](const Tape& tp, std::size_t,
                                  const Tensor& adj, GradientMap& g) {
        const Tensor& xv = tp.value(xid);
        const Tensor& gv = tp.value(gid);
        Tensor& dx = g.buffer(xid, xv.shape());
        Tensor& dg = g.buffer(gid, gv.shape());
        Tensor& db = g.buffer(bid, tp.value(bid).shape());
        std::vector<double> yhat(n), q(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mu = 0.0;
          for (std::size_t j = 0; j < n; ++j) mu += xv(i, j);
          mu *= invn;
          double var = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double d = xv(i, j) - mu;
            var += d * d;
          }
          var *= invn;
          const double inv = 1.0 / std::sqrt(var + kEps);
          double mean_q = 0.0, mean_qy = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            yhat[j] = (xv(i, j) - mu) * inv;
            q[j] = adj(i, j) * gv[j];
            mean_q += q[j];
            mean_qy += q[j] * yhat[j];
          }
          mean_q *= invn;
          mean_qy *= invn;
          for (std::size_t j = 0; j < n; ++j) {
            dx(i, j) += inv * (q[j] - mean_q - yhat[j] * mean_qy);
            dg[j] += adj(i, j) * yhat[j];
            db[j] += adj(i, j);
          }
        }
      });
}

// --- structural kernels --------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  Tape* t = require_tape(parts[0], "concat_cols");
  const std::size_t m = parts[0].value().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: " + p.value().shape_str() +
                           " does not share " + std::to_string(m) + " rows");
    }
    total += p.value().cols();
  }
  Tensor out({m, total});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out(i, off + j) = p.value()(i, j);
    ids.push_back(p.id());
    widths.push_back(w);
    off += w;
  }
  return t->record(
      "concat_cols", std::move(out),
      [ids, widths, m](const Tape& tp, std::size_t, const Tensor& adj,
                       GradientMap& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor& dp = g.buffer(ids[k], tp.value(ids[k]).shape());
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
              dp(i, j) += adj(i, off + j);
          off += widths[k];
        }
      });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  Tape* t = require_tape(parts[0], "concat_rows");
  const std::size_t n = parts[0].value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_rows");
    require_rank2(p.value(), "concat_rows");
    if (p.value().cols() != n) {
      throw DimensionError("concat_rows: " + p.value().shape_str() +
                           " does not share " + std::to_string(n) +
                           " columns");
    }
    total += p.value().rows();
  }
  Tensor out({total, n});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> heights;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t h = p.value().rows();
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < n; ++j) out(off + i, j) = p.value()(i, j);
    ids.push_back(p.id());
    heights.push_back(h);
    off += h;
  }
  return t->record(
      "concat_rows", std::move(out),
      [ids, heights, n](const Tape& tp, std::size_t, const Tensor& adj,
                        GradientMap& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          Tensor& dp = g.buffer(ids[k], tp.value(ids[k]).shape());
          for (std::size_t i = 0; i < heights[k]; ++i)
            for (std::size_t j = 0; j < n; ++j) dp(i, j) += adj(off + i, j);
          off += heights[k];
        }
      });
}

Var gather_rows(const Var& a, std::vector<std::size_t> indices) {
  Tape* t = require_tape(a, "gather_rows");
  require_rank2(a.value(), "gather_rows");
  const std::size_t n = a.value().cols();
  Tensor out({indices.size(), n});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= a.value().rows()) {
      throw ContractError("gather_rows: index " + std::to_string(indices[k]) +
                          " out of range for " + a.value().shape_str());
    }
    for (std::size_t j = 0; j < n; ++j) out(k, j) = a.value()(indices[k], j);
  }
  const std::size_t aid = a.id();
  return t->record(
      "gather_rows", std::move(out),
      [aid, indices = std::move(indices), n](const Tape& tp, std::size_t,
                                             const Tensor& adj,
                                             GradientMap& g) {
        Tensor& da = g.buffer(aid, tp.value(aid).shape());
        for (std::size_t k = 0; k < indices.size(); ++k)  // scatter-add
          for (std::size_t j = 0; j < n; ++j)
            da(indices[k], j) += adj(k, j);
      });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  if (begin > end) {
    throw ContractError("slice_rows: begin " + std::to_string(begin) +
                        " past end " + std::to_string(end));
  }
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return gather_rows(a, std::move(idx));
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tape* t = require_tape(a, "reshape");
  std::size_t prod = 1;
  for (std::size_t d : shape) prod *= d;
  if (prod != a.value().size()) {
    throw DimensionError("reshape: cannot view " + a.value().shape_str() +
                         " as " + Tensor(shape).shape_str());
  }
  Tensor out(std::move(shape),
             std::vector<double>(a.value().data().begin(),
                                 a.value().data().end()));
  const std::size_t aid = a.id();
  return t->record("reshape", std::move(out),
                   [aid](const Tape& tp, std::size_t, const Tensor& adj,
                         GradientMap& g) {
                     Tensor& da = g.buffer(aid, tp.value(aid).shape());
                     for (std::size_t i = 0; i < da.size(); ++i)
                       da[i] += adj[i];
                   });
}

Var apply_mask(const Var& a, const Tensor& mask) {
  Tape* t = require_tape(a, "apply_mask");
  require_same_shape(a.value(), mask, "apply_mask");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t aid = a.id();
  return t->record("apply_mask", std::move(out),
                   [aid, mask](const Tape& tp, std::size_t, const Tensor& adj,
                               GradientMap& g) {
                     Tensor& da = g.buffer(aid, tp.value(aid).shape());
                     for (std::size_t i = 0; i < da.size(); ++i)
                       da[i] += adj[i] * mask[i];
                   });
}

}  // namespace vsgmn
