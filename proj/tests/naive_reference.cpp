#include "naive_reference.hpp"

#include <cmath>
#include <limits>

namespace vsgmn::naive {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr double kLayerNormEps = 1e-5;

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  std::vector<double> out(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) out[c] = t(r, c);
  return out;
}

double dot_rows(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> normalize(std::vector<double> v) {
  double norm = std::sqrt(dot_rows(v, v));
  if (norm < kNormFloor) return v;
  for (double& x : v) x /= norm;
  return v;
}

// y = x . W + b with x a row vector.
std::vector<double> affine(const std::vector<double>& x, const Tensor& w,
                           const Tensor& b) {
  std::vector<double> y(w.cols());
  for (std::size_t c = 0; c < w.cols(); ++c) {
    double s = b[c];
    for (std::size_t r = 0; r < w.rows(); ++r) s += x[r] * w(r, c);
    y[c] = s;
  }
  return y;
}

std::vector<double> relu_vec(std::vector<double> v) {
  for (double& x : v) x = x > 0 ? x : 0.0;
  return v;
}

std::vector<double> layer_norm_vec(const std::vector<double>& v,
                                   const Tensor& gain, const Tensor& bias) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = gain[i] * ((v[i] - mean) * inv) + bias[i];
  return out;
}

// One branch of the attention update against the other branch's nodes.
Tensor attention_branch(const Tensor& h, const Tensor& other, const Tensor& adj,
                        const AttentionParams& p, bool cross_graph) {
  const std::size_t n = h.rows(), k = h.cols();
  // Projected, normalized node representations.
  std::vector<std::vector<double>> proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < k; ++r) s += h(i, r) * p.w_m(r, c);
      row[c] = s;
    }
    proj[i] = normalize(row);
  }
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    // Attention over the neighbor set only.
    std::vector<std::size_t> nbr;
    for (std::size_t j = 0; j < n; ++j)
      if (adj(i, j) != 0.0) nbr.push_back(j);
    double max_score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(nbr.size());
    for (std::size_t a = 0; a < nbr.size(); ++a) {
      scores[a] = p.temperature * dot_rows(proj[i], proj[nbr[a]]);
      if (scores[a] > max_score) max_score = scores[a];
    }
    double denom = 0;
    for (double& s : scores) {
      s = std::exp(s - max_score);
      denom += s;
    }
    for (std::size_t a = 0; a < nbr.size(); ++a) {
      double alpha = scores[a] / denom;
      for (std::size_t c = 0; c < k; ++c) out(i, c) += alpha * h(nbr[a], c);
    }
    if (cross_graph) {
      for (std::size_t c = 0; c < k; ++c)
        out(i, c) += p.cross_weight * (h(i, c) - other(i, c));
    }
  }
  return out;
}

Tensor propagation_branch(const Tensor& h, const Tensor& other,
                          const Tensor& adj, const PropagationParams& p,
                          bool cross_graph) {
  const std::size_t n = h.rows(), k = h.cols();
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> msum(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (adj(i, j) == 0.0) continue;
      std::vector<double> in;
      in.reserve(2 * k + 1);
      for (std::size_t c = 0; c < k; ++c) in.push_back(h(i, c));
      for (std::size_t c = 0; c < k; ++c) in.push_back(h(j, c));
      in.push_back(adj(i, j));
      std::vector<double> m = layer_norm_vec(relu_vec(affine(in, p.w_msg, p.b_msg)),
                                             p.ln_msg_gain, p.ln_msg_bias);
      for (std::size_t c = 0; c < k; ++c) msum[c] += m[c];
    }
    std::vector<double> in;
    in.reserve(3 * k);
    for (std::size_t c = 0; c < k; ++c) in.push_back(h(i, c));
    for (std::size_t c = 0; c < k; ++c) in.push_back(msum[c]);
    for (std::size_t c = 0; c < k; ++c)
      in.push_back(cross_graph ? h(i, c) - other(i, c) : 0.0);
    std::vector<double> u = layer_norm_vec(relu_vec(affine(in, p.w_node, p.b_node)),
                                           p.ln_node_gain, p.ln_node_bias);
    for (std::size_t c = 0; c < k; ++c) out(i, c) = u[c];
  }
  return out;
}

}  // namespace

Tensor l2_normalize(const Tensor& rows) {
  Tensor out = rows;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    std::vector<double> r = normalize(row_of(rows, i));
    for (std::size_t c = 0; c < rows.cols(); ++c) out(i, c) = r[c];
  }
  return out;
}

Tensor cosine_adjacency(const Tensor& rows) {
  const std::size_t n = rows.rows();
  Tensor norm = l2_normalize(rows);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = dot_rows(row_of(norm, i), row_of(norm, j));
  return out;
}

Tensor masked_row_softmax(const Tensor& scores, const Tensor& keep) {
  Tensor out({scores.rows(), scores.cols()});
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scores.cols(); ++j)
      if (keep(i, j) != 0.0 && scores(i, j) > max_score) max_score = scores(i, j);
    double denom = 0;
    for (std::size_t j = 0; j < scores.cols(); ++j)
      if (keep(i, j) != 0.0) denom += std::exp(scores(i, j) - max_score);
    for (std::size_t j = 0; j < scores.cols(); ++j)
      out(i, j) =
          keep(i, j) != 0.0 ? std::exp(scores(i, j) - max_score) / denom : 0.0;
  }
  return out;
}

Tensor layer_norm(const Tensor& rows, const Tensor& gain, const Tensor& bias) {
  Tensor out({rows.rows(), rows.cols()});
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    std::vector<double> r = layer_norm_vec(row_of(rows, i), gain, bias);
    for (std::size_t c = 0; c < rows.cols(); ++c) out(i, c) = r[c];
  }
  return out;
}

std::pair<Tensor, Tensor> attention_layer(const Tensor& h_visual,
                                          const Tensor& h_semantic,
                                          const Tensor& adj_visual,
                                          const Tensor& adj_semantic,
                                          const AttentionParams& params,
                                          bool cross_graph) {
  return {attention_branch(h_visual, h_semantic, adj_visual, params, cross_graph),
          attention_branch(h_semantic, h_visual, adj_semantic, params, cross_graph)};
}

std::pair<Tensor, Tensor> propagation_layer(const Tensor& h_visual,
                                            const Tensor& h_semantic,
                                            const Tensor& adj_visual,
                                            const Tensor& adj_semantic,
                                            const PropagationParams& params,
                                            bool cross_graph) {
  return {
      propagation_branch(h_visual, h_semantic, adj_visual, params, cross_graph),
      propagation_branch(h_semantic, h_visual, adj_semantic, params, cross_graph)};
}

Tensor relation_distribution(const Tensor& nodes) {
  Tensor sims = cosine_adjacency(nodes);
  Tensor keep = Tensor::full({nodes.rows(), nodes.rows()}, 1.0);
  return masked_row_softmax(sims, keep);
}

double kl_rows(const Tensor& p, const Tensor& q) {
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    total += p[i] * (std::log(p[i]) - std::log(q[i]));
  return total;
}

}  // namespace vsgmn::naive
