#include "alchemy/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(ALCHEMY_HAVE_OPENMP)
#include <omp.h>
#endif

namespace alchemy::kernels {
namespace {

// Per-output-element bodies shared by both families. The families differ only
// in how the outer loop is scheduled.

void encode_row(ConstMatrixView x, ConstMatrixView w, std::span<const float> bias, MatrixView z, std::size_t i) {
  const float* xi = x.row(i);
  float* zi = z.row(i);
  for (std::size_t j = 0; j < w.rows; ++j) {
    const float* wj = w.row(j);
    double acc = bias[j];
    for (std::size_t d = 0; d < w.cols; ++d) acc += static_cast<double>(wj[d]) * xi[d];
    zi[j] = acc > 0.0 ? static_cast<float>(acc) : 0.0f;
  }
}

void decode_row(ConstMatrixView z, ConstMatrixView w, std::span<const float> bias, MatrixView out, std::size_t i) {
  const float* zi = z.row(i);
  float* oi = out.row(i);
  std::vector<double> acc(bias.begin(), bias.end());
  for (std::size_t j = 0; j < w.rows; ++j) {
    const double zij = zi[j];
    if (zij == 0.0) continue;
    const float* wj = w.row(j);
    for (std::size_t d = 0; d < w.cols; ++d) acc[d] += zij * wj[d];
  }
  for (std::size_t d = 0; d < w.cols; ++d) oi[d] = static_cast<float>(acc[d]);
}

struct TargetMoments {
  double mean = 0.0;
  double ss = 0.0;
};

TargetMoments moments(std::span<const double> y) {
  TargetMoments m;
  for (double v : y) m.mean += v;
  m.mean /= static_cast<double>(y.size());
  for (double v : y) m.ss += (v - m.mean) * (v - m.mean);
  return m;
}

double pearson_column(ConstMatrixView z, std::span<const double> y, const TargetMoments& ym, std::size_t j) {
  const std::size_t n = z.rows;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += z.data[i * z.cols + j];
  mean /= static_cast<double>(n);
  double cov = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = z.data[i * z.cols + j] - mean;
    cov += dz * (y[i] - ym.mean);
    ss += dz * dz;
  }
  if (ss <= 0.0 || ym.ss <= 0.0) return 0.0;
  return cov / std::sqrt(ss * ym.ss);
}

double empowerment_of(const RecipeGraph& graph, double discount, std::span<const double> prev, ElementId e) {
  double total = 0.0;
  for (std::uint32_t idx : graph.recipes_with(e)) {
    const auto& results = graph.recipes()[idx].results;
    double mean = 0.0;
    for (ElementId r : results) mean += prev[r];
    mean /= static_cast<double>(results.size());
    total += 1.0 + discount * mean;
  }
  return total;
}

// Scratch space for one SAE step; rows are batch positions.
struct SaeScratch {
  std::size_t batch = 0;
  std::size_t latent = 0;
  std::size_t dim = 0;
  std::vector<double> z;         // B x M
  std::vector<unsigned char> on; // B x M, pre-activation > 0
  std::vector<double> resid;     // B x D, 2 (xhat - x) / B
  std::vector<double> row_loss;  // B
  std::vector<double> g;         // B x M, dL/d(pre)
  std::vector<double> norms;     // M, ||w_j||
  std::vector<double> zbar;      // M

  SaeScratch(std::size_t b, std::size_t m, std::size_t d)
      : batch(b), latent(m), dim(d), z(b * m), on(b * m), resid(b * d), row_loss(b), g(b * m), norms(m), zbar(m) {}
};

void sae_forward_row(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView w,
                     std::span<const float> be, std::span<const float> bd, SaeScratch& s, std::size_t b) {
  const float* xi = x.row(batch[b]);
  double* zb = &s.z[b * s.latent];
  unsigned char* onb = &s.on[b * s.latent];
  std::vector<double> xhat(bd.begin(), bd.end());
  for (std::size_t j = 0; j < s.latent; ++j) {
    const float* wj = w.row(j);
    double pre = be[j];
    for (std::size_t d = 0; d < s.dim; ++d) pre += static_cast<double>(wj[d]) * xi[d];
    onb[j] = pre > 0.0;
    zb[j] = pre > 0.0 ? pre : 0.0;
    if (zb[j] != 0.0) {
      for (std::size_t d = 0; d < s.dim; ++d) xhat[d] += zb[j] * wj[d];
    }
  }
  double loss = 0.0;
  const double scale = 2.0 / static_cast<double>(s.batch);
  double* rb = &s.resid[b * s.dim];
  for (std::size_t d = 0; d < s.dim; ++d) {
    const double r = xhat[d] - xi[d];
    loss += r * r;
    rb[d] = scale * r;
  }
  s.row_loss[b] = loss;
}

void sae_latent_grad_row(ConstMatrixView w, double sparsity_weight, SaeScratch& s, std::size_t b) {
  const double* rb = &s.resid[b * s.dim];
  const double inv_b = 1.0 / static_cast<double>(s.batch);
  for (std::size_t j = 0; j < s.latent; ++j) {
    if (!s.on[b * s.latent + j]) {
      s.g[b * s.latent + j] = 0.0;
      continue;
    }
    const float* wj = w.row(j);
    double acc = sparsity_weight * s.norms[j] * inv_b;
    for (std::size_t d = 0; d < s.dim; ++d) acc += wj[d] * rb[d];
    s.g[b * s.latent + j] = acc;
  }
}

void sae_weight_grad_row(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView w,
                         double sparsity_weight, const SaeScratch& s, SaeGradients grads, std::size_t j) {
  double* out = &grads.weights[j * s.dim];
  std::fill(out, out + s.dim, 0.0);
  double bias_grad = 0.0;
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double zbj = s.z[b * s.latent + j];
    const double gbj = s.g[b * s.latent + j];
    if (zbj == 0.0 && gbj == 0.0) continue;
    const double* rb = &s.resid[b * s.dim];
    const float* xi = x.row(batch[b]);
    for (std::size_t d = 0; d < s.dim; ++d) out[d] += zbj * rb[d] + gbj * xi[d];
    bias_grad += gbj;
  }
  grads.encoder_bias[j] = bias_grad;
  if (sparsity_weight != 0.0 && s.norms[j] > 0.0) {
    const float* wj = w.row(j);
    const double coef = sparsity_weight * s.zbar[j] / s.norms[j];
    for (std::size_t d = 0; d < s.dim; ++d) out[d] += coef * wj[d];
  }
}

void sae_decoder_bias_grad(const SaeScratch& s, SaeGradients grads, std::size_t d) {
  double acc = 0.0;
  for (std::size_t b = 0; b < s.batch; ++b) acc += s.resid[b * s.dim + d];
  grads.decoder_bias[d] = acc;
}

double sae_finish_loss(const SaeScratch& s, double sparsity_weight) {
  double recon = 0.0;
  for (double l : s.row_loss) recon += l;
  recon /= static_cast<double>(s.batch);
  double penalty = 0.0;
  for (std::size_t j = 0; j < s.latent; ++j) penalty += s.zbar[j] * s.norms[j];
  return recon + sparsity_weight * penalty;
}

void sae_norms_row(ConstMatrixView w, SaeScratch& s, std::size_t j) {
  const float* wj = w.row(j);
  double ss = 0.0;
  for (std::size_t d = 0; d < s.dim; ++d) ss += static_cast<double>(wj[d]) * wj[d];
  s.norms[j] = std::sqrt(ss);
}

void sae_zbar_row(SaeScratch& s, std::size_t j) {
  double acc = 0.0;
  for (std::size_t b = 0; b < s.batch; ++b) acc += s.z[b * s.latent + j];
  s.zbar[j] = acc / static_cast<double>(s.batch);
}

}  // namespace

int max_threads() {
#if defined(ALCHEMY_HAVE_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void encode(ConstMatrixView x, ConstMatrixView weights, std::span<const float> bias, MatrixView z) {
  for (std::size_t i = 0; i < x.rows; ++i) encode_row(x, weights, bias, z, i);
}

void decode(ConstMatrixView z, ConstMatrixView weights, std::span<const float> bias, MatrixView out) {
  for (std::size_t i = 0; i < z.rows; ++i) decode_row(z, weights, bias, out, i);
}

void column_pearson(ConstMatrixView z, std::span<const double> y, std::span<double> r) {
  const auto ym = moments(y);
  for (std::size_t j = 0; j < z.cols; ++j) r[j] = pearson_column(z, y, ym, j);
}

void empowerment_step(const RecipeGraph& graph, double discount, std::span<const double> prev,
                      std::span<double> next) {
  for (ElementId e = 0; e < graph.size(); ++e) next[e] = empowerment_of(graph, discount, prev, e);
}

double sae_loss_and_gradients(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView weights,
                              std::span<const float> encoder_bias, std::span<const float> decoder_bias,
                              double sparsity_weight, SaeGradients grads) {
  SaeScratch s(batch.size(), weights.rows, weights.cols);
  for (std::size_t j = 0; j < s.latent; ++j) sae_norms_row(weights, s, j);
  for (std::size_t b = 0; b < s.batch; ++b) sae_forward_row(x, batch, weights, encoder_bias, decoder_bias, s, b);
  for (std::size_t j = 0; j < s.latent; ++j) sae_zbar_row(s, j);
  for (std::size_t b = 0; b < s.batch; ++b) sae_latent_grad_row(weights, sparsity_weight, s, b);
  for (std::size_t j = 0; j < s.latent; ++j) sae_weight_grad_row(x, batch, weights, sparsity_weight, s, grads, j);
  for (std::size_t d = 0; d < s.dim; ++d) sae_decoder_bias_grad(s, grads, d);
  return sae_finish_loss(s, sparsity_weight);
}

}  // namespace serial

namespace omp {

#if defined(ALCHEMY_HAVE_OPENMP)
#define ALCHEMY_OMP_FOR _Pragma("omp parallel for schedule(static)")
#else
#define ALCHEMY_OMP_FOR
#endif

void encode(ConstMatrixView x, ConstMatrixView weights, std::span<const float> bias, MatrixView z) {
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) encode_row(x, weights, bias, z, static_cast<std::size_t>(i));
}

void decode(ConstMatrixView z, ConstMatrixView weights, std::span<const float> bias, MatrixView out) {
  const auto n = static_cast<std::ptrdiff_t>(z.rows);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) decode_row(z, weights, bias, out, static_cast<std::size_t>(i));
}

void column_pearson(ConstMatrixView z, std::span<const double> y, std::span<double> r) {
  const auto ym = moments(y);
  const auto m = static_cast<std::ptrdiff_t>(z.cols);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t j = 0; j < m; ++j) r[j] = pearson_column(z, y, ym, static_cast<std::size_t>(j));
}

void empowerment_step(const RecipeGraph& graph, double discount, std::span<const double> prev,
                      std::span<double> next) {
  const auto n = static_cast<std::ptrdiff_t>(graph.size());
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t e = 0; e < n; ++e) next[e] = empowerment_of(graph, discount, prev, static_cast<ElementId>(e));
}

double sae_loss_and_gradients(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView weights,
                              std::span<const float> encoder_bias, std::span<const float> decoder_bias,
                              double sparsity_weight, SaeGradients grads) {
  SaeScratch s(batch.size(), weights.rows, weights.cols);
  const auto nb = static_cast<std::ptrdiff_t>(s.batch);
  const auto nm = static_cast<std::ptrdiff_t>(s.latent);
  const auto nd = static_cast<std::ptrdiff_t>(s.dim);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t j = 0; j < nm; ++j) sae_norms_row(weights, s, j);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t b = 0; b < nb; ++b) sae_forward_row(x, batch, weights, encoder_bias, decoder_bias, s, b);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t j = 0; j < nm; ++j) sae_zbar_row(s, j);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t b = 0; b < nb; ++b) sae_latent_grad_row(weights, sparsity_weight, s, b);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t j = 0; j < nm; ++j) sae_weight_grad_row(x, batch, weights, sparsity_weight, s, grads, j);
  ALCHEMY_OMP_FOR
  for (std::ptrdiff_t d = 0; d < nd; ++d) sae_decoder_bias_grad(s, grads, d);
  return sae_finish_loss(s, sparsity_weight);
}

#undef ALCHEMY_OMP_FOR

}  // namespace omp

}  // namespace alchemy::kernels
