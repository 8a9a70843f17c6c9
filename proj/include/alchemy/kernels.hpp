#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// version with the same signature. Every output element is reduced by one
// thread in the same order as the serial loop, so the two agree bit for bit
// regardless of thread count; the tests rely on that.

#include <cstddef>
#include <cstdint>
#include <span>

#include "alchemy/recipes.hpp"

namespace alchemy::kernels {

// Row-major dense views.
struct ConstMatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  const float* row(std::size_t r) const { return data + r * cols; }
};

struct MatrixView {
  float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  float* row(std::size_t r) const { return data + r * cols; }
};

// Forward/backward buffers for one SAE minibatch step.
struct SaeGradients {
  std::span<double> weights;       // M x D, row-major
  std::span<double> encoder_bias;  // M
  std::span<double> decoder_bias;  // D
};

namespace serial {
// Z = ReLU(X W^T + b). X: N x D, W: M x D, Z: N x M.
void encode(ConstMatrixView x, ConstMatrixView weights, std::span<const float> bias, MatrixView z);

// Xhat = Z W + b. Z: N x M, W: M x D.
void decode(ConstMatrixView z, ConstMatrixView weights, std::span<const float> bias, MatrixView out);

// Pearson r of every column of Z against y; zero-variance columns give 0.
void column_pearson(ConstMatrixView z, std::span<const double> y, std::span<double> r);

// One level of the empowerment recursion, prev -> next.
void empowerment_step(const RecipeGraph& graph, double discount, std::span<const double> prev,
                      std::span<double> next);

// Loss and gradients of the tied-weight SAE objective over the rows in
// `batch`. Gradients are overwritten, not accumulated.
double sae_loss_and_gradients(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView weights,
                              std::span<const float> encoder_bias, std::span<const float> decoder_bias,
                              double sparsity_weight, SaeGradients grads);
}  // namespace serial

namespace omp {
// Z = ReLU(X W^T + b). X: N x D, W: M x D, Z: N x M.
void encode(ConstMatrixView x, ConstMatrixView weights, std::span<const float> bias, MatrixView z);

// Xhat = Z W + b. Z: N x M, W: M x D.
void decode(ConstMatrixView z, ConstMatrixView weights, std::span<const float> bias, MatrixView out);

// Pearson r of every column of Z against y; zero-variance columns give 0.
void column_pearson(ConstMatrixView z, std::span<const double> y, std::span<double> r);

// One level of the empowerment recursion, prev -> next.
void empowerment_step(const RecipeGraph& graph, double discount, std::span<const double> prev,
                      std::span<double> next);

// Loss and gradients of the tied-weight SAE objective over the rows in
// `batch`. Gradients are overwritten, not accumulated.
double sae_loss_and_gradients(ConstMatrixView x, std::span<const std::uint32_t> batch, ConstMatrixView weights,
                              std::span<const float> encoder_bias, std::span<const float> decoder_bias,
                              double sparsity_weight, SaeGradients grads);
}  // namespace omp

// Whichever family the library was built to use.
#if defined(ALCHEMY_HAVE_OPENMP)
namespace active = omp;
#else
namespace active = serial;
#endif

int max_threads();

}  // namespace alchemy::kernels
