#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "alchemy/kernels.hpp"

namespace alchemy {

struct ActivationMeta {
  std::uint32_t trial = 0;
  std::uint32_t element = 0;
  std::int32_t layer = 0;
  std::string run;
  std::optional<std::uint32_t> token_position;
};

// N x D float32, row-major, one meta record per row.
struct ActivationMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;
  std::vector<ActivationMeta> meta;

  kernels::ConstMatrixView view() const { return {data.data(), rows, cols}; }
  const float* row(std::size_t r) const { return data.data() + r * cols; }
};

// Throws DimensionMismatch / ValidationError.
void validate(const ActivationMatrix& m);

// Latent activations, N x M.
struct Latents {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  kernels::ConstMatrixView view() const { return {data.data(), rows, cols}; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct SaeHyper {
  std::size_t latent = 0;  // M; 0 means M = D
  double sparsity = 1e-6;  // lambda
  double lr = 1e-4;
  std::size_t batch = 256;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  bool momentum = false;  // 0.9 heavy-ball when set
  bool shuffle = true;    // false keeps a fixed batch order
};

nlohmann::json to_json(const SaeHyper& h);
SaeHyper sae_hyper_from_json(const nlohmann::json& j);

// The decoder is the transpose of `weights`; there is no separate decoder
// matrix to drift out of sync.
struct SaeModel {
  std::size_t latent = 0;
  std::size_t dim = 0;
  std::vector<float> weights;       // M x D
  std::vector<float> encoder_bias;  // M
  std::vector<float> decoder_bias;  // D
  SaeHyper hyper;

  kernels::ConstMatrixView weight_view() const { return {weights.data(), latent, dim}; }
  // Decoder matrix D x M, materialized from the encoder weights.
  std::vector<float> decoder_weights() const;
};

// True when the decoder equals the encoder transpose and every buffer has
// the shape the dimensions promise.
bool tied_weights_hold(const SaeModel& model);

struct SaeTraining {
  SaeModel model;
  std::vector<double> loss_curve;  // mean minibatch loss per epoch
  std::size_t live_neurons = 0;    // neurons with non-zero activation variance
  double reconstruction_mse = 0.0; // per element, over the training matrix
  std::size_t steps = 0;
};

// Called after every optimizer step.
using SaeStepHook = std::function<void(const SaeModel&, std::size_t step, double loss)>;

// Minibatch gradient descent on the tied-weight objective. Throws
// ValidationError for bad hyperparameters and NonFiniteLoss on divergence.
SaeTraining train_sae(const ActivationMatrix& x, const SaeHyper& hyper, const SaeStepHook& hook = {});

// Loss of the objective over every row (full batch), for tests and curves.
double sae_objective(const SaeModel& model, const ActivationMatrix& x);

Latents encode(const SaeModel& model, const ActivationMatrix& x);
ActivationMatrix decode(const SaeModel& model, const Latents& z, const std::vector<ActivationMeta>& meta);
ActivationMatrix reconstruct(const SaeModel& model, const ActivationMatrix& x);
double reconstruction_mse(const ActivationMatrix& x, const ActivationMatrix& xhat);
std::size_t live_neuron_count(const Latents& z);

struct ProbeResult {
  std::vector<double> statistic;
  std::size_t best_neuron = 0;
  double best_value = 0.0;
  int layer = -1;
  std::map<std::size_t, std::string> errors;  // neuron -> solver failure
};

// Pearson r on raw latents. Throws DegenerateTarget / DimensionMismatch.
ProbeResult neuron_correlation(const Latents& z, const std::vector<double>& y);

// Univariate logistic beta per z-scored neuron. Constant neurons get 0;
// a neuron whose fit separates perfectly reports its last finite iterate.
ProbeResult neuron_choice_beta(const Latents& z, const std::vector<int>& chosen);

// Reconstruction with one latent column scaled by `factor` (0 ablates).
ActivationMatrix intervene(const SaeModel& model, const ActivationMatrix& x, std::size_t neuron, double factor);

enum class ProbeKind { Pearson, ChoiceBeta };

struct ProbeTarget {
  std::string name;
  ProbeKind kind = ProbeKind::Pearson;
  std::vector<double> values;  // per row; 0/1 for ChoiceBeta
};

struct LayerSweepRow {
  int layer = 0;
  std::map<std::string, ProbeResult> probes;  // by target name
};

// One SAE per layer (trained concurrently), every target probed per layer.
// Rows are in layer order.
std::vector<LayerSweepRow> layer_sweep(const std::map<int, ActivationMatrix>& layers,
                                       const std::vector<ProbeTarget>& targets, const SaeHyper& hyper);

// Max-|statistic| profile for one target across the sweep.
std::vector<std::pair<int, double>> sweep_profile(const std::vector<LayerSweepRow>& rows, const std::string& target);

// Synthetic data with known structure: `features` non-negative orthonormal
// directions in R^D, each row a sparse non-negative mixture of them.
struct PlantedData {
  ActivationMatrix x;
  std::vector<std::vector<float>> directions;  // features x D
  std::vector<std::vector<float>> codes;       // rows x features
};
PlantedData make_planted_features(std::size_t rows, std::size_t dim, std::size_t features, std::uint64_t seed,
                                  double active_probability = 0.3);

// Binary IO. Matrix: "SAEM", u32 version, u64 N, u64 D, N*D f32, u64 n,
// n bytes of JSON meta. Checkpoint: "SAEC", u32 version, u64 M, u64 D, W_e,
// b_e, b_d as f32, then a length-prefixed JSON of hyperparameters.
void write_activation_matrix(const std::filesystem::path& path, const ActivationMatrix& m);
ActivationMatrix read_activation_matrix(const std::filesystem::path& path);
void write_sae_checkpoint(const std::filesystem::path& path, const SaeModel& model);
SaeModel read_sae_checkpoint(const std::filesystem::path& path);

}  // namespace alchemy
