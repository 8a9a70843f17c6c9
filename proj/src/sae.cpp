#include "alchemy/sae.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include "alchemy/error.hpp"
#include "alchemy/logistic.hpp"
#include "alchemy/rng.hpp"

namespace alchemy {

void validate(const ActivationMatrix& m) {
  if (m.data.size() != m.rows * m.cols) {
    throw DimensionMismatch("activation data holds " + std::to_string(m.data.size()) + " values, expected " +
                            std::to_string(m.rows) + " x " + std::to_string(m.cols));
  }
  if (m.meta.size() != m.rows) {
    throw DimensionMismatch("activation matrix has " + std::to_string(m.rows) + " rows but " +
                            std::to_string(m.meta.size()) + " meta records");
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw ValidationError("non-finite activation at row " + std::to_string(i / std::max<std::size_t>(m.cols, 1)));
    }
  }
}

nlohmann::json to_json(const SaeHyper& h) {
  return {{"latent", h.latent}, {"sparsity", h.sparsity}, {"lr", h.lr},          {"batch", h.batch},
          {"epochs", h.epochs}, {"seed", h.seed},         {"momentum", h.momentum}, {"shuffle", h.shuffle}};
}

SaeHyper sae_hyper_from_json(const nlohmann::json& j) {
  SaeHyper h;
  try {
    h.latent = j.value("latent", h.latent);
    h.sparsity = j.value("sparsity", h.sparsity);
    h.lr = j.value("lr", h.lr);
    h.batch = j.value("batch", h.batch);
    h.epochs = j.value("epochs", h.epochs);
    h.seed = j.value("seed", h.seed);
    h.momentum = j.value("momentum", h.momentum);
    h.shuffle = j.value("shuffle", h.shuffle);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad SAE hyperparameters: ") + e.what());
  }
  return h;
}

std::vector<float> SaeModel::decoder_weights() const {
  std::vector<float> out(dim * latent);
  for (std::size_t j = 0; j < latent; ++j)
    for (std::size_t d = 0; d < dim; ++d) out[d * latent + j] = weights[j * dim + d];
  return out;
}

bool tied_weights_hold(const SaeModel& model) {
  if (model.weights.size() != model.latent * model.dim || model.encoder_bias.size() != model.latent ||
      model.decoder_bias.size() != model.dim) {
    return false;
  }
  const auto dec = model.decoder_weights();
  for (std::size_t j = 0; j < model.latent; ++j)
    for (std::size_t d = 0; d < model.dim; ++d)
      if (dec[d * model.latent + j] != model.weights[j * model.dim + d]) return false;
  return true;
}

namespace {

void check_hyper(const ActivationMatrix& x, const SaeHyper& h) {
  if (x.cols == 0) throw ValidationError("activation matrix has no columns");
  if (h.batch == 0) throw ValidationError("batch size must be positive");
  if (x.rows < h.batch) {
    throw ValidationError("need at least one full batch: N=" + std::to_string(x.rows) +
                          " < batch=" + std::to_string(h.batch));
  }
  if (!(h.lr > 0.0) || !std::isfinite(h.lr)) throw ValidationError("learning rate must be positive");
  if (!(h.sparsity >= 0.0) || !std::isfinite(h.sparsity)) throw ValidationError("sparsity weight must be >= 0");
  if (h.epochs == 0) throw ValidationError("epochs must be positive");
}

void check_dims(const SaeModel& model, std::size_t cols) {
  if (cols != model.dim) {
    throw DimensionMismatch("matrix has " + std::to_string(cols) + " columns, model expects " +
                            std::to_string(model.dim));
  }
}

}  // namespace

SaeTraining train_sae(const ActivationMatrix& x, const SaeHyper& hyper, const SaeStepHook& hook) {
  validate(x);
  check_hyper(x, hyper);
  const std::size_t n = x.rows;
  const std::size_t dim = x.cols;
  const std::size_t latent = hyper.latent ? hyper.latent : dim;

  SaeTraining out;
  SaeModel& m = out.model;
  m.latent = latent;
  m.dim = dim;
  m.hyper = hyper;
  m.hyper.latent = latent;

  Rng init(hyper.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  m.weights.resize(latent * dim);
  for (auto& w : m.weights) w = static_cast<float>(init.normal() * scale);
  m.encoder_bias.assign(latent, 0.0f);
  // Starting the decoder bias at the data mean spares the first epochs from
  // learning the offset.
  m.decoder_bias.assign(dim, 0.0f);
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x.data[i * dim + d];
    m.decoder_bias[d] = static_cast<float>(acc / static_cast<double>(n));
  }

  std::vector<double> gw(latent * dim), gbe(latent), gbd(dim);
  std::vector<double> vw, vbe, vbd;
  if (hyper.momentum) {
    vw.assign(gw.size(), 0.0);
    vbe.assign(latent, 0.0);
    vbd.assign(dim, 0.0);
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng shuffler = init.split(1);

  auto step = [&](std::vector<float>& p, std::vector<double>& g, std::vector<double>& v) {
    if (hyper.momentum) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        v[k] = 0.9 * v[k] + g[k];
        p[k] = static_cast<float>(p[k] - hyper.lr * v[k]);
      }
    } else {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = static_cast<float>(p[k] - hyper.lr * g[k]);
    }
  };

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (hyper.shuffle) shuffler.shuffle(std::span<std::uint32_t>(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += hyper.batch) {
      const std::size_t len = std::min(hyper.batch, n - start);
      const std::span<const std::uint32_t> batch(order.data() + start, len);
      const double loss = kernels::active::sae_loss_and_gradients(
          x.view(), batch, m.weight_view(), m.encoder_bias, m.decoder_bias, hyper.sparsity, {gw, gbe, gbd});
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "SAE loss became " << loss << " at epoch " << epoch << ", step " << out.steps
            << " (lr=" << hyper.lr << ", lambda=" << hyper.sparsity << "); lower the learning rate";
        throw NonFiniteLoss(msg.str());
      }
      step(m.weights, gw, vw);
      step(m.encoder_bias, gbe, vbe);
      step(m.decoder_bias, gbd, vbd);
      ++out.steps;
      epoch_loss += loss;
      ++batches;
      if (hook) hook(m, out.steps, loss);
    }
    out.loss_curve.push_back(epoch_loss / static_cast<double>(batches));
  }

  const auto z = encode(m, x);
  out.live_neurons = live_neuron_count(z);
  out.reconstruction_mse = reconstruction_mse(x, decode(m, z, x.meta));
  return out;
}

double sae_objective(const SaeModel& model, const ActivationMatrix& x) {
  check_dims(model, x.cols);
  std::vector<std::uint32_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0u);
  std::vector<double> gw(model.weights.size()), gbe(model.latent), gbd(model.dim);
  return kernels::active::sae_loss_and_gradients(x.view(), all, model.weight_view(), model.encoder_bias,
                                                 model.decoder_bias, model.hyper.sparsity, {gw, gbe, gbd});
}

Latents encode(const SaeModel& model, const ActivationMatrix& x) {
  check_dims(model, x.cols);
  Latents z;
  z.rows = x.rows;
  z.cols = model.latent;
  z.data.assign(z.rows * z.cols, 0.0f);
  kernels::active::encode(x.view(), model.weight_view(), model.encoder_bias, {z.data.data(), z.rows, z.cols});
  return z;
}

ActivationMatrix decode(const SaeModel& model, const Latents& z, const std::vector<ActivationMeta>& meta) {
  if (z.cols != model.latent) {
    throw DimensionMismatch("latents have " + std::to_string(z.cols) + " columns, model has " +
                            std::to_string(model.latent) + " neurons");
  }
  ActivationMatrix out;
  out.rows = z.rows;
  out.cols = model.dim;
  out.data.assign(out.rows * out.cols, 0.0f);
  out.meta = meta;
  kernels::active::decode(z.view(), model.weight_view(), model.decoder_bias, {out.data.data(), out.rows, out.cols});
  return out;
}

ActivationMatrix reconstruct(const SaeModel& model, const ActivationMatrix& x) {
  return decode(model, encode(model, x), x.meta);
}

double reconstruction_mse(const ActivationMatrix& x, const ActivationMatrix& xhat) {
  if (x.rows != xhat.rows || x.cols != xhat.cols) throw DimensionMismatch("reconstruction shape differs from input");
  if (x.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    const double r = static_cast<double>(x.data[k]) - xhat.data[k];
    acc += r * r;
  }
  return acc / static_cast<double>(x.data.size());
}

std::size_t live_neuron_count(const Latents& z) {
  std::size_t live = 0;
  for (std::size_t j = 0; j < z.cols; ++j) {
    if (z.rows == 0) break;
    const float first = z.at(0, j);
    for (std::size_t i = 1; i < z.rows; ++i) {
      if (z.at(i, j) != first) {
        ++live;
        break;
      }
    }
  }
  return live;
}

namespace {

void pick_best(ProbeResult& r) {
  r.best_neuron = 0;
  r.best_value = r.statistic.empty() ? 0.0 : r.statistic[0];
  for (std::size_t j = 1; j < r.statistic.size(); ++j) {
    if (std::abs(r.statistic[j]) > std::abs(r.best_value)) {
      r.best_neuron = j;
      r.best_value = r.statistic[j];
    }
  }
}

}  // namespace

ProbeResult neuron_correlation(const Latents& z, const std::vector<double>& y) {
  if (y.size() != z.rows) {
    throw DimensionMismatch("target has " + std::to_string(y.size()) + " values for " + std::to_string(z.rows) +
                            " rows");
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  if (y.size() < 2 || !(ss > 0.0)) throw DegenerateTarget("probe target has no variance");

  ProbeResult r;
  r.statistic.assign(z.cols, 0.0);
  kernels::active::column_pearson(z.view(), y, r.statistic);
  pick_best(r);
  return r;
}

ProbeResult neuron_choice_beta(const Latents& z, const std::vector<int>& chosen) {
  if (chosen.size() != z.rows) {
    throw DimensionMismatch("choices have " + std::to_string(chosen.size()) + " values for " +
                            std::to_string(z.rows) + " rows");
  }
  const auto positives = std::count(chosen.begin(), chosen.end(), 1);
  for (int c : chosen) {
    if (c != 0 && c != 1) throw ValidationError("choices must be 0 or 1");
  }
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(chosen.size())) {
    throw DegenerateTarget("choice probe needs both chosen and unchosen rows");
  }

  ProbeResult r;
  r.statistic.assign(z.cols, 0.0);
  std::vector<std::string> errors(z.cols);
  const auto m = static_cast<std::ptrdiff_t>(z.cols);
#if defined(ALCHEMY_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t jj = 0; jj < m; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    Design d;
    d.names = {"intercept", "neuron"};
    d.x.resize(static_cast<Eigen::Index>(z.rows), 2);
    d.y.resize(static_cast<Eigen::Index>(z.rows));
    double mean = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) mean += z.at(i, j);
    mean /= static_cast<double>(z.rows);
    double ss = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) ss += (z.at(i, j) - mean) * (z.at(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(z.rows - 1));
    if (!(sd > 0.0)) continue;
    for (std::size_t i = 0; i < z.rows; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      d.x(k, 0) = 1.0;
      d.x(k, 1) = (z.at(i, j) - mean) / sd;
      d.y[k] = chosen[i];
    }
    try {
      r.statistic[j] = fit_logistic(d).coef("neuron");
    } catch (const SeparationDetected& e) {
      r.statistic[j] = e.partial().coef("neuron");
      errors[j] = e.what();
    } catch (const Error& e) {
      errors[j] = e.what();
    }
  }
  for (std::size_t j = 0; j < z.cols; ++j) {
    if (!errors[j].empty()) r.errors.emplace(j, errors[j]);
  }
  pick_best(r);
  return r;
}

ActivationMatrix intervene(const SaeModel& model, const ActivationMatrix& x, std::size_t neuron, double factor) {
  if (neuron >= model.latent) {
    throw DimensionMismatch("neuron " + std::to_string(neuron) + " out of range for " +
                            std::to_string(model.latent) + " latents");
  }
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw ValidationError("intervention factor must be >= 0");
  auto z = encode(model, x);
  const auto f = static_cast<float>(factor);
  for (std::size_t i = 0; i < z.rows; ++i) z.data[i * z.cols + neuron] *= f;
  return decode(model, z, x.meta);
}

std::vector<LayerSweepRow> layer_sweep(const std::map<int, ActivationMatrix>& layers,
                                       const std::vector<ProbeTarget>& targets, const SaeHyper& hyper) {
  if (layers.empty()) throw EmptyInput("layer sweep needs at least one layer");
  std::vector<std::pair<int, const ActivationMatrix*>> ordered;
  for (const auto& [layer, m] : layers) ordered.emplace_back(layer, &m);
  std::vector<LayerSweepRow> rows(ordered.size());
  std::vector<std::exception_ptr> errors(ordered.size());

#if defined(ALCHEMY_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(ordered.size()); ++k) {
    try {
      const auto& [layer, x] = ordered[k];
      const auto trained = train_sae(*x, hyper);
      const auto z = encode(trained.model, *x);
      LayerSweepRow row;
      row.layer = layer;
      for (const auto& t : targets) {
        ProbeResult r;
        if (t.kind == ProbeKind::Pearson) {
          r = neuron_correlation(z, t.values);
        } else {
          std::vector<int> chosen(t.values.size());
          for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = t.values[i] != 0.0 ? 1 : 0;
          r = neuron_choice_beta(z, chosen);
        }
        r.layer = layer;
        row.probes.emplace(t.name, std::move(r));
      }
      rows[k] = std::move(row);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::vector<std::pair<int, double>> sweep_profile(const std::vector<LayerSweepRow>& rows, const std::string& target) {
  std::vector<std::pair<int, double>> out;
  for (const auto& row : rows) {
    auto it = row.probes.find(target);
    if (it == row.probes.end()) throw ValidationError("no probe named '" + target + "' in sweep");
    out.emplace_back(row.layer, std::abs(it->second.best_value));
  }
  return out;
}

PlantedData make_planted_features(std::size_t rows, std::size_t dim, std::size_t features, std::uint64_t seed,
                                  double active_probability) {
  if (features == 0 || features > dim) throw ValidationError("need 1 <= features <= dim");
  Rng rng(seed);
  PlantedData out;
  // Disjoint supports keep the directions orthogonal and non-negative.
  const std::size_t block = dim / features;
  out.directions.assign(features, std::vector<float>(dim, 0.0f));
  for (std::size_t f = 0; f < features; ++f) {
    double ss = 0.0;
    for (std::size_t d = f * block; d < (f + 1) * block; ++d) {
      const double v = 0.5 + rng.uniform01();
      out.directions[f][d] = static_cast<float>(v);
      ss += v * v;
    }
    for (auto& v : out.directions[f]) v = static_cast<float>(v / std::sqrt(ss));
  }
  out.x.rows = rows;
  out.x.cols = dim;
  out.x.data.assign(rows * dim, 0.0f);
  out.x.meta.resize(rows);
  out.codes.assign(rows, std::vector<float>(features, 0.0f));
  for (std::size_t i = 0; i < rows; ++i) {
    out.x.meta[i].trial = static_cast<std::uint32_t>(i);
    out.x.meta[i].run = "planted";
    for (std::size_t f = 0; f < features; ++f) {
      if (rng.uniform01() >= active_probability) continue;
      const auto c = static_cast<float>(0.5 + rng.uniform01());
      out.codes[i][f] = c;
      for (std::size_t d = 0; d < dim; ++d) out.x.data[i * dim + d] += c * out.directions[f][d];
    }
  }
  return out;
}

}  // namespace alchemy
