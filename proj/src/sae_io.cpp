#include <bit>
#include <cstring>
#include <fstream>

#include "alchemy/error.hpp"
#include "alchemy/sae.hpp"

namespace alchemy {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr std::uint32_t kMatrixVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof v);
  }
  void floats(const std::vector<float>& v) { bytes(v.data(), v.size() * sizeof(float)); }
  void json(const nlohmann::json& j) {
    const auto text = j.dump();
    pod<std::uint64_t>(text.size());
    bytes(text.data(), text.size());
  }
  void finish() {
    out_.flush();
    if (!out_) throw Error("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw ParseError("cannot open " + path.string());
  }
  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(path_.string() + ": truncated while reading " + what);
    }
  }
  template <typename T>
  T pod(const char* what) {
    T v{};
    bytes(&v, sizeof v, what);
    return v;
  }
  std::vector<float> floats(std::uint64_t n, const char* what) {
    check_remaining(n * sizeof(float), what);
    std::vector<float> v(n);
    bytes(v.data(), n * sizeof(float), what);
    return v;
  }
  nlohmann::json json(const char* what) {
    const auto len = pod<std::uint64_t>(what);
    check_remaining(len, what);
    std::string text(len, '\0');
    bytes(text.data(), len, what);
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path_.string() + ": bad " + what + ": " + e.what());
    }
  }
  void magic(const char (&expected)[5]) {
    char m[4];
    bytes(m, 4, "magic");
    if (std::memcmp(m, expected, 4) != 0) {
      throw ParseError(path_.string() + ": not a " + std::string(expected, 4) + " file");
    }
  }

 private:
  // Guards allocations against corrupt length fields.
  void check_remaining(std::uint64_t n, const char* what) {
    const auto here = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    if (here < 0 || end < here || static_cast<std::uint64_t>(end - here) < n) {
      throw ParseError(path_.string() + ": truncated while reading " + what);
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
};

nlohmann::json meta_to_json(const ActivationMeta& m) {
  nlohmann::json j{{"trial", m.trial}, {"element", m.element}, {"layer", m.layer}, {"run", m.run}};
  if (m.token_position) j["token_position"] = *m.token_position;
  return j;
}

ActivationMeta meta_from_json(const nlohmann::json& j) {
  ActivationMeta m;
  m.trial = j.at("trial").get<std::uint32_t>();
  m.element = j.at("element").get<std::uint32_t>();
  m.layer = j.at("layer").get<std::int32_t>();
  m.run = j.at("run").get<std::string>();
  if (j.contains("token_position") && !j["token_position"].is_null()) {
    m.token_position = j["token_position"].get<std::uint32_t>();
  }
  return m;
}

}  // namespace

void write_activation_matrix(const std::filesystem::path& path, const ActivationMatrix& m) {
  validate(m);
  Writer w(path);
  w.bytes("SAEM", 4);
  w.pod<std::uint32_t>(kMatrixVersion);
  w.pod<std::uint64_t>(m.rows);
  w.pod<std::uint64_t>(m.cols);
  w.floats(m.data);
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& r : m.meta) meta.push_back(meta_to_json(r));
  w.json(meta);
  w.finish();
}

ActivationMatrix read_activation_matrix(const std::filesystem::path& path) {
  Reader r(path);
  r.magic("SAEM");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kMatrixVersion) throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  ActivationMatrix m;
  m.rows = r.pod<std::uint64_t>("row count");
  m.cols = r.pod<std::uint64_t>("column count");
  m.data = r.floats(static_cast<std::uint64_t>(m.rows) * m.cols, "matrix data");
  const auto meta = r.json("metadata trailer");
  if (!meta.is_array()) throw ParseError(path.string() + ": metadata trailer is not an array");
  try {
    for (const auto& j : meta) m.meta.push_back(meta_from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad metadata record: " + e.what());
  }
  validate(m);
  return m;
}

void write_sae_checkpoint(const std::filesystem::path& path, const SaeModel& model) {
  if (!tied_weights_hold(model)) throw DimensionMismatch("model buffers do not match its dimensions");
  Writer w(path);
  w.bytes("SAEC", 4);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(model.latent);
  w.pod<std::uint64_t>(model.dim);
  w.floats(model.weights);
  w.floats(model.encoder_bias);
  w.floats(model.decoder_bias);
  w.json(to_json(model.hyper));
  w.finish();
}

SaeModel read_sae_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  r.magic("SAEC");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  }
  SaeModel m;
  m.latent = r.pod<std::uint64_t>("latent size");
  m.dim = r.pod<std::uint64_t>("input size");
  m.weights = r.floats(static_cast<std::uint64_t>(m.latent) * m.dim, "weights");
  m.encoder_bias = r.floats(m.latent, "encoder bias");
  m.decoder_bias = r.floats(m.dim, "decoder bias");
  m.hyper = sae_hyper_from_json(r.json("hyperparameters"));
  return m;
}

}  // namespace alchemy
