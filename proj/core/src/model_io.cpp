#include "ghlfd/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ghlfd/errors.hpp"

namespace ghlfd {

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw DataError(path.string() + ": cannot open file for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void f64s(std::span<const double> v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }
  void finish() {
    out_.flush();
    if (!out_) throw DataError(path_.string() + ": write failed");
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError(path.string() + ": cannot open file");
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw DataError(path_.string() + ": truncated model file");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 20)) throw DataError(path_.string() + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void f64s_into(std::span<double> dest, const char* what) {
    const auto n = u64();
    if (n != dest.size()) {
      throw DataError(path_.string() + ": tensor " + what + " has " + std::to_string(n) + " entries, expected " +
                      std::to_string(dest.size()));
    }
    bytes(dest.data(), n * sizeof(double));
  }
  std::vector<double> f64s(std::size_t expected, const char* what) {
    std::vector<double> v(expected);
    f64s_into(v, what);
    return v;
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const auto& net = model.net;
  if (model.norm.width() != net.channels()) throw DataError("save_model: normalization stats do not match model width");
  Writer w(path);
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(kModelFormatVersion);
  w.u64(net.channels());
  w.u64(net.hidden1());
  w.u64(net.hidden2());
  w.u64(model.batch_length);
  w.f64(net.dropout_p());
  w.f64(model.detector.threshold);
  w.f64(model.detector.quantile_q);
  w.f64(model.detector.halflife);
  w.u64(model.detector.burn_in_batches);
  w.f64(model.holdout_mse);
  for (const auto& name : model.norm.channels) w.str(name);
  w.f64s(model.norm.mean);
  w.f64s(model.norm.std);
  for (const auto& t : net.params().tensors()) w.f64s(t);
  w.finish();
}

TrainedModel load_model(const std::filesystem::path& path) {
  Reader r(path);
  char magic[sizeof kModelMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kModelMagic, sizeof magic) != 0) throw DataError(path.string() + ": not a ghlfd model file");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw DataError(path.string() + ": unsupported model format version " + std::to_string(version));
  }
  const auto m = r.u64();
  const auto h1 = r.u64();
  const auto h2 = r.u64();
  const auto w = r.u64();
  const double p = r.f64();
  if (m == 0 || h1 == 0 || h2 == 0 || m > 100000 || h1 > 100000 || h2 > 100000)
    throw DataError(path.string() + ": corrupt model dimensions");

  TrainedModel out;
  out.net = LstmModel(m, h1, h2, p);
  out.batch_length = w;
  out.detector.threshold = r.f64();
  out.detector.quantile_q = r.f64();
  out.detector.halflife = r.f64();
  out.detector.burn_in_batches = r.u64();
  out.holdout_mse = r.f64();
  for (std::uint64_t c = 0; c < m; ++c) out.norm.channels.push_back(r.str());
  out.norm.mean = r.f64s(m, "norm.mean");
  out.norm.std = r.f64s(m, "norm.std");
  auto& params = out.net.mutable_params();
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < ModelParams::kTensorCount; ++k) r.f64s_into(tensors[k], ModelParams::tensor_names()[k]);
  out.net.reset_state();
  return out;
}

void save_detector_json(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["channels"] = model.norm.channels;
  j["batch_length"] = model.batch_length;
  j["threshold"] = model.detector.threshold;
  j["quantile"] = model.detector.quantile_q;
  j["halflife"] = model.detector.effective_halflife(model.batch_length);
  j["burn_in_batches"] = model.detector.burn_in_batches;
  j["holdout_mse"] = model.holdout_mse;
  j["hidden_sizes"] = {model.net.hidden1(), model.net.hidden2()};
  j["dropout"] = model.net.dropout_p();
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open file for writing");
  out << j.dump(2) << '\n';
}

}  // namespace ghlfd
