#include "imbal/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "imbal/error.hpp"

namespace imbal {

using nlohmann::json;

namespace {

json array_of(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

json array_of(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index r = 0; r < v.size(); ++r) a.push_back(v(r));
  return a;
}

double finite_number(const json& j, const char* field) {
  if (!j.is_number())
    throw Error(ErrorKind::kNonFinite, std::string("checkpoint field '") + field + "' holds a non-number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw Error(ErrorKind::kNonFinite, std::string("checkpoint field '") + field + "' is not finite");
  return v;
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorKind::kLengthMismatch, std::string("checkpoint missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

std::string save_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.net.all_finite()) throw Error(ErrorKind::kNonFinite, "refusing to save non-finite parameters");
  json j;
  j["format"] = "imbal-checkpoint";
  j["format_version"] = ckpt.format_version;
  j["agent_kind"] = ckpt.agent_kind;
  j["layer_dims"] = ckpt.net.layer_dims();
  json layers = json::array();
  for (const DenseLayer& l : ckpt.net.layers())
    layers.push_back(json{{"weights", array_of(l.weights)}, {"biases", array_of(l.biases)}});
  j["layers"] = std::move(layers);
  j["norm_stats"] = {{"price_mean", ckpt.norm_stats.price_mean},
                     {"price_std", ckpt.norm_stats.price_std}};
  j["meta"] = {{"seed", ckpt.seed}, {"episodes", ckpt.episodes}};
  j["extra"] = ckpt.extra;
  return j.dump(1) + "\n";
}

Checkpoint load_checkpoint(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kLengthMismatch, std::string("checkpoint truncated or malformed: ") + e.what());
  }
  Checkpoint ckpt;
  const json& version = require(j, "format_version");
  if (!version.is_number_integer() || version.get<int>() != Checkpoint::kFormatVersion)
    throw Error(ErrorKind::kUnsupportedVersion,
                "unsupported checkpoint version " + version.dump());
  ckpt.format_version = version.get<int>();
  ckpt.agent_kind = require(j, "agent_kind").get<std::string>();
  const auto dims = require(j, "layer_dims").get<std::vector<std::size_t>>();
  ckpt.net = FeedForwardNet(dims);
  const json& layers = require(j, "layers");
  if (!layers.is_array() || layers.size() != ckpt.net.layers().size())
    throw Error(ErrorKind::kLengthMismatch, "layer count does not match layer_dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    DenseLayer& dst = ckpt.net.layers()[l];
    const json& w = require(layers[l], "weights");
    const json& b = require(layers[l], "biases");
    if (!w.is_array() || w.size() != static_cast<std::size_t>(dst.weights.size()) || !b.is_array() ||
        b.size() != static_cast<std::size_t>(dst.biases.size()))
      throw Error(ErrorKind::kLengthMismatch,
                  "layer " + std::to_string(l) + " parameter count does not match layer_dims");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < dst.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < dst.weights.cols(); ++c) dst.weights(r, c) = finite_number(w[k++], "weights");
    for (Eigen::Index r = 0; r < dst.biases.size(); ++r)
      dst.biases(r) = finite_number(b[static_cast<std::size_t>(r)], "biases");
  }
  const json& ns = require(j, "norm_stats");
  ckpt.norm_stats.price_mean = finite_number(require(ns, "price_mean"), "price_mean");
  ckpt.norm_stats.price_std = finite_number(require(ns, "price_std"), "price_std");
  const json& meta = require(j, "meta");
  ckpt.seed = require(meta, "seed").get<std::uint64_t>();
  ckpt.episodes = require(meta, "episodes").get<std::uint64_t>();
  if (j.contains("extra")) ckpt.extra = j.at("extra");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << save_checkpoint(ckpt);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_checkpoint(ss.str());
}

}  // namespace imbal
