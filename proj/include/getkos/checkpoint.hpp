#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "getkos/bundle.hpp"
#include "getkos/error.hpp"
#include "getkos/nn.hpp"

namespace getkos {

/// Full-precision training output, the hand-off between `train` and `export`.
///
/// JSON layout:
///   format            "getkos-checkpoint"
///   version           1
///   arch              {input_dim, hidden: [widths]}
///   seeds             {train, split}
///   config            {epochs, batch_size, learning_rate, beta1, beta2,
///                      epsilon, target_scaling}
///   metrics           {train_mae, val_mae}
///   encoder           {kota, type_kos, area: [tokens], area_cities: [[kota idx]],
///                      norm: {means, variances, count}}
///   facility_catalog  [names]
///   layers            [{in, out, activation, weights (row-major), bias}]
struct Checkpoint {
  bundle::ModelBundle bundle;
  nn::TrainConfig config;
  std::uint64_t split_seed = 42;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr const char* kCheckpointFormat = "getkos-checkpoint";

inline nlohmann::json to_json(const Checkpoint& c) {
  using nlohmann::json;
  const auto& b = c.bundle;
  const auto& enc = b.encoder;
  json layers = json::array();
  for (const auto& l : b.model.layers) {
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation",
                       l.activation == nn::Activation::relu ? "relu" : "linear"},
                      {"weights", l.weights.values()},
                      {"bias", l.bias}});
  }
  const auto arch = b.model.arch();
  return {
      {"format", kCheckpointFormat},
      {"version", 1},
      {"arch", {{"input_dim", arch.input_dim}, {"hidden", arch.hidden}}},
      {"seeds", {{"train", c.config.seed}, {"split", c.split_seed}}},
      {"config",
       {{"epochs", c.config.epochs},
        {"batch_size", c.config.batch_size},
        {"learning_rate", c.config.learning_rate},
        {"beta1", c.config.beta1},
        {"beta2", c.config.beta2},
        {"epsilon", c.config.epsilon},
        {"target_scaling", c.config.target_scaling}}},
      {"metrics",
       {{"train_mae", b.metadata.train_mae}, {"val_mae", b.metadata.val_mae}}},
      {"encoder",
       {{"kota", enc.kota.tokens()},
        {"type_kos", enc.type_kos.tokens()},
        {"area", enc.area.tokens()},
        {"area_cities", enc.area_cities},
        {"norm",
         {{"means", enc.norm.means},
          {"variances", enc.norm.variances},
          {"count", enc.norm.count}}}}},
      {"facility_catalog", b.facility_catalog},
      {"layers", layers},
  };
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::format, "not a getkos checkpoint");
    }
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorKind::version, "unsupported checkpoint version");
    }
    Checkpoint c;
    const auto& cfg = j.at("config");
    c.config.epochs = cfg.at("epochs").get<std::size_t>();
    c.config.batch_size = cfg.at("batch_size").get<std::size_t>();
    c.config.learning_rate = cfg.at("learning_rate").get<double>();
    c.config.beta1 = cfg.at("beta1").get<double>();
    c.config.beta2 = cfg.at("beta2").get<double>();
    c.config.epsilon = cfg.at("epsilon").get<double>();
    c.config.target_scaling = cfg.at("target_scaling").get<bool>();
    c.config.seed = j.at("seeds").at("train").get<std::uint64_t>();
    c.split_seed = j.at("seeds").at("split").get<std::uint64_t>();

    auto& b = c.bundle;
    b.metadata.training_seed = c.config.seed;
    b.metadata.train_mae = j.at("metrics").at("train_mae").get<double>();
    b.metadata.val_mae = j.at("metrics").at("val_mae").get<double>();

    const auto& e = j.at("encoder");
    b.encoder.kota = Vocabulary(e.at("kota").get<std::vector<std::string>>());
    b.encoder.type_kos = Vocabulary(e.at("type_kos").get<std::vector<std::string>>());
    b.encoder.area = Vocabulary(e.at("area").get<std::vector<std::string>>());
    b.encoder.area_cities =
        e.at("area_cities").get<std::vector<std::vector<std::uint32_t>>>();
    b.encoder.norm.means =
        e.at("norm").at("means").get<std::array<double, kNumFeatures>>();
    b.encoder.norm.variances =
        e.at("norm").at("variances").get<std::array<double, kNumFeatures>>();
    b.encoder.norm.count = e.at("norm").at("count").get<std::uint64_t>();
    b.facility_catalog = j.at("facility_catalog").get<std::vector<std::string>>();

    for (const auto& jl : j.at("layers")) {
      const auto in = jl.at("in").get<std::size_t>();
      const auto out = jl.at("out").get<std::size_t>();
      nn::DenseLayer l{Matrix(in, out), jl.at("bias").get<std::vector<double>>(),
                       jl.at("activation").get<std::string>() == "relu"
                           ? nn::Activation::relu
                           : nn::Activation::linear};
      l.weights.values() = jl.at("weights").get<std::vector<double>>();
      require_shape(l.weights.size() == in * out, "checkpoint weight count",
                    in * out, l.weights.size());
      require_shape(l.bias.size() == out, "checkpoint bias count", out,
                    l.bias.size());
      b.model.layers.push_back(std::move(l));
    }
    b.metadata.arch_summary = b.model.arch().summary();
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::format, std::string("malformed checkpoint: ") + ex.what());
  }
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out << to_json(c).dump(1) << '\n';
  if (!out) throw Error(ErrorKind::io, "failed to write checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  if (!in) throw Error(ErrorKind::io, "checkpoint stream is not readable");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::format, std::string("checkpoint is not JSON: ") + ex.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace getkos
