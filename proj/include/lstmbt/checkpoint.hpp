#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lstmbt/anomaly_detector.hpp"
#include "lstmbt/price_predictor.hpp"

// Model checkpoints are JSON documents:
//   { "format": "lstmbt-checkpoint", "version": 1, "kind": "predictor"|"autoencoder",
//     "config": {...}, "scaler": {"min", "max"}, "layers": {...}, "loss_history": [...] }
// Doubles are written in shortest round-trip form, so loading is lossless.
namespace lstmbt::checkpoint {

inline constexpr const char* kFormat = "lstmbt-checkpoint";
inline constexpr int kVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

inline Json matrix_to_json(const nn::Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());  // column-major
  return j;
}

inline nn::Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<nn::Index>();
  const auto cols = j.at("cols").get<nn::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
    throw CheckpointError("matrix data length does not match its shape");
  return Eigen::Map<const nn::Matrix>(data.data(), rows, cols);
}

inline Json stack_to_json(const nn::LstmStack& s) {
  Json layers = Json::array();
  for (const auto& l : s.layers)
    layers.push_back({{"input_weights", matrix_to_json(l.input_weights)},
                      {"recurrent_weights", matrix_to_json(l.recurrent_weights)},
                      {"bias", matrix_to_json(l.bias)}});
  return {{"dropout", s.dropout.rate}, {"layers", layers}};
}

inline nn::LstmStack stack_from_json(const Json& j) {
  nn::LstmStack s;
  s.dropout = nn::DropoutSpec(j.at("dropout").get<double>());
  for (const auto& l : j.at("layers")) {
    nn::LstmParams p{matrix_from_json(l.at("input_weights")), matrix_from_json(l.at("recurrent_weights")),
                     matrix_from_json(l.at("bias"))};
    const auto H = p.hidden_size();
    if (p.input_weights.rows() != 4 * H || p.recurrent_weights.rows() != 4 * H || p.bias.rows() != 4 * H ||
        p.bias.cols() != 1)
      throw CheckpointError("inconsistent LSTM layer shapes");
    if (!s.layers.empty() && s.layers.back().hidden_size() != p.input_size())
      throw CheckpointError("LSTM layer input size does not match previous layer");
    s.layers.push_back(std::move(p));
  }
  if (s.layers.empty()) throw CheckpointError("LSTM stack has no layers");
  return s;
}

inline Json dense_to_json(const nn::DenseParams& d) {
  return {{"weights", matrix_to_json(d.weights)}, {"bias", matrix_to_json(d.bias)}};
}

inline nn::DenseParams dense_from_json(const Json& j) {
  nn::DenseParams d{matrix_from_json(j.at("weights")), matrix_from_json(j.at("bias"))};
  if (d.bias.rows() != d.weights.rows() || d.bias.cols() != 1) throw CheckpointError("inconsistent dense shapes");
  return d;
}

inline Json config_to_json(const nn::TrainConfig& c) {
  return {{"epochs", c.epochs},       {"batch_size", c.batch_size},       {"lookback", c.lookback},
          {"dropout", c.dropout},     {"learning_rate", c.learning_rate}, {"seed", c.seed},
          {"clip_norm", c.clip_norm}};
}

inline nn::TrainConfig config_from_json(const Json& j) {
  nn::TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lookback = j.at("lookback").get<nn::Index>();
  c.dropout = j.at("dropout").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  return c;
}

inline Json header(const char* kind, const nn::TrainConfig& config, const MinMaxScaler& scaler,
                   const std::vector<double>& loss_history) {
  Json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = kind;
  j["config"] = config_to_json(config);
  j["scaler"] = {{"min", scaler.min}, {"max", scaler.max}};
  j["loss_history"] = loss_history;
  return j;
}

inline void check_header(const Json& j, const char* kind) {
  if (!j.is_object() || j.value("format", "") != kFormat) throw CheckpointError("not an lstmbt checkpoint");
  if (j.at("version").get<int>() != kVersion)
    throw CheckpointError("unsupported checkpoint version " + j.at("version").dump());
  if (j.at("kind").get<std::string>() != kind)
    throw CheckpointError("checkpoint holds a '" + j.at("kind").get<std::string>() + "', expected '" + kind + "'");
}

inline Json to_json(const PricePredictor& p) {
  Json j = header("predictor", p.config, p.scaler, p.loss_history);
  j["lookback"] = p.model.lookback;
  j["stack"] = stack_to_json(p.model.stack);
  j["head"] = dense_to_json(p.model.head);
  return j;
}

inline Json to_json(const AnomalyDetector& d) {
  Json j = header("autoencoder", d.config, d.scaler, d.loss_history);
  j["lookback"] = d.model.lookback;
  j["encoder"] = stack_to_json(d.model.encoder);
  j["decoder"] = stack_to_json(d.model.decoder);
  j["head"] = dense_to_json(d.model.head);
  return j;
}

template <typename T>
T from_json(const Json& j);

template <>
inline PricePredictor from_json<PricePredictor>(const Json& j) {
  try {
    check_header(j, "predictor");
    PricePredictor p;
    p.config = config_from_json(j.at("config"));
    p.scaler = {j.at("scaler").at("min").get<double>(), j.at("scaler").at("max").get<double>()};
    p.loss_history = j.at("loss_history").get<std::vector<double>>();
    p.model.lookback = j.at("lookback").get<nn::Index>();
    p.model.stack = stack_from_json(j.at("stack"));
    p.model.head = dense_from_json(j.at("head"));
    p.architecture.dropout = p.model.stack.dropout.rate;
    p.architecture.hidden_sizes.clear();
    for (const auto& l : p.model.stack.layers) p.architecture.hidden_sizes.push_back(l.hidden_size());
    if (p.model.stack.input_size() != 1 || p.model.head.input_size() != p.model.stack.output_size())
      throw CheckpointError("predictor layer sizes do not chain");
    return p;
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

template <>
inline AnomalyDetector from_json<AnomalyDetector>(const Json& j) {
  try {
    check_header(j, "autoencoder");
    AnomalyDetector d;
    d.config = config_from_json(j.at("config"));
    d.scaler = {j.at("scaler").at("min").get<double>(), j.at("scaler").at("max").get<double>()};
    d.loss_history = j.at("loss_history").get<std::vector<double>>();
    d.model.lookback = j.at("lookback").get<nn::Index>();
    d.model.encoder = stack_from_json(j.at("encoder"));
    d.model.decoder = stack_from_json(j.at("decoder"));
    d.model.head = dense_from_json(j.at("head"));
    d.architecture.dropout = d.model.encoder.dropout.rate;
    d.architecture.encoder_sizes.clear();
    d.architecture.decoder_sizes.clear();
    for (const auto& l : d.model.encoder.layers) d.architecture.encoder_sizes.push_back(l.hidden_size());
    for (const auto& l : d.model.decoder.layers) d.architecture.decoder_sizes.push_back(l.hidden_size());
    if (d.model.encoder.input_size() != 1 || d.model.decoder.input_size() != d.model.encoder.output_size() ||
        d.model.head.input_size() != d.model.decoder.output_size())
      throw CheckpointError("autoencoder layer sizes do not chain");
    return d;
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

template <typename Model>
void save(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << to_json(m).dump(1) << '\n';
}

template <typename Model>
Model load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return from_json<Model>(j);
}

}  // namespace lstmbt::checkpoint
