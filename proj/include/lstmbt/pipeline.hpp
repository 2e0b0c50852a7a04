#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lstmbt/anomaly_detector.hpp"
#include "lstmbt/backtester.hpp"
#include "lstmbt/checkpoint.hpp"
#include "lstmbt/market_data.hpp"
#include "lstmbt/price_predictor.hpp"
#include "lstmbt/reporting.hpp"

namespace lstmbt {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitTraining = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown by validate_config for --help; carries the help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InputSpec {
  std::filesystem::path path;
  std::string ticker;
};

inline constexpr const char* kEnvPrefix = "LSTMBT_";

struct RunConfig {
  std::vector<InputSpec> inputs;
  std::set<int> strategies{0, 1, 2};
  double split_ratio = 0.8;
  int lookback = 60;
  int ae_lookback = 30;
  double dropout = 0.2;
  int epochs = 100;
  int batch_size = 32;
  double threshold = kDefaultAnomalyThreshold;
  int hold_days = static_cast<int>(kDefaultHoldDays);
  std::uint64_t seed = 42;
  std::filesystem::path out = "lstmbt_out";

  nn::TrainConfig predictor_train() const {
    nn::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.lookback = lookback;
    c.dropout = dropout;
    c.seed = seed;
    return c;
  }

  nn::TrainConfig autoencoder_train() const {
    nn::TrainConfig c = predictor_train();
    c.lookback = ae_lookback;
    return c;
  }
};

inline InputSpec parse_input_spec(const std::string& raw) {
  const auto eq = raw.rfind('=');
  InputSpec spec;
  if (eq == std::string::npos) {
    spec.path = raw;
    spec.ticker = spec.path.stem().string();
    for (auto& c : spec.ticker) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  } else {
    spec.path = raw.substr(0, eq);
    spec.ticker = raw.substr(eq + 1);
  }
  if (spec.path.empty()) throw ConfigError("--input '" + raw + "': empty path");
  if (spec.ticker.empty()) throw ConfigError("--input '" + raw + "': empty ticker");
  for (char c : spec.ticker)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_'))
      throw ConfigError("--input '" + raw + "': ticker may only contain letters, digits, '.', '-', '_'");
  return spec;
}

inline std::set<int> parse_strategies(const std::string& raw) {
  std::set<int> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "0" || item == "1" || item == "2")
      out.insert(item[0] - '0');
    else
      throw ConfigError("--strategies: '" + item + "' not in {0,1,2}");
  }
  if (out.empty()) throw ConfigError("--strategies: at least one of {0,1,2} required");
  return out;
}

// Resolves flags, then LSTMBT_* environment variables, then defaults, and
// range-checks every value.
inline RunConfig validate_config(std::vector<std::string> args) {
  RunConfig cfg;
  std::vector<std::string> inputs;
  std::string strategies = "0,1,2";

  CLI::App app{"Backtest LSTM price-prediction and autoencoder-breakout strategies against buy-and-hold",
               "lstmbt"};
  auto env = [](const char* name) { return std::string(kEnvPrefix) + name; };
  app.add_option("--input", inputs, "Price CSV as <path>=<ticker> (repeatable)")->envname(env("INPUT"))->delimiter(';');
  app.add_option("--strategies", strategies, "Comma-separated subset of 0 (buy & hold), 1 (LSTM), 2 (breakout)")
      ->envname(env("STRATEGIES"))
      ->capture_default_str();
  app.add_option("--split-ratio", cfg.split_ratio, "Train fraction, in (0, 1)")
      ->envname(env("SPLIT_RATIO"))
      ->capture_default_str();
  app.add_option("--lookback", cfg.lookback, "Strategy 1 lookback (trading days)")
      ->envname(env("LOOKBACK"))
      ->capture_default_str();
  app.add_option("--ae-lookback", cfg.ae_lookback, "Strategy 2 autoencoder lookback (trading days)")
      ->envname(env("AE_LOOKBACK"))
      ->capture_default_str();
  app.add_option("--dropout", cfg.dropout, "Dropout rate, in [0, 1)")->envname(env("DROPOUT"))->capture_default_str();
  app.add_option("--epochs", cfg.epochs, "Training epochs")->envname(env("EPOCHS"))->capture_default_str();
  app.add_option("--batch-size", cfg.batch_size, "Mini-batch size")->envname(env("BATCH_SIZE"))->capture_default_str();
  app.add_option("--threshold", cfg.threshold, "Anomaly reconstruction-MAE threshold, in (0, 1]")
      ->envname(env("THRESHOLD"))
      ->capture_default_str();
  app.add_option("--hold-days", cfg.hold_days, "Strategy 2 holding period (trading days)")
      ->envname(env("HOLD_DAYS"))
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for all randomness")->envname(env("SEED"))->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->envname(env("OUT"))->capture_default_str();

  std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  for (const auto& raw : inputs) cfg.inputs.push_back(parse_input_spec(raw));
  if (cfg.inputs.empty()) throw ConfigError("at least one --input <path>=<ticker> is required");
  std::set<std::string> seen;
  for (const auto& in : cfg.inputs)
    if (!seen.insert(in.ticker).second) throw ConfigError("ticker '" + in.ticker + "' given more than once");
  cfg.strategies = parse_strategies(strategies);

  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0, "--split-ratio must be in (0, 1)");
  require(cfg.lookback >= 1, "--lookback must be in [1, inf)");
  require(cfg.ae_lookback >= 1, "--ae-lookback must be in [1, inf)");
  require(cfg.dropout >= 0.0 && cfg.dropout < 1.0, "--dropout must be in [0, 1)");
  require(cfg.epochs >= 1, "--epochs must be in [1, inf)");
  require(cfg.batch_size >= 1, "--batch-size must be in [1, inf)");
  require(cfg.threshold > 0.0 && cfg.threshold <= 1.0, "--threshold must be in (0, 1]");
  require(cfg.hold_days >= 1, "--hold-days must be in [1, inf)");
  require(!cfg.out.empty(), "--out must not be empty");
  return cfg;
}

inline RunConfig validate_config(int argc, const char* const* argv) {
  return validate_config(std::vector<std::string>(argv + 1, argv + argc));
}

inline Json config_json(const RunConfig& cfg) {
  Json j;
  Json inputs = Json::array();
  for (const auto& in : cfg.inputs) inputs.push_back({{"path", in.path.string()}, {"ticker", in.ticker}});
  j["inputs"] = inputs;
  j["strategies"] = std::vector<int>(cfg.strategies.begin(), cfg.strategies.end());
  j["split_ratio"] = cfg.split_ratio;
  j["lookback"] = cfg.lookback;
  j["ae_lookback"] = cfg.ae_lookback;
  j["dropout"] = cfg.dropout;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["threshold"] = cfg.threshold;
  j["threshold_rule"] = "mae >= threshold";
  j["hold_days"] = cfg.hold_days;
  j["seed"] = cfg.seed;
  const auto tc = cfg.predictor_train();
  j["learning_rate"] = tc.learning_rate;
  j["clip_norm"] = tc.clip_norm;
  j["predictor_hidden_sizes"] = nn::RegressorConfig{}.hidden_sizes;
  j["autoencoder_encoder_sizes"] = nn::AutoencoderConfig{}.encoder_sizes;
  j["autoencoder_decoder_sizes"] = nn::AutoencoderConfig{}.decoder_sizes;
  return j;
}

namespace detail {

inline void write_loss_csv(const std::vector<double>& history, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& o) {
    o << "epoch,loss\n";
    for (std::size_t k = 0; k < history.size(); ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.12g\n", k + 1, history[k]);
      o << buf;
    }
  });
}

inline std::string stats_caption(const std::string& what, const BacktestReport& r) {
  return what + ": $" + r.profit.to_fixed(2) + " on " + std::to_string(r.profitable) + " profitable vs " +
         std::to_string(r.unprofitable) + " unprofitable trades, success rate " + format_success_rate(r.success_rate);
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

// All strategies for one ticker; returns its comparison rows.
inline std::vector<ComparisonRow> run_ticker(const RunConfig& cfg, const InputSpec& input, std::ostream& log) {
  const auto series = parse_csv(input.path, input.ticker);
  const auto dir = cfg.out / input.ticker;
  std::filesystem::create_directories(dir);
  emit_price_overlay(series, dir / "prices");

  std::vector<ComparisonRow> rows;
  if (cfg.strategies.count(0)) {
    auto report = run_buy_and_hold(series);
    write_json(dir / "strategy0_report.json", report_json(input.ticker, StrategyId::buy_and_hold, report, cfg.seed));
    rows.push_back({input.ticker, StrategyId::buy_and_hold, report});
  }
  if (!cfg.strategies.count(1) && !cfg.strategies.count(2)) return rows;

  const auto split = split_train_test(series, cfg.split_ratio);
  log << "[" << input.ticker << "] " << series.size() << " bars, train " << split.train.size() << ", test "
      << split.test.size() << "\n";

  if (cfg.strategies.count(1)) {
    log << "[" << input.ticker << "] strategy 1: training " << cfg.epochs << " epochs\n";
    const auto predictor = fit_predictor(split, cfg.predictor_train());
    checkpoint::save(predictor, dir / "strategy1_model.json");
    write_loss_csv(predictor.loss_history, dir / "strategy1_loss.csv");
    const auto predictions = predict_test(predictor, split);
    const auto result = run_strategy1(split.test, predictions);
    emit_prediction_overlay(predictions, dir / "strategy1_predictions",
                            stats_caption(input.ticker + " predictions", result.report));
    write_file(dir / "strategy1_ledger.csv", [&](std::ostream& o) { write_ledger_csv(result.ledger, o); });
    write_json(dir / "strategy1_report.json", report_json(input.ticker, StrategyId::predictor, result.report, cfg.seed));

    const auto sq = squared_errors(predictions);
    write_file(dir / "strategy1_squared_error_histogram.csv", [&](std::ostream& o) { write_histogram_csv(histogram(sq), o); });
    try {
      const auto density = gaussian_kde(sq, suggested_grid_points(sq));
      write_file(dir / "strategy1_squared_error_density.csv", [&](std::ostream& o) { write_density_csv(density, o); });
    } catch (const std::invalid_argument& e) {
      log << "[" << input.ticker << "] squared-error density skipped: " << e.what() << "\n";
    }
    rows.push_back({input.ticker, StrategyId::predictor, result.report});
  }

  if (cfg.strategies.count(2)) {
    log << "[" << input.ticker << "] strategy 2: training " << cfg.epochs << " epochs\n";
    const auto detector = fit_autoencoder(split, cfg.autoencoder_train());
    checkpoint::save(detector, dir / "strategy2_model.json");
    write_loss_csv(detector.loss_history, dir / "strategy2_loss.csv");
    const auto errors = detect_test(detector, split);
    const auto labels = label_anomalies(errors, cfg.threshold);
    const auto result = run_strategy2(split.test, labels, static_cast<std::size_t>(cfg.hold_days));
    write_file(dir / "strategy2_anomalies.csv", [&](std::ostream& o) { write_anomalies_csv(labels, o); });
    emit_anomaly_overlay(split.test, labels, dir / "strategy2_breakouts",
                         stats_caption(input.ticker + " breakouts", result.report));
    write_file(dir / "strategy2_ledger.csv", [&](std::ostream& o) { write_ledger_csv(result.ledger, o); });
    write_json(dir / "strategy2_report.json", report_json(input.ticker, StrategyId::breakout, result.report, cfg.seed));
    rows.push_back({input.ticker, StrategyId::breakout, result.report});
  }
  return rows;
}

}  // namespace detail

// Runs every configured ticker and strategy, writes all artifacts under
// cfg.out, prints the comparison table to `out`, and returns an exit code.
// On failure a one-line diagnostic goes to `err` and cfg.out/INCOMPLETE is
// written.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto marker = cfg.out / "INCOMPLETE";
  auto fail = [&](int code, const std::string& msg) {
    err << "lstmbt: " << msg << "\n";
    std::error_code ec;
    if (std::filesystem::is_directory(cfg.out, ec)) {
      std::ofstream m(marker);
      m << msg << "\n";
    }
    return code;
  };

  try {
    std::filesystem::create_directories(cfg.out);
    std::filesystem::remove(marker);
    detail::write_json(cfg.out / "config.json", config_json(cfg));
  } catch (const std::exception& e) {
    return fail(kExitConfig, std::string("cannot prepare output directory: ") + e.what());
  }

  std::vector<ComparisonRow> rows;
  try {
    for (const auto& input : cfg.inputs) {
      auto r = detail::run_ticker(cfg, input, err);
      rows.insert(rows.end(), r.begin(), r.end());
    }
    const auto table = render_comparison_table(rows);
    write_text_file(cfg.out / "comparison.txt", table);
    detail::write_json(cfg.out / "comparison.json", comparison_json(rows, cfg.seed));
    out << table;
  } catch (const nn::TrainingError& e) {
    return fail(kExitTraining, e.what());
  } catch (const DataError& e) {
    return fail(kExitData, e.what());
  } catch (const DegenerateScalerError& e) {
    return fail(kExitData, e.what());
  } catch (const IoError& e) {
    return fail(kExitConfig, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kExitData, e.what());
  }
  return kExitOk;
}

}  // namespace lstmbt
