#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncsae/autoencoder.hpp"
#include "ncsae/data.hpp"

namespace ncsae::cli {

/// Anything wrong with the run file or flags. Maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataFormat { kIdx, kCsv, kBow };

struct DataSpec {
  DataFormat format = DataFormat::kIdx;
  std::filesystem::path train_images, train_labels, test_images, test_labels;  // idx
  std::filesystem::path train_csv, test_csv;                                    // csv
  bool csv_header = false;
  bool csv_labels = true;  // trailing integer label column
  std::filesystem::path train_bow, test_bow;                                    // bow
  std::size_t bow_freq_lo = kFrequencyLo;
  std::size_t bow_freq_hi = kFrequencyHi;
  std::size_t bow_features = kSelectedFeatures;
  std::vector<std::size_t> keep;

  bool has_test() const;
};

struct ExportSpec {
  bool rf = true;
  bool hist = true;
  std::size_t rf_rows = 0;  // 0: from the data, else 28x28 for 784 inputs
  std::size_t rf_cols = 0;
  std::size_t rf_grid_cols = 0;  // 0: ceil(sqrt(units))
  bool rf_normalize = true;
  std::size_t hist_bins = 50;
  double hist_lo = -1.0;
  double hist_hi = 1.0;
};

struct RunConfig {
  DataSpec data;
  std::vector<std::size_t> layers{10, 10};
  std::optional<std::size_t> classes;
  Hyperparams pretrain;
  Hyperparams softmax;
  Hyperparams finetune;
  std::filesystem::path out = "ncsae_out";
  ExportSpec exports;
};

/// Default per-phase settings before any config keys are applied.
RunConfig default_config();

/// Applies a flat key/value document. Keys are dotted names such as
/// "data.keep" or "finetune.learning_rate"; a bare hyperparameter key
/// ("alpha1") sets all three phases, a prefixed one only its phase.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);

/// "key=value", value parsed as JSON when possible and as a string otherwise.
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig load_config(const std::filesystem::path& path);

/// Range checks and path existence.
void validate(const RunConfig& cfg);

/// Keys accepted by apply_json, sorted.
std::vector<std::string> known_keys();

}  // namespace ncsae::cli
