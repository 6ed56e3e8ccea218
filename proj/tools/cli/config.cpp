#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

namespace ncsae::cli {

using nlohmann::json;

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config field '" + key + "': " + what);
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number, got " + v.dump());
  return v.get<double>();
}

std::uint64_t as_count(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  bad(key, "expected a non-negative integer, got " + v.dump());
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad(key, "expected true or false, got " + v.dump());
  return v.get<bool>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) bad(key, "expected a string, got " + v.dump());
  return v.get<std::string>();
}

std::vector<std::size_t> as_count_list(const std::string& key, const json& v) {
  if (!v.is_array()) bad(key, "expected an array of integers, got " + v.dump());
  std::vector<std::size_t> out;
  for (const json& e : v) out.push_back(as_count(key, e));
  return out;
}

void set_hp(Hyperparams& hp, const std::string& name, const std::string& key, const json& v) {
  if (name == "p") hp.p = as_real(key, v);
  else if (name == "beta") hp.beta = as_real(key, v);
  else if (name == "alpha1") hp.alpha1 = as_real(key, v);
  else if (name == "alpha2") hp.alpha2 = as_real(key, v);
  else if (name == "kappa") hp.kappa = as_real(key, v);
  else if (name == "learning_rate") hp.learning_rate = as_real(key, v);
  else if (name == "epochs") hp.epochs = as_count(key, v);
  else if (name == "seed") hp.seed = as_count(key, v);
}

const std::vector<std::string>& hp_names() {
  static const std::vector<std::string> names{"p",     "beta",          "alpha1", "alpha2",
                                              "kappa", "learning_rate", "epochs", "seed"};
  return names;
}

Setter path_setter(std::filesystem::path DataSpec::*member, std::string key) {
  return [member, key](RunConfig& c, const json& v) { c.data.*member = as_string(key, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["data.format"] = [](RunConfig& c, const json& v) {
      const std::string f = as_string("data.format", v);
      if (f == "idx") c.data.format = DataFormat::kIdx;
      else if (f == "csv") c.data.format = DataFormat::kCsv;
      else if (f == "bow") c.data.format = DataFormat::kBow;
      else bad("data.format", "expected idx, csv or bow, got '" + f + "'");
    };
    t["data.train_images"] = path_setter(&DataSpec::train_images, "data.train_images");
    t["data.train_labels"] = path_setter(&DataSpec::train_labels, "data.train_labels");
    t["data.test_images"] = path_setter(&DataSpec::test_images, "data.test_images");
    t["data.test_labels"] = path_setter(&DataSpec::test_labels, "data.test_labels");
    t["data.train_csv"] = path_setter(&DataSpec::train_csv, "data.train_csv");
    t["data.test_csv"] = path_setter(&DataSpec::test_csv, "data.test_csv");
    t["data.train_bow"] = path_setter(&DataSpec::train_bow, "data.train_bow");
    t["data.test_bow"] = path_setter(&DataSpec::test_bow, "data.test_bow");
    t["data.csv_header"] = [](RunConfig& c, const json& v) {
      c.data.csv_header = as_bool("data.csv_header", v);
    };
    t["data.csv_labels"] = [](RunConfig& c, const json& v) {
      c.data.csv_labels = as_bool("data.csv_labels", v);
    };
    t["data.bow_freq_lo"] = [](RunConfig& c, const json& v) {
      c.data.bow_freq_lo = as_count("data.bow_freq_lo", v);
    };
    t["data.bow_freq_hi"] = [](RunConfig& c, const json& v) {
      c.data.bow_freq_hi = as_count("data.bow_freq_hi", v);
    };
    t["data.bow_features"] = [](RunConfig& c, const json& v) {
      c.data.bow_features = as_count("data.bow_features", v);
    };
    t["data.keep"] = [](RunConfig& c, const json& v) { c.data.keep = as_count_list("data.keep", v); };
    t["layers"] = [](RunConfig& c, const json& v) { c.layers = as_count_list("layers", v); };
    t["classes"] = [](RunConfig& c, const json& v) { c.classes = as_count("classes", v); };
    t["out"] = [](RunConfig& c, const json& v) { c.out = as_string("out", v); };
    t["export.rf"] = [](RunConfig& c, const json& v) { c.exports.rf = as_bool("export.rf", v); };
    t["export.hist"] = [](RunConfig& c, const json& v) {
      c.exports.hist = as_bool("export.hist", v);
    };
    t["export.rf_rows"] = [](RunConfig& c, const json& v) {
      c.exports.rf_rows = as_count("export.rf_rows", v);
    };
    t["export.rf_cols"] = [](RunConfig& c, const json& v) {
      c.exports.rf_cols = as_count("export.rf_cols", v);
    };
    t["export.rf_grid_cols"] = [](RunConfig& c, const json& v) {
      c.exports.rf_grid_cols = as_count("export.rf_grid_cols", v);
    };
    t["export.rf_normalize"] = [](RunConfig& c, const json& v) {
      c.exports.rf_normalize = as_bool("export.rf_normalize", v);
    };
    t["export.hist_bins"] = [](RunConfig& c, const json& v) {
      c.exports.hist_bins = as_count("export.hist_bins", v);
    };
    t["export.hist_lo"] = [](RunConfig& c, const json& v) {
      c.exports.hist_lo = as_real("export.hist_lo", v);
    };
    t["export.hist_hi"] = [](RunConfig& c, const json& v) {
      c.exports.hist_hi = as_real("export.hist_hi", v);
    };
    for (const std::string& name : hp_names()) {
      t[name] = [name](RunConfig& c, const json& v) {
        set_hp(c.pretrain, name, name, v);
        set_hp(c.softmax, name, name, v);
        set_hp(c.finetune, name, name, v);
      };
      for (auto [phase, member] : {std::pair{"pretrain", &RunConfig::pretrain},
                                   std::pair{"softmax", &RunConfig::softmax},
                                   std::pair{"finetune", &RunConfig::finetune}}) {
        const std::string key = std::string(phase) + "." + name;
        t[key] = [name, key, member](RunConfig& c, const json& v) { set_hp(c.*member, name, key, v); };
      }
    }
    return t;
  }();
  return table;
}

void apply_one(RunConfig& cfg, const std::string& key, const json& v) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config field '" + key + "'");
  it->second(cfg, v);
}

bool is_bare_hp(const std::string& key) {
  return std::find(hp_names().begin(), hp_names().end(), key) != hp_names().end();
}

void require_file(const std::string& key, const std::filesystem::path& p) {
  if (p.empty()) bad(key, "required for this data format");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) bad(key, "no such file '" + p.string() + "'");
}

void optional_file(const std::string& key, const std::filesystem::path& p) {
  if (!p.empty()) require_file(key, p);
}

void check_hp(const std::string& phase, const Hyperparams& hp) {
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config phase '" + phase + "': " + e.what());
  }
}

}  // namespace

bool DataSpec::has_test() const {
  switch (format) {
    case DataFormat::kIdx: return !test_images.empty();
    case DataFormat::kCsv: return !test_csv.empty();
    case DataFormat::kBow: return !test_bow.empty();
  }
  return false;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.pretrain.learning_rate = 0.5;
  cfg.pretrain.epochs = 500;
  cfg.softmax.learning_rate = 0.5;
  cfg.softmax.epochs = 500;
  cfg.finetune.learning_rate = 0.1;
  cfg.finetune.epochs = 1000;
  return cfg;
}

void apply_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object of key/value pairs");
  // Bare hyperparameters first so that phase-prefixed keys win.
  for (const auto& [key, value] : doc.items())
    if (is_bare_hp(key)) apply_one(cfg, key, value);
  for (const auto& [key, value] : doc.items())
    if (!is_bare_hp(key)) apply_one(cfg, key, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  apply_one(cfg, key, value);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  RunConfig cfg = default_config();
  apply_json(cfg, doc);
  return cfg;
}

void validate(const RunConfig& cfg) {
  const DataSpec& d = cfg.data;
  switch (d.format) {
    case DataFormat::kIdx:
      require_file("data.train_images", d.train_images);
      require_file("data.train_labels", d.train_labels);
      optional_file("data.test_images", d.test_images);
      if (!d.test_images.empty()) require_file("data.test_labels", d.test_labels);
      break;
    case DataFormat::kCsv:
      require_file("data.train_csv", d.train_csv);
      optional_file("data.test_csv", d.test_csv);
      break;
    case DataFormat::kBow:
      require_file("data.train_bow", d.train_bow);
      optional_file("data.test_bow", d.test_bow);
      if (d.bow_freq_lo > d.bow_freq_hi) bad("data.bow_freq_lo", "exceeds data.bow_freq_hi");
      if (d.bow_features == 0) bad("data.bow_features", "must be positive");
      if (!d.keep.empty()) bad("data.keep", "only supported for idx and csv data");
      break;
  }
  if (cfg.layers.empty()) bad("layers", "at least one hidden layer is required");
  for (std::size_t n : cfg.layers)
    if (n == 0) bad("layers", "sizes must be positive");
  if (cfg.classes && *cfg.classes < 2) bad("classes", "at least two classes are required");
  if (cfg.classes && !d.keep.empty() && *cfg.classes != d.keep.size())
    bad("classes", "does not match the number of kept labels");
  if (cfg.out.empty()) bad("out", "must not be empty");
  if (cfg.exports.hist_bins == 0) bad("export.hist_bins", "must be positive");
  if (!(cfg.exports.hist_lo < cfg.exports.hist_hi)) bad("export.hist_lo", "must be below export.hist_hi");
  if ((cfg.exports.rf_rows == 0) != (cfg.exports.rf_cols == 0))
    bad("export.rf_rows", "set both export.rf_rows and export.rf_cols or neither");
  check_hp("pretrain", cfg.pretrain);
  check_hp("softmax", cfg.softmax);
  check_hp("finetune", cfg.finetune);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& entry : setters()) keys.push_back(entry.first);
  return keys;
}

}  // namespace ncsae::cli
