#include "app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "ncsae/data.hpp"
#include "ncsae/error.hpp"
#include "ncsae/metrics.hpp"
#include "ncsae/serialize.hpp"
#include "ncsae/training.hpp"

namespace ncsae::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// Output staging. Files are written into a hidden sibling directory and only
// moved into place once every one of them exists, so a failed command
// leaves nothing behind.
class Staging {
 public:
  explicit Staging(const fs::path& out) : out_(fs::absolute(out).lexically_normal()) {
    if (!out_.has_filename()) out_ = out_.parent_path();
    dir_ = out_.parent_path() /
           ("." + out_.filename().string() + ".partial-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  fs::path file(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  void commit() {
    fs::create_directories(out_);
    for (const std::string& name : names_) fs::rename(dir_ / name, out_ / name);
  }

 private:
  fs::path out_;
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError(DataError::Kind::kIo, "cannot write '" + path.string() + "'");
}

void write_json(const fs::path& path, const ojson& doc) { write_text(path, doc.dump(2) + "\n"); }

/// Single-file variant of Staging for the export commands.
template <class Fn>
void write_single(const fs::path& target, Fn&& write) {
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".partial-" + std::to_string(::getpid());
  try {
    write(tmp);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

std::string layer_name(std::size_t i) { return "layer" + std::to_string(i + 1); }

// Data.

struct Splits {
  Dataset train;
  std::optional<Dataset> test;
};

Dataset keep_labels(Dataset d, const DataSpec& spec) {
  if (spec.keep.empty()) return d;
  return subset_by_labels(d, spec.keep);
}

Splits load_data(const RunConfig& cfg) {
  const DataSpec& d = cfg.data;
  Splits s;
  switch (d.format) {
    case DataFormat::kIdx:
      s.train = keep_labels(load_idx(d.train_images, d.train_labels), d);
      if (d.has_test()) s.test = keep_labels(load_idx(d.test_images, d.test_labels), d);
      break;
    case DataFormat::kCsv:
      s.train = load_matrix_csv(d.train_csv, d.csv_labels, d.csv_header);
      if (d.has_test()) s.test = load_matrix_csv(d.test_csv, d.csv_labels, d.csv_header);
      if (!d.keep.empty()) {
        if (!d.csv_labels) throw ConfigError("config field 'data.keep': needs data.csv_labels");
        s.train = keep_labels(std::move(s.train), d);
        if (s.test) s.test = keep_labels(std::move(*s.test), d);
      }
      break;
    case DataFormat::kBow: {
      const BowCorpus train =
          info_gain_select(load_bow_filtered(d.train_bow, d.bow_freq_lo, d.bow_freq_hi),
                           d.bow_features);
      s.train = bow_to_dataset(train);
      if (d.has_test()) {
        const BowCorpus test = load_bow(d.test_bow, train.class_names);
        s.test = bow_to_dataset(restrict_vocabulary(test, train.vocab));
      }
      break;
    }
  }
  return s;
}

std::size_t class_count(const RunConfig& cfg, const Dataset& train) {
  if (cfg.classes) return *cfg.classes;
  if (!cfg.data.keep.empty()) return cfg.data.keep.size();
  return train.n_classes();
}

const Labels& require_labels(const Dataset& d, const char* what) {
  if (!d.labels) throw ConfigError(std::string(what) + " needs labelled data");
  return *d.labels;
}

void check_label_range(const Labels& labels, std::size_t classes) {
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw ConfigError("config field 'classes': label " + std::to_string(y) +
                        " does not fit " + std::to_string(classes) + " classes");
    }
  }
}

// Receptive-field tiles: explicit config, then the image shape of the data,
// then 28x28 for 784 inputs, else one row per unit.
std::pair<std::size_t, std::size_t> tile_shape(const ExportSpec& e, std::size_t n_input,
                                               std::size_t image_rows, std::size_t image_cols) {
  if (e.rf_rows != 0) {
    if (e.rf_rows * e.rf_cols != n_input) {
      throw ConfigError("config field 'export.rf_rows': " + std::to_string(e.rf_rows) + "x" +
                        std::to_string(e.rf_cols) + " tiles do not cover " +
                        std::to_string(n_input) + " inputs");
    }
    return {e.rf_rows, e.rf_cols};
  }
  if (image_rows != 0 && image_rows * image_cols == n_input) return {image_rows, image_cols};
  if (n_input == 784) return {28, 28};
  return {1, n_input};
}

std::size_t grid_cols_for(std::size_t units, std::size_t requested) {
  if (requested != 0) return requested;
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(units))));
}

void export_layer_figures(Staging& stage, const std::string& prefix, const Matrix& w1,
                          const ExportSpec& e, std::size_t image_rows, std::size_t image_cols) {
  if (e.rf) {
    const auto [rows, cols] = tile_shape(e, w1.cols(), image_rows, image_cols);
    export_receptive_fields(w1, rows, cols, grid_cols_for(w1.rows(), e.rf_grid_cols),
                            stage.file(prefix + "_rf.pgm"), e.rf_normalize);
  }
  if (e.hist) {
    write_histogram_csv(weight_histogram(w1, e.hist_bins, e.hist_lo, e.hist_hi),
                        stage.file(prefix + "_hist.csv"));
  }
}

struct LayerStats {
  double recon = 0.0;
  double kl = 0.0;
  double nonneg = 0.0;
};

std::vector<LayerStats> layer_stats(const std::vector<AeParams>& encoders, const Matrix& x, double p) {
  std::vector<LayerStats> out;
  Matrix input = x;
  for (const AeParams& layer : encoders) {
    out.push_back({reconstruction_error(layer, input), kl_sparsity_measure(layer, input, p),
                   nonneg_fraction(layer.w1)});
    input = encode(layer.w1, layer.bx, input);
  }
  return out;
}

ojson metrics_doc(const std::string& phase, std::size_t epochs, const std::vector<LayerStats>& stats) {
  ojson doc;
  doc["phase"] = phase;
  doc["epochs"] = epochs;
  doc["recon"] = stats.front().recon;
  doc["kl_sparsity"] = stats.front().kl;
  ojson nonneg = ojson::array();
  ojson layers = ojson::array();
  for (const LayerStats& s : stats) {
    nonneg.push_back(s.nonneg);
    layers.push_back({{"recon", s.recon}, {"kl_sparsity", s.kl}, {"nonneg_fraction", s.nonneg}});
  }
  doc["nonneg_fraction_per_layer"] = nonneg;
  doc["layers"] = layers;
  return doc;
}

// Commands.

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? default_config() : load_config(f.config);
  for (const std::string& o : f.overrides) apply_override(cfg, o);
  if (f.seed) {
    cfg.pretrain.seed = *f.seed;
    cfg.softmax.seed = *f.seed;
    cfg.finetune.seed = *f.seed;
  }
  if (!f.out.empty()) cfg.out = f.out;
  validate(cfg);
  return cfg;
}

int cmd_pretrain(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const Splits data = load_data(cfg);
  const StackResult st = stack_pretrain(data.train.x, cfg.layers, cfg.pretrain);
  const std::vector<LayerStats> stats =
      layer_stats(st.network.encoders, data.train.x, cfg.pretrain.p);

  Staging stage(cfg.out);
  for (std::size_t i = 0; i < st.network.encoders.size(); ++i) {
    const AeParams& layer = st.network.encoders[i];
    const std::string name = layer_name(i);
    save_ae_params(layer, stage.file(name + ".params"));
    write_ae_report_csv(st.reports[i], stage.file(name + "_report.csv"));
    export_layer_figures(stage, name, layer.w1, cfg.exports, i == 0 ? data.train.image_rows : 0,
                         i == 0 ? data.train.image_cols : 0);
  }
  write_json(stage.file("metrics.json"), metrics_doc("pretrain", cfg.pretrain.epochs, stats));
  stage.commit();

  for (std::size_t i = 0; i < stats.size(); ++i) {
    const AeParams& layer = st.network.encoders[i];
    out << layer_name(i) << ": " << layer.n_input() << " -> " << layer.n_hidden()
        << "  recon " << format_double(stats[i].recon) << "  kl " << format_double(stats[i].kl)
        << "  nonneg " << format_double(stats[i].nonneg) << "\n";
  }
  out << "wrote " << cfg.out.string() << "\n";
  return kExitOk;
}

StackedNetwork load_pretrained(const fs::path& dir, const RunConfig& cfg, std::size_t n_input) {
  std::vector<fs::path> files;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    fs::path f = dir / (layer_name(i) + ".params");
    if (!fs::is_regular_file(f)) throw ConfigError("pretrained layer file '" + f.string() + "' not found");
    files.push_back(std::move(f));
  }
  StackedNetwork net;
  for (const fs::path& f : files) net.encoders.push_back(load_ae_params(f));
  std::size_t expected_in = n_input;
  for (std::size_t i = 0; i < net.encoders.size(); ++i) {
    const AeParams& layer = net.encoders[i];
    if (layer.n_input() != expected_in || layer.n_hidden() != cfg.layers[i]) {
      throw ConfigError("pretrained " + layer_name(i) + " is " + std::to_string(layer.n_input()) +
                        " -> " + std::to_string(layer.n_hidden()) + " but the config needs " +
                        std::to_string(expected_in) + " -> " + std::to_string(cfg.layers[i]));
    }
    expected_in = layer.n_hidden();
  }
  return net;
}

int cmd_finetune(const CommonFlags& flags, const std::string& pretrained, std::ostream& out,
                 std::ostream& err) {
  const RunConfig cfg = resolve_config(flags);
  if (!fs::is_directory(pretrained))
    throw ConfigError("pretrained directory '" + pretrained + "' not found");
  const Splits data = load_data(cfg);
  const Labels& train_labels = require_labels(data.train, "fine-tuning");
  const std::size_t classes = class_count(cfg, data.train);
  check_label_range(train_labels, classes);
  const Dataset& eval = data.test ? *data.test : data.train;
  const Labels& eval_labels = require_labels(eval, "fine-tuning");
  check_label_range(eval_labels, classes);

  StackedNetwork net = load_pretrained(pretrained, cfg, data.train.x.cols());
  const SoftmaxResult head = train_softmax(net.features(data.train.x), train_labels, classes, cfg.softmax);
  for (const std::string& w : head.report.warnings) err << "warning: " << w << "\n";
  net.softmax_w = head.w;
  net.softmax_b = head.b;
  const double before = evaluate_accuracy(net, eval.x, eval_labels);
  const FinetuneResult tuned = finetune(net, data.train.x, train_labels, cfg.finetune);
  const double after = evaluate_accuracy(tuned.network, eval.x, eval_labels);

  const std::vector<LayerStats> stats =
      layer_stats(tuned.network.encoders, data.train.x, cfg.pretrain.p);
  ojson doc = metrics_doc("finetune", cfg.finetune.epochs, stats);
  doc["nonneg_fraction_softmax"] = nonneg_fraction(tuned.network.softmax_w);
  doc["eval_split"] = data.test ? "test" : "train";
  doc["accuracy_before"] = before;
  doc["accuracy_after"] = after;

  Staging stage(cfg.out);
  save_network(tuned.network, stage.file("network.params"));
  write_supervised_report_csv(head.report, stage.file("softmax_report.csv"));
  write_supervised_report_csv(tuned.report, stage.file("finetune_report.csv"));
  for (std::size_t i = 0; i < tuned.network.encoders.size(); ++i) {
    export_layer_figures(stage, "tuned_" + layer_name(i), tuned.network.encoders[i].w1, cfg.exports,
                         i == 0 ? data.train.image_rows : 0, i == 0 ? data.train.image_cols : 0);
  }
  write_json(stage.file("metrics.json"), doc);
  stage.commit();

  out << "accuracy before fine-tuning " << format_double(before) << "\n"
      << "accuracy after fine-tuning  " << format_double(after) << "\n"
      << "wrote " << cfg.out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& model, const std::string& split,
             std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  if (!fs::is_regular_file(model)) throw ConfigError("model file '" + model + "' not found");
  const Splits data = load_data(cfg);
  if (split == "test" && !data.test) throw ConfigError("config has no test split to evaluate");
  const Dataset& ds = split == "test" ? *data.test : data.train;
  const Labels& labels = require_labels(ds, "evaluation");

  const StackedNetwork net = load_network(model);
  if (!net.has_head()) throw ConfigError("model '" + model + "' has no softmax head");
  if (net.n_input() != ds.x.cols()) {
    throw ConfigError("model expects " + std::to_string(net.n_input()) + " inputs but the " + split +
                      " split has " + std::to_string(ds.x.cols()));
  }
  check_label_range(labels, net.n_classes());
  const Prediction pred = predict(net, ds.x);
  const double acc = accuracy(pred.labels, labels);

  std::vector<std::size_t> count(net.n_classes(), 0), correct(net.n_classes(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++count[labels[i]];
    if (pred.labels[i] == labels[i]) ++correct[labels[i]];
  }

  ojson doc;
  doc["model"] = model;
  doc["split"] = split;
  doc["samples"] = labels.size();
  doc["accuracy"] = acc;
  ojson per_class = ojson::array();
  out << "accuracy " << format_double(acc) << " (" << labels.size() << " samples)\n";
  for (std::size_t c = 0; c < count.size(); ++c) {
    const std::string name = c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c);
    ojson entry{{"class", name}, {"count", count[c]}, {"correct", correct[c]}};
    if (count[c] == 0) {
      entry["accuracy"] = nullptr;
      out << "  class " << name << ": no samples\n";
    } else {
      const double a = static_cast<double>(correct[c]) / static_cast<double>(count[c]);
      entry["accuracy"] = a;
      out << "  class " << name << ": " << format_double(a) << " (" << correct[c] << "/" << count[c]
          << ")\n";
    }
    per_class.push_back(std::move(entry));
  }
  doc["per_class"] = per_class;

  Staging stage(cfg.out);
  write_json(stage.file("eval.json"), doc);
  stage.commit();
  return kExitOk;
}

// Export.

struct ExportFlags {
  std::string params;
  std::string out;
  std::size_t layer = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t grid_cols = 0;
  bool raw = false;
  std::string matrix = "w1";
  std::size_t bins = 50;
  double lo = -1.0;
  double hi = 1.0;
  std::size_t steps = 201;
  std::string config;
};

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::kIo, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// The requested weight matrix from either kind of parameter file.
Matrix pick_matrix(const ExportFlags& f) {
  if (f.params.empty()) throw ConfigError("--params is required");
  if (!fs::is_regular_file(f.params)) throw ConfigError("parameter file '" + f.params + "' not found");
  if (f.layer == 0) throw ConfigError("--layer counts from 1");
  const std::vector<std::uint8_t> bytes = read_bytes(f.params);
  std::vector<AeParams> encoders;
  Matrix softmax;
  if (decode_params(bytes).kind == ParamKind::kAutoencoder) {
    encoders.push_back(decode_ae_params(bytes));
  } else {
    StackedNetwork net = decode_network(bytes);
    encoders = std::move(net.encoders);
    softmax = std::move(net.softmax_w);
  }
  if (f.matrix == "softmax") {
    if (softmax.empty()) throw ConfigError("'" + f.params + "' has no softmax layer");
    return softmax;
  }
  if (f.layer > encoders.size()) {
    throw ConfigError("--layer " + std::to_string(f.layer) + " but '" + f.params + "' has " +
                      std::to_string(encoders.size()) + " layer(s)");
  }
  const AeParams& layer = encoders[f.layer - 1];
  return f.matrix == "w2" ? layer.w2 : layer.w1;
}

int cmd_export_rf(const ExportFlags& f, std::ostream& out) {
  if ((f.rows == 0) != (f.cols == 0)) throw ConfigError("--rows and --cols go together");
  const Matrix w = pick_matrix(f);
  ExportSpec spec;
  spec.rf_rows = f.rows;
  spec.rf_cols = f.cols;
  const auto [rows, cols] = tile_shape(spec, w.cols(), 0, 0);
  const GrayImage img = render_receptive_fields(w, rows, cols, grid_cols_for(w.rows(), f.grid_cols), !f.raw);
  write_single(f.out, [&](const fs::path& p) { write_pgm(img, p); });
  out << "wrote " << f.out << " (" << img.width << "x" << img.height << ", " << w.rows() << " tiles of "
      << rows << "x" << cols << ")\n";
  return kExitOk;
}

int cmd_export_hist(const ExportFlags& f, std::ostream& out) {
  if (f.bins == 0) throw ConfigError("--bins must be positive");
  if (!(f.lo < f.hi)) throw ConfigError("--lo must be below --hi");
  const Matrix w = pick_matrix(f);
  const HistogramSpec h = weight_histogram(w, f.bins, f.lo, f.hi);
  write_single(f.out, [&](const fs::path& p) { write_histogram_csv(h, p); });
  out << "wrote " << f.out << " (" << h.total() << " weights, nonneg " << format_double(nonneg_fraction(w))
      << ")\n";
  return kExitOk;
}

int cmd_export_decay(const ExportFlags& f, std::ostream& out) {
  if (!(f.lo < f.hi)) throw ConfigError("--lo must be below --hi");
  if (f.steps < 2) throw ConfigError("--steps must be at least 2");
  std::vector<Hyperparams> settings = default_decay_settings();
  if (!f.config.empty()) {
    const Hyperparams hp = load_config(f.config).pretrain;
    for (Hyperparams& s : settings) s.kappa = hp.kappa;
    settings[0].alpha1 = hp.alpha1;
    settings[1].alpha2 = hp.alpha2;
    settings[2].alpha1 = hp.alpha1;
    settings[2].alpha2 = hp.alpha2;
  }
  write_single(f.out, [&](const fs::path& p) { export_decay_curves(settings, f.lo, f.hi, f.steps, p); });
  out << "wrote " << f.out << " (" << settings.size() << " curves, " << f.steps << " points)\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  cmd->add_option("--config", f.config, "JSON run file")->required(config_required)->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "Override a config field, key=value")->take_all();
  cmd->add_option("--seed", f.seed, "Seed for every phase");
  cmd->add_option("--out", f.out, "Output directory");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonnegativity-constrained sparse autoencoders"};
  app.name("ncsae");
  app.require_subcommand(1);

  CommonFlags pre_flags;
  CLI::App* pretrain = app.add_subcommand("pretrain", "Greedy layerwise autoencoder pretraining");
  add_common(pretrain, pre_flags, true);

  CommonFlags ft_flags;
  std::string pretrained;
  CLI::App* ft = app.add_subcommand("finetune", "Train the softmax head and fine-tune the stack");
  add_common(ft, ft_flags, true);
  ft->add_option("--pretrained", pretrained, "Directory written by pretrain")->required();

  CommonFlags ev_flags;
  std::string model;
  std::string split = "test";
  CLI::App* ev = app.add_subcommand("eval", "Accuracy of a fine-tuned network");
  add_common(ev, ev_flags, true);
  ev->add_option("--model", model, "network.params written by finetune")->required();
  ev->add_option("--split", split, "test or train")->check(CLI::IsMember({"test", "train"}));

  ExportFlags ex;
  CLI::App* exp = app.add_subcommand("export", "Figures from saved parameters");
  exp->require_subcommand(1);
  CLI::App* rf = exp->add_subcommand("rf", "Receptive fields as a PGM grid");
  rf->add_option("--params", ex.params, "Layer or network parameter file")->required();
  rf->add_option("--out", ex.out, "PGM file")->required();
  rf->add_option("--layer", ex.layer, "Encoder layer, from 1");
  rf->add_option("--rows", ex.rows, "Tile height");
  rf->add_option("--cols", ex.cols, "Tile width");
  rf->add_option("--grid-cols", ex.grid_cols, "Tiles per grid row");
  rf->add_flag("--raw", ex.raw, "Do not rescale weights by their largest magnitude");
  CLI::App* hist = exp->add_subcommand("hist", "Weight histogram CSV");
  hist->add_option("--params", ex.params, "Layer or network parameter file")->required();
  hist->add_option("--out", ex.out, "CSV file")->required();
  hist->add_option("--layer", ex.layer, "Encoder layer, from 1");
  hist->add_option("--matrix", ex.matrix, "w1, w2 or softmax")
      ->check(CLI::IsMember({"w1", "w2", "softmax"}));
  hist->add_option("--bins", ex.bins, "Bin count");
  hist->add_option("--lo", ex.lo, "Lower edge");
  hist->add_option("--hi", ex.hi, "Upper edge");
  CLI::App* decay = exp->add_subcommand("decay", "Penalty and gradient curves CSV");
  decay->add_option("--out", ex.out, "CSV file")->required();
  decay->add_option("--lo", ex.lo, "First w");
  decay->add_option("--hi", ex.hi, "Last w");
  decay->add_option("--steps", ex.steps, "Sample count");
  decay->add_option("--config", ex.config, "Take alpha1, alpha2 and kappa from a run file")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pretrain) return cmd_pretrain(pre_flags, out);
    if (*ft) return cmd_finetune(ft_flags, pretrained, out, err);
    if (*ev) return cmd_eval(ev_flags, model, split, out);
    if (*rf) return cmd_export_rf(ex, out);
    if (*hist) return cmd_export_hist(ex, out);
    if (*decay) return cmd_export_decay(ex, out);
  } catch (const ConfigError& e) {
    err << "ncsae: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "ncsae: numeric failure: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "ncsae: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ncsae::cli
