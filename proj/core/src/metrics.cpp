#include "ncsae/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ncsae/error.hpp"

namespace ncsae {

double reconstruction_error(const AeParams& params, const Matrix& x) {
  const AeForward fwd = ae_forward(params, x);
  return mean_squared_reconstruction(fwd.recon, x);
}

double kl_sparsity_measure(const AeParams& params, const Matrix& x, double p) {
  params.check_shapes();
  if (x.cols() != params.n_input()) {
    throw ShapeError("kl_sparsity_measure: input " + x.shape_string() +
                     " does not match encoder " + params.w1.shape_string());
  }
  return kl_term(p, column_means(encode(params.w1, params.bx, x)));
}

double nonneg_fraction(const Matrix& w) {
  if (w.empty()) throw std::invalid_argument("nonneg_fraction: empty matrix");
  const auto d = w.data();
  const auto n = std::count_if(d.begin(), d.end(), [](double v) { return v >= 0.0; });
  return static_cast<double>(n) / static_cast<double>(d.size());
}

std::size_t HistogramSpec::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

HistogramSpec weight_histogram(const Matrix& w, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw std::invalid_argument("weight_histogram: bins must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("weight_histogram: require lo < hi");
  HistogramSpec h;
  h.bin_edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = lo + width * static_cast<double>(i);
  h.bin_edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : w.data()) {
    const double pos = std::floor((v - lo) / width);
    const auto bin = pos <= 0.0 ? std::size_t{0}
                                : std::min(static_cast<std::size_t>(pos), bins - 1);
    ++h.counts[bin];
  }
  return h;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError(DataError::Kind::kIo, "write failed for " + path.string());
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_histogram_csv(const HistogramSpec& h, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_double(h.bin_edges[i]) << ',' << format_double(h.bin_edges[i + 1]) << ','
        << h.counts[i] << '\n';
  }
  finish(out, path);
}

std::uint8_t weight_to_gray(double w) {
  const double c = std::clamp(w, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::min(255.0, std::floor((c + 1.0) * 127.5)));
}

GrayImage render_receptive_fields(const Matrix& w1, std::size_t img_rows, std::size_t img_cols,
                                  std::size_t grid_cols, bool normalize) {
  if (img_rows * img_cols != w1.cols() || img_rows == 0 || img_cols == 0) {
    throw ShapeError("receptive fields: " + std::to_string(img_rows) + "x" +
                     std::to_string(img_cols) + " tiles do not cover " +
                     std::to_string(w1.cols()) + " weights per unit");
  }
  if (grid_cols == 0) throw std::invalid_argument("receptive fields: grid_cols must be >= 1");
  const std::size_t units = w1.rows();
  const std::size_t tiles_x = std::min(grid_cols, std::max<std::size_t>(units, 1));
  const std::size_t tiles_y = units == 0 ? 1 : (units + grid_cols - 1) / grid_cols;

  double scale = 1.0;
  if (normalize) {
    double mx = 0.0;
    for (double v : w1.data()) mx = std::max(mx, std::abs(v));
    if (mx > 0.0) scale = 1.0 / mx;
  }

  GrayImage img;
  img.width = tiles_x * img_cols + (tiles_x - 1);
  img.height = tiles_y * img_rows + (tiles_y - 1);
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t u = 0; u < units; ++u) {
    const std::size_t ox = (u % grid_cols) * (img_cols + 1);
    const std::size_t oy = (u / grid_cols) * (img_rows + 1);
    const auto weights = w1.row(u);
    for (std::size_t r = 0; r < img_rows; ++r)
      for (std::size_t c = 0; c < img_cols; ++c)
        img.pixels[(oy + r) * img.width + ox + c] = weight_to_gray(weights[r * img_cols + c] * scale);
  }
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  using Kind = DataError::Kind;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_number = [&]() -> std::size_t {
    skip_space();
    std::size_t v = 0;
    const auto* begin = reinterpret_cast<const char*>(bytes.data()) + pos;
    const auto* end = reinterpret_cast<const char*>(bytes.data()) + bytes.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) throw DataError(Kind::kFormat, "pgm: malformed header");
    pos += static_cast<std::size_t>(ptr - begin);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw DataError(Kind::kBadMagic, "pgm: expected P5 signature");
  pos = 2;
  GrayImage img;
  img.width = read_number();
  img.height = read_number();
  if (read_number() != 255) throw DataError(Kind::kFormat, "pgm: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw DataError(Kind::kFormat, "pgm: missing separator before raster");
  ++pos;
  const std::size_t need = img.width * img.height;
  if (bytes.size() - pos < need) throw DataError(Kind::kTruncated, "pgm: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  auto out = open_out(path, true);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_pgm(bytes);
}

void export_receptive_fields(const Matrix& w1, std::size_t img_rows, std::size_t img_cols,
                             std::size_t grid_cols, const std::filesystem::path& path,
                             bool normalize) {
  write_pgm(render_receptive_fields(w1, img_rows, img_cols, grid_cols, normalize), path);
}

std::string decay_curves_csv(std::span<const Hyperparams> hp_list, double w_lo, double w_hi,
                             std::size_t steps) {
  if (steps < 2) throw std::invalid_argument("decay curves: steps must be >= 2");
  if (!(w_lo < w_hi)) throw std::invalid_argument("decay curves: require w_lo < w_hi");
  std::string csv = "w";
  for (std::size_t i = 0; i < hp_list.size(); ++i) csv += ",penalty_" + std::to_string(i);
  for (std::size_t i = 0; i < hp_list.size(); ++i) csv += ",penalty_grad_" + std::to_string(i);
  csv += '\n';
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    const double w = s + 1 == steps ? w_hi : w_lo + (w_hi - w_lo) * t;
    csv += format_double(w);
    for (const auto& hp : hp_list) csv += ',' + format_double(penalty(w, hp));
    for (const auto& hp : hp_list) csv += ',' + format_double(penalty_grad(w, hp));
    csv += '\n';
  }
  return csv;
}

void export_decay_curves(std::span<const Hyperparams> hp_list, double w_lo, double w_hi,
                         std::size_t steps, const std::filesystem::path& path) {
  const std::string csv = decay_curves_csv(hp_list, w_lo, w_hi, steps);
  auto out = open_out(path);
  out << csv;
  finish(out, path);
}

std::vector<Hyperparams> default_decay_settings() {
  const Hyperparams base;
  Hyperparams l1 = base;
  l1.alpha2 = 0.0;
  Hyperparams l2 = base;
  l2.alpha1 = 0.0;
  return {l1, l2, base};
}

void write_ae_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "epoch,recon,kl,penalty,total\n";
  for (std::size_t e = 0; e < report.ae_epochs.size(); ++e) {
    const auto& l = report.ae_epochs[e];
    out << e + 1 << ',' << format_double(l.recon) << ',' << format_double(l.kl) << ','
        << format_double(l.penalty) << ',' << format_double(l.total) << '\n';
  }
  finish(out, path);
}

void write_supervised_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "epoch,cross_entropy,penalty,total,accuracy\n";
  for (std::size_t e = 0; e < report.supervised_epochs.size(); ++e) {
    const auto& r = report.supervised_epochs[e];
    out << e + 1 << ',' << format_double(r.loss.cross_entropy) << ','
        << format_double(r.loss.penalty) << ',' << format_double(r.loss.total) << ','
        << format_double(r.accuracy) << '\n';
  }
  finish(out, path);
}

}  // namespace ncsae
