#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ncsae/autoencoder.hpp"
#include "ncsae/matrix.hpp"
#include "ncsae/training.hpp"

namespace ncsae {

/// Mean squared reconstruction error; identical to ae_loss(...).recon.
double reconstruction_error(const AeParams& params, const Matrix& x);

/// Unweighted KL divergence between p and the mean hidden activations over x.
double kl_sparsity_measure(const AeParams& params, const Matrix& x, double p);

/// Fraction of entries >= 0. Throws std::invalid_argument on an empty matrix.
double nonneg_fraction(const Matrix& w);

struct HistogramSpec {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

/// `bins` equal-width bins over [lo, hi]. Values outside the range land in
/// the first or last bin.
HistogramSpec weight_histogram(const Matrix& w, std::size_t bins, double lo, double hi);

/// CSV "bin_lo,bin_hi,count".
void write_histogram_csv(const HistogramSpec& h, const std::filesystem::path& path);

// Receptive-field images.

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Gray level of a weight: -1 -> 0, 0 -> 127, +1 -> 255, clipped outside [-1,1].
std::uint8_t weight_to_gray(double w);

/// One tile per row of w1, each reshaped to img_rows x img_cols and laid out
/// grid_cols tiles per row with 1-pixel black separators. With `normalize`,
/// weights are first divided by the largest |w| (unless that is zero).
GrayImage render_receptive_fields(const Matrix& w1, std::size_t img_rows, std::size_t img_cols,
                                  std::size_t grid_cols, bool normalize = false);

/// Binary PGM: "P5\n<w> <h>\n255\n" followed by w*h bytes.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

void export_receptive_fields(const Matrix& w1, std::size_t img_rows, std::size_t img_cols,
                             std::size_t grid_cols, const std::filesystem::path& path,
                             bool normalize = false);

// Penalty curves.

/// CSV with header "w,penalty_0..penalty_{k-1},penalty_grad_0..", `steps`
/// rows sampled uniformly over [w_lo, w_hi] inclusive.
std::string decay_curves_csv(std::span<const Hyperparams> hp_list, double w_lo, double w_hi,
                             std::size_t steps);
void export_decay_curves(std::span<const Hyperparams> hp_list, double w_lo, double w_hi,
                         std::size_t steps, const std::filesystem::path& path);

/// L1-only, L2-only and combined penalty settings at the default magnitudes.
std::vector<Hyperparams> default_decay_settings();

// Training history.

/// "epoch,recon,kl,penalty,total"
void write_ae_report_csv(const TrainReport& report, const std::filesystem::path& path);
/// "epoch,cross_entropy,penalty,total,accuracy"
void write_supervised_report_csv(const TrainReport& report, const std::filesystem::path& path);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

}  // namespace ncsae
