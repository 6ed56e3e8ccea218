#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncsae/matrix.hpp"
#include "ncsae/training.hpp"

namespace ncsae {

/// Samples in rows with every value in [0,1], plus optional class labels.
struct Dataset {
  Matrix x;
  std::optional<Labels> labels;
  std::vector<std::string> class_names;
  /// Height and width of each sample when rows are flattened images.
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;

  std::size_t n_classes() const noexcept { return class_names.size(); }
};

// MNIST IDX files: big-endian header, magic 0x00000803 for images
// (count, rows, cols) and 0x00000801 for labels (count), then raw bytes.

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Pixels are scaled by 1/255. Class names are "0".."max label".
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Parses IDX image/label byte streams already in memory.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes);

struct IdxBytes {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

/// Inverse of parse_idx: pixels are round(x * 255).
IdxBytes serialize_idx(const Dataset& d);
void write_idx(const Dataset& d, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// Keeps rows whose label is in `keep` and relabels them 0..keep.size()-1 in
/// the order of `keep`. Throws if `keep` is empty or contains duplicates, and,
/// unless allow_empty is set, if no row survives.
Dataset subset_by_labels(const Dataset& d, std::span<const std::size_t> keep,
                         bool allow_empty = false);

/// Comma-separated reals, optionally with a header row and a trailing integer
/// label column. Values must already lie in [0,1].
Dataset load_matrix_csv(const std::filesystem::path& path, bool has_labels,
                        bool has_header = false);
Dataset parse_matrix_csv(std::istream& in, bool has_labels, bool has_header = false);

// Bag-of-words corpora.

/// Document-term counts with one label per document.
struct BowCorpus {
  Matrix counts;  // docs x vocabulary
  std::vector<std::string> vocab;
  Labels labels;
  std::vector<std::string> class_names;
};

/// One document per line: "label<TAB>term:count term:count ...". Terms are
/// indexed in order of first appearance. Labels are too, unless
/// `class_names` is given, in which case labels must come from it.
BowCorpus parse_bow(std::istream& in, std::span<const std::string> class_names = {});
BowCorpus load_bow(const std::filesystem::path& path,
                   std::span<const std::string> class_names = {});

/// Equivalent to frequency_filter(load_bow(path), lo, hi) without
/// materializing the unfiltered dense matrix.
BowCorpus load_bow_filtered(const std::filesystem::path& path, std::size_t lo, std::size_t hi,
                            std::span<const std::string> class_names = {});

inline constexpr std::size_t kFrequencyLo = 4;
inline constexpr std::size_t kFrequencyHi = 70;
inline constexpr std::size_t kSelectedFeatures = 200;

/// Drops terms whose total count over the corpus is below lo or above hi.
BowCorpus frequency_filter(const BowCorpus& c, std::size_t lo = kFrequencyLo,
                           std::size_t hi = kFrequencyHi);

/// Information gain in bits of each term's presence indicator about the
/// class: H(C) - H(C | count > 0).
std::vector<double> information_gain(const BowCorpus& c);

/// Keeps the k terms with the highest information gain, ties broken by
/// vocabulary order. Surviving columns keep their original relative order.
BowCorpus info_gain_select(const BowCorpus& c, std::size_t k = kSelectedFeatures);

/// Projects a corpus onto `vocab` (e.g. a test split onto the training
/// selection). Terms missing from `c` become zero columns.
BowCorpus restrict_vocabulary(const BowCorpus& c, std::span<const std::string> vocab);

/// Scales each row by its own maximum; all-zero rows stay zero.
Dataset bow_to_dataset(const BowCorpus& c);

}  // namespace ncsae
