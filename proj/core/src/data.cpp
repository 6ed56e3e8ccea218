#include "ncsae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ncsae/error.hpp"

namespace ncsae {

namespace {

using Kind = DataError::Kind;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Kind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void require_size(std::span<const std::uint8_t> bytes, std::size_t need, const char* what) {
  if (bytes.size() < need) {
    throw DataError(Kind::kTruncated, std::string(what) + ": truncated, have " +
                                          std::to_string(bytes.size()) + " bytes, need " +
                                          std::to_string(need));
  }
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(Kind::kIo, "write failed for " + path.string());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<std::size_t> parse_count(std::string_view s) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
  return names;
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes) {
  require_size(image_bytes, 16, "IDX images header");
  require_size(label_bytes, 8, "IDX labels header");
  const std::uint32_t img_magic = read_be32(image_bytes, 0);
  if (img_magic != kIdxImageMagic) {
    throw DataError(Kind::kBadMagic, "IDX images: bad magic " + hex32(img_magic) +
                                         ", expected " + hex32(kIdxImageMagic));
  }
  const std::uint32_t lbl_magic = read_be32(label_bytes, 0);
  if (lbl_magic != kIdxLabelMagic) {
    throw DataError(Kind::kBadMagic, "IDX labels: bad magic " + hex32(lbl_magic) +
                                         ", expected " + hex32(kIdxLabelMagic));
  }
  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (count != label_count) {
    throw DataError(Kind::kCountMismatch, "IDX: " + std::to_string(count) + " images but " +
                                              std::to_string(label_count) + " labels");
  }
  const std::size_t features = rows * cols;
  require_size(image_bytes, 16 + count * features, "IDX images payload");
  require_size(label_bytes, 8 + count, "IDX labels payload");

  Dataset d;
  d.image_rows = rows;
  d.image_cols = cols;
  d.x = Matrix(count, features);
  auto px = d.x.data();
  for (std::size_t i = 0; i < count * features; ++i) px[i] = image_bytes[16 + i] / 255.0;
  Labels labels(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = label_bytes[8 + i];
    max_label = std::max(max_label, labels[i]);
  }
  d.class_names = default_class_names(count ? max_label + 1 : 0);
  d.labels = std::move(labels);
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

IdxBytes serialize_idx(const Dataset& d) {
  if (!d.labels) throw DataError(Kind::kInvalidArgument, "serialize_idx: dataset has no labels");
  if (d.image_rows * d.image_cols != d.x.cols()) {
    throw DataError(Kind::kInvalidArgument, "serialize_idx: image shape " +
                                                std::to_string(d.image_rows) + "x" +
                                                std::to_string(d.image_cols) +
                                                " does not cover " + d.x.shape_string());
  }
  IdxBytes out;
  const auto count = static_cast<std::uint32_t>(d.x.rows());
  put_be32(out.images, kIdxImageMagic);
  put_be32(out.images, count);
  put_be32(out.images, static_cast<std::uint32_t>(d.image_rows));
  put_be32(out.images, static_cast<std::uint32_t>(d.image_cols));
  out.images.reserve(16 + d.x.size());
  for (double v : d.x.data())
    out.images.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  put_be32(out.labels, kIdxLabelMagic);
  put_be32(out.labels, count);
  for (auto l : *d.labels) out.labels.push_back(static_cast<std::uint8_t>(l));
  return out;
}

void write_idx(const Dataset& d, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  const auto bytes = serialize_idx(d);
  write_file(images_path, bytes.images);
  write_file(labels_path, bytes.labels);
}

Dataset subset_by_labels(const Dataset& d, std::span<const std::size_t> keep, bool allow_empty) {
  if (!d.labels) throw DataError(Kind::kInvalidArgument, "subset_by_labels: dataset has no labels");
  if (keep.empty()) throw DataError(Kind::kInvalidArgument, "subset_by_labels: empty keep set");
  std::map<std::size_t, std::size_t> remap;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!remap.emplace(keep[i], i).second) {
      throw DataError(Kind::kInvalidArgument,
                      "subset_by_labels: duplicate label " + std::to_string(keep[i]));
    }
  }
  std::vector<std::size_t> rows;
  Labels labels;
  for (std::size_t i = 0; i < d.labels->size(); ++i) {
    const auto it = remap.find((*d.labels)[i]);
    if (it == remap.end()) continue;
    rows.push_back(i);
    labels.push_back(it->second);
  }
  if (rows.empty() && !allow_empty) {
    throw DataError(Kind::kEmpty, "subset_by_labels: no rows carry any of the requested labels");
  }
  Dataset out;
  out.x = select_rows(d.x, rows);
  out.labels = std::move(labels);
  out.image_rows = d.image_rows;
  out.image_cols = d.image_cols;
  for (auto k : keep)
    out.class_names.push_back(k < d.class_names.size() ? d.class_names[k] : std::to_string(k));
  return out;
}

Dataset parse_matrix_csv(std::istream& in, bool has_labels, bool has_header) {
  std::string line;
  std::size_t line_no = 0;
  if (has_header) {
    std::getline(in, line);
    ++line_no;
  }
  std::vector<double> values;
  Labels labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    const std::size_t features = cells.size() - (has_labels ? 1 : 0);
    if (features == 0 || cells.size() < (has_labels ? 2u : 1u)) {
      throw DataError(Kind::kRagged, "csv line " + std::to_string(line_no) + ": no feature columns");
    }
    if (rows == 0) {
      width = features;
    } else if (features != width) {
      throw DataError(Kind::kRagged, "csv line " + std::to_string(line_no) + ": " +
                                         std::to_string(features) + " columns, expected " +
                                         std::to_string(width));
    }
    for (std::size_t j = 0; j < features; ++j) {
      const auto v = parse_double(cells[j]);
      if (!v) {
        throw DataError(Kind::kNonNumeric, "csv row " + std::to_string(rows) + " col " +
                                               std::to_string(j) + ": '" + cells[j] +
                                               "' is not a number");
      }
      if (!(*v >= 0.0 && *v <= 1.0)) {
        throw DataError(Kind::kOutOfRange, "csv row " + std::to_string(rows) + " col " +
                                               std::to_string(j) + ": value " + cells[j] +
                                               " outside [0,1]");
      }
      values.push_back(*v);
    }
    if (has_labels) {
      const auto l = parse_count(cells.back());
      if (!l) {
        throw DataError(Kind::kNonNumeric, "csv row " + std::to_string(rows) + ": label '" +
                                               cells.back() + "' is not a non-negative integer");
      }
      labels.push_back(*l);
      max_label = std::max(max_label, *l);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(Kind::kEmpty, "csv: no data rows");
  Dataset d;
  d.x = Matrix(rows, width, std::move(values));
  if (has_labels) {
    d.labels = std::move(labels);
    d.class_names = default_class_names(max_label + 1);
  }
  return d;
}

Dataset load_matrix_csv(const std::filesystem::path& path, bool has_labels, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError(Kind::kIo, "cannot open " + path.string());
  return parse_matrix_csv(in, has_labels, has_header);
}

namespace {

struct SparseDoc {
  std::size_t label;
  std::vector<std::pair<std::size_t, double>> terms;
};

struct SparseCorpus {
  std::vector<SparseDoc> docs;
  std::vector<std::string> vocab;
  std::vector<std::string> class_names;
};

SparseCorpus parse_sparse_bow(std::istream& in, std::span<const std::string> class_names) {
  SparseCorpus c;
  std::unordered_map<std::string, std::size_t> term_index;
  std::unordered_map<std::string, std::size_t> class_index;
  const bool fixed_classes = !class_names.empty();
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    class_index.emplace(class_names[i], i);
    c.class_names.push_back(class_names[i]);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(Kind::kFormat,
                      "bow line " + std::to_string(line_no) + ": missing tab after label");
    }
    const std::string label = trim(std::string_view(line).substr(0, tab));
    if (label.empty()) {
      throw DataError(Kind::kFormat, "bow line " + std::to_string(line_no) + ": empty label");
    }
    SparseDoc doc;
    if (auto it = class_index.find(label); it != class_index.end()) {
      doc.label = it->second;
    } else if (fixed_classes) {
      throw DataError(Kind::kFormat,
                      "bow line " + std::to_string(line_no) + ": unknown class '" + label + "'");
    } else {
      doc.label = c.class_names.size();
      class_index.emplace(label, doc.label);
      c.class_names.push_back(label);
    }
    std::map<std::size_t, double> counts;
    std::stringstream ss(line.substr(tab + 1));
    std::string token;
    while (ss >> token) {
      const auto colon = token.rfind(':');
      if (colon == std::string::npos || colon == 0) {
        throw DataError(Kind::kFormat, "bow line " + std::to_string(line_no) + ": token '" +
                                           token + "' is not term:count");
      }
      const auto n = parse_count(std::string_view(token).substr(colon + 1));
      if (!n) {
        throw DataError(Kind::kNonNumeric, "bow line " + std::to_string(line_no) +
                                               ": bad count in '" + token + "'");
      }
      const std::string term = token.substr(0, colon);
      auto [it, fresh] = term_index.emplace(term, c.vocab.size());
      if (fresh) c.vocab.push_back(term);
      counts[it->second] += static_cast<double>(*n);
    }
    doc.terms.assign(counts.begin(), counts.end());
    c.docs.push_back(std::move(doc));
  }
  if (c.docs.empty()) throw DataError(Kind::kEmpty, "bow: no documents");
  return c;
}

BowCorpus densify(const SparseCorpus& s, const std::vector<std::size_t>& columns) {
  std::vector<std::size_t> target(s.vocab.size(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) target[columns[j]] = j;
  BowCorpus c;
  c.counts = Matrix(s.docs.size(), columns.size());
  for (std::size_t i = 0; i < s.docs.size(); ++i) {
    for (const auto& [term, n] : s.docs[i].terms)
      if (target[term] < columns.size()) c.counts(i, target[term]) = n;
    c.labels.push_back(s.docs[i].label);
  }
  for (auto j : columns) c.vocab.push_back(s.vocab[j]);
  c.class_names = s.class_names;
  return c;
}

std::vector<std::size_t> columns_within(std::span<const double> totals, std::size_t lo,
                                        std::size_t hi) {
  if (lo > hi) {
    throw DataError(Kind::kInvalidArgument, "frequency_filter: lo " + std::to_string(lo) +
                                                " exceeds hi " + std::to_string(hi));
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < totals.size(); ++j) {
    if (totals[j] >= static_cast<double>(lo) && totals[j] <= static_cast<double>(hi))
      keep.push_back(j);
  }
  if (keep.empty()) {
    throw DataError(Kind::kEmpty, "frequency_filter: every term falls outside [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return keep;
}

BowCorpus select_columns(const BowCorpus& c, std::span<const std::size_t> columns) {
  BowCorpus out;
  out.counts = Matrix(c.counts.rows(), columns.size());
  for (std::size_t i = 0; i < c.counts.rows(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j) out.counts(i, j) = c.counts(i, columns[j]);
  for (auto j : columns) out.vocab.push_back(c.vocab[j]);
  out.labels = c.labels;
  out.class_names = c.class_names;
  return out;
}

// Counts are summed in sorted order so that relabelling the classes gives a
// bitwise-identical entropy, which keeps gain ties exact.
double entropy_bits(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  std::vector<double> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  double h = 0.0;
  for (double n : sorted) {
    if (n <= 0.0) continue;
    const double q = n / total;
    h -= q * std::log2(q);
  }
  return h;
}

}  // namespace

BowCorpus parse_bow(std::istream& in, std::span<const std::string> class_names) {
  const SparseCorpus s = parse_sparse_bow(in, class_names);
  std::vector<std::size_t> all(s.vocab.size());
  std::iota(all.begin(), all.end(), 0);
  return densify(s, all);
}

BowCorpus load_bow(const std::filesystem::path& path, std::span<const std::string> class_names) {
  std::ifstream in(path);
  if (!in) throw DataError(Kind::kIo, "cannot open " + path.string());
  return parse_bow(in, class_names);
}

BowCorpus load_bow_filtered(const std::filesystem::path& path, std::size_t lo, std::size_t hi,
                            std::span<const std::string> class_names) {
  std::ifstream in(path);
  if (!in) throw DataError(Kind::kIo, "cannot open " + path.string());
  const SparseCorpus s = parse_sparse_bow(in, class_names);
  std::vector<double> totals(s.vocab.size(), 0.0);
  for (const auto& doc : s.docs)
    for (const auto& [term, n] : doc.terms) totals[term] += n;
  return densify(s, columns_within(totals, lo, hi));
}

BowCorpus frequency_filter(const BowCorpus& c, std::size_t lo, std::size_t hi) {
  return select_columns(c, columns_within(column_sums(c.counts), lo, hi));
}

std::vector<double> information_gain(const BowCorpus& c) {
  const std::size_t docs = c.counts.rows();
  if (c.labels.size() != docs) {
    throw DataError(Kind::kInvalidArgument, "information_gain: label count does not match documents");
  }
  const std::size_t classes =
      std::max<std::size_t>(c.class_names.size(),
                            c.labels.empty() ? 0 : *std::max_element(c.labels.begin(), c.labels.end()) + 1);
  std::vector<double> class_counts(classes, 0.0);
  for (auto l : c.labels) class_counts[l] += 1.0;
  const double n = static_cast<double>(docs);
  const double h_class = entropy_bits(class_counts, n);

  std::vector<double> gains(c.counts.cols(), 0.0);
  std::vector<double> present(classes);
  std::vector<double> absent(classes);
  for (std::size_t t = 0; t < c.counts.cols(); ++t) {
    std::fill(present.begin(), present.end(), 0.0);
    double n_present = 0.0;
    for (std::size_t d = 0; d < docs; ++d) {
      if (c.counts(d, t) > 0.0) {
        present[c.labels[d]] += 1.0;
        n_present += 1.0;
      }
    }
    for (std::size_t k = 0; k < classes; ++k) absent[k] = class_counts[k] - present[k];
    const double n_absent = n - n_present;
    const double h_cond = (n_present / n) * entropy_bits(present, n_present) +
                          (n_absent / n) * entropy_bits(absent, n_absent);
    gains[t] = h_class - h_cond;
  }
  return gains;
}

BowCorpus info_gain_select(const BowCorpus& c, std::size_t k) {
  if (k == 0) throw DataError(Kind::kInvalidArgument, "info_gain_select: k must be positive");
  if (k > c.vocab.size()) {
    throw DataError(Kind::kInvalidArgument, "info_gain_select: k = " + std::to_string(k) +
                                                " exceeds vocabulary size " +
                                                std::to_string(c.vocab.size()));
  }
  const auto gains = information_gain(c);
  std::vector<std::size_t> order(gains.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return select_columns(c, order);
}

BowCorpus restrict_vocabulary(const BowCorpus& c, std::span<const std::string> vocab) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < c.vocab.size(); ++j) index.emplace(c.vocab[j], j);
  BowCorpus out;
  out.counts = Matrix(c.counts.rows(), vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    const auto it = index.find(vocab[j]);
    if (it == index.end()) continue;
    for (std::size_t i = 0; i < c.counts.rows(); ++i) out.counts(i, j) = c.counts(i, it->second);
  }
  out.vocab.assign(vocab.begin(), vocab.end());
  out.labels = c.labels;
  out.class_names = c.class_names;
  return out;
}

Dataset bow_to_dataset(const BowCorpus& c) {
  Dataset d;
  d.x = c.counts;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    auto r = d.x.row(i);
    const double mx = r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
    if (mx <= 0.0) continue;
    for (double& v : r) v /= mx;
  }
  d.labels = c.labels;
  d.class_names = c.class_names;
  return d;
}

}  // namespace ncsae
