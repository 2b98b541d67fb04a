#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bhwr/vocabulary.hpp"

namespace bhwr {

struct SimilarityPair {
  std::string word1;
  std::string word2;
  double gold = 0.0;
};

// A human-annotated word-similarity benchmark, pairs in file order.
struct SimilarityDataset {
  std::string name;
  std::string path;
  std::vector<SimilarityPair> pairs;

  std::size_t size() const { return pairs.size(); }
};

enum class FieldFormat { tab, comma, whitespace };

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line,
                                             FieldFormat format) {
  std::vector<std::string> fields;
  if (format == FieldFormat::whitespace) {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) fields.push_back(tok);
    return fields;
  }
  const char delim = format == FieldFormat::tab ? '\t' : ',';
  std::string current;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

inline bool parse_score(const std::string& field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto r = std::from_chars(begin, end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

// Delimiter sniffing for benchmark files: a tab anywhere wins, then a comma,
// otherwise runs of whitespace.
inline FieldFormat detect_field_format(const std::string& line) {
  if (line.find('\t') != std::string::npos) return FieldFormat::tab;
  if (line.find(',') != std::string::npos) return FieldFormat::comma;
  return FieldFormat::whitespace;
}

// Reads (word1, word2, score) triples, one per line. Extra trailing fields
// are ignored so files that append per-rater columns load as published.
// Blank lines are skipped; the first non-blank line is dropped when
// skip_header is set. Malformed lines are reported with their line number.
inline SimilarityDataset load_similarity_dataset(const std::string& path,
                                                 FieldFormat format,
                                                 bool skip_header = false,
                                                 std::string name = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  SimilarityDataset dataset;
  dataset.path = path;
  dataset.name =
      name.empty() ? std::filesystem::path(path).stem().string() : std::move(name);

  std::string line;
  std::size_t line_no = 0;
  bool header_pending = skip_header;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(std::move(line));
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const std::vector<std::string> fields = detail::split_fields(line, format);
    if (fields.size() < 3) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected word1, word2, score");
    }
    double score = 0.0;
    if (!detail::parse_score(fields[2], score)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unparsable score '" + fields[2] + "'");
    }
    dataset.pairs.push_back({fields[0], fields[1], score});
  }
  if (dataset.pairs.empty()) {
    throw std::runtime_error("dataset has no pairs: " + path);
  }
  return dataset;
}

// Convenience loader: sniffs the delimiter from the first non-blank line and
// treats that line as a header when its third field is not a number.
inline SimilarityDataset load_similarity_dataset_auto(const std::string& path,
                                                      std::string name = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  std::string first;
  while (std::getline(in, line)) {
    line = detail::strip_cr(std::move(line));
    if (line.find_first_not_of(" \t") != std::string::npos) {
      first = line;
      break;
    }
  }
  if (first.empty()) throw std::runtime_error("dataset has no pairs: " + path);
  const FieldFormat format = detect_field_format(first);
  const std::vector<std::string> fields = detail::split_fields(first, format);
  double ignored = 0.0;
  const bool header =
      fields.size() < 3 || !detail::parse_score(fields[2], ignored);
  return load_similarity_dataset(path, format, header, std::move(name));
}

// Ranks with ties averaged: each tied run receives the mean of the 1-based
// positions it spans.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t s = 0;
  while (s < n) {
    std::size_t e = s;
    while (e + 1 < n && values[order[e + 1]] == values[order[s]]) ++e;
    const double mean_rank = 0.5 * static_cast<double>(s + e) + 1.0;
    for (std::size_t t = s; t <= e; ++t) ranks[order[t]] = mean_rank;
    s = e + 1;
  }
  return ranks;
}

// Spearman rank correlation as a percentage: Pearson correlation of the
// tie-averaged ranks, times 100.
inline double spearman(std::span<const double> gold,
                       std::span<const double> predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("spearman: length mismatch");
  }
  if (gold.size() < 2) {
    throw std::invalid_argument("spearman: need at least 2 observations");
  }
  const std::vector<double> rg = average_ranks(gold);
  const std::vector<double> rp = average_ranks(predicted);
  const double n = static_cast<double>(gold.size());
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  double cov = 0.0, vg = 0.0, vp = 0.0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const double dg = rg[t] - mg;
    const double dp = rp[t] - mp;
    cov += dg * dp;
    vg += dg * dg;
    vp += dp * dp;
  }
  if (vg == 0.0 || vp == 0.0) {
    throw std::invalid_argument("spearman: zero rank variance");
  }
  return std::clamp(100.0 * cov / std::sqrt(vg * vp), -100.0, 100.0);
}

enum class RareMode { any_member, both_members };

// One report cell: either a correlation or a note saying why there is none.
struct EvalCell {
  std::optional<double> rho_x100;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // OOV pairs plus pairs outside the rare slice
  std::string note;
};

inline std::string ascii_lower(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

// Case-folded view of the vocabulary. When two surface forms collide after
// folding, the more frequent one wins; ties go to the smaller index.
class CaseFoldedLookup {
 public:
  explicit CaseFoldedLookup(const Vocabulary& vocab) : vocab_(&vocab) {
    map_.reserve(vocab.size());
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
      const std::string key = ascii_lower(vocab.words[i]);
      const auto [it, inserted] = map_.try_emplace(key, i);
      if (!inserted && vocab.counts[i] > vocab.counts[it->second]) {
        it->second = i;
      }
    }
  }

  std::optional<std::uint32_t> find(const std::string& word) const {
    const auto it = map_.find(ascii_lower(word));
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

 private:
  const Vocabulary* vocab_;
  std::unordered_map<std::string, std::uint32_t> map_;
};

// Scores every in-vocabulary pair of the dataset (case-insensitively
// matched) and correlates against the gold scores. With rare_max set, only
// pairs whose members satisfy the rare-count test survive; everything else,
// OOV included, lands in `skipped`, so evaluated + skipped = dataset size.
template <typename Scorer>
EvalCell evaluate(Scorer&& scorer, const SimilarityDataset& dataset,
                  const Vocabulary& vocab,
                  std::optional<std::uint64_t> rare_max = std::nullopt,
                  RareMode rare_mode = RareMode::any_member) {
  const CaseFoldedLookup lookup(vocab);
  EvalCell cell;
  std::vector<double> gold;
  std::vector<double> predicted;
  for (const SimilarityPair& pair : dataset.pairs) {
    const auto i = lookup.find(pair.word1);
    const auto j = lookup.find(pair.word2);
    if (!i || !j) {
      ++cell.skipped;
      continue;
    }
    if (rare_max) {
      const bool rare1 = vocab.counts[*i] <= *rare_max;
      const bool rare2 = vocab.counts[*j] <= *rare_max;
      const bool keep =
          rare_mode == RareMode::any_member ? (rare1 || rare2) : (rare1 && rare2);
      if (!keep) {
        ++cell.skipped;
        continue;
      }
    }
    gold.push_back(pair.gold);
    predicted.push_back(scorer(*i, *j));
    ++cell.evaluated;
  }
  if (cell.evaluated < 2) {
    cell.note = "insufficient data (" + std::to_string(cell.evaluated) +
                (cell.evaluated == 1 ? " pair)" : " pairs)");
    return cell;
  }
  try {
    cell.rho_x100 = spearman(gold, predicted);
  } catch (const std::invalid_argument& e) {
    cell.note = e.what();
  }
  return cell;
}

struct EvalRow {
  std::string dataset;
  std::string slice;  // "all" or "rare<=N"
  EvalCell cell;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

// Unweighted mean over the slice's cells that carry a value.
inline std::optional<double> slice_average(const EvalReport& report,
                                           const std::string& slice) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const EvalRow& row : report.rows) {
    if (row.slice == slice && row.cell.rho_x100) {
      sum += *row.cell.rho_x100;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

namespace detail {

inline std::vector<std::string> slice_order(const EvalReport& report) {
  std::vector<std::string> slices;
  for (const EvalRow& row : report.rows) {
    if (std::find(slices.begin(), slices.end(), row.slice) == slices.end()) {
      slices.push_back(row.slice);
    }
  }
  return slices;
}

struct RenderRow {
  std::string dataset;
  std::string slice;
  std::string rho;
  std::string evaluated;
  std::string skipped;
};

inline std::vector<RenderRow> render_rows(const EvalReport& report,
                                          int precision) {
  std::vector<RenderRow> out;
  const auto fmt = [precision](double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << x;
    return os.str();
  };
  for (const std::string& slice : slice_order(report)) {
    std::size_t evaluated = 0, skipped = 0;
    for (const EvalRow& row : report.rows) {
      if (row.slice != slice) continue;
      evaluated += row.cell.evaluated;
      skipped += row.cell.skipped;
      out.push_back({row.dataset, row.slice,
                     row.cell.rho_x100 ? fmt(*row.cell.rho_x100) : row.cell.note,
                     std::to_string(row.cell.evaluated),
                     std::to_string(row.cell.skipped)});
    }
    const auto avg = slice_average(report, slice);
    out.push_back({"AVG", slice, avg ? fmt(*avg) : std::string("-"),
                   std::to_string(evaluated), std::to_string(skipped)});
  }
  return out;
}

}  // namespace detail

// Aligned plain-text table, one row per (dataset, slice) plus an AVG row
// per slice.
inline std::string render_table(const EvalReport& report) {
  std::vector<detail::RenderRow> rows = detail::render_rows(report, 2);
  rows.insert(rows.begin(), {"dataset", "slice", "rho_x100", "evaluated",
                             "skipped"});
  std::size_t w[5] = {0, 0, 0, 0, 0};
  for (const auto& r : rows) {
    w[0] = std::max(w[0], r.dataset.size());
    w[1] = std::max(w[1], r.slice.size());
    w[2] = std::max(w[2], r.rho.size());
    w[3] = std::max(w[3], r.evaluated.size());
    w[4] = std::max(w[4], r.skipped.size());
  }
  std::ostringstream os;
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w[0]) + 2) << r.dataset
       << std::setw(static_cast<int>(w[1]) + 2) << r.slice << std::right
       << std::setw(static_cast<int>(w[2])) << r.rho << "  "
       << std::setw(static_cast<int>(w[3])) << r.evaluated << "  "
       << std::setw(static_cast<int>(w[4])) << r.skipped << '\n';
  }
  return os.str();
}

// Machine-readable report: dataset,slice,rho_x100,evaluated,skipped. Cells
// without a correlation leave the rho field empty.
inline std::string render_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "dataset,slice,rho_x100,evaluated,skipped\n";
  const auto fmt = [](double x) {
    std::ostringstream v;
    v << std::setprecision(9) << x;
    return v.str();
  };
  for (const std::string& slice : detail::slice_order(report)) {
    std::size_t evaluated = 0, skipped = 0;
    for (const EvalRow& row : report.rows) {
      if (row.slice != slice) continue;
      evaluated += row.cell.evaluated;
      skipped += row.cell.skipped;
      os << row.dataset << ',' << row.slice << ','
         << (row.cell.rho_x100 ? fmt(*row.cell.rho_x100) : std::string()) << ','
         << row.cell.evaluated << ',' << row.cell.skipped << '\n';
    }
    const auto avg = slice_average(report, slice);
    os << "AVG," << slice << ',' << (avg ? fmt(*avg) : std::string()) << ','
       << evaluated << ',' << skipped << '\n';
  }
  return os.str();
}

}  // namespace bhwr
