#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bhwr/binary.hpp"
#include "bhwr/gaussian.hpp"
#include "bhwr/model.hpp"
#include "bhwr/pairs.hpp"
#include "bhwr/sgns.hpp"
#include "bhwr/taxonomy.hpp"
#include "bhwr/vocabulary.hpp"

namespace bhwr {

inline constexpr char kModelMagic[] = "BHWR1";
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr char kSgModelMagic[] = "BHWRSG1";
inline constexpr std::uint32_t kSgModelVersion = 1;

enum class ModelFileKind { posterior, point, pair_cache, unknown };

// Distinguishes the three on-disk formats by magic. All three share the
// "BHWR" prefix and differ at the fifth byte, so an 8-byte prefix decides.
inline ModelFileKind detect_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  char head[8] = {};
  in.read(head, sizeof(head));
  const std::string_view data(head, static_cast<std::size_t>(in.gcount()));
  const auto starts_with = [&](std::string_view m) {
    return data.size() >= m.size() && data.substr(0, m.size()) == m;
  };
  if (starts_with(kSgModelMagic)) return ModelFileKind::point;
  if (starts_with(kPairCacheMagic)) return ModelFileKind::pair_cache;
  if (starts_with(kModelMagic)) return ModelFileKind::posterior;
  return ModelFileKind::unknown;
}

namespace detail {

inline void write_vector(BinaryWriter& w, const Eigen::VectorXd& x) {
  for (Eigen::Index d = 0; d < x.size(); ++d) w.f64(x(d));
}

inline Eigen::VectorXd read_vector(BinaryReader& r, int k) {
  Eigen::VectorXd x(k);
  for (int d = 0; d < k; ++d) x(d) = r.f64();
  return x;
}

inline void write_matrix_row_major(BinaryWriter& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index row = 0; row < m.rows(); ++row) {
    for (Eigen::Index col = 0; col < m.cols(); ++col) w.f64(m(row, col));
  }
}

inline Eigen::MatrixXd read_matrix_row_major(BinaryReader& r, int rows,
                                             int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int row = 0; row < rows; ++row) {
    for (int col = 0; col < cols; ++col) m(row, col) = r.f64();
  }
  return m;
}

inline void check_sizes(std::size_t state, std::size_t vocab,
                        std::size_t taxonomy) {
  if (state != vocab || state != taxonomy) {
    throw std::invalid_argument(
        "model file: state, vocabulary, and taxonomy sizes disagree");
  }
}

}  // namespace detail

// Serialized posterior: magic, version, k, vocabulary, taxonomy edges,
// hyperparameters, leaf factors (mean + full covariance, row-major), node
// factors (mean + scalar precision), then training metadata. Everything is
// little-endian 64-bit IEEE; covariance bytes round-trip untouched, so
// save -> load -> save is byte-identical.
inline void save_model(const ModelState& state, const Vocabulary& vocab,
                       const Taxonomy& taxonomy, const std::string& path) {
  detail::check_sizes(state.size(), vocab.size(), taxonomy.size());
  BinaryWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(state.k));
  encode_vocabulary(w, vocab);

  w.u64(taxonomy.edge_count());
  for (std::uint32_t child = 0; child < taxonomy.size(); ++child) {
    for (std::uint32_t parent : taxonomy.parents[child]) {
      w.u32(child);
      w.u32(parent);
    }
  }

  w.f64(state.hyper.tau_u);
  w.f64(state.hyper.tau_v);
  w.f64(state.hyper.tau_hu);
  w.f64(state.hyper.tau_hv);

  for (const GaussianFactor& f : state.u) {
    detail::write_vector(w, f.mean());
    detail::write_matrix_row_major(w, f.covariance_dense());
  }
  for (const GaussianFactor& f : state.v) {
    detail::write_vector(w, f.mean());
    detail::write_matrix_row_major(w, f.covariance_dense());
  }
  for (const GaussianFactor& f : state.hu) {
    detail::write_vector(w, f.mean());
    w.f64(f.isotropic_precision());
  }
  for (const GaussianFactor& f : state.hv) {
    detail::write_vector(w, f.mean());
    w.f64(f.isotropic_precision());
  }

  w.u64(state.seed);
  w.u32(static_cast<std::uint32_t>(state.sweeps_run));
  w.f64(state.final_elbo);
  atomic_write_file(path, w.buffer());
}

struct LoadedModel {
  ModelState state;
  Vocabulary vocab;
  Taxonomy taxonomy;
};

inline LoadedModel load_model(const std::string& path) {
  const std::string data = read_file(path);
  try {
    BinaryReader r(data);
    if (r.bytes(sizeof(kModelMagic) - 1) != kModelMagic) {
      throw std::runtime_error("bad magic; not a posterior model file");
    }
    const std::uint32_t version = r.u32();
    if (version != kModelVersion) {
      throw std::runtime_error("unsupported model file version " +
                               std::to_string(version));
    }
    const std::uint32_t k = r.u32();
    if (k == 0 || k > (1u << 20)) {
      throw std::runtime_error("implausible dimension " + std::to_string(k));
    }

    LoadedModel out;
    out.vocab = decode_vocabulary(r);
    const std::size_t n = out.vocab.size();

    out.taxonomy.parents.assign(n, {});
    out.taxonomy.children.assign(n, {});
    const std::uint64_t n_edges = r.u64();
    for (std::uint64_t e = 0; e < n_edges; ++e) {
      const std::uint32_t child = r.u32();
      const std::uint32_t parent = r.u32();
      if (child >= n || parent >= n) {
        throw std::runtime_error("taxonomy edge index out of range");
      }
      out.taxonomy.parents[child].push_back(parent);
      out.taxonomy.children[parent].push_back(child);
    }
    for (auto& v : out.taxonomy.parents) std::sort(v.begin(), v.end());
    for (auto& v : out.taxonomy.children) std::sort(v.begin(), v.end());

    ModelState& state = out.state;
    state.k = static_cast<int>(k);
    state.hyper.tau_u = r.f64();
    state.hyper.tau_v = r.f64();
    state.hyper.tau_hu = r.f64();
    state.hyper.tau_hv = r.f64();
    state.hyper.validate();

    const auto read_leaf_family = [&](std::vector<GaussianFactor>& family,
                                      const char* name) {
      family.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd mean = detail::read_vector(r, static_cast<int>(k));
        Eigen::MatrixXd cov =
            detail::read_matrix_row_major(r, static_cast<int>(k),
                                          static_cast<int>(k));
        try {
          family.push_back(GaussianFactor::full_from_moments(std::move(mean),
                                                             std::move(cov)));
        } catch (const std::exception& e) {
          throw std::runtime_error(std::string(name) + "[" + std::to_string(i) +
                                   "]: " + e.what());
        }
      }
    };
    const auto read_node_family = [&](std::vector<GaussianFactor>& family,
                                      const char* name) {
      family.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd mean = detail::read_vector(r, static_cast<int>(k));
        const double precision = r.f64();
        if (!(precision > 0.0)) {
          throw std::runtime_error(std::string(name) + "[" + std::to_string(i) +
                                   "]: non-positive precision");
        }
        family.push_back(GaussianFactor::isotropic(std::move(mean), precision));
      }
    };
    read_leaf_family(state.u, "U");
    read_leaf_family(state.v, "V");
    read_node_family(state.hu, "H^u");
    read_node_family(state.hv, "H^v");

    state.seed = r.u64();
    state.sweeps_run = static_cast<int>(r.u32());
    state.final_elbo = r.f64();
    if (!r.exhausted()) {
      throw std::runtime_error("trailing bytes after model payload");
    }
    return out;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// Serialized point embeddings: magic, version, k, vocabulary, training
// config, then the two matrices row-major.
inline void save_sg_model(const PointEmbeddings& emb, const Vocabulary& vocab,
                          const std::string& path) {
  if (static_cast<std::size_t>(emb.rows()) != vocab.size()) {
    throw std::invalid_argument(
        "sg model file: embeddings and vocabulary sizes disagree");
  }
  BinaryWriter w;
  w.bytes(kSgModelMagic);
  w.u32(kSgModelVersion);
  w.u32(static_cast<std::uint32_t>(emb.dim()));
  encode_vocabulary(w, vocab);
  w.u32(static_cast<std::uint32_t>(emb.config.epochs));
  w.f64(emb.config.learning_rate);
  w.u64(emb.config.seed);
  detail::write_matrix_row_major(w, emb.u);
  detail::write_matrix_row_major(w, emb.v);
  atomic_write_file(path, w.buffer());
}

struct LoadedSgModel {
  PointEmbeddings emb;
  Vocabulary vocab;
};

inline LoadedSgModel load_sg_model(const std::string& path) {
  const std::string data = read_file(path);
  try {
    BinaryReader r(data);
    if (r.bytes(sizeof(kSgModelMagic) - 1) != kSgModelMagic) {
      throw std::runtime_error("bad magic; not a point-embedding model file");
    }
    const std::uint32_t version = r.u32();
    if (version != kSgModelVersion) {
      throw std::runtime_error("unsupported model file version " +
                               std::to_string(version));
    }
    const std::uint32_t k = r.u32();
    if (k == 0 || k > (1u << 20)) {
      throw std::runtime_error("implausible dimension " + std::to_string(k));
    }
    LoadedSgModel out;
    out.vocab = decode_vocabulary(r);
    const int n = static_cast<int>(out.vocab.size());
    out.emb.config.k = static_cast<int>(k);
    out.emb.config.epochs = static_cast<int>(r.u32());
    out.emb.config.learning_rate = r.f64();
    out.emb.config.seed = r.u64();
    out.emb.u = detail::read_matrix_row_major(r, n, static_cast<int>(k));
    out.emb.v = detail::read_matrix_row_major(r, n, static_cast<int>(k));
    if (!out.emb.u.allFinite() || !out.emb.v.allFinite()) {
      throw std::runtime_error("non-finite embedding entries");
    }
    if (!r.exhausted()) {
      throw std::runtime_error("trailing bytes after model payload");
    }
    return out;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

enum class ExportSide { u, v };

// word2vec-style text export: header "N k", then one line per word with the
// word and k coordinates at 9 significant digits, in vocabulary order.
template <typename RowFn>
void export_word2vec_text(const Vocabulary& vocab, int k, RowFn&& row,
                          const std::string& path) {
  std::string out;
  out += std::to_string(vocab.size()) + " " + std::to_string(k) + "\n";
  char buf[64];
  for (std::uint32_t i = 0; i < vocab.size(); ++i) {
    out += vocab.words[i];
    const auto coords = row(i);
    for (int d = 0; d < k; ++d) {
      std::snprintf(buf, sizeof(buf), " %.9g", static_cast<double>(coords(d)));
      out += buf;
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

inline void export_word2vec_text(const ModelState& state,
                                 const Vocabulary& vocab, ExportSide side,
                                 const std::string& path) {
  if (state.size() != vocab.size()) {
    throw std::invalid_argument("export: state and vocabulary sizes disagree");
  }
  const std::vector<GaussianFactor>& family =
      side == ExportSide::u ? state.u : state.v;
  export_word2vec_text(
      vocab, state.k,
      [&](std::uint32_t i) -> const Eigen::VectorXd& { return family[i].mean(); },
      path);
}

inline void export_word2vec_text(const PointEmbeddings& emb,
                                 const Vocabulary& vocab, ExportSide side,
                                 const std::string& path) {
  if (static_cast<std::size_t>(emb.rows()) != vocab.size()) {
    throw std::invalid_argument("export: embeddings and vocabulary sizes disagree");
  }
  const Eigen::MatrixXd& m = side == ExportSide::u ? emb.u : emb.v;
  export_word2vec_text(
      vocab, emb.dim(), [&](std::uint32_t i) { return m.row(i); }, path);
}

}  // namespace bhwr
