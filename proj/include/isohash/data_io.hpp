#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "isohash/core.hpp"
#include "isohash/random.hpp"

namespace isohash {

// ---------------------------------------------------------------- preprocessing

namespace detail {

inline Dataset center_and_normalize(Matrix pts, const Vector& mean) {
  pts.rowwise() -= mean.transpose();
  for (Eigen::Index q = 0; q < pts.rows(); ++q) {
    const double norm = pts.row(q).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DataError("row " + std::to_string(q) + " is zero after subtracting the mean and cannot be normalized");
    }
    pts.row(q) /= norm;
  }
  return Dataset(std::move(pts), mean, true);
}

}  // namespace detail

/// Subtracts the column mean and scales every row to unit length.
inline Dataset preprocess(const Matrix& raw) {
  if (raw.rows() < 2 || raw.cols() < 1) throw DataError("preprocess needs Q >= 2 and N >= 1, got " + shape_str(raw.rows(), raw.cols()));
  const Vector mean = raw.colwise().mean().transpose();
  return detail::center_and_normalize(raw, mean);
}

/// Applies stored statistics to unseen data, as a model trained on preprocessed data expects.
inline Dataset apply_preprocessing(const Matrix& raw, const Vector& mean, bool normalized) {
  if (mean.size() != raw.cols()) {
    throw DimensionError("mean has length " + std::to_string(mean.size()) + " but data is " + shape_str(raw.rows(), raw.cols()));
  }
  if (normalized) return detail::center_and_normalize(raw, mean);
  Matrix pts = raw;
  pts.rowwise() -= mean.transpose();
  return Dataset(std::move(pts), mean, false);
}

inline Dataset apply_preprocessing(const Matrix& raw, const HashModel& model) {
  return apply_preprocessing(raw, model.mean, model.normalized);
}

// ---------------------------------------------------------------- secant selection

/// The floor(low_frac T) closest pairs with c = 0, plus the floor(high_frac T) farthest pairs with
/// their true c, T = Q(Q-1)/2. Distance ties go to the lower pair index. Result in pair order.
inline SecantBatch bre_secant_selection(const Dataset& data, double low_frac = 0.05, double high_frac = 0.02) {
  if (!(low_frac > 0.0 && low_frac < 1.0) || !(high_frac > 0.0 && high_frac < 1.0) || low_frac + high_frac > 1.0) {
    throw std::invalid_argument("fractions must lie in (0, 1) and sum to at most 1");
  }
  const std::uint64_t total = enumerate_secants(data.size()).size();
  // The epsilon keeps products such as 0.02 * 4950 from flooring one short.
  const auto n_low = static_cast<std::size_t>(std::floor(low_frac * static_cast<double>(total) + 1e-9));
  const auto n_high = static_cast<std::size_t>(std::floor(high_frac * static_cast<double>(total) + 1e-9));
  if (n_low == 0 || n_high == 0) {
    throw DataError("Q = " + std::to_string(data.size()) + " is too small: " + std::to_string(n_low) + " low and " +
                    std::to_string(n_high) + " high pairs");
  }
  std::vector<std::pair<double, std::uint64_t>> ranked;
  ranked.reserve(total);
  for (auto it = enumerate_secants(data.size()).begin(); it != enumerate_secants(data.size()).end(); ++it) {
    const auto [i, j] = *it;
    ranked.emplace_back(ambient_distance(data, i, j), it.linear_index());
  }
  std::sort(ranked.begin(), ranked.end());

  std::vector<std::pair<std::uint64_t, double>> chosen;  // (pair index, target)
  chosen.reserve(n_low + n_high);
  for (std::size_t r = 0; r < n_low; ++r) chosen.emplace_back(ranked[r].second, 0.0);
  // Farthest first: among equal distances the lower pair index wins.
  std::size_t taken = 0;
  for (std::size_t r = ranked.size(); r > n_low && taken < n_high;) {
    std::size_t lo = r - 1;
    while (lo > n_low && ranked[lo - 1].first == ranked[r - 1].first) --lo;
    for (std::size_t s = lo; s < r && taken < n_high; ++s, ++taken) chosen.emplace_back(ranked[s].second, ranked[s].first);
    r = lo;
  }
  std::sort(chosen.begin(), chosen.end());
  SecantBatch out;
  out.reserve(chosen.size());
  for (const auto& [t, c] : chosen) {
    const auto [i, j] = pair_at(t);
    out.push_back({i, j, c});
  }
  return out;
}

// ---------------------------------------------------------------- generators

/// Q i.i.d. N(0, I_N) points (raw).
inline Dataset gen_random_dataset(std::size_t q, std::size_t n = 100, std::uint64_t seed = 0) {
  if (q < 2 || n < 1) throw std::invalid_argument("random dataset needs Q >= 2 and N >= 1");
  return Dataset(gaussian_matrix(q, n, seed));
}

/// Every translate of a square x square block of ones inside a grid x grid zero image, flattened
/// row-major; ordered by top-left corner (row, then column).
inline Dataset gen_translating_squares(std::size_t grid = 10, std::size_t square = 3) {
  if (square < 1 || square > grid) throw std::invalid_argument("square size must lie in [1, grid]");
  const std::size_t positions = grid - square + 1;
  Matrix pts = Matrix::Zero(static_cast<Eigen::Index>(positions * positions), static_cast<Eigen::Index>(grid * grid));
  Eigen::Index r = 0;
  for (std::size_t top = 0; top < positions; ++top)
    for (std::size_t left = 0; left < positions; ++left, ++r)
      for (std::size_t dy = 0; dy < square; ++dy)
        for (std::size_t dx = 0; dx < square; ++dx)
          pts(r, static_cast<Eigen::Index>((top + dy) * grid + left + dx)) = 1.0;
  return Dataset(std::move(pts));
}

// ---------------------------------------------------------------- byte helpers

namespace detail {

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put_le(std::string& out, T v) {
  v = byteswap_if_big(v);
  const auto* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return byteswap_if_big(v);
}

inline std::uint32_t get_be32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(in[offset + static_cast<std::size_t>(k)]);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("short write to " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------- dataset files

inline constexpr char kDatasetMagic[7] = {'N', 'I', 'B', 'H', 'D', 'S', '1'};
inline constexpr std::size_t kDatasetHeaderBytes = 24;  // magic, Q (u64), N (u64), flags (u8)
inline constexpr std::uint8_t kFlagNormalized = 1;

/// NIBHDS1 bytes: header then Q N little-endian float32 values, row-major.
inline std::string encode_binary(const Dataset& data) {
  std::string out(kDatasetMagic, sizeof(kDatasetMagic));
  detail::put_le<std::uint64_t>(out, data.size());
  detail::put_le<std::uint64_t>(out, data.dim());
  out.push_back(static_cast<char>(data.normalized ? kFlagNormalized : 0));
  out.reserve(kDatasetHeaderBytes + 4 * data.size() * data.dim());
  for (Eigen::Index k = 0; k < data.points.size(); ++k) detail::put_le<float>(out, static_cast<float>(data.points.data()[k]));
  return out;
}

inline Dataset decode_binary(const std::string& bytes, const std::string& name = "<memory>") {
  if (bytes.size() < kDatasetHeaderBytes) {
    throw DataError(name + ": header needs " + std::to_string(kDatasetHeaderBytes) + " bytes, file has " +
                    std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kDatasetMagic, sizeof(kDatasetMagic)) != 0) {
    throw DataError(name + ": bad magic at byte offset 0 (expected NIBHDS1)");
  }
  const auto q = detail::get_le<std::uint64_t>(bytes, 7);
  const auto n = detail::get_le<std::uint64_t>(bytes, 15);
  const auto flags = static_cast<std::uint8_t>(bytes[23]);
  if (q < 2 || n < 1 || q > (1ULL << 32) || n > (1ULL << 32)) {
    throw DataError(name + ": implausible shape Q = " + std::to_string(q) + ", N = " + std::to_string(n) +
                    " at byte offset 7");
  }
  const std::uint64_t expected = kDatasetHeaderBytes + 4 * q * n;
  if (bytes.size() != expected) {
    throw DataError(name + ": expected " + std::to_string(expected) + " bytes for " + std::to_string(q) + "x" +
                    std::to_string(n) + " floats, found " + std::to_string(bytes.size()));
  }
  Matrix pts(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n));
  for (std::uint64_t k = 0; k < q * n; ++k) {
    const std::size_t offset = kDatasetHeaderBytes + 4 * k;
    const float v = detail::get_le<float>(bytes, offset);
    if (!std::isfinite(v)) throw DataError(name + ": non-finite value at byte offset " + std::to_string(offset));
    pts.data()[k] = v;
  }
  Dataset d(std::move(pts));
  d.normalized = (flags & kFlagNormalized) != 0;
  return d;
}

inline void save_binary(const std::filesystem::path& path, const Dataset& data) {
  detail::write_file(path, encode_binary(data));
}

inline Dataset load_binary(const std::filesystem::path& path) { return decode_binary(detail::read_file(path), path.string()); }

/// Headerless comma-separated rows of decimal numbers; every row must have the same length.
inline Dataset parse_csv(std::istream& in, const std::string& name = "<stream>") {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    for (;;) {
      const std::size_t comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw DataError(name + ": line " + std::to_string(lineno) + ", field " + std::to_string(count + 1) +
                        " is not a number: '" + field + "'");
      }
      if (field.find_first_not_of(" \t", used) != std::string::npos) {
        throw DataError(name + ": line " + std::to_string(lineno) + ", field " + std::to_string(count + 1) +
                        " has trailing characters: '" + field + "'");
      }
      if (!std::isfinite(v)) {
        throw DataError(name + ": line " + std::to_string(lineno) + ", field " + std::to_string(count + 1) +
                        " is not finite");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) {
      throw DataError(name + ": line " + std::to_string(lineno) + " has " + std::to_string(count) + " fields, expected " +
                      std::to_string(cols));
    }
    ++rows;
  }
  if (rows < 2) throw DataError(name + ": need at least 2 rows, found " + std::to_string(rows));
  Matrix pts(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), pts.data());
  return Dataset(std::move(pts));
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  return parse_csv(f, path.string());
}

inline void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f.precision(17);
  for (Eigen::Index q = 0; q < data.points.rows(); ++q) {
    for (Eigen::Index n = 0; n < data.points.cols(); ++n) f << (n ? "," : "") << data.points(q, n);
    f << '\n';
  }
}

/// IDX unsigned-byte tensor (magic 0x0000080D with D dims, big-endian sizes); each item is
/// flattened to one row, pixel values kept in [0, 255].
inline Dataset load_idx(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 4) throw DataError(name + ": IDX header truncated");
  const std::uint32_t magic = detail::get_be32(bytes, 0);
  if ((magic >> 8) != 0x08 || (magic & 0xff) < 1) {
    throw DataError(name + ": not an unsigned-byte IDX file (magic 0x" + [&] {
      std::ostringstream os;
      os << std::hex << magic;
      return os.str();
    }() + " at byte offset 0)");
  }
  const std::size_t dims = magic & 0xff;
  if (bytes.size() < 4 + 4 * dims) throw DataError(name + ": IDX dimension table truncated");
  std::uint64_t items = detail::get_be32(bytes, 4);
  std::uint64_t per_item = 1;
  for (std::size_t d = 1; d < dims; ++d) per_item *= detail::get_be32(bytes, 4 + 4 * d);
  const std::uint64_t offset = 4 + 4 * dims;
  if (bytes.size() != offset + items * per_item) {
    throw DataError(name + ": expected " + std::to_string(offset + items * per_item) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  Matrix pts(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(per_item));
  for (std::uint64_t k = 0; k < items * per_item; ++k) pts.data()[k] = static_cast<unsigned char>(bytes[offset + k]);
  return Dataset(std::move(pts));
}

/// Loads by extension: .csv, .idx / -ubyte (IDX), anything else NIBHDS1.
inline Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("dataset not found: " + path.string());
  const std::string ext = path.extension().string();
  const std::string fname = path.filename().string();
  if (ext == ".csv") return load_csv(path);
  if (ext == ".idx" || fname.find("-ubyte") != std::string::npos) return load_idx(path);
  return load_binary(path);
}

/// Rows `rows` of data, in the given order.
inline Dataset select_rows(const Dataset& data, std::span<const std::uint32_t> rows) {
  Matrix pts(static_cast<Eigen::Index>(rows.size()), data.points.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = data.points.row(rows[r]);
  return Dataset(std::move(pts), data.mean, data.normalized);
}

/// A seeded uniform draw of `count` distinct row indices out of q, in draw order.
inline std::vector<std::uint32_t> sample_rows(std::size_t q, std::size_t count, std::uint64_t seed) {
  if (count > q) throw std::invalid_argument("cannot draw " + std::to_string(count) + " of " + std::to_string(q) + " rows");
  std::vector<std::uint32_t> idx(q);
  for (std::size_t k = 0; k < q; ++k) idx[k] = static_cast<std::uint32_t>(k);
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) std::swap(idx[k], idx[k + rng.below(q - k)]);
  idx.resize(count);
  return idx;
}

/// FNV-1a over the shape and the raw bytes of the points.
inline std::uint64_t fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < n; ++k) h = (h ^ b[k]) * 0x100000001b3ULL;
  };
  const std::uint64_t shape[2] = {data.size(), data.dim()};
  feed(shape, sizeof(shape));
  feed(data.points.data(), sizeof(double) * static_cast<std::size_t>(data.points.size()));
  return h;
}

// ---------------------------------------------------------------- model files

inline constexpr int kModelVersion = 1;

/// One JSON header line, a newline, then W as M N little-endian float64 values, row-major.
inline std::string encode_model(const HashModel& m) {
  if (m.mean.size() != m.W.cols()) {
    throw DimensionError("model mean has length " + std::to_string(m.mean.size()) + " but W is " +
                         shape_str(m.W.rows(), m.W.cols()));
  }
  nlohmann::ordered_json h;
  h["version"] = kModelVersion;
  h["M"] = m.bits();
  h["N"] = m.dim();
  h["lambda"] = m.lambda;
  h["alpha"] = m.alpha;
  h["normalized"] = m.normalized;
  h["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
  std::string out = h.dump() + "\n";
  out.reserve(out.size() + 8 * static_cast<std::size_t>(m.W.size()));
  for (Eigen::Index k = 0; k < m.W.size(); ++k) detail::put_le<double>(out, m.W.data()[k]);
  return out;
}

inline HashModel decode_model(const std::string& bytes, const std::string& name = "<memory>") {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError(name + ": model header line is not terminated");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": model header is not valid JSON: " + e.what());
  }
  HashModel m;
  std::size_t rows = 0;
  std::size_t cols = 0;
  try {
    if (h.at("version").get<int>() != kModelVersion) {
      throw DataError(name + ": unsupported model version " + h.at("version").dump());
    }
    rows = h.at("M").get<std::size_t>();
    cols = h.at("N").get<std::size_t>();
    m.lambda = h.at("lambda").get<double>();
    m.alpha = h.at("alpha").get<double>();
    m.normalized = h.at("normalized").get<bool>();
    const auto mean = h.at("mean").get<std::vector<double>>();
    if (mean.size() != cols) throw DataError(name + ": mean has " + std::to_string(mean.size()) + " entries, N = " + std::to_string(cols));
    m.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(name + ": model header field missing or mistyped: " + e.what());
  }
  if (rows < 1 || cols < 1) throw DataError(name + ": model needs M >= 1 and N >= 1");
  if (!(m.lambda > 0.0) || !(m.alpha > 0.0)) throw DataError(name + ": lambda and alpha must be positive");
  const std::size_t expected = nl + 1 + 8 * rows * cols;
  if (bytes.size() != expected) {
    throw DataError(name + ": expected " + std::to_string(expected) + " bytes for a " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " model, found " + std::to_string(bytes.size()));
  }
  m.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t k = 0; k < rows * cols; ++k) m.W.data()[k] = detail::get_le<double>(bytes, nl + 1 + 8 * k);
  return m;
}

inline void save_model(const std::filesystem::path& path, const HashModel& m) { detail::write_file(path, encode_model(m)); }

inline HashModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("model not found: " + path.string());
  return decode_model(detail::read_file(path), path.string());
}

}  // namespace isohash
