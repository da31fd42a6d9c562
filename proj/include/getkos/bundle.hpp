#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "getkos/encoding.hpp"
#include "getkos/error.hpp"
#include "getkos/nn.hpp"

namespace getkos::bundle {

inline constexpr std::array<char, 4> kMagic = {'K', 'O', 'S', 'M'};
inline constexpr std::uint32_t kFormatVersion = 1;

inline const std::vector<std::string>& default_facility_catalog() {
  static const std::vector<std::string> catalog = {
      "wifi",   "ac",       "kamar_mandi_dalam", "kasur",        "lemari",
      "meja",   "kursi",    "jendela",           "dapur",        "parkir_motor",
      "laundry", "cctv",    "water_heater",      "tv"};
  return catalog;
}

struct Metadata {
  std::uint32_t format_version = kFormatVersion;
  std::int64_t created_unix = 0;
  std::uint64_t training_seed = 0;
  std::string arch_summary;
  double train_mae = 0.0;
  double val_mae = 0.0;

  bool operator==(const Metadata&) const = default;
};

struct ModelBundle {
  FeatureEncoder encoder;
  nn::MLPModel model;
  Metadata metadata;
  std::vector<std::string> facility_catalog = default_facility_catalog();

  bool operator==(const ModelBundle&) const = default;
};

/// Section ids in file order.
enum class Section : std::uint32_t {
  metadata = 1,
  schema = 2,
  vocabularies = 3,
  normalization = 4,
  facility_catalog = 5,
  layers = 6,
};

inline const char* section_name(Section s) {
  switch (s) {
    case Section::metadata: return "metadata";
    case Section::schema: return "schema";
    case Section::vocabularies: return "vocabularies";
    case Section::normalization: return "normalization";
    case Section::facility_catalog: return "facility_catalog";
    case Section::layers: return "layers";
  }
  return "unknown";
}

inline constexpr std::array<Section, 6> kSectionOrder = {
    Section::metadata,      Section::schema,           Section::vocabularies,
    Section::normalization, Section::facility_catalog, Section::layers};

namespace detail {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(std::string_view s) { buf_.append(s); }

  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian cursor; every overrun is a corruption error
/// attributed to the section being read.
class Reader {
 public:
  Reader(std::string_view data, const char* section)
      : data_(data), section_(section) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  void need(std::size_t n) const {
    if (n > remaining()) fail("truncated");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::corruption,
                std::string("corrupt section '") + section_ + "': " + why);
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++]))
           << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++]))
           << (8 * i);
    }
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  /// Element count whose elements occupy at least `min_bytes` each.
  std::uint32_t count(std::size_t min_bytes) {
    const auto n = u32();
    if (static_cast<std::uint64_t>(n) * min_bytes > remaining()) fail("count exceeds payload");
    return n;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  const char* section_;
};

inline void write_vocab(Writer& w, std::string_view name, const Vocabulary& v) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& t : v.tokens()) w.str(t);
}

inline Vocabulary read_vocab(Reader& r, std::string_view expected_name) {
  if (r.str() != expected_name) {
    r.fail("expected vocabulary for '" + std::string(expected_name) + "'");
  }
  const auto n = r.count(4);
  Vocabulary v;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (v.add(r.str()) != i + 1) r.fail("duplicate vocabulary token");
  }
  return v;
}

inline std::string section_payload(const ModelBundle& b, Section s) {
  Writer w;
  switch (s) {
    case Section::metadata:
      w.i64(b.metadata.created_unix);
      w.u64(b.metadata.training_seed);
      w.f64(b.metadata.train_mae);
      w.f64(b.metadata.val_mae);
      w.str(b.metadata.arch_summary);
      break;
    case Section::schema:
      w.u32(static_cast<std::uint32_t>(kColumnSchema.size()));
      for (const auto& c : kColumnSchema) {
        w.str(c.name);
        w.u8(static_cast<std::uint8_t>(c.kind));
      }
      break;
    case Section::vocabularies:
      w.u32(3);
      for (std::size_t c = 0; c < 3; ++c) {
        write_vocab(w, kColumnSchema[c].name, b.encoder.vocabulary(c));
      }
      w.u32(static_cast<std::uint32_t>(b.encoder.area_cities.size()));
      for (const auto& cities : b.encoder.area_cities) {
        w.u32(static_cast<std::uint32_t>(cities.size()));
        for (auto k : cities) w.u32(k);
      }
      break;
    case Section::normalization:
      w.u32(static_cast<std::uint32_t>(kNumFeatures));
      for (double m : b.encoder.norm.means) w.f64(m);
      for (double v : b.encoder.norm.variances) w.f64(v);
      w.u64(b.encoder.norm.count);
      break;
    case Section::facility_catalog:
      w.u32(static_cast<std::uint32_t>(b.facility_catalog.size()));
      for (const auto& f : b.facility_catalog) w.str(f);
      break;
    case Section::layers:
      w.u32(static_cast<std::uint32_t>(b.model.layers.size()));
      for (const auto& l : b.model.layers) {
        w.u32(static_cast<std::uint32_t>(l.in_dim()));
        w.u32(static_cast<std::uint32_t>(l.out_dim()));
        w.u8(static_cast<std::uint8_t>(l.activation));
        for (double v : l.weights.values()) w.f32(static_cast<float>(v));
        for (double v : l.bias) w.f32(static_cast<float>(v));
      }
      break;
  }
  return std::move(w.bytes());
}

inline void check_consistent(const ModelBundle& b) {
  if (b.model.input_dim() != kNumFeatures) {
    throw Error(ErrorKind::shape, "bundle model input_dim " +
                                      std::to_string(b.model.input_dim()) +
                                      " does not match the 4-column schema");
  }
  if (b.encoder.area_cities.size() != b.encoder.area.size()) {
    throw Error(ErrorKind::shape, "area/city relation does not cover the area vocabulary");
  }
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0),
              reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
}

}  // namespace detail

/// Serialized .kosm bytes: magic, u32 version, then (u32 id, u64 length,
/// u32 crc32, payload) for each section in fixed order. Weights are narrowed
/// to float.
inline std::string to_bytes(const ModelBundle& b) {
  detail::check_consistent(b);
  detail::Writer w;
  w.raw(std::string_view(kMagic.data(), kMagic.size()));
  w.u32(b.metadata.format_version);
  for (auto s : kSectionOrder) {
    const auto payload = detail::section_payload(b, s);
    w.u32(static_cast<std::uint32_t>(s));
    w.u64(payload.size());
    w.u32(detail::crc32_of(payload));
    w.raw(payload);
  }
  return std::move(w.bytes());
}

inline std::size_t export_lite(const ModelBundle& b, std::ostream& sink) {
  const auto bytes = to_bytes(b);
  sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  sink.flush();
  if (!sink) throw Error(ErrorKind::io, "failed to write lite bundle");
  return bytes.size();
}

inline ModelBundle from_bytes(std::string_view data) {
  if (data.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), data.begin())) {
    throw Error(ErrorKind::format, "not a .kosm file (bad magic)");
  }
  detail::Reader head(data.substr(kMagic.size()), "header");
  const auto version = head.u32();
  if (version != kFormatVersion) {
    throw Error(ErrorKind::version,
                "unsupported .kosm version " + std::to_string(version) +
                    " (supported: " + std::to_string(kFormatVersion) + ")");
  }

  ModelBundle b;
  b.metadata.format_version = version;
  b.facility_catalog.clear();
  for (auto s : kSectionOrder) {
    const char* name = section_name(s);
    if (head.remaining() < 16) {
      throw Error(ErrorKind::corruption,
                  std::string("corrupt section '") + name + "': truncated header");
    }
    const auto id = head.u32();
    if (id != static_cast<std::uint32_t>(s)) {
      throw Error(ErrorKind::corruption, std::string("corrupt section '") + name +
                                             "': unexpected section id " +
                                             std::to_string(id));
    }
    const auto len = head.u64();
    const auto crc = head.u32();
    if (len > head.remaining()) {
      throw Error(ErrorKind::corruption,
                  std::string("corrupt section '") + name + "': truncated");
    }
    const auto payload = head.take(static_cast<std::size_t>(len));
    if (detail::crc32_of(payload) != crc) {
      throw Error(ErrorKind::corruption,
                  std::string("corrupt section '") + name + "': checksum mismatch");
    }
    detail::Reader r(payload, name);

    switch (s) {
      case Section::metadata:
        b.metadata.created_unix = r.i64();
        b.metadata.training_seed = r.u64();
        b.metadata.train_mae = r.f64();
        b.metadata.val_mae = r.f64();
        b.metadata.arch_summary = r.str();
        break;
      case Section::schema: {
        if (r.u32() != kColumnSchema.size()) r.fail("column count");
        for (const auto& c : kColumnSchema) {
          if (r.str() != c.name || r.u8() != static_cast<std::uint8_t>(c.kind)) {
            r.fail("schema mismatch at column '" + std::string(c.name) + "'");
          }
        }
        break;
      }
      case Section::vocabularies: {
        if (r.u32() != 3) r.fail("expected 3 vocabularies");
        b.encoder.kota = detail::read_vocab(r, kColumnSchema[0].name);
        b.encoder.type_kos = detail::read_vocab(r, kColumnSchema[1].name);
        b.encoder.area = detail::read_vocab(r, kColumnSchema[2].name);
        const auto n_area = r.count(4);
        if (n_area != b.encoder.area.size()) r.fail("area/city relation size");
        b.encoder.area_cities.resize(n_area);
        for (auto& cities : b.encoder.area_cities) {
          const auto k = r.count(4);
          for (std::uint32_t i = 0; i < k; ++i) {
            const auto city = r.u32();
            if (city < 1 || city > b.encoder.kota.size()) r.fail("city index out of range");
            cities.push_back(city);
          }
        }
        break;
      }
      case Section::normalization: {
        if (r.u32() != kNumFeatures) r.fail("feature count");
        for (auto& m : b.encoder.norm.means) m = r.f64();
        for (auto& v : b.encoder.norm.variances) {
          v = r.f64();
          if (!(v >= 0.0)) r.fail("negative or NaN variance");
        }
        b.encoder.norm.count = r.u64();
        break;
      }
      case Section::facility_catalog: {
        const auto n = r.count(4);
        for (std::uint32_t i = 0; i < n; ++i) b.facility_catalog.push_back(r.str());
        break;
      }
      case Section::layers: {
        const auto n = r.count(9);
        if (n < 1) r.fail("no layers");
        std::size_t prev_out = kNumFeatures;
        for (std::uint32_t l = 0; l < n; ++l) {
          const std::size_t in = r.u32();
          const std::size_t out = r.u32();
          const auto act = r.u8();
          if (in != prev_out || out < 1) r.fail("layer " + std::to_string(l) + " shape");
          const bool last = (l + 1 == n);
          if (act != static_cast<std::uint8_t>(last ? nn::Activation::linear
                                                    : nn::Activation::relu)) {
            r.fail("layer " + std::to_string(l) + " activation");
          }
          if (last && out != 1) r.fail("head width must be 1");
          const std::uint64_t floats = static_cast<std::uint64_t>(in) * out + out;
          if (floats * 4 > r.remaining()) r.fail("truncated weights");
          nn::DenseLayer layer{Matrix(in, out), std::vector<double>(out),
                               static_cast<nn::Activation>(act)};
          for (auto& v : layer.weights.values()) v = r.f32();
          for (auto& v : layer.bias) v = r.f32();
          b.model.layers.push_back(std::move(layer));
          prev_out = out;
        }
        break;
      }
    }
    if (!r.done()) r.fail("unexpected trailing bytes");
  }
  if (!head.done()) {
    throw Error(ErrorKind::corruption, "trailing bytes after last section");
  }
  return b;
}

inline ModelBundle load_lite(std::istream& source) {
  if (!source) throw Error(ErrorKind::io, "lite bundle stream is not readable");
  std::string bytes{std::istreambuf_iterator<char>(source),
                    std::istreambuf_iterator<char>()};
  if (source.bad()) throw Error(ErrorKind::io, "read failure on lite bundle");
  return from_bytes(bytes);
}

struct Prediction {
  double raw_price_idr = 0.0;  // unclamped model output
  double price_idr = 0.0;      // clamped at 0
  std::int64_t display_price = 0;
  std::int64_t facility_score_used = 0;
  std::vector<std::string> unknown_facilities;
  std::vector<std::string> oov_fields;

  bool operator==(const Prediction&) const = default;
};

inline std::int64_t round_to_thousand(double price) {
  return static_cast<std::int64_t>(std::llround(price / 1000.0)) * 1000;
}

/// facility_score is the number of distinct requested names found in the
/// bundle's catalog; unknown names are reported once each, in request order.
inline Prediction predict(const ModelBundle& b, std::string_view kota,
                          std::string_view area, std::string_view type_kos,
                          const std::vector<std::string>& facilities) {
  Prediction p;
  std::set<std::string_view> seen;
  for (const auto& f : facilities) {
    if (!seen.insert(f).second) continue;
    const bool known = std::find(b.facility_catalog.begin(),
                                 b.facility_catalog.end(),
                                 f) != b.facility_catalog.end();
    if (known) {
      ++p.facility_score_used;
    } else {
      p.unknown_facilities.push_back(f);
    }
  }
  auto codes = integer_codes(b.encoder, kota, type_kos, area, p.facility_score_used);
  p.oov_fields = std::move(codes.oov_fields);
  const auto z = normalize(b.encoder.norm, codes.raw);
  Matrix X(1, kNumFeatures);
  std::copy(z.begin(), z.end(), X.row(0).begin());
  p.raw_price_idr = nn::forward(b.model, X)[0];
  p.price_idr = std::max(0.0, p.raw_price_idr);
  p.display_price = round_to_thousand(p.price_idr);
  return p;
}

inline nlohmann::json to_json(const Prediction& p) {
  return {{"price_idr", p.price_idr},
          {"raw_price_idr", p.raw_price_idr},
          {"display_price", p.display_price},
          {"facility_score_used", p.facility_score_used},
          {"unknown_facilities", p.unknown_facilities},
          {"oov_fields", p.oov_fields}};
}

/// "Rp 1.250.000"
inline std::string format_rupiah(std::int64_t amount) {
  const bool negative = amount < 0;
  std::string digits = std::to_string(negative ? -amount : amount);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out.push_back('.');
    out.push_back(digits[i]);
  }
  return std::string(negative ? "-Rp " : "Rp ") + out;
}

}  // namespace getkos::bundle
