#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "contextloc/datamodel.hpp"
#include "contextloc/error.hpp"
#include "contextloc/eval.hpp"

namespace contextloc {

enum class FloatWidth { f32, f64 };

inline const char* to_string(FloatWidth w) { return w == FloatWidth::f32 ? "float32" : "float64"; }

template <typename T>
constexpr FloatWidth native_width() {
  return sizeof(T) == 4 ? FloatWidth::f32 : FloatWidth::f64;
}

namespace detail {

inline constexpr std::string_view kFeatureMagic = "CTXLOC1\n";

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError("short write to " + path.string());
}

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

inline void append_float(std::string& out, double v, FloatWidth w) {
  if (w == FloatWidth::f32) {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    put_le(out, std::bit_cast<std::uint64_t>(v));
  }
}

inline double read_float(const char* p, FloatWidth w) {
  if (w == FloatWidth::f32) return std::bit_cast<float>(get_le<std::uint32_t>(p));
  return std::bit_cast<double>(get_le<std::uint64_t>(p));
}

inline std::size_t parse_count(std::string_view tok, std::size_t offset, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("malformed header at byte offset " + std::to_string(offset) + ": bad " + what + " '" +
                     std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

/// Serialises features as: magic "CTXLOC1\n", a text line "N D float32|float64\n",
/// then N*D little-endian floats in row-major order.
template <typename T>
std::string encode_features(const VideoFeatures<T>& video, FloatWidth width = native_width<T>()) {
  std::string out(detail::kFeatureMagic);
  out += std::to_string(video.num_snippets()) + " " + std::to_string(video.dim()) + " " + to_string(width) + "\n";
  out.reserve(out.size() + video.snippets.size() * (width == FloatWidth::f32 ? 4 : 8));
  for (T v : video.snippets.data()) detail::append_float(out, static_cast<double>(v), width);
  return out;
}

template <typename T>
VideoFeatures<T> decode_features(std::string_view bytes, std::string video_id = {}, double snippet_duration = 1.0) {
  const auto& magic = detail::kFeatureMagic;
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    throw ParseError("bad magic at byte offset 0: expected CTXLOC1");
  }
  const std::size_t header_start = magic.size();
  const std::size_t nl = bytes.find('\n', header_start);
  if (nl == std::string_view::npos) {
    throw ParseError("malformed header at byte offset " + std::to_string(header_start) + ": missing newline");
  }
  std::istringstream header{std::string(bytes.substr(header_start, nl - header_start))};
  std::string n_tok, d_tok, type_tok, extra;
  if (!(header >> n_tok >> d_tok >> type_tok) || (header >> extra)) {
    throw ParseError("malformed header at byte offset " + std::to_string(header_start) +
                     ": expected 'N D float32|float64'");
  }
  const std::size_t n = detail::parse_count(n_tok, header_start, "snippet count");
  const std::size_t d = detail::parse_count(d_tok, header_start, "dimension");
  FloatWidth width;
  if (type_tok == "float32") {
    width = FloatWidth::f32;
  } else if (type_tok == "float64") {
    width = FloatWidth::f64;
  } else {
    throw ParseError("malformed header at byte offset " + std::to_string(header_start) + ": unknown float type '" +
                     type_tok + "'");
  }
  if (d == 0) throw ParseError("invalid dimension D=0 in header at byte offset " + std::to_string(header_start));
  if (n == 0) throw ParseError("invalid snippet count N=0 in header at byte offset " + std::to_string(header_start));

  const std::size_t payload = nl + 1;
  const std::size_t width_bytes = width == FloatWidth::f32 ? 4 : 8;
  const std::size_t row_bytes = d * width_bytes;
  const std::size_t expected = n * row_bytes;
  const std::size_t available = bytes.size() - payload;
  if (available < expected) {
    const std::size_t full_rows = available / row_bytes;
    throw ParseError("truncated payload at byte offset " + std::to_string(payload + full_rows * row_bytes) +
                     ": header claims " + std::to_string(n) + " rows, found " + std::to_string(full_rows));
  }
  if (available > expected) {
    throw ParseError("trailing data at byte offset " + std::to_string(payload + expected));
  }

  VideoFeatures<T> video;
  video.video_id = std::move(video_id);
  video.snippet_duration = snippet_duration;
  video.snippets = Matrix<T>(n, d);
  const char* p = bytes.data() + payload;
  for (std::size_t i = 0; i < n * d; ++i, p += width_bytes) {
    video.snippets[i] = static_cast<T>(detail::read_float(p, width));
  }
  return video;
}

template <typename T>
void save_features(const VideoFeatures<T>& video, const std::filesystem::path& path,
                   FloatWidth width = native_width<T>()) {
  detail::write_file(path, encode_features(video, width));
}

/// The video id defaults to the file stem.
template <typename T>
VideoFeatures<T> load_features(const std::filesystem::path& path, double snippet_duration = 1.0) {
  const std::vector<char> bytes = detail::read_file(path);
  try {
    return decode_features<T>(std::string_view(bytes.data(), bytes.size()), path.stem().string(), snippet_duration);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON annotations. Each file holds an array of per-video objects
//   {"video_id": str, "duration": f, "instances": [{"start": f, "end": f, ...}]}
// with "class" for ground truth and detections and "score" for proposals and
// detections.

struct VideoGroundTruth {
  std::string video_id;
  double duration = 0.0;
  std::vector<GroundTruthInstance> instances;
};

struct VideoProposals {
  std::string video_id;
  double duration = 0.0;
  std::vector<Proposal> proposals;
};

struct VideoDetections {
  std::string video_id;
  double duration = 0.0;
  std::vector<Detection> detections;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

inline double number(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw ParseError(where + ": key '" + key + "' is not a number");
  return v.get<double>();
}

inline nlohmann::json parse_json(const std::string& text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": JSON parse error at byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

template <typename Fn>
void for_each_video(const nlohmann::json& doc, const std::string& where, Fn&& fn) {
  if (doc.is_object()) {
    fn(doc, where);
  } else if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) fn(doc[i], where + "[" + std::to_string(i) + "]");
  } else {
    throw ParseError(where + ": expected an object or an array of objects");
  }
}

inline Interval read_interval(const nlohmann::json& inst, const std::string& where) {
  Interval iv{number(inst, "start", where), number(inst, "end", where)};
  if (!(iv.start < iv.end)) throw ParseError(where + ": start must be less than end");
  return iv;
}

inline int read_class(const nlohmann::json& inst, const std::string& where) {
  const auto& c = require(inst, "class", where);
  if (!c.is_number_integer()) throw ParseError(where + ": class must be an integer");
  return c.get<int>();
}

}  // namespace detail

inline nlohmann::json to_json(const VideoGroundTruth& v) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& g : v.instances)
    inst.push_back({{"start", g.interval.start}, {"end", g.interval.end}, {"class", g.class_id}});
  return {{"video_id", v.video_id}, {"duration", v.duration}, {"instances", inst}};
}

inline nlohmann::json to_json(const VideoProposals& v) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& p : v.proposals) inst.push_back({{"start", p.start()}, {"end", p.end()}, {"score", p.score}});
  return {{"video_id", v.video_id}, {"duration", v.duration}, {"instances", inst}};
}

inline nlohmann::json to_json(const VideoDetections& v) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& d : v.detections)
    inst.push_back({{"start", d.interval.start}, {"end", d.interval.end}, {"class", d.class_id}, {"score", d.score}});
  return {{"video_id", v.video_id}, {"duration", v.duration}, {"instances", inst}};
}

template <typename Record>
std::string dump_json_array(const std::vector<Record>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return arr.dump(1) + "\n";
}

inline std::vector<VideoGroundTruth> parse_ground_truth(const std::string& text, const std::string& where = "ground truth") {
  std::vector<VideoGroundTruth> out;
  detail::for_each_video(detail::parse_json(text, where), where, [&](const nlohmann::json& obj, const std::string& w) {
    VideoGroundTruth v;
    v.video_id = detail::require(obj, "video_id", w).get<std::string>();
    v.duration = detail::number(obj, "duration", w);
    const auto& inst = detail::require(obj, "instances", w);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const std::string wi = w + ".instances[" + std::to_string(i) + "]";
      v.instances.push_back({detail::read_interval(inst[i], wi), detail::read_class(inst[i], wi)});
    }
    out.push_back(std::move(v));
  });
  return out;
}

inline std::vector<VideoProposals> parse_proposals(const std::string& text, const std::string& where = "proposals") {
  std::vector<VideoProposals> out;
  detail::for_each_video(detail::parse_json(text, where), where, [&](const nlohmann::json& obj, const std::string& w) {
    VideoProposals v;
    v.video_id = detail::require(obj, "video_id", w).get<std::string>();
    v.duration = detail::number(obj, "duration", w);
    const auto& inst = detail::require(obj, "instances", w);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const std::string wi = w + ".instances[" + std::to_string(i) + "]";
      v.proposals.push_back({detail::read_interval(inst[i], wi), detail::number(inst[i], "score", wi)});
    }
    out.push_back(std::move(v));
  });
  return out;
}

inline std::vector<VideoDetections> parse_detections(const std::string& text, const std::string& where = "detections") {
  std::vector<VideoDetections> out;
  detail::for_each_video(detail::parse_json(text, where), where, [&](const nlohmann::json& obj, const std::string& w) {
    VideoDetections v;
    v.video_id = detail::require(obj, "video_id", w).get<std::string>();
    v.duration = detail::number(obj, "duration", w);
    const auto& inst = detail::require(obj, "instances", w);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const std::string wi = w + ".instances[" + std::to_string(i) + "]";
      v.detections.push_back(
          {v.video_id, detail::read_interval(inst[i], wi), detail::read_class(inst[i], wi), detail::number(inst[i], "score", wi)});
    }
    out.push_back(std::move(v));
  });
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) { detail::write_file(path, text); }

}  // namespace contextloc
