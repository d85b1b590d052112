#include "evdeblur/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace evdeblur {

namespace fs = std::filesystem;

namespace {

// Little-endian byte buffer helpers.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<unsigned char>& data() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string what, std::size_t limit)
      : buf_(buf), what_(std::move(what)), limit_(limit) {}
  void need(std::size_t n) const {
    if (pos_ + n > limit_) throw ParseError(what_ + ": truncated at byte " + std::to_string(pos_));
  }
  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return limit_ - pos_; }

 private:
  const std::vector<unsigned char>& buf_;
  std::string what_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Images ---------------------------------------------------------------------

void write_png(const fs::path& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw ShapeMismatch("write_png expects 1 or 3 channels");
  std::vector<unsigned char> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

Image read_png(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing PNG " + path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw ParseError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    throw ParseError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
  return img;
}

void write_float_image(const fs::path& path, const Image& img) {
  Writer w;
  w.bytes("EVF1", 4);
  w.uint<std::uint32_t>(img.width);
  w.uint<std::uint32_t>(img.height);
  w.uint<std::uint32_t>(img.channels);
  for (float v : img.data) w.f32(v);
  write_file(path, w.data());
}

Image read_float_image(const fs::path& path) {
  const auto buf = read_file(path);
  Reader r(buf, path.string(), buf.size());
  if (r.str(4) != "EVF1") throw ParseError(path.string() + ": not a float image (bad magic)");
  const auto w = r.uint<std::uint32_t>(), h = r.uint<std::uint32_t>(), c = r.uint<std::uint32_t>();
  const std::size_t n = static_cast<std::size_t>(w) * h * c;
  if (r.remaining() != 4 * n) throw ParseError(path.string() + ": size does not match header");
  Image img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  for (std::size_t i = 0; i < n; ++i) img.data[i] = r.f32();
  return img;
}

// Events ---------------------------------------------------------------------

void write_events(const fs::path& path, const EventStream& stream) {
  Writer w;
  w.bytes("EVT1", 4);
  w.uint<std::uint32_t>(stream.width);
  w.uint<std::uint32_t>(stream.height);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(stream.events.size()));
  for (const Event& e : stream.events) {
    w.f64(e.t);
    w.uint<std::uint16_t>(e.x);
    w.uint<std::uint16_t>(e.y);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(e.p));
    w.uint<std::uint8_t>(0);
    w.uint<std::uint16_t>(0);
  }
  write_file(path, w.data());
}

void write_events_text(const fs::path& path, const EventStream& stream) {
  std::ostringstream os;
  os.precision(17);
  for (const Event& e : stream.events) os << e.t << ' ' << e.x << ' ' << e.y << ' ' << int(e.p) << '\n';
  write_text(path, os.str());
}

EventStream read_events(const fs::path& path, int width, int height) {
  const auto buf = read_file(path);
  EventStream s;
  if (buf.size() >= 4 && std::memcmp(buf.data(), "EVT1", 4) == 0) {
    Reader r(buf, path.string(), buf.size());
    r.str(4);
    s.width = static_cast<int>(r.uint<std::uint32_t>());
    s.height = static_cast<int>(r.uint<std::uint32_t>());
    const std::uint32_t count = r.uint<std::uint32_t>();
    if (r.remaining() != 16ULL * count) {
      throw ParseError(path.string() + ": header says " + std::to_string(count) + " events, payload has " +
                       std::to_string(r.remaining()) + " bytes");
    }
    s.events.resize(count);
    for (Event& e : s.events) {
      e.t = r.f64();
      e.x = r.uint<std::uint16_t>();
      e.y = r.uint<std::uint16_t>();
      e.p = static_cast<std::int8_t>(r.uint<std::uint8_t>());
      r.uint<std::uint8_t>();
      r.uint<std::uint16_t>();
    }
  } else {
    if (width <= 0 || height <= 0) throw ParseError(path.string() + ": text event file needs a sensor size");
    s.width = width;
    s.height = height;
    std::istringstream in(std::string(buf.begin(), buf.end()));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
      std::istringstream ls(line);
      double t;
      long x, y, p;
      std::string extra;
      if (!(ls >> t >> x >> y >> p) || (ls >> extra)) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 't x y p'");
      }
      if (x < 0 || y < 0 || x > 65535 || y > 65535 || p < -128 || p > 127) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": field out of range");
      }
      s.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                               static_cast<std::int8_t>(p)});
    }
  }
  if (width > 0 && (s.width != width || s.height != height)) {
    throw ValidationError(path.string() + ": sensor size " + std::to_string(s.width) + "x" +
                          std::to_string(s.height) + " does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  s.validate();
  return s;
}

// JSON helpers ------------------------------------------------------------------

namespace {

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key, where);
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ParseError(where + ": unknown field '" + k + "'");
  }
}

Json twist_json(const Vector6d& v) { return Json::array({v[0], v[1], v[2], v[3], v[4], v[5]}); }

Vector6d twist_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 6) throw ParseError(where + ": twist must be 6 numbers");
  Vector6d v;
  for (int i = 0; i < 6; ++i) {
    if (!j[i].is_number()) throw ParseError(where + ": twist must be 6 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

}  // namespace

Json to_json(const CameraIntrinsics& K) {
  return Json{{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  const std::string where = "intrinsics";
  reject_unknown(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  CameraIntrinsics K;
  K.fx = field<double>(j, "fx", where);
  K.fy = field<double>(j, "fy", where);
  K.cx = field<double>(j, "cx", where);
  K.cy = field<double>(j, "cy", where);
  K.width = field<int>(j, "width", where);
  K.height = field<int>(j, "height", where);
  K.validate();
  return K;
}

Json to_json(const FieldArch& a) {
  return Json{{"pe_levels_pos", a.pe_levels_pos},
              {"pe_levels_dir", a.pe_levels_dir},
              {"hidden_layers", a.hidden_layers},
              {"hidden_width", a.hidden_width},
              {"hidden_activation", to_string(a.hidden_activation)}};
}

FieldArch field_arch_from_json(const Json& j) {
  const std::string where = "field architecture";
  reject_unknown(j, {"pe_levels_pos", "pe_levels_dir", "hidden_layers", "hidden_width", "hidden_activation"}, where);
  FieldArch a;
  a.pe_levels_pos = field<int>(j, "pe_levels_pos", where);
  a.pe_levels_dir = field<int>(j, "pe_levels_dir", where);
  a.hidden_layers = field<int>(j, "hidden_layers", where);
  a.hidden_width = field<int>(j, "hidden_width", where);
  a.hidden_activation = activation_from_string(field<std::string>(j, "hidden_activation", where));
  a.validate();
  return a;
}

// Manifest ---------------------------------------------------------------------

void DatasetManifest::validate() const {
  intrinsics.validate();
  if (!(near < far)) throw ValidationError("manifest: near must be < far");
  if (event_file.empty()) throw ValidationError("manifest: event_file is empty");
  if (blur_image.empty()) throw ValidationError("manifest: blur_image is empty");
  for (const auto& k : gt_knots) {
    if (!k.allFinite()) throw ValidationError("manifest: non-finite ground-truth knot");
  }
}

Json to_json(const DatasetManifest& m) {
  Json j;
  j["schema_version"] = m.schema_version;
  j["intrinsics"] = to_json(m.intrinsics);
  j["exposure"] = m.exposure;
  j["near"] = m.near;
  j["far"] = m.far;
  j["contrast"] = m.contrast;
  if (m.scene_depth) j["scene_depth"] = *m.scene_depth;
  j["event_file"] = m.event_file;
  j["blur_image"] = m.blur_image;
  if (m.blur_image_raw) j["blur_image_raw"] = *m.blur_image_raw;
  if (m.gt_trajectory) j["gt_trajectory"] = *m.gt_trajectory;
  if (!m.gt_knots.empty()) {
    Json knots = Json::array();
    for (const auto& k : m.gt_knots) knots.push_back(twist_json(k));
    j["gt_knots"] = knots;
  }
  Json frames = Json::array();
  for (const auto& f : m.gt_sharp_frames) {
    Json fj{{"t", f.t}, {"png", f.png}};
    if (!f.raw.empty()) fj["raw"] = f.raw;
    frames.push_back(fj);
  }
  j["gt_sharp_frames"] = frames;
  Json seeds = Json::object();
  for (const auto& [k, v] : m.seeds) seeds[k] = v;
  j["seeds"] = seeds;
  j["generator"] = m.generator;
  return j;
}

DatasetManifest manifest_from_json(const Json& j) {
  const std::string where = "manifest";
  if (!j.is_object()) throw ParseError("manifest: top level must be an object");
  reject_unknown(j,
                 {"schema_version", "intrinsics", "exposure", "near", "far", "contrast", "scene_depth", "event_file",
                  "blur_image", "blur_image_raw", "gt_trajectory", "gt_knots", "gt_sharp_frames", "seeds",
                  "generator"},
                 where);
  DatasetManifest m;
  m.schema_version = field<int>(j, "schema_version", where);
  if (m.schema_version != kManifestSchemaVersion) {
    throw VersionMismatch("manifest schema version " + std::to_string(m.schema_version) + ", expected " +
                          std::to_string(kManifestSchemaVersion));
  }
  if (!j.contains("intrinsics")) throw ParseError("manifest: missing field 'intrinsics'");
  m.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  m.exposure = optional_field<double>(j, "exposure", where).value_or(0.0);
  m.near = field<double>(j, "near", where);
  m.far = field<double>(j, "far", where);
  m.contrast = optional_field<double>(j, "contrast", where).value_or(0.2);
  m.scene_depth = optional_field<double>(j, "scene_depth", where);
  m.event_file = field<std::string>(j, "event_file", where);
  m.blur_image = field<std::string>(j, "blur_image", where);
  m.blur_image_raw = optional_field<std::string>(j, "blur_image_raw", where);
  m.gt_trajectory = optional_field<std::string>(j, "gt_trajectory", where);
  if (j.contains("gt_knots")) {
    for (const auto& k : j.at("gt_knots")) m.gt_knots.push_back(twist_from(k, "manifest gt_knots"));
  }
  if (j.contains("gt_sharp_frames")) {
    for (const auto& f : j.at("gt_sharp_frames")) {
      SharpFrameRef ref;
      ref.t = field<double>(f, "t", "manifest gt_sharp_frames");
      ref.png = field<std::string>(f, "png", "manifest gt_sharp_frames");
      ref.raw = optional_field<std::string>(f, "raw", "manifest gt_sharp_frames").value_or("");
      m.gt_sharp_frames.push_back(ref);
    }
  }
  if (j.contains("seeds")) {
    for (const auto& [k, v] : j.at("seeds").items()) {
      if (!v.is_number_unsigned()) throw ParseError("manifest: seed '" + k + "' must be a non-negative integer");
      m.seeds[k] = v.get<std::uint64_t>();
    }
  }
  if (j.contains("generator")) m.generator = j.at("generator");
  m.validate();
  return m;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  m.validate();
  write_text(path, to_json(m).dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

Image Dataset::sharp_frame(std::size_t i) const {
  const SharpFrameRef& ref = manifest.gt_sharp_frames.at(i);
  if (!ref.raw.empty() && fs::exists(root / ref.raw)) return read_float_image(root / ref.raw);
  return read_png(root / ref.png);
}

std::vector<std::pair<double, RigidTransform>> Dataset::gt_poses() const {
  if (!manifest.gt_trajectory) throw MissingGroundTruth("dataset has no ground-truth trajectory");
  return read_trajectory_samples(root / *manifest.gt_trajectory);
}

Dataset load_dataset(const fs::path& path) {
  Dataset d;
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  d.root = manifest_path.parent_path();
  d.manifest = read_manifest(manifest_path);
  auto require = [&](const std::string& rel, const char* name) {
    if (!fs::exists(d.root / rel)) {
      throw ParseError(std::string("manifest field '") + name + "' points to missing file " + (d.root / rel).string());
    }
  };
  require(d.manifest.blur_image, "blur_image");
  require(d.manifest.event_file, "event_file");
  if (d.manifest.gt_trajectory) require(*d.manifest.gt_trajectory, "gt_trajectory");
  for (const auto& f : d.manifest.gt_sharp_frames) require(f.png, "gt_sharp_frames");

  if (d.manifest.blur_image_raw && fs::exists(d.root / *d.manifest.blur_image_raw)) {
    d.blurry = read_float_image(d.root / *d.manifest.blur_image_raw);
  } else {
    d.blurry = read_png(d.root / d.manifest.blur_image);
  }
  const CameraIntrinsics& K = d.manifest.intrinsics;
  if (d.blurry.width != K.width || d.blurry.height != K.height || d.blurry.channels != 3) {
    throw ValidationError("blurry image size does not match the intrinsics");
  }
  d.events = read_events(d.root / d.manifest.event_file, K.width, K.height);
  d.events.contrast = d.manifest.contrast;
  return d;
}

// Checkpoints ------------------------------------------------------------------

namespace {

Json adam_json(const AdamState& s) {
  return Json{{"size", s.m.size()},        {"step", s.step}, {"beta1", s.beta1},
              {"beta2", s.beta2},          {"eps", s.eps},   {"lr0", s.lr0},
              {"decay_target_frac", s.decay_target_frac}, {"total_steps", s.total_steps}};
}

AdamState adam_from(const Json& j) {
  const std::string where = "checkpoint optimizer";
  AdamState s;
  const auto n = field<std::size_t>(j, "size", where);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.step = field<std::int64_t>(j, "step", where);
  s.beta1 = field<double>(j, "beta1", where);
  s.beta2 = field<double>(j, "beta2", where);
  s.eps = field<double>(j, "eps", where);
  s.lr0 = field<double>(j, "lr0", where);
  s.decay_target_frac = field<double>(j, "decay_target_frac", where);
  s.total_steps = field<std::int64_t>(j, "total_steps", where);
  return s;
}

}  // namespace

void save_checkpoint(const fs::path& path, const TrainingState& s) {
  if (s.field_params.size() != s.arch.parameter_count()) throw ShapeMismatch("checkpoint: parameter count mismatch");
  Json header{{"arch", to_json(s.arch)},
              {"param_count", s.field_params.size()},
              {"trajectory_kind", to_string(s.trajectory.kind)},
              {"knot_count", s.trajectory.knot_twists.size()},
              {"iteration", s.iteration},
              {"rng_state", s.rng_state},
              {"render",
               {{"n_samples", s.render.n_samples},
                {"near", s.render.near},
                {"far", s.render.far},
                {"stratified", s.render.stratified},
                {"white_background", s.render.white_background}}},
              {"field_adam", adam_json(s.field_adam)},
              {"knot_adam", adam_json(s.knot_adam)},
              {"config", s.config}};
  if (s.intrinsics) header["intrinsics"] = to_json(*s.intrinsics);
  const std::string text = header.dump();
  Writer w;
  w.bytes("EVCK", 4);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  for (float v : s.field_params) w.f32(v);
  for (const auto& k : s.trajectory.knot_twists) {
    for (int i = 0; i < 6; ++i) w.f64(k[i]);
  }
  for (const AdamState* a : {&s.field_adam, &s.knot_adam}) {
    for (double v : a->m) w.f64(v);
    for (double v : a->v) w.f64(v);
  }
  w.uint<std::uint64_t>(fnv1a(w.data().data(), w.data().size()));

  // write-then-rename so a crash never leaves a half-written checkpoint
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, w.data());
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

TrainingState load_checkpoint(const fs::path& path, const FieldArch* expected_arch) {
  const auto buf = read_file(path);
  const std::string what = "checkpoint " + path.string();
  if (buf.size() < 24) throw ParseError(what + ": truncated");
  Reader r(buf, what, buf.size() - 8);
  if (r.str(4) != "EVCK") throw ParseError(what + ": bad magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionMismatch(what + ": format version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
  if (stored != fnv1a(buf.data(), buf.size() - 8)) throw ParseError(what + ": checksum mismatch (incomplete write?)");

  const auto hlen = r.uint<std::uint64_t>();
  if (hlen > r.remaining()) throw ParseError(what + ": header length exceeds file");
  Json h;
  try {
    h = Json::parse(r.str(static_cast<std::size_t>(hlen)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": bad header: " + e.what());
  }
  TrainingState s;
  s.arch = field_arch_from_json(h.at("arch"));
  if (expected_arch && !(*expected_arch == s.arch)) {
    throw VersionMismatch(what + ": field architecture differs from the requested one");
  }
  const auto n_params = field<std::size_t>(h, "param_count", what);
  if (n_params != s.arch.parameter_count()) throw VersionMismatch(what + ": parameter count does not match arch");
  s.trajectory.kind = trajectory_kind_from_string(field<std::string>(h, "trajectory_kind", what));
  const auto n_knots = field<std::size_t>(h, "knot_count", what);
  s.iteration = field<std::int64_t>(h, "iteration", what);
  s.rng_state = field<std::string>(h, "rng_state", what);
  const Json& rj = h.at("render");
  s.render.n_samples = field<int>(rj, "n_samples", what);
  s.render.near = field<double>(rj, "near", what);
  s.render.far = field<double>(rj, "far", what);
  s.render.stratified = field<bool>(rj, "stratified", what);
  s.render.white_background = field<bool>(rj, "white_background", what);
  s.field_adam = adam_from(h.at("field_adam"));
  s.knot_adam = adam_from(h.at("knot_adam"));
  if (h.contains("config")) s.config = h.at("config");
  if (h.contains("intrinsics")) s.intrinsics = intrinsics_from_json(h.at("intrinsics"));

  s.field_params.resize(n_params);
  for (float& v : s.field_params) v = r.f32();
  s.trajectory.knot_twists.resize(n_knots);
  for (auto& k : s.trajectory.knot_twists) {
    for (int i = 0; i < 6; ++i) k[i] = r.f64();
  }
  for (AdamState* a : {&s.field_adam, &s.knot_adam}) {
    for (double& v : a->m) v = r.f64();
    for (double& v : a->v) v = r.f64();
  }
  if (r.remaining() != 0) throw ParseError(what + ": trailing bytes before checksum");
  s.trajectory.validate();
  s.render.validate();
  return s;
}

}  // namespace evdeblur
