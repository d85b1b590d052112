#pragma once

// On-disk artifacts. Byte layouts are documented in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evdeblur/camera.hpp"
#include "evdeblur/events.hpp"
#include "evdeblur/field.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/optim.hpp"
#include "evdeblur/render.hpp"
#include "evdeblur/trajectory.hpp"

namespace evdeblur {

using Json = nlohmann::ordered_json;

// Images ---------------------------------------------------------------------

/// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& img);
/// Decodes gray, gray+alpha, RGB or RGBA PNGs (8 or 16 bit) to 3-channel floats.
Image read_png(const std::filesystem::path& path);

/// Raw float32 sidecar: "EVF1", u32 width, u32 height, u32 channels, data.
void write_float_image(const std::filesystem::path& path, const Image& img);
Image read_float_image(const std::filesystem::path& path);

// Events ---------------------------------------------------------------------

/// Binary: "EVT1", u32 width, u32 height, u32 count, then 16 bytes per event
/// (f64 t, u16 x, u16 y, i8 p, 3 zero bytes), little-endian.
void write_events(const std::filesystem::path& path, const EventStream& stream);
/// Text: one "t x y p" per line.
void write_events_text(const std::filesystem::path& path, const EventStream& stream);
/// Reads either format (binary is detected by its magic). The text format
/// carries no sensor size, so width/height must then be given. Validates.
EventStream read_events(const std::filesystem::path& path, int width = 0, int height = 0);

// Dataset manifest ------------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

struct SharpFrameRef {
  double t = 0.0;
  std::string png;
  std::string raw;  // optional float sidecar, empty if absent
};

struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  CameraIntrinsics intrinsics;
  double exposure = 0.0;
  double near = 2.0;
  double far = 6.0;
  double contrast = 0.2;
  std::optional<double> scene_depth;
  std::string event_file;
  std::string blur_image;
  std::optional<std::string> blur_image_raw;
  std::optional<std::string> gt_trajectory;
  std::vector<Vector6d> gt_knots;  // empty if unknown
  std::vector<SharpFrameRef> gt_sharp_frames;
  std::map<std::string, std::uint64_t> seeds;
  Json generator = Json::object();

  void validate() const;
};

Json to_json(const DatasetManifest& m);
/// ParseError names the missing or malformed field.
DatasetManifest manifest_from_json(const Json& j);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct Dataset {
  std::filesystem::path root;
  DatasetManifest manifest;
  Image blurry;
  EventStream events;

  bool has_ground_truth() const { return manifest.gt_trajectory.has_value() && !manifest.gt_sharp_frames.empty(); }
  /// Sharp reference frame i (float sidecar when present).
  Image sharp_frame(std::size_t i) const;
  /// Ground-truth pose samples; MissingGroundTruth if absent.
  std::vector<std::pair<double, RigidTransform>> gt_poses() const;
};

/// Accepts the dataset directory or the manifest path. Checks referenced files
/// exist and prefers the float sidecar of the blurry image.
Dataset load_dataset(const std::filesystem::path& path);

// Checkpoints ----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingState {
  FieldArch arch;
  std::vector<float> field_params;
  Trajectory trajectory;
  AdamState field_adam;
  AdamState knot_adam;
  std::string rng_state;
  std::int64_t iteration = 0;
  RenderSettings render;
  std::optional<CameraIntrinsics> intrinsics;  // camera the field was fit with
  Json config = Json::object();
};

/// "EVCK", u32 version, u64 header length, JSON header, f32 params, f64 knot
/// twists, Adam moments (f64), u64 FNV-1a checksum of everything before it.
void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);
/// VersionMismatch on a different format version or, when given, a different
/// field architecture. ParseError on truncation or checksum failure.
TrainingState load_checkpoint(const std::filesystem::path& path, const FieldArch* expected_arch = nullptr);

Json to_json(const FieldArch& arch);
FieldArch field_arch_from_json(const Json& j);
Json to_json(const CameraIntrinsics& K);
CameraIntrinsics intrinsics_from_json(const Json& j);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace evdeblur
