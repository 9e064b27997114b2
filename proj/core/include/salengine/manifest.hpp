#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace salengine {

/// One video: ordered frame files plus optional ground truth aligned 1:1
/// with the frames. Paths are resolved against the manifest's directory.
///
///   {"video_id": "v01",
///    "frames": ["f/0001.ppm", ...],
///    "saliency": ["gt/0001.pgm", ...],     optional
///    "fixations": ["fix/0001.pgm", ...]}   optional
struct RunManifest {
  std::string video_id;
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> saliency;
  std::vector<std::filesystem::path> fixations;
};

/// Throws UsageError for an empty frame list or misaligned ground truth,
/// FormatError for malformed JSON or unknown keys.
RunManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);

std::string to_json_text(const RunManifest& m, const std::filesystem::path& base_dir);
void save_manifest(const std::filesystem::path& path, const RunManifest& m);

}  // namespace salengine
