#include "salengine/manifest.hpp"

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "salengine/error.hpp"

namespace salengine {

namespace {

using nlohmann::json;

std::vector<std::filesystem::path> path_list(const json& doc, const char* key,
                                             const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  if (!doc.contains(key)) return out;
  const json& list = doc.at(key);
  if (!list.is_array()) throw FormatError(std::string("manifest: '") + key + "' must be a list");
  for (const auto& item : list) {
    if (!item.is_string()) {
      throw FormatError(std::string("manifest: '") + key + "' entries must be strings");
    }
    std::filesystem::path p = item.get<std::string>();
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

json relative_list(const std::vector<std::filesystem::path>& paths,
                   const std::filesystem::path& base) {
  json list = json::array();
  for (const auto& p : paths) list.push_back(p.lexically_relative(base).generic_string());
  return list;
}

}  // namespace

RunManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("manifest: top level must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "video_id" && key != "frames" && key != "saliency" && key != "fixations") {
      throw FormatError("manifest: unknown key '" + key + "'");
    }
  }
  RunManifest m;
  if (doc.contains("video_id")) {
    if (!doc["video_id"].is_string()) throw FormatError("manifest: 'video_id' must be a string");
    m.video_id = doc["video_id"].get<std::string>();
  }
  m.frames = path_list(doc, "frames", base_dir);
  m.saliency = path_list(doc, "saliency", base_dir);
  m.fixations = path_list(doc, "fixations", base_dir);
  if (m.frames.empty()) throw UsageError("manifest lists no frames");
  if (!m.saliency.empty() && m.saliency.size() != m.frames.size()) {
    throw UsageError("manifest: " + std::to_string(m.saliency.size()) + " saliency maps for " +
                     std::to_string(m.frames.size()) + " frames");
  }
  if (!m.fixations.empty() && m.fixations.size() != m.frames.size()) {
    throw UsageError("manifest: " + std::to_string(m.fixations.size()) + " fixation maps for " +
                     std::to_string(m.frames.size()) + " frames");
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(detail::read_file(path), path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::string to_json_text(const RunManifest& m, const std::filesystem::path& base_dir) {
  nlohmann::ordered_json doc;
  doc["video_id"] = m.video_id;
  doc["frames"] = relative_list(m.frames, base_dir);
  if (!m.saliency.empty()) doc["saliency"] = relative_list(m.saliency, base_dir);
  if (!m.fixations.empty()) doc["fixations"] = relative_list(m.fixations, base_dir);
  return doc.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  detail::write_file(path, to_json_text(m, path.parent_path()));
}

}  // namespace salengine
