#pragma once

// JSON Lines persistence for datasets plus the sidecar manifest.

#include "l3d/datagen.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace l3d {

inline constexpr int kDatasetFormatVersion = 1;

namespace detail {

template <class M>
nlohmann::json rows_to_json(const M& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(std::move(row));
  }
  return out;
}

template <class M>
M rows_from_json(const nlohmann::json& j, Eigen::Index cols, const char* what) {
  M m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw FormatError(std::string(what) + " row " + std::to_string(i) + " has wrong width");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open '" + p.string() + "' for reading");
  return f;
}

inline std::string read_file(const std::filesystem::path& p) {
  auto f = open_in(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view text) {
  auto f = open_out(p);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for '" + p.string() + "'");
}

inline nlohmann::json parse_json(std::string_view text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": " + e.what());
  }
}

}  // namespace detail

inline nlohmann::json camera_to_json(const Camera& c) {
  return {{"position", {c.position.x(), c.position.y(), c.position.z()}},
          {"target", {c.target.x(), c.target.y(), c.target.z()}},
          {"fov_y", c.fov_y},
          {"image_size", {c.width, c.height}}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  const auto& p = j.at("position");
  const auto& t = j.at("target");
  c.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  c.target = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  c.fov_y = j.at("fov_y").get<double>();
  c.width = j.at("image_size").at(0).get<int>();
  c.height = j.at("image_size").at(1).get<int>();
  return c;
}

inline nlohmann::json record_to_json(const DatasetRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["species"] = std::string(to_string(r.species));
  j["action"] = r.action;
  j["frame_index"] = r.frame_index;
  j["k2d_norm"] = detail::rows_to_json(r.k2d_norm);
  j["k3d_norm"] = detail::rows_to_json(r.k3d_norm);
  j["camera"] = camera_to_json(r.camera);
  j["subject_scale"] = r.subject_scale;
  return j;
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  try {
    DatasetRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.species = species_from_string(j.at("species").get<std::string>());
    r.action = j.at("action").get<std::string>();
    r.frame_index = j.at("frame_index").get<std::uint64_t>();
    r.k2d_norm = detail::rows_from_json<Points2>(j.at("k2d_norm"), 2, "k2d_norm");
    r.k3d_norm = detail::rows_from_json<Points3>(j.at("k3d_norm"), 3, "k3d_norm");
    r.camera = camera_from_json(j.at("camera"));
    r.subject_scale = j.at("subject_scale").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset record: ") + e.what());
  }
}

inline void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& data) {
  auto f = detail::open_out(path);
  for (const auto& r : data) f << record_to_json(r).dump() << '\n';
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  auto f = detail::open_in(path);
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::json gen_config_to_json(const GenConfig& c) {
  return {{"seed", c.seed},
          {"fps", c.fps},
          {"target_count", c.target_count},
          {"scale_range", {c.scale.min, c.scale.max}},
          {"orbit",
           {{"radius_range", {c.orbit.radius.min, c.orbit.radius.max}},
            {"elevation_range", {c.orbit.elevation.min, c.orbit.elevation.max}},
            {"revolutions", c.orbit.revolutions}}},
          {"image_size", {c.image_width, c.image_height}},
          {"pose_jitter_deg", c.pose_jitter_deg}};
}

/// Overlays any fields present in `j` onto `base`.
inline GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {}) {
  try {
    auto range = [](const nlohmann::json& r) { return Range{r.at(0).get<double>(), r.at(1).get<double>()}; };
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("fps")) base.fps = j["fps"].get<double>();
    if (j.contains("target_count")) base.target_count = j["target_count"].get<std::size_t>();
    if (j.contains("scale_range")) base.scale = range(j["scale_range"]);
    if (j.contains("orbit")) {
      const auto& o = j["orbit"];
      if (o.contains("radius_range")) base.orbit.radius = range(o["radius_range"]);
      if (o.contains("elevation_range")) base.orbit.elevation = range(o["elevation_range"]);
      if (o.contains("revolutions")) base.orbit.revolutions = o["revolutions"].get<double>();
    }
    if (j.contains("image_size")) {
      base.image_width = j["image_size"].at(0).get<int>();
      base.image_height = j["image_size"].at(1).get<int>();
    }
    if (j.contains("pose_jitter_deg")) base.pose_jitter_deg = j["pose_jitter_deg"].get<double>();
    return base;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("generation config: ") + e.what());
  }
}

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  Species species = Species::custom;
  GenConfig config;
  std::string skeleton_hash;
  std::size_t record_count = 0;

  nlohmann::json to_json() const {
    return {{"format_version", format_version},
            {"species", std::string(to_string(species))},
            {"config", gen_config_to_json(config)},
            {"skeleton_hash", skeleton_hash},
            {"record_count", record_count}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    try {
      DatasetManifest m;
      m.format_version = j.at("format_version").get<int>();
      if (m.format_version != kDatasetFormatVersion)
        throw FormatError("dataset format version " + std::to_string(m.format_version) +
                          " unsupported (expected " + std::to_string(kDatasetFormatVersion) + ")");
      m.species = species_from_string(j.at("species").get<std::string>());
      m.config = gen_config_from_json(j.at("config"));
      m.skeleton_hash = j.at("skeleton_hash").get<std::string>();
      m.record_count = j.at("record_count").get<std::size_t>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("dataset manifest: ") + e.what());
    }
  }
};

/// `<dataset>.manifest.json` next to the dataset file.
inline std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
  auto p = dataset;
  p += ".manifest.json";
  return p;
}

inline void write_manifest(const std::filesystem::path& dataset, const DatasetManifest& m) {
  detail::write_file(manifest_path(dataset), m.to_json().dump(2) + "\n");
}

inline DatasetManifest read_manifest(const std::filesystem::path& dataset) {
  const auto p = manifest_path(dataset);
  return DatasetManifest::from_json(detail::parse_json(detail::read_file(p), p.string()));
}

inline std::string variance_csv(const std::vector<ActionSpread>& rows) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << "action,count,sigma_x,sigma_y,sigma_z\n";
  for (const auto& r : rows)
    ss << r.action << ',' << r.count << ',' << r.sigma.x() << ',' << r.sigma.y() << ',' << r.sigma.z() << '\n';
  return ss.str();
}

}  // namespace l3d
