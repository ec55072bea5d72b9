#pragma once

// Model container: 8-byte magic, u64 little-endian header length, JSON header,
// then every tensor as little-endian float32 in layout order.

#include "l3d/dataset_io.hpp"
#include "l3d/lifter.hpp"

#include <bit>

namespace l3d {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "L3DMODEL";

inline nlohmann::json lifter_config_to_json(const LifterConfig& c) {
  return {{"k_s", c.k_s},
          {"token_dim", c.token_dim},
          {"heads", c.heads},
          {"hidden_dim", c.hidden_dim},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed}};
}

/// Overlays any fields present in `j` onto `base`.
inline LifterConfig lifter_config_from_json(const nlohmann::json& j, LifterConfig base = {}) {
  try {
    if (j.contains("k_s")) base.k_s = j["k_s"].get<std::size_t>();
    if (j.contains("token_dim")) base.token_dim = j["token_dim"].get<Eigen::Index>();
    if (j.contains("heads")) base.heads = j["heads"].get<Eigen::Index>();
    if (j.contains("hidden_dim")) base.hidden_dim = j["hidden_dim"].get<Eigen::Index>();
    if (j.contains("epochs")) base.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    return base;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lifter config: ") + e.what());
  }
}

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(in[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace detail

/// Serialized model bytes. `meta` is stored verbatim under "metadata".
inline std::string serialize_model(const LifterModel& m, const nlohmann::json& meta = nlohmann::json::object()) {
  std::string blob;
  blob.reserve(static_cast<std::size_t>(m.params.size()) * 4);
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m.params[i]));
    for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : m.layout)
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", t.offset * 4}});
  const nlohmann::json header = {{"format_version", kModelFormatVersion},
                                 {"dtype", "float32-le"},
                                 {"config", lifter_config_to_json(m.config)},
                                 {"tensors", tensors},
                                 {"blob_bytes", blob.size()},
                                 {"checksum", hex64(fnv1a64(blob))},
                                 {"metadata", meta}};
  const std::string h = header.dump();
  std::string out(kModelMagic);
  detail::put_u64_le(out, h.size());
  out += h;
  out += blob;
  return out;
}

struct LoadedModel {
  LifterModel model;
  nlohmann::json metadata;
};

inline LoadedModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kModelMagic.size() + 8 || bytes.substr(0, kModelMagic.size()) != kModelMagic)
    throw FormatError("not a model file (bad magic)");
  const std::uint64_t hlen = detail::get_u64_le(bytes.substr(kModelMagic.size(), 8));
  const std::size_t hstart = kModelMagic.size() + 8;
  if (hlen > bytes.size() - hstart) throw FormatError("model header length exceeds file size");
  const auto header = detail::parse_json(bytes.substr(hstart, hlen), "model header");
  const std::string_view blob = bytes.substr(hstart + hlen);
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw FormatError("model format version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    if (header.at("dtype").get<std::string>() != "float32-le") throw FormatError("unsupported model dtype");
    if (header.at("blob_bytes").get<std::size_t>() != blob.size()) throw FormatError("model blob size mismatch");
    if (header.at("checksum").get<std::string>() != hex64(fnv1a64(blob)))
      throw FormatError("model checksum mismatch");

    const LifterConfig cfg = lifter_config_from_json(header.at("config"));
    LoadedModel out{LifterModel(cfg), header.value("metadata", nlohmann::json::object())};
    auto& m = out.model;
    const auto& tensors = header.at("tensors");
    if (tensors.size() != m.layout.size()) throw FormatError("model tensor directory does not match config");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      const auto& s = m.layout[i];
      if (t.at("name").get<std::string>() != s.name || t.at("shape").at(0).get<Eigen::Index>() != s.rows ||
          t.at("shape").at(1).get<Eigen::Index>() != s.cols || t.at("offset").get<Eigen::Index>() != s.offset * 4)
        throw FormatError("model tensor '" + s.name + "' does not match config");
    }
    if (blob.size() != static_cast<std::size_t>(m.params.size()) * 4) throw FormatError("model blob size mismatch");
    for (Eigen::Index i = 0; i < m.params.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b)
        bits = (bits << 8) | static_cast<std::uint8_t>(blob[static_cast<std::size_t>(i * 4 + b)]);
      m.params[i] = std::bit_cast<float>(bits);
    }
    if (!m.params.allFinite()) throw FormatError("model contains non-finite weights");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model header: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& p, const LifterModel& m,
                       const nlohmann::json& meta = nlohmann::json::object()) {
  detail::write_file(p, serialize_model(m, meta));
}

inline LoadedModel load_model(const std::filesystem::path& p) {
  try {
    return deserialize_model(detail::read_file(p));
  } catch (const FormatError& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace l3d
