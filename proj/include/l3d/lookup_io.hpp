#pragma once

// Lookup table files (JSON Lines or packed binary) and cluster report CSVs.

#include "l3d/dataset_io.hpp"
#include "l3d/lookup.hpp"

#include <bit>
#include <map>

namespace l3d {

inline constexpr int kTableFormatVersion = 1;
inline constexpr std::string_view kTableMagic = "L3DTABLE";

namespace detail {

inline nlohmann::json table_header(const LookupTable& t) {
  return {{"format", "l3d-lookup"},
          {"format_version", kTableFormatVersion},
          {"k_d", t.k_d()},
          {"soft_subset", t.soft_subset()},
          {"entry_count", t.size()}};
}

struct TableHeader {
  std::size_t k_d = 0;
  std::vector<std::size_t> soft_subset;
  std::size_t entry_count = 0;
};

inline TableHeader parse_table_header(const nlohmann::json& h) {
  try {
    const int v = h.at("format_version").get<int>();
    if (v != kTableFormatVersion)
      throw FormatError("lookup table format version " + std::to_string(v) + " unsupported (expected " +
                        std::to_string(kTableFormatVersion) + ")");
    return {h.at("k_d").get<std::size_t>(), h.at("soft_subset").get<std::vector<std::size_t>>(),
            h.at("entry_count").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lookup table header: ") + e.what());
  }
}

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::string_view in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw FormatError("lookup table blob truncated");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(in[pos + static_cast<std::size_t>(i)]);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace detail

/// Header line followed by one JSON object per entry.
inline std::string serialize_table_jsonl(const LookupTable& t) {
  std::string out = detail::table_header(t).dump() + "\n";
  for (const auto& e : t.entries()) {
    const nlohmann::json j = {{"record_id", e.record_id},
                              {"action", e.action},
                              {"frame_index", e.frame_index},
                              {"pose", detail::rows_to_json(e.pose)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

/// Magic, u64 header length, JSON header, then per entry: u64 record id,
/// u64 frame index, u32 action index, k_d*3 float64; all little-endian.
inline std::string serialize_table_binary(const LookupTable& t) {
  std::map<std::string, std::uint32_t> action_ids;
  std::vector<std::string> actions;
  for (const auto& e : t.entries())
    if (action_ids.emplace(e.action, static_cast<std::uint32_t>(actions.size())).second) actions.push_back(e.action);
  std::string blob;
  for (const auto& e : t.entries()) {
    detail::put_le(blob, e.record_id, 8);
    detail::put_le(blob, e.frame_index, 8);
    detail::put_le(blob, action_ids.at(e.action), 4);
    for (Eigen::Index i = 0; i < e.pose.size(); ++i) detail::put_le(blob, std::bit_cast<std::uint64_t>(e.pose.data()[i]), 8);
  }
  auto h = detail::table_header(t);
  h["actions"] = actions;
  h["blob_bytes"] = blob.size();
  h["checksum"] = hex64(fnv1a64(blob));
  const std::string hs = h.dump();
  std::string out(kTableMagic);
  detail::put_le(out, hs.size(), 8);
  return out + hs + blob;
}

inline LookupTable deserialize_table(std::string_view bytes) {
  if (bytes.substr(0, kTableMagic.size()) == kTableMagic) {
    std::size_t pos = kTableMagic.size();
    const auto hlen = detail::get_le(bytes, pos, 8);
    if (hlen > bytes.size() - pos) throw FormatError("lookup table header length exceeds file size");
    const auto h = detail::parse_json(bytes.substr(pos, hlen), "lookup table header");
    const auto th = detail::parse_table_header(h);
    const std::string_view blob = bytes.substr(pos + hlen);
    std::vector<std::string> actions;
    try {
      if (h.at("blob_bytes").get<std::size_t>() != blob.size()) throw FormatError("lookup table blob size mismatch");
      if (h.at("checksum").get<std::string>() != hex64(fnv1a64(blob))) throw FormatError("lookup table checksum mismatch");
      actions = h.at("actions").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("lookup table header: ") + e.what());
    }
    std::vector<LookupEntry> entries(th.entry_count);
    std::size_t p = 0;
    for (auto& e : entries) {
      e.record_id = detail::get_le(blob, p, 8);
      e.frame_index = detail::get_le(blob, p, 8);
      const auto a = detail::get_le(blob, p, 4);
      if (a >= actions.size()) throw FormatError("lookup table action index out of range");
      e.action = actions[a];
      e.pose.resize(static_cast<Eigen::Index>(th.k_d), 3);
      for (Eigen::Index i = 0; i < e.pose.size(); ++i) e.pose.data()[i] = std::bit_cast<double>(detail::get_le(blob, p, 8));
    }
    if (p != blob.size()) throw FormatError("lookup table blob has trailing bytes");
    return LookupTable(th.soft_subset, std::move(entries));
  }

  std::size_t lineno = 0;
  std::size_t start = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (start < bytes.size()) {
      const auto end = std::min(bytes.find('\n', start), bytes.size());
      const auto line = bytes.substr(start, end - start);
      start = end + 1;
      ++lineno;
      if (!line.empty()) return line;
    }
    return std::nullopt;
  };
  const auto first = next_line();
  if (!first) throw FormatError("lookup table file is empty");
  const auto th = detail::parse_table_header(detail::parse_json(*first, "lookup table header"));
  std::vector<LookupEntry> entries;
  entries.reserve(th.entry_count);
  while (const auto line = next_line()) {
    const auto where = "lookup table line " + std::to_string(lineno);
    const auto j = detail::parse_json(*line, where);
    try {
      LookupEntry e;
      e.record_id = j.at("record_id").get<std::uint64_t>();
      e.action = j.at("action").get<std::string>();
      e.frame_index = j.at("frame_index").get<std::uint64_t>();
      e.pose = detail::rows_from_json<Points3>(j.at("pose"), 3, "pose");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (entries.size() != th.entry_count)
    throw FormatError("lookup table declares " + std::to_string(th.entry_count) + " entries but holds " +
                      std::to_string(entries.size()));
  for (const auto& e : entries)
    if (static_cast<std::size_t>(e.pose.rows()) != th.k_d) throw FormatError("lookup table entry has wrong k_d");
  return LookupTable(th.soft_subset, std::move(entries));
}

enum class TableEncoding { jsonl, binary };

inline void save_table(const std::filesystem::path& p, const LookupTable& t, TableEncoding enc = TableEncoding::jsonl) {
  detail::write_file(p, enc == TableEncoding::binary ? serialize_table_binary(t) : serialize_table_jsonl(t));
}

/// Reads either encoding; the binary form is recognized by its magic.
inline LookupTable load_table(const std::filesystem::path& p) {
  try {
    return deserialize_table(detail::read_file(p));
  } catch (const FormatError& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

/// entry_id,cluster,action,pc1,pc2
inline std::string cluster_assignments_csv(const LookupTable& t, const ClusterReport& r) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "entry_id,cluster,action,pc1,pc2\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double pc1 = r.pca2.cols() > 0 ? r.pca2(row, 0) : 0.0;
    const double pc2 = r.pca2.cols() > 1 ? r.pca2(row, 1) : 0.0;
    ss << t.entry(i).record_id << ',' << r.assignments[i] << ',' << t.entry(i).action << ',' << pc1 << ',' << pc2
       << '\n';
  }
  return ss.str();
}

/// cluster,size,majority_action,purity
inline std::string cluster_summary_csv(const ClusterReport& r) {
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed << "cluster,size,majority_action,purity\n";
  for (std::size_t c = 0; c < r.clusters.size(); ++c)
    ss << c << ',' << r.clusters[c].size << ',' << r.clusters[c].majority_action << ',' << r.clusters[c].purity << '\n';
  return ss.str();
}

}  // namespace l3d
