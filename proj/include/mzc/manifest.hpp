#pragma once

// Run manifest: the reproducibility record written next to every output.

#include <mzc/error.hpp>
#include <mzc/source_model.hpp>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mzc {

inline constexpr std::string_view kToolkitVersion = "1.0.0";
inline constexpr int kManifestSchemaVersion = 1;

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

inline std::string file_sha256(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

struct FileDigest {
  std::string path;
  std::string sha256;

  bool operator==(const FileDigest &) const = default;
};

struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  std::string toolkit_version{kToolkitVersion};
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json parameters = nlohmann::json::object(); ///< full validated config tree
  nlohmann::json derived = nlohmann::json::object();    ///< rates, windows and other computed values
  std::string created_utc;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;

  bool operator==(const RunManifest &) const = default;
};

inline nlohmann::json manifest_constants() {
  return {{"planck_j_s", constants::planck}, {"speed_of_light_m_s", constants::speed_of_light}};
}

inline void to_json(nlohmann::json &j, const FileDigest &d) { j = {{"path", d.path}, {"sha256", d.sha256}}; }

inline void to_json(nlohmann::json &j, const RunManifest &m) {
  j = nlohmann::json{{"schema_version", m.schema_version},
                     {"toolkit_version", m.toolkit_version},
                     {"command", m.command},
                     {"seed", m.seed},
                     {"constants", manifest_constants()},
                     {"parameters", m.parameters},
                     {"derived", m.derived},
                     {"created_utc", m.created_utc},
                     {"inputs", m.inputs},
                     {"outputs", m.outputs}};
}

namespace manifest_detail {

inline void check_keys(const nlohmann::json &j, const std::set<std::string> &keys, std::string_view what) {
  if (!j.is_object()) throw DataError(std::string(what) + ": expected a JSON object");
  for (const auto &[k, v] : j.items())
    if (!keys.count(k)) throw DataError(std::string(what) + ": unknown key '" + k + "'");
  for (const auto &k : keys)
    if (!j.contains(k)) throw DataError(std::string(what) + ": missing key '" + k + "'");
}

inline std::vector<FileDigest> digests(const nlohmann::json &j, std::string_view what) {
  if (!j.is_array()) throw DataError(std::string(what) + ": expected an array");
  std::vector<FileDigest> out;
  for (const auto &e : j) {
    check_keys(e, {"path", "sha256"}, what);
    out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>()});
  }
  return out;
}

} // namespace manifest_detail

inline RunManifest manifest_from_json(const nlohmann::json &j) {
  using manifest_detail::check_keys;
  if (!j.is_object() || !j.contains("schema_version")) throw SchemaVersionError("manifest: missing schema_version");
  const int version = j.at("schema_version").get<int>();
  if (version != kManifestSchemaVersion)
    throw SchemaVersionError("manifest schema v" + std::to_string(version) + " is not supported (expected v" +
                             std::to_string(kManifestSchemaVersion) + ")");
  check_keys(j, {"schema_version", "toolkit_version", "command", "seed", "constants", "parameters", "derived",
                 "created_utc", "inputs", "outputs"},
             "manifest");
  try {
    RunManifest m;
    m.schema_version = version;
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.parameters = j.at("parameters");
    m.derived = j.at("derived");
    m.created_utc = j.at("created_utc").get<std::string>();
    m.inputs = manifest_detail::digests(j.at("inputs"), "manifest inputs");
    m.outputs = manifest_detail::digests(j.at("outputs"), "manifest outputs");
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
}

inline std::string manifest_string(const RunManifest &m) { return nlohmann::json(m).dump(2) + "\n"; }

/// Identity of a run: digest of the manifest without its creation time,
/// output digests or output directory, so outputs can cite it and identical
/// runs share it wherever they are written.
inline std::string manifest_digest(const RunManifest &m) {
  nlohmann::json j = m;
  j.erase("created_utc");
  j.erase("outputs");
  if (j["parameters"].is_object()) j["parameters"].erase("output_dir");
  return sha256_hex(j.dump());
}

inline void write_manifest(const std::filesystem::path &path, const RunManifest &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest_string(m);
}

inline RunManifest read_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

} // namespace mzc
