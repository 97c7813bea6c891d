#pragma once

/// Shared file I/O: address list files (seeds and candidates use the same
/// line format), content hashing for run manifests, and the manifest writer
/// itself. All text artifacts use LF endings, a "# v6forge <kind> format 1"
/// header, and contain no timestamps so byte-identical reruns stay
/// byte-identical.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "v6forge/addr.hpp"
#include "v6forge/errors.hpp"
#include "v6forge/version.hpp"

namespace v6forge::io {

inline constexpr int kAddressListFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

/// One canonical address per line, "# " comments and blank lines allowed.
/// `kind` names the artifact in the header (e.g. "seeds", "candidates").
inline void save_addresses(std::span<const addr::Address> addresses,
                           const std::filesystem::path& path, std::string_view kind) {
  if (kind.empty()) throw ParamError("address list kind must be non-empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "# v6forge " << kind << " format " << kAddressListFormatVersion << '\n';
  for (const addr::Address& a : addresses) out << addr::format_address(a) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

/// Reads an address-per-line file. Comments and blank lines are skipped; a
/// malformed address reports its line number. Duplicates are preserved as
/// written — callers that need a set dedupe themselves.
inline std::vector<addr::Address> load_addresses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<addr::Address> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(addr::parse_address(line));
    } catch (const ParseError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError(path.string() + ": no addresses");
  return out;
}

/// FNV-1a 64 over the raw bytes of a file. Used to fingerprint inputs in
/// run manifests.
inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

/// What a command ran with: enough to reproduce the artifact bit-for-bit.
/// Deliberately excludes wall-clock time and host details.
struct RunManifest {
  std::string command;                             ///< subcommand name
  nlohmann::json config = nlohmann::json::object();  ///< resolved options
  std::map<std::string, std::string> input_hashes;   ///< path -> fnv1a hex
  std::vector<std::string> outputs;                  ///< files this run wrote

  void add_input(const std::filesystem::path& path) {
    input_hashes[path.string()] = hash_hex(fnv1a_file(path));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format_version"] = kManifestFormatVersion;
    j["tool"] = "v6forge";
    j["version"] = kVersionString;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = input_hashes;
    j["outputs"] = outputs;
    return j;
  }
};

/// Writes `<out>.manifest.json` next to an artifact (or to an explicit
/// path). Two-space indent, trailing newline, keys sorted by nlohmann's
/// object ordering — stable across runs.
inline void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << m.to_json().dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  std::filesystem::path p = artifact;
  p += ".manifest.json";
  return p;
}

}  // namespace v6forge::io
