// Checkpoint directory IO for trained models.
//
// A checkpoint is a directory with two files:
//   manifest.json — model config, named tensor table (shape + byte offset
//                   into params.bin), training seed, and format version.
//   params.bin    — all tensors as little-endian binary32, row major,
//                   concatenated in tensor-table order.
//
// Values are stored in binary32, so a loaded model reproduces the saved one
// to float precision, and saving the loaded model again is byte identical.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "v6forge/errors.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/version.hpp"

namespace v6forge::ckpt {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline std::uint32_t bswap32(std::uint32_t x) {
  return ((x & 0xff000000u) >> 24) | ((x & 0x00ff0000u) >> 8) | ((x & 0x0000ff00u) << 8) |
         ((x & 0x000000ffu) << 24);
}

inline void append_f32_le(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.append(raw, 4);
}

inline double read_f32_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  return static_cast<double>(std::bit_cast<float>(bits));
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

}  // namespace detail

/// Writes the model (and the training seed it was built from) to `dir`,
/// creating the directory if needed.
inline void save_checkpoint(const std::filesystem::path& dir, lm::Transformer& model,
                            std::uint64_t train_seed, int epochs) {
  std::filesystem::create_directories(dir);
  const lm::ModelConfig& cfg = model.config();

  nlohmann::json tensors = nlohmann::json::array();
  std::string blob;
  for (num::Parameter* p : model.parameters()) {
    nlohmann::json entry;
    entry["name"] = p->name;
    entry["shape"] = p->value.shape();
    entry["offset"] = blob.size();
    tensors.push_back(std::move(entry));
    for (double v : p->value.values()) detail::append_f32_le(blob, v);
  }

  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["tool_version"] = kVersionString;
  manifest["dtype"] = "f32le";
  manifest["config"] = {{"layers", cfg.layers},
                        {"heads", cfg.heads},
                        {"d_model", cfg.d_model},
                        {"ff_width", cfg.ff_width},
                        {"enc_len", cfg.enc_len},
                        {"dec_len", cfg.dec_len},
                        {"dropout", cfg.dropout},
                        {"positional_encoding", cfg.positional_encoding},
                        {"output_activation", lm::to_string(cfg.output_activation)}};
  manifest["train"] = {{"seed", train_seed}, {"epochs", epochs}, {"optimizer", "adam(lr-config)"}};
  manifest["tensors"] = std::move(tensors);

  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "params.bin").string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
}

struct LoadedCheckpoint {
  lm::Transformer model;
  std::uint64_t train_seed = 0;
  int epochs = 0;
};

/// Loads a checkpoint directory, validating the manifest against the blob
/// and the model layout. Throws DataError on any mismatch.
inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::slurp(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
  const std::string blob = detail::slurp(dir / "params.bin");

  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion)
      throw DataError("unsupported checkpoint format version " +
                      manifest.at("format_version").dump());
    const nlohmann::json& jc = manifest.at("config");
    lm::ModelConfig cfg;
    cfg.layers = jc.at("layers").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.ff_width = jc.at("ff_width").get<int>();
    cfg.enc_len = jc.at("enc_len").get<int>();
    cfg.dec_len = jc.at("dec_len").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.positional_encoding = jc.at("positional_encoding").get<bool>();
    cfg.output_activation = lm::parse_output_activation(jc.at("output_activation").get<std::string>());

    LoadedCheckpoint out{lm::Transformer(cfg, 0), 0, 0};
    out.train_seed = manifest.at("train").at("seed").get<std::uint64_t>();
    out.epochs = manifest.at("train").at("epochs").get<int>();

    std::vector<num::Parameter*> params = out.model.parameters();
    const nlohmann::json& table = manifest.at("tensors");
    if (table.size() != params.size())
      throw DataError("checkpoint has " + std::to_string(table.size()) + " tensors, expected " +
                      std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const nlohmann::json& entry = table[i];
      num::Parameter* p = params[i];
      if (entry.at("name").get<std::string>() != p->name)
        throw DataError("tensor " + std::to_string(i) + " is \"" +
                        entry.at("name").get<std::string>() + "\", expected \"" + p->name + "\"");
      if (entry.at("shape").get<std::vector<int>>() != p->value.shape())
        throw DataError("tensor \"" + p->name + "\" has unexpected shape");
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = p->value.values().size();
      if (offset + count * 4 > blob.size())
        throw DataError("params.bin too short for tensor \"" + p->name + "\"");
      for (std::size_t k = 0; k < count; ++k)
        p->value.values()[k] = detail::read_f32_le(blob.data() + offset + k * 4);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
}

}  // namespace v6forge::ckpt
