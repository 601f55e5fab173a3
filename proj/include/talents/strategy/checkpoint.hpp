#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "json.hpp"
#include "talents/core/error.hpp"
#include "talents/core/hash.hpp"
#include "talents/strategy/nn.hpp"

namespace talents::nn {

using json = nlohmann::json;

// Checkpoint = JSON manifest at `path` plus raw little-endian float64
// tensors at `path + ".bin"`. The manifest lists every tensor with its
// shape and byte offset, the format name and version, and a content hash
// of the tensor bytes.

template <class T>
void save_checkpoint(const std::string& path, json manifest, const ParamList<T>& params) {
  const std::string bin = path + ".bin";
  std::ofstream data(bin, std::ios::binary);
  if (!data) throw IoError("cannot write " + bin);
  Fnv1a h;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto* p : params) {
    tensors.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"offset", offset}});
    for (Eigen::Index j = 0; j < p->value.cols(); ++j)
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        const double v = static_cast<double>(p->value(i, j));
        data.write(reinterpret_cast<const char*>(&v), sizeof v);
        h.f64(v);
        offset += sizeof v;
      }
  }
  if (!data) throw IoError("write failed for " + bin);
  manifest["tensors"] = tensors;
  manifest["data_file"] = std::filesystem::path(bin).filename().string();
  manifest["data_hash"] = hex64(h.value());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << manifest.dump(2) << '\n';
  if (!f) throw IoError("write failed for " + path);
}

inline json read_manifest(const std::string& path, const std::string& format, int version) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open checkpoint " + path);
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path + ": " + e.what());
  }
  if (m.value("format", "") != format) throw FormatError("checkpoint " + path + " is not a " + format + " file");
  if (m.value("version", -1) != version)
    throw FormatError("checkpoint " + path + ": unsupported version " + std::to_string(m.value("version", -1)));
  return m;
}

/// Loads tensor values into `params` (matched by name and shape).
template <class T>
void load_tensors(const std::string& path, const json& manifest, const ParamList<T>& params) {
  const std::string bin = path + ".bin";
  std::ifstream data(bin, std::ios::binary);
  if (!data) throw IoError("cannot open " + bin);
  std::map<std::string, json> index;
  for (const auto& t : manifest.at("tensors")) index[t.at("name").template get<std::string>()] = t;
  Fnv1a h;
  for (auto* p : params) {
    auto it = index.find(p->name);
    if (it == index.end()) throw FormatError("checkpoint " + path + " lacks tensor " + p->name);
    const auto rows = it->second.at("rows").template get<Eigen::Index>(), cols = it->second.at("cols").template get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw FormatError("checkpoint " + path + ": tensor " + p->name + " has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(p->value.rows()) + "x" +
                        std::to_string(p->value.cols()));
    data.seekg(static_cast<std::streamoff>(it->second.at("offset").template get<std::uint64_t>()));
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) {
        double v;
        data.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!data) throw FormatError("checkpoint " + bin + " is truncated");
        p->value(i, j) = static_cast<T>(v);
      }
  }
  // Recompute the content hash in file order.
  data.clear();
  data.seekg(0);
  double v;
  while (data.read(reinterpret_cast<char*>(&v), sizeof v)) h.f64(v);
  if (hex64(h.value()) != manifest.value("data_hash", ""))
    throw FormatError("checkpoint " + bin + " does not match its manifest hash");
}

}  // namespace talents::nn
