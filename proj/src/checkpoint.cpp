#include "gridrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "gridrl/errors.hpp"

namespace gridrl::ad {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void put_le(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_le(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

nlohmann::json read_manifest(const std::filesystem::path& stem) {
  const auto path = with_suffix(stem, ".json");
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("checkpoint manifest not found: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad checkpoint manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace

bool checkpoint_exists(const std::filesystem::path& stem) {
  return std::filesystem::exists(with_suffix(stem, ".json")) &&
         std::filesystem::exists(with_suffix(stem, ".bin"));
}

void save_checkpoint(const std::filesystem::path& stem, const ParamList& params,
                     const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["format"] = "gridrl-checkpoint-v1";
  manifest["dtype"] = "float64-le";
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    const Matrix& m = *p.value;
    manifest["tensors"].push_back({{"name", p.name},
                                   {"shape", {m.rows(), m.cols()}},
                                   {"offset", offset},
                                   {"count", m.size()}});
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) put_le(bin, m(r, c));
    }
    offset += 8 * static_cast<std::uint64_t>(m.size());
  }
  std::ofstream json(with_suffix(stem, ".json"), std::ios::binary);
  json << manifest.dump(2) << '\n';
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& stem) {
  return read_manifest(stem).value("meta", nlohmann::json::object());
}

void load_checkpoint(const std::filesystem::path& stem, const ParamList& params) {
  const nlohmann::json manifest = read_manifest(stem);
  const auto bin_path = with_suffix(stem, ".bin");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw MissingArtifactError("checkpoint blob not found: " + bin_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::map<std::string, nlohmann::json> entries;
  try {
    for (const auto& t : manifest.at("tensors")) entries[t.at("name").get<std::string>()] = t;
    for (const auto& p : params) {
      auto it = entries.find(p.name);
      if (it == entries.end()) throw ParseError("checkpoint lacks tensor " + p.name);
      const auto& t = it->second;
      const Index rows = t.at("shape").at(0).get<Index>();
      const Index cols = t.at("shape").at(1).get<Index>();
      if (rows != p.value->rows() || cols != p.value->cols()) {
        throw ParseError("checkpoint shape mismatch for " + p.name);
      }
      const auto offset = t.at("offset").get<std::uint64_t>();
      if (offset + 8 * static_cast<std::uint64_t>(rows * cols) > blob.size()) {
        throw ParseError("checkpoint blob truncated at " + p.name);
      }
      const unsigned char* b = blob.data() + offset;
      for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c, b += 8) (*p.value)(r, c) = get_le(b);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint manifest: ") + e.what());
  }
}

}  // namespace gridrl::ad
