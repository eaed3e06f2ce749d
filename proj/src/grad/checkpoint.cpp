#include "scenediff/grad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace scenediff::grad {

namespace {

constexpr const char* kMagic = "scenediff-checkpoint";
constexpr int kVersion = 1;

std::string shape_token(const Shape& shape) {
  if (shape.empty()) return "scalar";
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape parse_shape(const std::string& token) {
  Shape shape;
  if (token == "scalar") return shape;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) shape.push_back(std::stoull(part));
  return shape;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".manifest");
}

std::filesystem::path blob_path(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".bin");
}

void save_checkpoint(const std::filesystem::path& stem, const ParamStore& params,
                     const std::map<std::string, std::string>& meta) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream manifest(manifest_path(stem));
  std::ofstream blob(blob_path(stem), std::ios::binary);
  if (!manifest || !blob) throw std::runtime_error("cannot write checkpoint at " + stem.string());

  manifest << kMagic << ' ' << kVersion << '\n';
  manifest << "meta seed " << params.seed() << '\n';
  for (const auto& [key, value] : meta) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint meta entries must be single-line, key without spaces");
    }
    manifest << "meta " << key << ' ' << value << '\n';
  }
  std::size_t offset = 0;
  for (const auto& [name, array] : params.arrays()) {
    manifest << "tensor " << name << ' ' << shape_token(array.shape()) << ' ' << offset << " f32\n";
    for (double v : array.values()) {
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      blob.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    offset += array.size();
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  const auto mpath = manifest_path(stem);
  if (!std::filesystem::exists(mpath)) throw std::runtime_error("checkpoint not found: " + mpath.string());
  std::ifstream manifest(mpath);
  const std::string blob = read_all(blob_path(stem));

  std::string magic;
  int version = 0;
  manifest >> magic >> version;
  if (magic != kMagic || version != kVersion) {
    throw std::runtime_error("not a checkpoint manifest: " + mpath.string());
  }

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::string> meta;
  std::string line;
  std::getline(manifest, line);
  int line_no = 1;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls >> std::ws, value);
      meta[key] = value;
    } else if (kind == "tensor") {
      std::string name, shape, dtype;
      std::size_t offset = 0;
      if (!(ls >> name >> shape >> offset >> dtype) || dtype != "f32") {
        throw std::runtime_error(mpath.string() + ":" + std::to_string(line_no) + ": bad tensor line");
      }
      entries.push_back({name, parse_shape(shape), offset});
    } else {
      throw std::runtime_error(mpath.string() + ":" + std::to_string(line_no) + ": unknown record '" + kind + "'");
    }
  }

  const std::uint64_t seed = meta.count("seed") ? std::stoull(meta.at("seed")) : 0;
  meta.erase("seed");
  Checkpoint ckpt{ParamStore(seed), std::move(meta)};
  for (const auto& e : entries) {
    const std::size_t count = element_count(e.shape);
    if ((e.offset + count) * 4 > blob.size()) {
      throw std::runtime_error("checkpoint blob too short for tensor " + e.name);
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + (e.offset + i) * 4, 4);
      values[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(bits)));
    }
    ckpt.params.set(e.name, DenseArray(e.shape, std::move(values)));
  }
  return ckpt;
}

std::string checkpoint_hash(const std::filesystem::path& stem) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& path : {manifest_path(stem), blob_path(stem)}) {
    for (unsigned char c : read_all(path)) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

}  // namespace scenediff::grad
