#include "codadapt/archive.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "codadapt/errors.hpp"

namespace codadapt {
namespace {

constexpr char kMagic[8] = {'C', 'O', 'D', 'A', 'R', 'C', 'H', '1'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kInt32: return "i32";
    case torch::kUInt8: return "u8";
    default: break;
  }
  throw InvalidInput(std::string("archive: unsupported dtype ") + c10::toString(t));
}

torch::ScalarType dtype_from_name(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  if (s == "i32") return torch::kInt32;
  if (s == "u8") return torch::kUInt8;
  throw LoadError("archive: unknown dtype tag '" + s + "'");
}

std::string shape_str(at::IntArrayRef sizes) {
  std::ostringstream os;
  os << sizes;
  return os.str();
}

}  // namespace

void write_archive(const std::filesystem::path& path, const TensorMap& tensors,
                   const nlohmann::json& manifest) {
  nlohmann::json header;
  header["manifest"] = manifest;
  header["tensors"] = nlohmann::json::array();

  std::vector<torch::Tensor> payloads;
  payloads.reserve(tensors.size());
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    const std::uint64_t nbytes = c.numel() * c.element_size();
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(c.scalar_type())},
                                 {"shape", c.sizes().vec()},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
    payloads.push_back(std::move(c));
  }

  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("archive: cannot open " + path.string() + " for writing");
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& c : payloads) {
    out.write(static_cast<const char*>(c.data_ptr()),
              static_cast<std::streamsize>(c.numel() * c.element_size()));
  }
  if (!out) throw std::runtime_error("archive: write failed for " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("archive: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("archive: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw LoadError("archive: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("archive: malformed header in " + path.string() + ": " + e.what());
  }

  Archive ar;
  ar.manifest = header.value("manifest", nlohmann::json::object());
  const auto base = static_cast<std::streamoff>(sizeof(kMagic) + sizeof(len) + len);
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != nbytes) {
      throw LoadError("archive: size mismatch for tensor '" + name + "'");
    }
    in.seekg(base + static_cast<std::streamoff>(offset));
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw LoadError("archive: truncated payload for tensor '" + name + "'");
    ar.tensors.emplace(name, std::move(t));
  }
  return ar;
}

LoadReport assign_tensors(TensorMap& targets, const TensorMap& source) {
  LoadReport report;
  for (const auto& [name, src] : source) {
    auto it = targets.find(name);
    if (it == targets.end()) {
      report.unmatched.push_back(name);
      continue;
    }
    if (it->second.sizes() != src.sizes()) {
      throw LoadError("load: shape mismatch for '" + name + "': model expects " +
                      shape_str(it->second.sizes()) + ", checkpoint has " +
                      shape_str(src.sizes()));
    }
    report.loaded.push_back(name);
  }
  for (const auto& [name, dst] : targets) {
    if (!source.count(name)) report.missing.push_back(name);
  }
  torch::NoGradGuard no_grad;
  for (const auto& name : report.loaded) {
    targets.at(name).copy_(source.at(name));
  }
  return report;
}

}  // namespace codadapt
