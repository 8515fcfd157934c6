#include "medctx/train/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medctx/core/errors.hpp"

namespace medctx::train {
namespace {

constexpr char kMagic[8] = {'M', 'E', 'D', 'C', 'T', 'X', 'C', 'K'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return "float32";
    case torch::kDouble: return "float64";
    case torch::kLong: return "int64";
    case torch::kBool: return "bool";
    default: throw InvalidArgument(std::string("checkpoint: unsupported dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from(const std::string& name) {
  if (name == "float32") return torch::kFloat;
  if (name == "float64") return torch::kDouble;
  if (name == "int64") return torch::kLong;
  if (name == "bool") return torch::kBool;
  throw IntegrityError("checkpoint: unknown dtype '" + name + "'");
}

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IntegrityError("checkpoint: truncated header");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

const std::string& Checkpoint::field(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) throw IntegrityError("checkpoint: missing field '" + key + "'");
  return it->second;
}

double Checkpoint::field_double(const std::string& key) const { return std::stod(field(key)); }
long long Checkpoint::field_int(const std::string& key) const { return std::stoll(field(key)); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["fields"] = ckpt.fields;
  manifest["config"] = ckpt.config.entries();
  manifest["tensors"] = nlohmann::json::array();
  manifest["blobs"] = nlohmann::json::array();
  std::vector<torch::Tensor> payload_tensors;
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    const auto nbytes = static_cast<std::uint64_t>(t.numel() * t.element_size());
    manifest["tensors"].push_back({{"name", name},
                                   {"dtype", dtype_name(t.scalar_type())},
                                   {"shape", t.sizes().vec()},
                                   {"offset", offset},
                                   {"nbytes", nbytes}});
    offset += nbytes;
    payload_tensors.push_back(t);
  }
  for (const auto& [name, blob] : ckpt.blobs) {
    manifest["blobs"].push_back({{"name", name}, {"offset", offset}, {"nbytes", blob.size()}});
    offset += blob.size();
  }
  const auto text = manifest.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out.write(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : payload_tensors) {
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    for (const auto& [name, blob] : ckpt.blobs) out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IntegrityError(path.string() + " is not a checkpoint file");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IntegrityError("checkpoint format version " + std::to_string(version) + " is not supported");
  }
  const auto length = get_le<std::uint64_t>(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IntegrityError("checkpoint: truncated manifest");
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
    ckpt.fields = manifest.at("fields").get<std::map<std::string, std::string>>();
    for (const auto& [k, v] : manifest.at("config").items()) ckpt.config.set(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint manifest: ") + e.what());
  }
  auto slice = [&](std::uint64_t offset, std::uint64_t nbytes) {
    if (offset + nbytes > payload.size()) throw IntegrityError("checkpoint: payload truncated");
    return payload.data() + offset;
  };
  for (const auto& entry : manifest.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    auto t = torch::empty(shape, dtype_from(entry.at("dtype").get<std::string>()));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != nbytes) {
      throw IntegrityError("checkpoint: size mismatch for " + entry.at("name").get<std::string>());
    }
    std::memcpy(t.data_ptr(), slice(entry.at("offset").get<std::uint64_t>(), nbytes), nbytes);
    ckpt.tensors[entry.at("name").get<std::string>()] = t;
  }
  for (const auto& entry : manifest.at("blobs")) {
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    ckpt.blobs[entry.at("name").get<std::string>()] =
        std::string(slice(entry.at("offset").get<std::uint64_t>(), nbytes), nbytes);
  }
  return ckpt;
}

void store_module(Checkpoint& ckpt, const torch::nn::Module& module, const std::string& prefix) {
  for (const auto& item : module.named_parameters(true)) ckpt.tensors[prefix + item.key()] = item.value().detach().clone();
  for (const auto& item : module.named_buffers(true)) ckpt.tensors[prefix + item.key()] = item.value().detach().clone();
}

void restore_module(const Checkpoint& ckpt, torch::nn::Module& module, const std::string& prefix) {
  torch::NoGradGuard guard;
  auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    auto it = ckpt.tensors.find(prefix + name);
    if (it == ckpt.tensors.end()) throw IntegrityError("checkpoint: missing tensor " + prefix + name);
    if (!it->second.sizes().equals(target.sizes())) {
      throw IntegrityError("checkpoint: shape mismatch for " + prefix + name);
    }
    target.copy_(it->second);
  };
  for (auto& item : module.named_parameters(true)) copy_into(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) copy_into(item.key(), item.value());
}

std::string serialize_optimizer(const torch::optim::Optimizer& optimizer) {
  torch::serialize::OutputArchive archive;
  optimizer.save(archive);
  std::ostringstream os;
  archive.save_to(os);
  return os.str();
}

void deserialize_optimizer(const std::string& blob, torch::optim::Optimizer& optimizer) {
  torch::serialize::InputArchive archive;
  std::istringstream is(blob);
  archive.load_from(is);
  optimizer.load(archive);
}

}  // namespace medctx::train
