#include "hrp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hrp/errors.hpp"

namespace hrp {

namespace {

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const Arch& a = params.arch;
  for (int v : {a.input, a.hidden, a.classes, a.proj}) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  for (double v : params.values) put_le<double>(out, v);
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw std::runtime_error("not a checkpoint (bad magic)");
  std::size_t pos = sizeof kCheckpointMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Arch a;
  a.input = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  a.hidden = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  a.classes = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  a.proj = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  if (!a.valid()) throw std::runtime_error("checkpoint has an invalid architecture");
  ModelParams p(a);
  for (double& v : p.values) v = get_le<double>(bytes, pos);
  if (pos != bytes.size()) throw std::runtime_error("checkpoint has trailing bytes");
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto bytes = encode_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace hrp
