#include "unimoco/container.hpp"

#include <unistd.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

constexpr char kMagic[4] = {'U', 'M', 'C', '1'};
constexpr int kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

}  // namespace

const ArrayEntry& Container::get(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw FormatError("missing array '" + name + "'");
}

std::string encode_container(const Container& c) {
  nlohmann::json header = c.header;
  header["format_version"] = kFormatVersion;
  auto& listing = header["arrays"] = nlohmann::json::array();
  for (const auto& a : c.arrays) {
    if (element_count(a.shape) != a.data.size()) {
      throw FormatError("array '" + a.name + "' does not match its shape");
    }
    listing.push_back({{"name", a.name}, {"shape", a.shape}});
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& a : c.arrays) {
    for (double d : a.data) put_f64(out, d);
  }
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, kMagic, 4) != 0) throw FormatError("bad magic");
  const auto header_len = static_cast<std::size_t>(get_le(bytes, 4, 4));
  if (bytes.size() < 8 + header_len) throw FormatError("truncated header");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception&) {
    throw FormatError("corrupt header");
  }
  if (!c.header.is_object() || c.header.value("format_version", 0) != kFormatVersion) {
    throw FormatError("unsupported version");
  }
  std::size_t pos = 8 + header_len;
  try {
    for (const auto& entry : c.header.at("arrays")) {
      ArrayEntry a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::size_t n = element_count(a.shape);
      if (n > (bytes.size() - pos) / 8) throw FormatError("truncated payload");
      a.data.resize(n);
      for (std::size_t i = 0; i < n; ++i, pos += 8) {
        a.data[i] = std::bit_cast<double>(get_le(bytes, pos, 8));
      }
      c.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatError("corrupt array listing");
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes");
  c.header.erase("arrays");
  c.header.erase("format_version");
  return c;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw Error("short write to " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw Error("cannot rename into " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_container(const std::string& path, const Container& c) {
  write_file_atomic(path, encode_container(c));
}

Container read_container(const std::string& path) { return decode_container(read_file(path)); }

}  // namespace unimoco
