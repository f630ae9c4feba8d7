#include "sipmask/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace sipmask {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'I', 'P', 'T', 'E', 'N', 'S', '1'};

size_t entry_bytes(const ContainerEntry& e) {
  const size_t n = TensorT<float>::count(e.shape);
  return n * (e.dtype == "f32" ? 4 : 8);
}

}  // namespace

void container_write(const std::string& path,
                     const std::vector<ContainerEntry>& entries) {
  nlohmann::json header = nlohmann::json::array();
  std::set<std::string> names;
  size_t offset = 0;
  for (const auto& e : entries) {
    SIP_CHECK(e.dtype == "f32" || e.dtype == "f64",
              "unsupported dtype " << e.dtype);
    SIP_CHECK(names.insert(e.name).second, "duplicate entry name " << e.name);
    const size_t n = TensorT<float>::count(e.shape);
    SIP_CHECK((e.dtype == "f32" ? e.f32.size() : e.f64.size()) == n,
              "entry " << e.name << " data does not match shape");
    header.push_back({{"name", e.name},
                      {"dtype", e.dtype},
                      {"shape", e.shape},
                      {"byte_offset", offset}});
    offset += entry_bytes(e);
  }
  const std::string hdr = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  SIP_CHECK(out.good(), "cannot open " << path << " for writing");
  out.write(kMagic, 8);
  const uint64_t hlen = hdr.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto& e : entries) {
    if (e.dtype == "f32")
      out.write(reinterpret_cast<const char*>(e.f32.data()),
                static_cast<std::streamsize>(e.f32.size() * 4));
    else
      out.write(reinterpret_cast<const char*>(e.f64.data()),
                static_cast<std::streamsize>(e.f64.size() * 8));
  }
  SIP_CHECK(out.good(), "write to " << path << " failed");
}

std::vector<ContainerEntry> container_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  SIP_CHECK(in.good(), "cannot open container " << path);
  char magic[8];
  in.read(magic, 8);
  SIP_CHECK(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
            path << " is not a tensor container (bad magic)");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  SIP_CHECK(in.gcount() == 8, "truncated container header length");
  std::string hdr(hlen, '\0');
  in.read(hdr.data(), static_cast<std::streamsize>(hlen));
  SIP_CHECK(static_cast<uint64_t>(in.gcount()) == hlen,
            "truncated container header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hdr);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("corrupt container header: ") + e.what());
  }
  SIP_CHECK(header.is_array(), "container header must be a JSON array");

  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  std::vector<ContainerEntry> entries;
  std::set<std::string> names;
  size_t expect_offset = 0;
  for (const auto& h : header) {
    ContainerEntry e;
    e.name = h.at("name").get<std::string>();
    e.dtype = h.at("dtype").get<std::string>();
    e.shape = h.at("shape").get<std::vector<int>>();
    const size_t off = h.at("byte_offset").get<size_t>();
    SIP_CHECK(e.dtype == "f32" || e.dtype == "f64",
              "unsupported dtype " << e.dtype << " in " << e.name);
    SIP_CHECK(names.insert(e.name).second, "duplicate entry name " << e.name);
    SIP_CHECK(off == expect_offset,
              "corrupted offset for " << e.name << ": " << off
                                      << " expected " << expect_offset);
    const size_t bytes = entry_bytes(e);
    SIP_CHECK(off + bytes <= payload.size(),
              "truncated payload: entry " << e.name << " needs "
                                          << off + bytes << " bytes, payload has "
                                          << payload.size());
    const size_t n = TensorT<float>::count(e.shape);
    if (e.dtype == "f32") {
      e.f32.resize(n);
      std::memcpy(e.f32.data(), payload.data() + off, bytes);
    } else {
      e.f64.resize(n);
      std::memcpy(e.f64.data(), payload.data() + off, bytes);
    }
    expect_offset = off + bytes;
    entries.push_back(std::move(e));
  }
  SIP_CHECK(expect_offset == payload.size(),
            "payload length " << payload.size() << " inconsistent with header ("
                              << expect_offset << " expected)");
  return entries;
}

const ContainerEntry& container_find(const std::vector<ContainerEntry>& entries,
                                     const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::runtime_error("container entry not found: " + name);
}

}  // namespace sipmask
