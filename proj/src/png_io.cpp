#include "sipmask/png_io.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "sipmask/check.hpp"

namespace sipmask {

namespace {

void put_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v >> 24));
  s.push_back(static_cast<char>(v >> 16));
  s.push_back(static_cast<char>(v >> 8));
  s.push_back(static_cast<char>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::ofstream& out, const char type[4], const std::string& data) {
  std::string buf;
  put_u32(buf, static_cast<uint32_t>(data.size()));
  buf.append(type, 4);
  buf.append(data);
  const uint32_t crc = crc32(
      0, reinterpret_cast<const Bytef*>(buf.data() + 4), static_cast<uInt>(buf.size() - 4));
  put_u32(buf, crc);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<uint8_t>& rgb) {
  SIP_CHECK(rgb.size() == static_cast<size_t>(height) * width * 3,
            "rgb buffer size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  SIP_CHECK(out.good(), "cannot open " << path << " for writing");
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::string ihdr;
  put_u32(ihdr, static_cast<uint32_t>(width));
  put_u32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  write_chunk(out, "IHDR", ihdr);

  std::string raw;
  raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) * 3 + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter type none
    raw.append(reinterpret_cast<const char*>(&rgb[static_cast<size_t>(y) * width * 3]),
               static_cast<size_t>(width) * 3);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::string comp(comp_len, '\0');
  SIP_CHECK(compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
                      reinterpret_cast<const Bytef*>(raw.data()),
                      static_cast<uLong>(raw.size()), 6) == Z_OK,
            "zlib compression failed");
  comp.resize(comp_len);
  write_chunk(out, "IDAT", comp);
  write_chunk(out, "IEND", "");
  SIP_CHECK(out.good(), "write to " << path << " failed");
}

PngImage read_png_rgb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  SIP_CHECK(in.good(), "cannot open PNG " << path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  SIP_CHECK(bytes.size() > 8, "PNG too small: " << path);
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  SIP_CHECK(std::memcmp(bytes.data(), sig, 8) == 0, path << " is not a PNG");

  PngImage img;
  int color_type = -1, bit_depth = -1, channels = 0;
  std::string idat;
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_u32(reinterpret_cast<const uint8_t*>(&bytes[pos]));
    const std::string type = bytes.substr(pos + 4, 4);
    SIP_CHECK(pos + 12 + len <= bytes.size(), "truncated PNG chunk in " << path);
    const char* data = bytes.data() + pos + 8;
    if (type == "IHDR") {
      img.width = static_cast<int>(get_u32(reinterpret_cast<const uint8_t*>(data)));
      img.height = static_cast<int>(get_u32(reinterpret_cast<const uint8_t*>(data + 4)));
      bit_depth = static_cast<uint8_t>(data[8]);
      color_type = static_cast<uint8_t>(data[9]);
      SIP_CHECK(bit_depth == 8, "only 8-bit PNG supported: " << path);
      SIP_CHECK(color_type == 0 || color_type == 2 || color_type == 6,
                "unsupported PNG color type " << color_type);
      SIP_CHECK(static_cast<uint8_t>(data[12]) == 0,
                "interlaced PNG not supported: " << path);
      channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
    } else if (type == "IDAT") {
      idat.append(data, len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  SIP_CHECK(img.width > 0 && img.height > 0 && channels > 0,
            "PNG missing IHDR: " << path);

  const size_t row_bytes = static_cast<size_t>(img.width) * channels;
  const size_t raw_len = (row_bytes + 1) * img.height;
  std::vector<uint8_t> raw(raw_len);
  uLongf out_len = static_cast<uLongf>(raw_len);
  SIP_CHECK(uncompress(raw.data(), &out_len,
                       reinterpret_cast<const Bytef*>(idat.data()),
                       static_cast<uLong>(idat.size())) == Z_OK &&
                out_len == raw_len,
            "PNG inflate failed for " << path);

  // undo per-row filters
  std::vector<uint8_t> pix(static_cast<size_t>(img.height) * row_bytes);
  const int bpp = channels;
  for (int y = 0; y < img.height; ++y) {
    const uint8_t filter = raw[static_cast<size_t>(y) * (row_bytes + 1)];
    const uint8_t* src = &raw[static_cast<size_t>(y) * (row_bytes + 1) + 1];
    uint8_t* dst = &pix[static_cast<size_t>(y) * row_bytes];
    const uint8_t* up = y > 0 ? &pix[static_cast<size_t>(y - 1) * row_bytes] : nullptr;
    for (size_t x = 0; x < row_bytes; ++x) {
      const int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: SIP_CHECK(false, "bad PNG filter " << int(filter));
      }
      dst[x] = static_cast<uint8_t>(v);
    }
  }

  img.rgb.resize(static_cast<size_t>(img.height) * img.width * 3);
  for (size_t i = 0; i < static_cast<size_t>(img.height) * img.width; ++i) {
    if (channels == 1) {
      img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = pix[i];
    } else {
      img.rgb[3 * i] = pix[i * channels];
      img.rgb[3 * i + 1] = pix[i * channels + 1];
      img.rgb[3 * i + 2] = pix[i * channels + 2];
    }
  }
  return img;
}

}  // namespace sipmask
