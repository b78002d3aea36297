#include "slidr/image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace slidr {

namespace {

constexpr char kFloatMagic[8] = {'S', 'L', 'I', 'F', '0', '0', '0', '1'};

// Skips PNM whitespace and '#' comments, then reads one unsigned integer.
int read_pnm_int(std::istream& f) {
  int c = f.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = f.get();
    c = f.get();
  }
  int value = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    value = value * 10 + (c - '0');
    any = true;
    c = f.get();
  }
  if (!any) fail("malformed PNM header");
  return value;
}

}  // namespace

void Image::validate() const {
  if (width < 4 || height < 4) fail("image must be at least 4x4");
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    fail("image buffer size mismatch");
  for (double v : rgb)
    if (!(v >= 0.0 && v <= 1.0)) fail("image channel out of [0,1]");
}

Image Image::filled(int w, int h, double r, double g, double b) {
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (int i = 0; i < w * h; ++i) {
    img.rgb[static_cast<std::size_t>(i) * 3 + 0] = r;
    img.rgb[static_cast<std::size_t>(i) * 3 + 1] = g;
    img.rgb[static_cast<std::size_t>(i) * 3 + 2] = b;
  }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  img.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open for writing: " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.rgb.size());
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(img.rgb[i] * 255.0));
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) fail("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open: " + path);
  char p = 0, six = 0;
  f.get(p);
  f.get(six);
  if (p != 'P' || six != '6') fail("not a P6 PPM: " + path);
  const int w = read_pnm_int(f);
  const int h = read_pnm_int(f);
  const int maxval = read_pnm_int(f);
  if (maxval != 255) fail("only maxval 255 PPM supported: " + path);
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  std::vector<unsigned char> bytes(img.rgb.size());
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (!f) fail("truncated PPM: " + path);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.rgb[i] = static_cast<double>(bytes[i]) / 255.0;
  img.validate();
  return img;
}

void write_float_image(const std::string& path, const Image& img) {
  img.validate();
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open for writing: " + path);
  f.write(kFloatMagic, sizeof(kFloatMagic));
  const std::uint32_t w = static_cast<std::uint32_t>(img.width);
  const std::uint32_t h = static_cast<std::uint32_t>(img.height);
  f.write(reinterpret_cast<const char*>(&w), sizeof(w));
  f.write(reinterpret_cast<const char*>(&h), sizeof(h));
  f.write(reinterpret_cast<const char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size() * sizeof(double)));
  if (!f) fail("write failed: " + path);
}

Image read_float_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kFloatMagic, sizeof(magic)) != 0)
    fail("bad float image magic: " + path);
  std::uint32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&w), sizeof(w));
  f.read(reinterpret_cast<char*>(&h), sizeof(h));
  Image img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(img.rgb.data()),
         static_cast<std::streamsize>(img.rgb.size() * sizeof(double)));
  if (!f) fail("truncated float image: " + path);
  img.validate();
  return img;
}

void write_pgm16(const std::string& path, const std::vector<std::uint16_t>& v,
                 int width, int height) {
  if (v.size() != static_cast<std::size_t>(width) * height)
    fail("pgm buffer size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot open for writing: " + path);
  f << "P5\n" << width << " " << height << "\n65535\n";
  for (std::uint16_t s : v) {
    const unsigned char hi = static_cast<unsigned char>(s >> 8);
    const unsigned char lo = static_cast<unsigned char>(s & 0xff);
    f.put(static_cast<char>(hi));
    f.put(static_cast<char>(lo));
  }
  if (!f) fail("write failed: " + path);
}

std::vector<std::uint16_t> read_pgm16(const std::string& path, int& width,
                                      int& height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open: " + path);
  char p = 0, five = 0;
  f.get(p);
  f.get(five);
  if (p != 'P' || five != '5') fail("not a P5 PGM: " + path);
  width = read_pnm_int(f);
  height = read_pnm_int(f);
  const int maxval = read_pnm_int(f);
  if (maxval != 65535) fail("only 16-bit PGM supported: " + path);
  std::vector<std::uint16_t> v(static_cast<std::size_t>(width) * height);
  for (auto& s : v) {
    const int hi = f.get();
    const int lo = f.get();
    if (hi == EOF || lo == EOF) fail("truncated PGM: " + path);
    s = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return v;
}

}  // namespace slidr
