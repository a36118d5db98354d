#include "radap/core/pnm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace radap::core {

namespace {

void skip_pnm_whitespace(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_pnm_int(std::istream& in) {
  skip_pnm_whitespace(in);
  int v = 0;
  in >> v;
  return v;
}

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PnmHeader read_header(std::istream& in, const char* magic, const std::filesystem::path& path) {
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != magic[0] || m1 != magic[1])
    throw IoError("not a " + std::string(magic) + " file: " + path.string());
  PnmHeader h;
  h.width = read_pnm_int(in);
  h.height = read_pnm_int(in);
  h.maxval = read_pnm_int(in);
  in.get();  // single whitespace before raster
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
    throw IoError("unsupported PNM header in " + path.string());
  return h;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const IntField& gray255) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const int h = static_cast<int>(gray255.rows());
  const int w = static_cast<int>(gray255.cols());
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int v = gray255(y, x);
      row[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    out.write(reinterpret_cast<const char*>(row.data()), w);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

IntField read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const PnmHeader h = read_header(in, "P5", path);
  IntField out(h.height, h.width);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(h.width));
  for (int y = 0; y < h.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), h.width);
    if (!in) throw IoError("truncated PGM: " + path.string());
    for (int x = 0; x < h.width; ++x) out(y, x) = row[static_cast<std::size_t>(x)];
  }
  return out;
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  mask.check_binary();
  IntField gray = mask.values * 255;
  write_pgm(path, gray);
}

BinaryMask read_mask_pgm(const std::filesystem::path& path, MaskOrigin origin) {
  const IntField gray = read_pgm(path);
  if (((gray != 0) && (gray != 255)).any())
    throw IoError("mask file is not two-valued {0,255}: " + path.string());
  BinaryMask mask;
  mask.values = (gray == 255).cast<int>();
  mask.origin = origin;
  return mask;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const int h = image.height();
  const int w = image.width();
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(3 * w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        row[static_cast<std::size_t>(3 * x + c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), 3 * w);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const PnmHeader h = read_header(in, "P6", path);
  Image image(h.height, h.width);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(3 * h.width));
  for (int y = 0; y < h.height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), 3 * h.width);
    if (!in) throw IoError("truncated PPM: " + path.string());
    for (int x = 0; x < h.width; ++x)
      for (int c = 0; c < 3; ++c)
        image.at(c, y, x) = row[static_cast<std::size_t>(3 * x + c)] / 255.0;
  }
  return image;
}

}  // namespace radap::core
