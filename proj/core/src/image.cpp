#include "tanger/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace tanger {

Image Image::blank(std::size_t height, std::size_t width, double value) {
  Image img;
  img.height = height;
  img.width = width;
  img.pixels.assign(height * width * 3, value);
  return img;
}

void Image::validate() const {
  if (height == 0 || width == 0) {
    throw std::invalid_argument("Image: dimensions must be positive");
  }
  if (pixels.size() != height * width * 3) {
    throw std::invalid_argument("Image: pixel buffer has " + std::to_string(pixels.size()) +
                                " values, expected " + std::to_string(height * width * 3));
  }
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("Image: pixel value " + std::to_string(v) +
                                  " outside [0, 1]");
    }
  }
}

void write_ppm(const std::string& path, const Image& image) {
  image.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(image.pixels[i] * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw std::runtime_error("read_ppm: truncated header in " + path);
  return tok;
}

std::size_t parse_size(const std::string& tok, const std::string& what,
                       const std::string& path) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("read_ppm: bad " + what + " '" + tok + "' in " + path);
  }
  if (pos != tok.size() || v == 0) {
    throw std::runtime_error("read_ppm: bad " + what + " '" + tok + "' in " + path);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
  const std::string magic = next_token(in, path);
  if (magic != "P6") {
    throw std::runtime_error("read_ppm: " + path + " is not a binary PPM (magic '" + magic +
                             "')");
  }
  const std::size_t width = parse_size(next_token(in, path), "width", path);
  const std::size_t height = parse_size(next_token(in, path), "height", path);
  const std::size_t maxval = parse_size(next_token(in, path), "maxval", path);
  if (maxval != 255) {
    throw std::runtime_error("read_ppm: unsupported maxval " + std::to_string(maxval) + " in " +
                             path);
  }
  // exactly one whitespace byte separates the header from the raster
  std::vector<unsigned char> bytes(height * width * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error("read_ppm: truncated pixel data in " + path);
  }
  Image img;
  img.height = height;
  img.width = width;
  img.pixels.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<double>(bytes[i]) / 255.0;
  }
  return img;
}

}  // namespace tanger
