// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/detector/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

namespace cvl::detector {
namespace {

int read_header_int(std::istream& in) {
  int value = -1;
  while (in) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  if (!(in >> value) || value < 0) throw std::runtime_error("ppm: malformed header");
  return value;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6" && magic != "P3") throw std::runtime_error("ppm: unsupported format in " + path.string());
  Image img;
  img.width = read_header_int(in);
  img.height = read_header_int(in);
  const int maxval = read_header_int(in);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 255)
    throw std::runtime_error("ppm: unsupported dimensions or maxval");
  const size_t n = static_cast<size_t>(img.width) * img.height * 3;
  img.rgb.resize(n);
  const auto rescale = [&](int v) { return static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval)); };
  if (magic == "P6") {
    in.get();
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("ppm: truncated pixel data");
    if (maxval != 255)
      for (auto& v : img.rgb) v = rescale(v);
  } else {
    for (size_t i = 0; i < n; ++i) {
      int v = 0;
      if (!(in >> v) || v < 0 || v > maxval) throw std::runtime_error("ppm: bad pixel value");
      img.rgb[i] = rescale(v);
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

Image synthetic_image(int width, int height, std::uint64_t seed) {
  Image img{width, height, std::vector<std::uint8_t>(static_cast<size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        img.rgb[(static_cast<size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>((x * (c + 1) * 255 / std::max(width, 1) + y * 128 / std::max(height, 1)) % 256);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> colour(0, 255);
  for (int r = 0; r < 6; ++r) {
    std::uniform_int_distribution<int> xs(0, width - 1), ys(0, height - 1);
    int x1 = xs(rng), x2 = xs(rng), y1 = ys(rng), y2 = ys(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    const int rgb[3] = {colour(rng), colour(rng), colour(rng)};
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x)
        for (int c = 0; c < 3; ++c)
          img.rgb[(static_cast<size_t>(y) * width + x) * 3 + c] = static_cast<std::uint8_t>(rgb[c]);
  }
  return img;
}

FeatureMap<float> image_tensor(const Image& image, int size) {
  if (image.width <= 0 || image.height <= 0 || image.rgb.size() != static_cast<size_t>(image.width) * image.height * 3)
    throw ShapeError("image_tensor: invalid image");
  if (size <= 0) throw ShapeError("image_tensor: size must be positive");
  FeatureMap<float> t(3, size, size);
  const double sy = static_cast<double>(image.height) / size, sx = static_cast<double>(image.width) / size;
  for (int oy = 0; oy < size; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double ly = fy - y0;
    for (int ox = 0; ox < size; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double lx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ly) * ((1 - lx) * image.at(y0, x0, c) + lx * image.at(y0, x1, c)) +
                         ly * ((1 - lx) * image.at(y1, x0, c) + lx * image.at(y1, x1, c));
        t.at(c, oy, ox) = static_cast<float>((v / 255.0 - kImageMean[c]) / kImageStd[c]);
      }
    }
  }
  return t;
}

}  // namespace cvl::detector
