#include "pft/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pft/errors.hpp"

namespace pft {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

struct Header {
  std::size_t width = 0, height = 0, maxval = 0, offset = 0;
};

// Parses "Pn <w> <h> <maxval>" followed by exactly one whitespace byte.
Header parse_header(const std::string& bytes, const char* magic) {
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw DataError(std::string("not a binary ") + magic + " image");
  }
  std::size_t pos = 2;
  auto next_number = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw DataError(std::string("malformed ") + magic + " header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw DataError(std::string(magic) + " header value too large");
      ++pos;
    }
    return v;
  };
  Header h;
  h.width = next_number();
  h.height = next_number();
  h.maxval = next_number();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DataError(std::string("malformed ") + magic + " header");
  }
  h.offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw DataError(std::string(magic) + " image has zero extent");
  if (h.maxval == 0 || h.maxval > 255) throw DataError(std::string(magic) + " maxval must be in 1..255");
  return h;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Tensor decode_ppm(const std::string& bytes) {
  const Header h = parse_header(bytes, "P6");
  const std::size_t n = h.width * h.height * 3;
  if (bytes.size() - h.offset < n) throw DataError("P6 payload truncated");
  Tensor img({3, h.height, h.width});
  const double inv = 1.0 / static_cast<double>(h.maxval);
  for (std::size_t y = 0; y < h.height; ++y) {
    for (std::size_t x = 0; x < h.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto byte = static_cast<unsigned char>(bytes[h.offset + (y * h.width + x) * 3 + c]);
        img[(c * h.height + y) * h.width + x] = std::min(1.0, byte * inv);
      }
    }
  }
  return img;
}

Tensor read_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: expected 3xHxW, got " + shape_str(image.shape()));
  const std::size_t H = image.dim(1), W = image.dim(2);
  std::string out = "P6\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + H * W * 3);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        out[header + (y * W + x) * 3 + c] = static_cast<char>(to_byte(image[(c * H + y) * W + x]));
      }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  write_file(path, encode_ppm(image));
}

std::string encode_pgm(const Tensor& gray) {
  if (gray.rank() != 2) throw ShapeError("write_pgm: expected HxW, got " + shape_str(gray.shape()));
  const std::size_t H = gray.rows(), W = gray.cols();
  std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  for (double v : gray.data()) out.push_back(static_cast<char>(to_byte(v)));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& gray) {
  write_file(path, encode_pgm(gray));
}

Tensor read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const Header h = parse_header(bytes, "P5");
  if (bytes.size() - h.offset < h.width * h.height) throw DataError(path.string() + ": P5 payload truncated");
  Tensor img({h.height, h.width});
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<unsigned char>(bytes[h.offset + i]) / static_cast<double>(h.maxval);
  }
  return img;
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear: expected CxHxW, got " + shape_str(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (H == height && W == width) return image;
  Tensor out({C, height, width});
  const double sy = static_cast<double>(H) / static_cast<double>(height);
  const double sx = static_cast<double>(W) / static_cast<double>(width);
  auto coord = [](std::size_t dst, double scale, std::size_t extent, std::size_t& lo, std::size_t& hi, double& t) {
    const double src = std::clamp((static_cast<double>(dst) + 0.5) * scale - 0.5, 0.0, static_cast<double>(extent - 1));
    lo = static_cast<std::size_t>(std::floor(src));
    hi = std::min(lo + 1, extent - 1);
    t = src - static_cast<double>(lo);
  };
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t y0, y1;
    double ty;
    coord(y, sy, H, y0, y1, ty);
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t x0, x1;
      double tx;
      coord(x, sx, W, x0, x1, tx);
      for (std::size_t c = 0; c < C; ++c) {
        const double* plane = image.data().data() + c * H * W;
        const double a = plane[y0 * W + x0], b = plane[y0 * W + x1];
        const double d = plane[y1 * W + x0], e = plane[y1 * W + x1];
        const double top = a + tx * (b - a);
        const double bottom = d + tx * (e - d);
        out[(c * height + y) * width + x] = top + ty * (bottom - top);
      }
    }
  }
  return out;
}

}  // namespace pft
