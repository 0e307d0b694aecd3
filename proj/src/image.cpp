#include "vokit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "vokit/error.hpp"

namespace vokit {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorCode::InvalidArgument, "pixel count does not match dimensions");
  }
}

double Image::sample_split(int ix, double fx, int iy, double fy) const {
  if (ix < 0 || iy < 0 || ix > width_ - 1 || iy > height_ - 1) {
    fail(ErrorCode::OutOfBounds, "sample outside image");
  }
  const bool need_x = fx > 0.0;
  const bool need_y = fy > 0.0;
  if ((need_x && ix + 1 > width_ - 1) || (need_y && iy + 1 > height_ - 1)) {
    fail(ErrorCode::OutOfBounds, "sample outside image");
  }
  const double i00 = (*this)(ix, iy);
  const double i10 = need_x ? (*this)(ix + 1, iy) : 0.0;
  const double i01 = need_y ? (*this)(ix, iy + 1) : 0.0;
  const double i11 = need_x && need_y ? (*this)(ix + 1, iy + 1) : 0.0;
  const double top = i00 + fx * (i10 - i00);
  if (!need_y) return need_x ? top : i00;
  const double bottom = i01 + fx * (i11 - i01);
  return top + fy * (bottom - top);
}

double Image::sample(double x, double y) const {
  if (!contains(x, y)) fail(ErrorCode::OutOfBounds, "sample outside image");
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  return sample_split(static_cast<int>(fx0), x - fx0, static_cast<int>(fy0), y - fy0);
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

namespace {

std::string next_token(std::istream& in) {
  std::string token;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  return token;
}

int parse_int(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError, "malformed PGM header in " + path.string());
  }
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  if (next_token(in) != "P5") fail(ErrorCode::ParseError, path.string() + " is not a binary PGM (P5)");
  const int width = parse_int(next_token(in), path);
  const int height = parse_int(next_token(in), path);
  const int maxval = parse_int(next_token(in), path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    fail(ErrorCode::ParseError, "invalid PGM header in " + path.string());
  }
  in.get();  // single whitespace after maxval
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t bytes_per = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(count * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    fail(ErrorCode::ParseError, "truncated PGM data in " + path.string());
  }
  std::vector<double> data(count);
  const double scale = 1.0 / maxval;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = bytes_per == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    data[i] = v * scale;
  }
  return Image(width, height, std::move(data));
}

void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) fail(ErrorCode::InvalidArgument, "bit depth must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const int maxval = bit_depth == 8 ? 255 : 65535;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.data().size() * (bit_depth / 8));
  for (const double v : img.data()) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace vokit
