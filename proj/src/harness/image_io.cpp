#include "mats/harness/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mats/error.hpp"

namespace mats {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  return std::string(bytes.substr(start, pos - start));
}

std::size_t header_number(std::string_view bytes, std::size_t& pos) {
  const auto tok = header_token(bytes, pos);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit))
    throw InvalidArgument("ppm: malformed header");
  return std::stoul(tok);
}

}  // namespace

Tensor parse_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  if (header_token(bytes, pos) != "P6") throw InvalidArgument("ppm: only binary P6 is supported");
  const std::size_t w = header_number(bytes, pos);
  const std::size_t h = header_number(bytes, pos);
  const std::size_t maxval = header_number(bytes, pos);
  if (w == 0 || h == 0 || maxval != 255) throw InvalidArgument("ppm: need nonzero size, maxval 255");
  ++pos;  // single whitespace byte after maxval
  if (bytes.size() < pos + w * h * 3) throw InvalidArgument("ppm: truncated pixel data");
  Tensor t({h, w, 3});
  auto data = t.data();
  for (std::size_t i = 0; i < w * h * 3; ++i)
    data[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return t;
}

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.extent(2) != 3)
    throw InvalidArgument("ppm: expected H x W x 3 image");
  std::string out = "P6\n" + std::to_string(image.extent(1)) + " " +
                    std::to_string(image.extent(0)) + "\n255\n";
  for (double v : image.data())
    out.push_back(static_cast<char>(static_cast<unsigned char>(
        std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  return out;
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ppm(ss.str());
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace mats
