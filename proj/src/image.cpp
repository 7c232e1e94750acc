#include "tct/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "tct/errors.hpp"

namespace tct {

ImageTensor::ImageTensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ImageTensor::ImageTensor(int channels, int height, int width, std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (channels <= 0 || height <= 0 || width <= 0) throw ShapeError("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw ShapeError("image data length does not match its dimensions");
  }
}

ImageTensor resize_bilinear(const ImageTensor& img, int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("resize target must be positive");
  if (height == img.height() && width == img.width()) return img;
  ImageTensor out(img.channels(), height, width);
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = img.at(c, y0, x0) * (1.0 - wx) + img.at(c, y0, x1) * wx;
        const double bottom = img.at(c, y1, x0) * (1.0 - wx) + img.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

ImageTensor crop(const ImageTensor& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.width() || y + h > img.height()) {
    throw ShapeError("crop rectangle outside image");
  }
  ImageTensor out(img.channels(), h, w);
  for (int c = 0; c < img.channels(); ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) out.at(c, yy, xx) = img.at(c, y + yy, x + xx);
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw InputError("netpbm: truncated header");
    return out;
  }

  long number(const char* what) {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        t.size() > 9) {
      throw InputError(std::string("netpbm: invalid ") + what + " '" + t + "'");
    }
    return std::stol(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw InputError("netpbm: missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageTensor decode_netpbm(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw InputError("netpbm: expected binary P5 or P6 magic");
  }
  HeaderReader reader(bytes);
  const bool colour = reader.token() == "P6";
  const long width = reader.number("width");
  const long height = reader.number("height");
  const long maxval = reader.number("maxval");
  if (width <= 0 || height <= 0) throw InputError("netpbm: zero-sized image");
  if (maxval < 1 || maxval > 65535) throw InputError("netpbm: maxval out of range");
  const std::size_t start = reader.raster_start();
  const int in_channels = colour ? 3 : 1;
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t samples = static_cast<std::size_t>(width) * height * in_channels;
  if (bytes.size() - start < samples * sample_bytes) throw InputError("netpbm: truncated raster");

  ImageTensor img(3, static_cast<int>(height), static_cast<int>(width));
  const double denom = static_cast<double>(maxval);
  std::size_t p = start;
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      for (int c = 0; c < in_channels; ++c) {
        unsigned value = bytes[p++];
        if (sample_bytes == 2) value = (value << 8) | bytes[p++];
        if (value > static_cast<unsigned>(maxval)) throw InputError("netpbm: sample exceeds maxval");
        const double v = value / denom;  // k / maxval exactly, so encode/decode round-trips
        if (colour) {
          img.at(c, static_cast<int>(y), static_cast<int>(x)) = v;
        } else {
          for (int k = 0; k < 3; ++k) img.at(k, static_cast<int>(y), static_cast<int>(x)) = v;
        }
      }
    }
  }
  return img;
}

ImageTensor load_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_netpbm(bytes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_netpbm(const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) throw ShapeError("netpbm output needs 1 or 3 channels");
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.data().size());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        out.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  return out;
}

void save_netpbm(const ImageTensor& img, const std::filesystem::path& path) {
  const auto bytes = encode_netpbm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tct
