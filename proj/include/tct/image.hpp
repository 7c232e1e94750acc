#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace tct {

/// channels x height x width grid of values in [0, 1], channel-major.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, double fill = 0.0);
  ImageTensor(int channels, int height, int width, std::vector<double> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Bilinear resampling with half-pixel centres and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& img, int height, int width);

/// Crops [x, x+w) x [y, y+h); the rectangle must lie inside the image.
ImageTensor crop(const ImageTensor& img, int x, int y, int w, int h);

/// Loads binary PPM (P6) or PGM (P5), maxval 1..65535. Grey images are
/// replicated to three channels. Throws InputError on malformed files.
ImageTensor load_netpbm(const std::filesystem::path& path);
ImageTensor decode_netpbm(const std::vector<unsigned char>& bytes);

/// Writes P6 for 3-channel images and P5 for 1-channel images, maxval 255.
void save_netpbm(const ImageTensor& img, const std::filesystem::path& path);
std::vector<unsigned char> encode_netpbm(const ImageTensor& img);

}  // namespace tct
