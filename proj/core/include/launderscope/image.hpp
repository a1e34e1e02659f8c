#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace launderscope {

/// Decoded raster image. Samples are row-major and channel-interleaved,
/// held as floats in [0,1]; the 8-bit storage form is produced by
/// `to_bytes()` (round to nearest) and is what every file writer emits.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  /// Zero-filled image. Throws UsageError on zero dimensions or channels
  /// outside {1,3}.
  ImageBuffer(int width, int height, int channels);
  ImageBuffer(int width, int height, int channels, std::vector<float> data);

  static ImageBuffer from_bytes(int width, int height, int channels,
                                std::span<const std::uint8_t> bytes);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::vector<std::uint8_t> to_bytes() const;

  /// Copy of this image snapped to the 8-bit grid.
  ImageBuffer quantized() const;

  /// Clamps every sample into [0,1] in place.
  void clamp();

  ImageBuffer crop(int x, int y, int w, int h) const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

enum class ClassLabel { Real, FullySynthetic, Laundered };

std::string_view to_string(ClassLabel label) noexcept;
/// Strict parse of "real", "fully_synthetic", "laundered".
ClassLabel parse_label(std::string_view text);

inline constexpr ClassLabel kAllLabels[] = {
    ClassLabel::Real, ClassLabel::FullySynthetic, ClassLabel::Laundered};

/// BT.601 luma. Single-channel input is returned unchanged.
ImageBuffer to_luminance(const ImageBuffer& img);

// File I/O. Readers accept PNG, binary PPM (P6) and JPEG, detected by
// content rather than extension. Writers pick the format from the extension.
ImageBuffer load_image(const std::filesystem::path& path);
ImageBuffer decode_image(std::span<const std::uint8_t> encoded);
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);
/// Baseline JPEG with 4:2:0 chroma subsampling for color input.
std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality);

}  // namespace launderscope
