#include "launderscope/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <png.h>

#include "launderscope/error.hpp"

namespace launderscope {

namespace {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void check_shape(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw UsageError("image dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw UsageError("image channel count must be 1 or 3");
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  data_.assign(static_cast<std::size_t>(width) * height * channels, 0.0f);
}

ImageBuffer::ImageBuffer(int width, int height, int channels,
                         std::vector<float> data)
    : width_(width), height_(height), channels_(channels),
      data_(std::move(data)) {
  check_shape(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw UsageError("image data length does not match its dimensions");
  }
}

ImageBuffer ImageBuffer::from_bytes(int width, int height, int channels,
                                    std::span<const std::uint8_t> bytes) {
  check_shape(width, height, channels);
  if (bytes.size() != static_cast<std::size_t>(width) * height * channels) {
    throw UsageError("image byte count does not match its dimensions");
  }
  std::vector<float> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  return ImageBuffer(width, height, channels, std::move(data));
}

std::vector<std::uint8_t> ImageBuffer::to_bytes() const {
  std::vector<std::uint8_t> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(), to_byte);
  return out;
}

ImageBuffer ImageBuffer::quantized() const {
  const auto bytes = to_bytes();
  return from_bytes(width_, height_, channels_, bytes);
}

void ImageBuffer::clamp() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

ImageBuffer ImageBuffer::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > width_ || y + h > height_) {
    throw UsageError("crop rectangle outside image");
  }
  ImageBuffer out(w, h, channels_);
  const std::size_t row = static_cast<std::size_t>(w) * channels_;
  for (int r = 0; r < h; ++r) {
    const float* src =
        data_.data() + (static_cast<std::size_t>(y + r) * width_ + x) * channels_;
    std::copy(src, src + row, out.data_.data() + r * row);
  }
  return out;
}

std::string_view to_string(ClassLabel label) noexcept {
  switch (label) {
    case ClassLabel::Real:
      return "real";
    case ClassLabel::FullySynthetic:
      return "fully_synthetic";
    case ClassLabel::Laundered:
      return "laundered";
  }
  return "real";
}

ClassLabel parse_label(std::string_view text) {
  for (ClassLabel l : kAllLabels) {
    if (to_string(l) == text) return l;
  }
  throw DataError("unknown label \"" + std::string(text) + "\"");
}

ImageBuffer to_luminance(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const float r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    dst[i] = 0.299f * r + 0.587f * g + 0.114f * b;
  }
  return out;
}

// ---------------------------------------------------------------- decoding

namespace {

bool starts_with(std::span<const std::uint8_t> buf, const char* magic,
                 std::size_t n) {
  return buf.size() >= n && std::memcmp(buf.data(), magic, n) == 0;
}

ImageBuffer decode_png(std::span<const std::uint8_t> buf) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    throw DataError(std::string("corrupt PNG: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw DataError("zero-dimension image");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError("corrupt PNG: " + msg);
  }
  return ImageBuffer::from_bytes(static_cast<int>(image.width),
                                 static_cast<int>(image.height), channels,
                                 pixels);
}

ImageBuffer decode_ppm(std::span<const std::uint8_t> buf) {
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < buf.size() && std::isdigit(buf[pos])) {
      value = value * 10 + (buf[pos] - '0');
      if (value > 1 << 24) throw DataError("corrupt PPM: header value too large");
      ++pos;
      ++digits;
    }
    if (digits == 0) throw DataError("corrupt PPM: malformed header");
    return static_cast<int>(value);
  };
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w == 0 || h == 0) throw DataError("zero-dimension image");
  if (maxval != 255) throw DataError("unsupported PPM: only 8-bit maxval 255");
  if (pos >= buf.size() || !std::isspace(buf[pos])) {
    throw DataError("corrupt PPM: malformed header");
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (buf.size() - pos < n) throw DataError("corrupt PPM: truncated pixel data");
  return ImageBuffer::from_bytes(w, h, 3, buf.subspan(pos, n));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr) {}

// No C++ objects with destructors may be live across setjmp here.
bool jpeg_decode_raw(std::span<const std::uint8_t> buf,
                     std::vector<std::uint8_t>& pixels, int& w, int& h, int& c,
                     std::string& error) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  jerr.base.output_message = jpeg_silent;
  if (setjmp(jerr.jump)) {
    error = jerr.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, buf.data(), static_cast<unsigned long>(buf.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space =
      cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  c = cinfo.output_components;
  pixels.resize(static_cast<std::size_t>(w) * h * c);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * w * c;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

ImageBuffer decode_jpeg(std::span<const std::uint8_t> buf) {
  std::vector<std::uint8_t> pixels;
  int w = 0, h = 0, c = 0;
  std::string error;
  if (!jpeg_decode_raw(buf, pixels, w, h, c, error)) {
    throw DataError("corrupt JPEG: " + error);
  }
  if (w == 0 || h == 0) throw DataError("zero-dimension image");
  return ImageBuffer::from_bytes(w, h, c, pixels);
}

bool jpeg_encode_raw(const std::uint8_t* pixels, int w, int h, int c,
                     int quality, unsigned char*& out, unsigned long& out_size,
                     std::string& error) {
  jpeg_compress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  jerr.base.output_message = jpeg_silent;
  if (setjmp(jerr.jump)) {
    error = jerr.message;
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out, &out_size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = c;
  cinfo.in_color_space = c == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  if (c == 3) {
    // 4:2:0
    cinfo.comp_info[0].h_samp_factor = 2;
    cinfo.comp_info[0].v_samp_factor = 2;
    cinfo.comp_info[1].h_samp_factor = 1;
    cinfo.comp_info[1].v_samp_factor = 1;
    cinfo.comp_info[2].h_samp_factor = 1;
    cinfo.comp_info[2].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<std::uint8_t*>(
        pixels + static_cast<std::size_t>(cinfo.next_scanline) * w * c);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw DataError("file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

ImageBuffer decode_image(std::span<const std::uint8_t> encoded) {
  if (starts_with(encoded, "\x89PNG", 4)) return decode_png(encoded);
  if (starts_with(encoded, "P6", 2)) return decode_ppm(encoded);
  if (starts_with(encoded, "\xFF\xD8", 2)) return decode_jpeg(encoded);
  throw DataError("unsupported image format");
}

ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  const auto bytes = img.to_bytes();
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, bytes.data(), 0,
                                       nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, bytes.data(), 0,
                                 nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  if (img.channels() != 3) throw UsageError("PPM output requires 3 channels");
  const std::string header = "P6\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto bytes = img.to_bytes();
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

std::vector<std::uint8_t> encode_jpeg(const ImageBuffer& img, int quality) {
  if (quality < 1 || quality > 100) {
    throw UsageError("JPEG quality must be in [1,100]");
  }
  const auto bytes = img.to_bytes();
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  std::string error;
  const bool ok = jpeg_encode_raw(bytes.data(), img.width(), img.height(),
                                  img.channels(), quality, buffer, size, error);
  std::vector<std::uint8_t> out;
  if (ok) out.assign(buffer, buffer + size);
  std::free(buffer);
  if (!ok) throw DataError("JPEG encode failed: " + error);
  return out;
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") {
    write_file(path, encode_png(img));
  } else if (ext == ".ppm") {
    write_file(path, encode_ppm(img));
  } else {
    throw UsageError("unsupported output format \"" + ext +
                     "\" (expected .png or .ppm)");
  }
}

}  // namespace launderscope
