#include "cosdd/image_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cosdd/error.hpp"

namespace fs = std::filesystem;

namespace cosdd {
namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

bool is_raster_file(const fs::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

Image from_mat(const cv::Mat& mat, const LoadOptions& options, const std::string& source) {
  if (mat.empty()) fail(ErrorCode::UnreadableFile, "cannot decode " + source);
  if (mat.channels() > 1 && !options.reduce_channels) {
    fail(ErrorCode::UnreadableFile, source + " has " + std::to_string(mat.channels()) +
                                        " channels; enable channel reduction to average them");
  }
  cv::Mat as_double;
  mat.convertTo(as_double, CV_MAKETYPE(CV_64F, mat.channels()));
  const int channels = mat.channels();
  Image out(as_double.rows, as_double.cols);
  for (int i = 0; i < as_double.rows; ++i) {
    const double* row = as_double.ptr<double>(i);
    for (int j = 0; j < as_double.cols; ++j) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) acc += row[j * channels + c];
      out(i, j) = acc / channels;
    }
  }
  if (!all_finite(out)) fail(ErrorCode::NonFiniteValues, source + " contains NaN or Inf");
  return out;
}

cv::Mat to_mat32(const Image& image) {
  cv::Mat mat(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_32F);
  for (std::int64_t i = 0; i < image.rows(); ++i) {
    auto* row = mat.ptr<float>(static_cast<int>(i));
    for (std::int64_t j = 0; j < image.cols(); ++j) row[j] = static_cast<float>(image(i, j));
  }
  return mat;
}

void check_shapes(const ImageStack& stack, const LoadOptions& options, const std::string& source) {
  if (stack.empty()) fail(ErrorCode::UnreadableFile, source + " holds no frames");
  if (options.allow_mixed_shapes) return;
  for (const auto& image : stack.images) {
    if (!image.same_shape(stack.images.front())) {
      fail(ErrorCode::MixedShapes, source + " holds frames of different shapes");
    }
  }
}

// --- .npy -----------------------------------------------------------------

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::int64_t> shape;
};

NpyHeader parse_npy_header(const std::string& dict, const std::string& source) {
  NpyHeader header;
  std::smatch m;
  if (!std::regex_search(dict, m, std::regex(R"('descr'\s*:\s*'([^']+)')"))) {
    fail(ErrorCode::UnreadableFile, source + ": npy header lacks descr");
  }
  header.descr = m[1];
  if (std::regex_search(dict, m, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    header.fortran_order = m[1] == "True";
  }
  if (!std::regex_search(dict, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    fail(ErrorCode::UnreadableFile, source + ": npy header lacks shape");
  }
  std::stringstream dims(m[1].str());
  std::string item;
  while (std::getline(dims, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (!item.empty()) header.shape.push_back(std::stoll(item));
  }
  return header;
}

template <typename T>
std::vector<double> read_as_double(std::istream& in, std::size_t count) {
  std::vector<T> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) fail(ErrorCode::UnreadableFile, "npy payload truncated");
  return {raw.begin(), raw.end()};
}

ImageStack load_npy(const fs::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnreadableFile, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) fail(ErrorCode::UnreadableFile, path.string() + " is not .npy");
  const int major = static_cast<unsigned char>(magic[6]);
  std::uint32_t header_len = 0;
  if (major == 1) {
    unsigned char len[2];
    in.read(reinterpret_cast<char*>(len), 2);
    header_len = len[0] | (len[1] << 8);
  } else {
    unsigned char len[4];
    in.read(reinterpret_cast<char*>(len), 4);
    header_len = len[0] | (len[1] << 8) | (len[2] << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
  }
  std::string dict(header_len, '\0');
  in.read(dict.data(), header_len);
  if (!in) fail(ErrorCode::UnreadableFile, path.string() + ": truncated npy header");
  const NpyHeader header = parse_npy_header(dict, path.string());
  if (header.fortran_order) fail(ErrorCode::UnreadableFile, path.string() + ": fortran-ordered arrays unsupported");
  if (header.shape.size() != 2 && header.shape.size() != 3) {
    fail(ErrorCode::UnreadableFile, path.string() + ": expected a 2-D frame or a 3-D frame stack");
  }
  const std::int64_t frames = header.shape.size() == 3 ? header.shape[0] : 1;
  const std::int64_t rows = header.shape[header.shape.size() - 2];
  const std::int64_t cols = header.shape.back();
  const auto count = static_cast<std::size_t>(frames * rows * cols);

  if (!header.descr.empty() && header.descr[0] == '>') {
    fail(ErrorCode::UnreadableFile, path.string() + ": big-endian arrays unsupported");
  }
  const std::string kind = header.descr.substr(1);
  std::vector<double> values;
  if (kind == "f4") values = read_as_double<float>(in, count);
  else if (kind == "f8") values = read_as_double<double>(in, count);
  else if (kind == "u1") values = read_as_double<std::uint8_t>(in, count);
  else if (kind == "u2") values = read_as_double<std::uint16_t>(in, count);
  else if (kind == "i2") values = read_as_double<std::int16_t>(in, count);
  else if (kind == "i4") values = read_as_double<std::int32_t>(in, count);
  else if (kind == "u4") values = read_as_double<std::uint32_t>(in, count);
  else if (kind == "i8") values = read_as_double<std::int64_t>(in, count);
  else fail(ErrorCode::UnreadableFile, path.string() + ": unsupported dtype " + header.descr);

  ImageStack stack;
  const auto frame_size = static_cast<std::size_t>(rows * cols);
  for (std::int64_t f = 0; f < frames; ++f) {
    std::vector<double> pixels(values.begin() + static_cast<std::ptrdiff_t>(f * frame_size),
                               values.begin() + static_cast<std::ptrdiff_t>((f + 1) * frame_size));
    Image image(rows, cols, std::move(pixels));
    if (!all_finite(image)) {
      fail(ErrorCode::NonFiniteValues, path.string() + " frame " + std::to_string(f) + " contains NaN or Inf");
    }
    stack.push_back(std::move(image), path.filename().string() + "#" + std::to_string(f));
  }
  check_shapes(stack, options, path.string());
  return stack;
}

}  // namespace

StackFormat detect_format(const fs::path& path) {
  if (fs::is_directory(path)) return StackFormat::RasterDir;
  if (lower_extension(path) == ".npy") return StackFormat::ArrayFile;
  return StackFormat::StackedContainer;
}

ImageStack load_stack(const fs::path& path, const LoadOptions& options) {
  return load_stack(path, detect_format(path), options);
}

ImageStack load_stack(const fs::path& path, StackFormat format, const LoadOptions& options) {
  if (!fs::exists(path)) fail(ErrorCode::UnreadableFile, path.string() + " does not exist");
  switch (format) {
    case StackFormat::RasterDir: {
      if (!fs::is_directory(path)) fail(ErrorCode::UnreadableFile, path.string() + " is not a directory");
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(path)) {
        if (entry.is_regular_file() && is_raster_file(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      ImageStack stack;
      for (const auto& file : files) {
        stack.push_back(from_mat(cv::imread(file.string(), cv::IMREAD_UNCHANGED), options, file.string()),
                        file.filename().string());
      }
      check_shapes(stack, options, path.string());
      return stack;
    }
    case StackFormat::StackedContainer: {
      std::vector<cv::Mat> pages;
      if (!cv::imreadmulti(path.string(), pages, cv::IMREAD_UNCHANGED) || pages.empty()) {
        fail(ErrorCode::UnreadableFile, "cannot decode stacked container " + path.string());
      }
      ImageStack stack;
      for (std::size_t p = 0; p < pages.size(); ++p) {
        stack.push_back(from_mat(pages[p], options, path.string()), path.filename().string() + "#" + std::to_string(p));
      }
      check_shapes(stack, options, path.string());
      return stack;
    }
    case StackFormat::ArrayFile:
      return load_npy(path, options);
  }
  fail(ErrorCode::UnreadableFile, "unknown stack format");
}

void save_image(const Image& image, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const std::string ext = lower_extension(path);
  bool ok = false;
  if (ext == ".png") {
    cv::Mat mat;
    to_mat32(image).convertTo(mat, CV_16U);
    ok = cv::imwrite(path.string(), mat);
  } else {
    ok = cv::imwrite(path.string(), to_mat32(image));
  }
  if (!ok) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
}

void save_stack_container(const ImageStack& stack, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<cv::Mat> pages;
  for (const auto& image : stack.images) pages.push_back(to_mat32(image));
  if (!cv::imwritemulti(path.string(), pages)) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
}

void save_array_file(const ImageStack& stack, const fs::path& path) {
  if (stack.empty()) fail(ErrorCode::TooFewImages, "cannot write an empty stack");
  for (const auto& image : stack.images) {
    if (!image.same_shape(stack.images.front())) fail(ErrorCode::MixedShapes, "npy output needs equal frame shapes");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto& first = stack.images.front();
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(stack.size()) + ", " +
                     std::to_string(first.rows()) + ", " + std::to_string(first.cols()) + "), }";
  // magic(6) + version(2) + length(2) + dict + '\n' padded to a multiple of 64
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(dict.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  for (const auto& image : stack.images) {
    for (double v : image.pixels()) {
      const auto f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
}

void save_raster_dir(const ImageStack& stack, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < stack.size(); ++k) {
    std::string name = k < stack.source_ids.size() ? stack.source_ids[k] : "frame_" + std::to_string(k);
    std::replace(name.begin(), name.end(), '#', '_');
    save_image(stack.images[k], dir / fs::path(name).replace_extension(".tif"));
  }
}

void save_preview_png(const Image& image, const fs::path& path, double lo, double hi) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cv::Mat mat(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8U);
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (std::int64_t i = 0; i < image.rows(); ++i) {
    for (std::int64_t j = 0; j < image.cols(); ++j) {
      mat.at<std::uint8_t>(static_cast<int>(i), static_cast<int>(j)) =
          cv::saturate_cast<std::uint8_t>((image(i, j) - lo) * scale);
    }
  }
  if (!cv::imwrite(path.string(), mat)) fail(ErrorCode::UnreadableFile, "cannot write " + path.string());
}

}  // namespace cosdd
