#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <filesystem>

#include "advpt/dataset.hpp"
#include "advpt/errors.hpp"

namespace advpt {

namespace fs = std::filesystem;

namespace {

bool has_raster_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" ||
         ext == ".ppm" || ext == ".pgm";
}

Image decode_and_resize(const fs::path& path, int size) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (raw.empty()) fail(ErrorKind::Input, "cannot decode image: " + path.string());
  Image full(raw.rows, raw.cols, 3);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<cv::Vec3b>(y);
    for (int x = 0; x < raw.cols; ++x) {
      // OpenCV decodes BGR
      full.at(y, x, 0) = row[x][2] / 255.0;
      full.at(y, x, 1) = row[x][1] / 255.0;
      full.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return clamp01(resize_bilinear(full, size, size));
}

}  // namespace

LabeledImageDataset load_image_folder(const std::string& root, int image_size) {
  if (image_size < 1) fail(ErrorKind::Config, "image folder: image_size must be positive");
  fs::path base(root);
  if (!fs::is_directory(base)) fail(ErrorKind::Input, "image folder not found: " + root);

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(base))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) fail(ErrorKind::Input, "image folder has no class directories: " + root);

  LabeledImageDataset ds;
  for (const auto& dir : class_dirs) {
    std::string name = dir.filename().string();
    std::replace(name.begin(), name.end(), '_', ' ');
    ds.class_names.push_back(name);
  }
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[k]))
      if (entry.is_regular_file() && has_raster_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      fail(ErrorKind::Input, "class directory has no images: " + class_dirs[k].string());
    for (const auto& file : files) {
      ds.images.push_back(decode_and_resize(file, image_size));
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace advpt
