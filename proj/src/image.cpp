#include "turbrec/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "turbrec/npy.hpp"

namespace turb::img {

Image Image::zeros(int channels, int height, int width) {
  Image im;
  im.channels = channels;
  im.height = height;
  im.width = width;
  im.pixels = Tensor::zeros({channels, height, width});
  im.validate();
  return im;
}

Image Image::from_tensor(Tensor t) {
  if (t.ndim() == 2) t.dims = {1, t.dim(0), t.dim(1)};
  if (t.ndim() != 3) throw std::invalid_argument("image tensor must be [C,H,W] or [H,W]");
  for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
  Image im;
  im.channels = t.dim(0);
  im.height = t.dim(1);
  im.width = t.dim(2);
  im.pixels = std::move(t);
  im.validate();
  return im;
}

void Image::validate() const {
  if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
  if (height <= 0 || width <= 0) throw std::invalid_argument("image size must be positive");
  if (pixels.dims != std::vector<int>{channels, height, width})
    throw std::invalid_argument("image tensor dims do not match header");
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out = Image::zeros(1, img.height, img.width);
  const int plane = img.height * img.width;
  for (int i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int c = 0; c < img.channels; ++c) acc += img.pixels.data[static_cast<size_t>(c) * plane + i];
    out.pixels.data[static_cast<size_t>(i)] = acc / img.channels;
  }
  return out;
}

namespace {

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comment lines
  while (true) {
    int c = in.peek();
    if (c == EOF) throw std::runtime_error("truncated PNM header");
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  if (!in || value < 0) throw std::runtime_error("malformed PNM header");
  return value;
}

Image load_pnm(const std::filesystem::path& path, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  char p, kind;
  in.get(p);
  in.get(kind);
  const char expect = channels == 1 ? '5' : '6';
  if (p != 'P' || kind != expect) throw std::runtime_error("unexpected PNM magic in " + path.string());
  const int w = read_pnm_token(in);
  const int h = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (maxval != 255) throw std::runtime_error("only maxval 255 supported: " + path.string());
  in.get();  // single whitespace after maxval

  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("truncated image data: " + path.string());

  Image im = Image::zeros(channels, h, w);
  // PNM interleaves channels per pixel; tensor layout is planar
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        im.pixels(c, y, x) = raw[(static_cast<size_t>(y) * w + x) * channels + c] / 255.0;
  return im;
}

void save_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.pixels(c, y, x), 0.0, 1.0);
        raw[(static_cast<size_t>(y) * img.width + x) * img.channels + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return load_pnm(path, 1);
  if (ext == ".ppm") return load_pnm(path, 3);
  if (ext == ".npy") return Image::from_tensor(npy_load(path));
  throw std::invalid_argument("unsupported image extension: " + path.string());
}

void save_image(const std::filesystem::path& path, const Image& img) {
  img.validate();
  const std::string ext = path.extension().string();
  if (ext == ".pgm") {
    if (img.channels != 1) throw std::invalid_argument("PGM requires a grayscale image");
    save_pnm(path, img);
  } else if (ext == ".ppm") {
    if (img.channels != 3) throw std::invalid_argument("PPM requires an RGB image");
    save_pnm(path, img);
  } else if (ext == ".npy") {
    npy_save(path, img.pixels);
  } else {
    throw std::invalid_argument("unsupported image extension: " + path.string());
  }
}

}  // namespace turb::img
