#include "dwos/image_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dwos/errors.hpp"

namespace dwos {

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

std::string encode_pfm(const Image& img) {
  if (img.pixels.size() != img.width * img.height) throw ShapeMismatch("image pixel count does not match its size");
  std::string out = "Pf\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + 4 * img.pixels.size());
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(img.pixels[k]));
    std::memcpy(out.data() + header + 4 * k, &bits, 4);
  }
  return out;
}

Image decode_pfm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  std::size_t w = 0;
  std::size_t h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || magic != "Pf") throw IoError("not a grayscale PFM");
  if (scale >= 0.0) throw IoError("big-endian PFM is not supported");
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + 4 * w * h) throw IoError("truncated PFM");
  Image img(w, h);
  for (std::size_t k = 0; k < w * h; ++k) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + offset + 4 * k, 4);
    img.pixels[k] = std::bit_cast<float>(to_little(bits));
  }
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_pfm(img)); }

Image read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

std::string encode_texture_csv(const GridTexture& tex) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const Extent& e = tex.extent();
  out << tex.nx() << ',' << tex.ny() << ',' << e.xmin << ',' << e.ymin << ',' << e.xmax << ',' << e.ymax << '\n';
  for (std::size_t j = 0; j < tex.ny(); ++j) {
    for (std::size_t i = 0; i < tex.nx(); ++i) out << (i ? "," : "") << tex.at(i, j);
    out << '\n';
  }
  return out.str();
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw IoError("texture CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
  }
  return values;
}

}  // namespace

GridTexture decode_texture_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty texture CSV");
  const std::vector<double> head = parse_row(line, 1);
  if (head.size() != 6 || head[0] < 1 || head[1] < 1) {
    throw IoError("texture CSV header must be nx,ny,xmin,ymin,xmax,ymax");
  }
  const auto nx = static_cast<std::size_t>(head[0]);
  const auto ny = static_cast<std::size_t>(head[1]);
  const Extent extent{head[2], head[3], head[4], head[5]};
  if (!(extent.xmax > extent.xmin) || !(extent.ymax > extent.ymin)) throw IoError("texture CSV extent is empty");
  std::vector<double> values;
  values.reserve(nx * ny);
  std::size_t rows = 0;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<double> row = parse_row(line, line_no);
    if (row.size() != nx) {
      throw IoError("texture CSV line " + std::to_string(line_no) + ": expected " + std::to_string(nx) + " values");
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows != ny) throw IoError("texture CSV: expected " + std::to_string(ny) + " rows, got " + std::to_string(rows));
  return GridTexture(nx, ny, extent, std::move(values));
}

void write_texture_csv(const std::filesystem::path& path, const GridTexture& tex) {
  write_file_atomic(path, encode_texture_csv(tex));
}

GridTexture read_texture_csv(const std::filesystem::path& path) { return decode_texture_csv(read_file(path)); }

Image texture_image(const GridTexture& tex) {
  Image img(tex.nx(), tex.ny());
  for (std::size_t j = 0; j < tex.ny(); ++j) {
    for (std::size_t i = 0; i < tex.nx(); ++i) img.at(i, j) = static_cast<float>(tex.at(i, j));
  }
  return img;
}

Image gradient_image(const GradientBuffer& g) {
  Image img(g.nx(), g.ny());
  for (std::size_t k = 0; k < g.size(); ++k) img.pixels[k] = static_cast<float>(g[k]);
  return img;
}

}  // namespace dwos
