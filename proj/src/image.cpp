#include "semap/image.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace semap {
namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct Header {
  int width = 0;
  int height = 0;
};

Header read_header(std::istream& in, const std::string& magic, const std::filesystem::path& path) {
  if (next_token(in) != magic) throw DataError("not a " + magic + " image: " + path.string());
  Header h;
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    if (std::stoi(next_token(in)) != 255) throw DataError("only maxval 255 supported: " + path.string());
  } catch (const std::logic_error&) {
    throw DataError("bad image header: " + path.string());
  }
  if (h.width <= 0 || h.height <= 0) throw DataError("bad image dimensions: " + path.string());
  return h;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Gray8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()), static_cast<std::streamsize>(img.data().size()));
}

Gray8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const Header h = read_header(in, "P5", path);
  Gray8 img(h.width, h.height);
  in.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.data().size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data().size())) throw DataError("truncated image: " + path.string());
  return img;
}

void write_ppm(const std::filesystem::path& path, const Rgb8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  for (const auto& px : img.data()) out.write(reinterpret_cast<const char*>(px.data()), 3);
}

Rgb8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const Header h = read_header(in, "P6", path);
  Rgb8 img(h.width, h.height);
  for (auto& px : img.data()) {
    if (!in.read(reinterpret_cast<char*>(px.data()), 3)) throw DataError("truncated image: " + path.string());
  }
  return img;
}

}  // namespace semap
