#pragma once

// Minimal dependency-free PNG writer (stored deflate blocks) plus the
// grouped bar chart used by the ablation report. Glyphs are a small 5x7
// bitmap font covering what the chart labels need.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pugnn {

class Canvas {
 public:
  Canvas(int width, int height) : w_(width), h_(height), px_(static_cast<size_t>(width) * height * 3, 255) {}

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    size_t at = (static_cast<size_t>(y) * w_ + x) * 3;
    px_[at] = r;
    px_[at + 1] = g;
    px_[at + 2] = b;
  }

  void fill_rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, r, g, b);
  }

  void hline(int x0, int x1, int y, uint8_t r, uint8_t g, uint8_t b) { fill_rect(x0, y, x1, y, r, g, b); }
  void vline(int x, int y0, int y1, uint8_t r, uint8_t g, uint8_t b) { fill_rect(x, y0, x, y1, r, g, b); }

  void text(int x, int y, const std::string& s, uint8_t r = 0, uint8_t g = 0, uint8_t b = 0) {
    for (char c : s) {
      draw_glyph(x, y, c, r, g, b);
      x += 6;
    }
  }

  void save_png(const std::string& path) const {
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h_) * (1 + static_cast<size_t>(w_) * 3));
    for (int y = 0; y < h_; ++y) {
      raw.push_back(0);  // filter: none
      raw.insert(raw.end(), px_.begin() + static_cast<size_t>(y) * w_ * 3,
                 px_.begin() + (static_cast<size_t>(y) + 1) * w_ * 3);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    push_u32(ihdr, static_cast<uint32_t>(w_));
    push_u32(ihdr, static_cast<uint32_t>(h_));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", zlib_store(raw));
    write_chunk(f, "IEND", {});
  }

 private:
  static void push_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(static_cast<uint8_t>(x >> 24));
    v.push_back(static_cast<uint8_t>(x >> 16));
    v.push_back(static_cast<uint8_t>(x >> 8));
    v.push_back(static_cast<uint8_t>(x));
  }

  static uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0xFFFFFFFFu) {
    static const auto table = [] {
      std::array<uint32_t, 256> t{};
      for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
      }
      return t;
    }();
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc;
  }

  static void write_chunk(std::ofstream& f, const char type[5], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> out;
    push_u32(out, static_cast<uint32_t>(data.size()));
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(out.data() + 4, out.size() - 4) ^ 0xFFFFFFFFu;
    push_u32(out, crc);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  }

  // zlib stream of stored (uncompressed) deflate blocks.
  static std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> z = {0x78, 0x01};
    size_t at = 0;
    while (at < raw.size() || raw.empty()) {
      size_t len = std::min<size_t>(65535, raw.size() - at);
      bool last = at + len == raw.size();
      z.push_back(last ? 1 : 0);
      z.push_back(static_cast<uint8_t>(len & 0xFF));
      z.push_back(static_cast<uint8_t>(len >> 8));
      z.push_back(static_cast<uint8_t>(~len & 0xFF));
      z.push_back(static_cast<uint8_t>((~len >> 8) & 0xFF));
      z.insert(z.end(), raw.begin() + static_cast<long>(at), raw.begin() + static_cast<long>(at + len));
      at += len;
      if (last || raw.empty()) break;
    }
    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
      a = (a + byte) % 65521;
      b = (b + a) % 65521;
    }
    push_u32(z, (b << 16) | a);
    return z;
  }

  void draw_glyph(int x, int y, char c, uint8_t r, uint8_t g, uint8_t b) {
    static const std::map<char, std::array<uint8_t, 7>> font = {
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}}, {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}}, {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}}, {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}}};
    auto it = font.find(c);
    if (it == font.end()) return;
    for (int row = 0; row < 7; ++row)
      for (int col = 0; col < 5; ++col)
        if (it->second[row] & (1 << (4 - col))) set(x + col, y + row, r, g, b);
  }

  int w_, h_;
  std::vector<uint8_t> px_;
};

// Grouped bar chart: one group per metric, one bar per series, y in [0,1].
inline void save_grouped_bar_png(const std::string& path,
                                 const std::vector<std::string>& group_names,
                                 const std::vector<std::string>& series_names,
                                 const std::vector<std::vector<double>>& values /* series x group */) {
  const int W = 720, H = 420;
  const int left = 50, right = 20, top = 30, bottom = 60;
  Canvas c(W, H);

  const int plot_w = W - left - right, plot_h = H - top - bottom;
  auto y_of = [&](double v) { return top + plot_h - static_cast<int>(v * plot_h); };

  for (int grid = 0; grid <= 4; ++grid) {
    double v = grid * 0.25;
    c.hline(left, left + plot_w, y_of(v), 225, 225, 225);
    char label[8];
    std::snprintf(label, sizeof(label), "%.2f", v);
    c.text(left - 34, y_of(v) - 3, label, 90, 90, 90);
  }
  c.vline(left, top, top + plot_h, 0, 0, 0);
  c.hline(left, left + plot_w, top + plot_h, 0, 0, 0);

  const std::array<std::array<uint8_t, 3>, 6> palette = {
      {{66, 133, 244}, {219, 68, 55}, {244, 180, 0}, {15, 157, 88}, {171, 71, 188}, {0, 172, 193}}};

  const int groups = static_cast<int>(group_names.size());
  const int series = static_cast<int>(series_names.size());
  const int group_w = plot_w / std::max(1, groups);
  const int bar_w = std::max(4, (group_w - 20) / std::max(1, series));

  for (int g = 0; g < groups; ++g) {
    int gx = left + g * group_w + 10;
    for (int s = 0; s < series; ++s) {
      double v = std::min(1.0, std::max(0.0, values[s][g]));
      const auto& col = palette[s % palette.size()];
      c.fill_rect(gx + s * bar_w, y_of(v), gx + (s + 1) * bar_w - 2, top + plot_h - 1, col[0], col[1], col[2]);
    }
    c.text(gx + (series * bar_w) / 2 - static_cast<int>(group_names[g].size()) * 3,
           top + plot_h + 8, group_names[g]);
  }

  int lx = left, ly = H - 24;
  for (int s = 0; s < series; ++s) {
    const auto& col = palette[s % palette.size()];
    c.fill_rect(lx, ly, lx + 10, ly + 7, col[0], col[1], col[2]);
    c.text(lx + 14, ly, series_names[s]);
    lx += 14 + 6 * static_cast<int>(series_names[s].size()) + 18;
  }

  c.save_png(path);
}

}  // namespace pugnn
