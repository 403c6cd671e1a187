#include "tlgen/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tlgen {

Frame make_frame(Index height, Index width) { return Frame({height, width, 3}); }

void quantize_8bit(Frame& frame) {
  for (Index i = 0; i < frame.size(); ++i) {
    const float q = std::round(std::clamp(to_unit(frame[i]), 0.0f, 1.0f) * 255.0f);
    frame[i] = from_unit(q / 255.0f);
  }
}

float to_unit(float v) { return 0.5f * v + 0.5f; }
float from_unit(float v) { return 2.0f * v - 1.0f; }

Eigen::MatrixXf luminance(const Frame& frame) {
  const Index h = frame.dim(0), w = frame.dim(1);
  Eigen::MatrixXf out(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const float* p = frame.ptr() + (y * w + x) * 3;
      out(y, x) = 0.299f * to_unit(p[0]) + 0.587f * to_unit(p[1]) + 0.114f * to_unit(p[2]);
    }
  }
  return out;
}

Frame flip_horizontal(const Frame& frame) {
  const Index h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
  Frame out(frame.shape());
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      std::copy_n(frame.ptr() + (y * w + x) * c, c, out.ptr() + (y * w + (w - 1 - x)) * c);
    }
  }
  return out;
}

void write_ppm(const std::string& path, const Frame& frame) {
  if (frame.rank() != 3 || frame.dim(2) != 3) {
    throw InvalidArgument("write_ppm: expected [H,W,3] frame, got " + shape_string(frame.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path);
  out << "P6\n" << frame.dim(1) << " " << frame.dim(0) << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(frame.size()));
  for (Index i = 0; i < frame.size(); ++i) {
    bytes[static_cast<std::size_t>(i)] =
        static_cast<unsigned char>(std::lround(std::clamp(to_unit(frame[i]), 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Frame read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open image " + path);
  std::string magic;
  Index w = 0, h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw InvalidArgument("read_ppm: unsupported header in " + path);
  }
  in.get();  // single whitespace before the payload
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw InvalidArgument("read_ppm: truncated payload in " + path);
  }
  Frame f({h, w, 3});
  for (Index i = 0; i < f.size(); ++i) {
    f[i] = from_unit(static_cast<float>(bytes[static_cast<std::size_t>(i)]) / 255.0f);
  }
  return f;
}

Frame tile_frames(const std::vector<std::vector<Frame>>& rows, Index gap) {
  if (rows.empty() || rows.front().empty()) throw InvalidArgument("tile_frames: nothing to tile");
  const Index fh = rows.front().front().dim(0), fw = rows.front().front().dim(1);
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const Index nr = static_cast<Index>(rows.size()), nc = static_cast<Index>(cols);
  const Index H = nr * fh + (nr + 1) * gap, W = nc * fw + (nc + 1) * gap;
  Frame out = Frame::constant({H, W, 3}, 0.0f);
  for (Index r = 0; r < nr; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    for (Index c = 0; c < static_cast<Index>(row.size()); ++c) {
      const Frame& f = row[static_cast<std::size_t>(c)];
      if (f.dim(0) != fh || f.dim(1) != fw) throw InvalidArgument("tile_frames: size mismatch");
      const Index oy = gap + r * (fh + gap), ox = gap + c * (fw + gap);
      for (Index y = 0; y < fh; ++y) {
        std::copy_n(f.ptr() + y * fw * 3, fw * 3, out.ptr() + ((oy + y) * W + ox) * 3);
      }
    }
  }
  return out;
}

Tensor<float> stack_frames(const std::vector<const Frame*>& frames) {
  if (frames.empty()) throw InvalidArgument("stack_frames: empty batch");
  const Shape& s = frames.front()->shape();
  Tensor<float> out({static_cast<Index>(frames.size()), s[0], s[1], s[2]});
  const Index block = frames.front()->size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i]->shape() != s) throw InvalidArgument("stack_frames: shape mismatch");
    out.data().segment(static_cast<Index>(i) * block, block) = frames[i]->data();
  }
  return out;
}

Frame batch_frame(const Tensor<float>& batch, Index n) {
  const Index block = batch.size() / batch.dim(0);
  return Frame({batch.dim(1), batch.dim(2), batch.dim(3)}, batch.data().segment(n * block, block));
}

}  // namespace tlgen
