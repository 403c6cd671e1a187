#pragma once

#include <string>
#include <vector>

#include "tlgen/tensor.hpp"

namespace tlgen {

/// A [H,W,3] image with values in [-1,1].
using Frame = Tensor<float>;

Frame make_frame(Index height = 64, Index width = 64);

/// Rounds every value to the nearest of the 256 levels an 8-bit file stores.
void quantize_8bit(Frame& frame);

float to_unit(float v);    // [-1,1] -> [0,1]
float from_unit(float v);  // [0,1] -> [-1,1]

/// ITU-R 601 luma of a [-1,1] frame, as a [H,W] image in [0,1].
Eigen::MatrixXf luminance(const Frame& frame);

Frame flip_horizontal(const Frame& frame);

/// Binary PPM (P6, maxval 255). Values are mapped from [-1,1] and clamped.
void write_ppm(const std::string& path, const Frame& frame);
Frame read_ppm(const std::string& path);

/// Tiles equally sized frames row by row with a `gap`-pixel neutral border.
Frame tile_frames(const std::vector<std::vector<Frame>>& rows, Index gap = 2);

/// Stacks frames into an [N,H,W,3] batch.
Tensor<float> stack_frames(const std::vector<const Frame*>& frames);
/// Frame `n` of an [N,H,W,3] batch.
Frame batch_frame(const Tensor<float>& batch, Index n);

}  // namespace tlgen
