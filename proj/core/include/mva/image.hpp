#pragma once

#include <string>

#include "mva/tensor.hpp"

namespace mva {

// Image IO on float64 tensors in [0,1]. PPM (P6) for colour [3,H,W],
// PGM (P5) for grayscale [1,H,W]; values quantised to 8 bits on save.
void save_image(const std::string& path, const Tensor& img);
Tensor load_image(const std::string& path);  // [3,H,W] or [1,H,W]

Tensor to_gray(const Tensor& img);

// Box-filter 2x downsample, both dims must be even.
Tensor downsample2(const Tensor& img);

// Bilinear resize to [C,out_h,out_w].
Tensor resize(const Tensor& img, int out_h, int out_w);

// Axis-aligned crop with zero fill outside the image.
Tensor crop(const Tensor& img, int x1, int y1, int w, int h);

}  // namespace mva
