#pragma once

#include <string>

#include "ourgan/tensor.hpp"

namespace ourgan {

/// Reads an 8- or 16-bit PNG or an 8-bit JPEG into a 3xHxW image with values
/// mapped linearly to [-1, 1]. Grayscale and palette images are expanded to
/// RGB; alpha is dropped.
ImageTensor load_image(const std::string& path);

enum class PngBitDepth { Bits8, Bits16 };

/// Writes a PNG with fixed encoder settings, so identical tensors produce
/// byte-identical files. Values are clamped to [-1, 1] before quantization.
void save_image(const std::string& path, const ImageTensor& image,
                PngBitDepth depth = PngBitDepth::Bits8);

}  // namespace ourgan
