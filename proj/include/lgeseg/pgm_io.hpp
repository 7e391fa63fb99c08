#ifndef LGESEG_PGM_IO_HPP
#define LGESEG_PGM_IO_HPP

#include <string>

#include "lgeseg/image.hpp"

namespace lgeseg {

/// Load a P2 (ASCII) or P5 (binary, 8- or 16-bit big-endian) PGM file.
/// Pixel spacings come from the sidecar "<stem>.meta" when present
/// (lines "spacing_x=<real>" / "spacing_y=<real>"), else default to 1.0.
/// Malformed magic, dimensions or truncated payloads raise with a message
/// naming the offense.
Image2D load_pgm(const std::string& path);

/// Write a PGM (P5 binary by default, P2 when ascii is set) plus the
/// spacing sidecar. Intensities are clamped to [0, maxval] and rounded;
/// maxval > 255 selects 16-bit big-endian samples.
void save_pgm(const Image2D& img, const std::string& path, int maxval = 255, bool ascii = false);

/// Sidecar path for an image file: extension replaced by ".meta".
std::string meta_path_for(const std::string& image_path);

} // namespace lgeseg

#endif
