#ifndef LGESEG_IMAGE_HPP
#define LGESEG_IMAGE_HPP

#include <cstddef>
#include <vector>

namespace lgeseg {

struct AffineTransform2D;
struct FFDGrid;

/// Scalar-valued raster with physical pixel spacing (mm/pixel).
/// Data is row-major; pixel (x, y) sits at physical position
/// (x * spacing_x, y * spacing_y), so integer sample coordinates land
/// exactly on stored pixels.
struct Image2D {
    int width = 0;
    int height = 0;
    double spacing_x = 1.0;
    double spacing_y = 1.0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(int w, int h, double fill = 0.0, double sx = 1.0, double sy = 1.0);

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool same_size(const Image2D& o) const { return width == o.width && height == o.height; }

    /// Throws if dimensions, spacing, data length or finiteness are violated.
    void validate() const;
};

struct IntensityHistogram {
    int bin_count = 0;
    std::vector<double> bin_edges;   // bin_count + 1 monotone edges
    std::vector<long> counts;        // one per bin, sums to the pixel count

    void validate(size_t expected_total) const;
};

/// Histogram of img over [min, max] with the given number of bins.
IntensityHistogram compute_histogram(const Image2D& img, int bin_count);

/// Bilinear interpolation at real coordinates; coordinates outside the
/// image are clamped to the border (clamp-to-edge policy).
double bilinear_sample(const Image2D& img, double x, double y);

/// Resample to the requested pixel spacings over the same physical extent.
Image2D resample(const Image2D& img, double new_spacing_x, double new_spacing_y);

/// Classical histogram specification: remap source intensities so their
/// distribution resembles the reference's. Output geometry equals source.
Image2D histogram_specify(const Image2D& source, const Image2D& reference, int bin_count = 256);

/// Backward-warp img by A: each output pixel samples the input at A^-1 (x, y).
Image2D warp_affine(const Image2D& img, const AffineTransform2D& A);

/// Backward-warp img using the FFD grid as the output -> input coordinate map.
Image2D warp_ffd(const Image2D& img, const FFDGrid& grid);

/// Center-crop or center-pad (edge replication) to the requested dimensions.
Image2D center_crop_pad(const Image2D& img, int new_width, int new_height);

/// Pixel offset applied to coordinates by center_crop_pad (added to input coords).
void center_crop_pad_offset(const Image2D& img, int new_width, int new_height,
                            int& offset_x, int& offset_y);

} // namespace lgeseg

#endif
