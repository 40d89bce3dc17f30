#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace stpp::geom {

// Discretized observation window. Row 0 is the northernmost row, matching the
// raster text layout; masked-out cells are outside the region.
struct SpatialGrid {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;      // x of the lower-left corner, metres
  double yll = 0.0;      // y of the lower-left corner, metres
  double cellsize = 0.0; // metres
  double nodata = -9999.0;
  std::vector<uint8_t> mask;  // row-major; 1 = in-region

  size_t cell_count() const { return static_cast<size_t>(ncols) * nrows; }
  double cell_area() const { return cellsize * cellsize; }
  size_t idx(int row, int col) const { return static_cast<size_t>(row) * ncols + col; }
  bool in(int row, int col) const { return mask[idx(row, col)] != 0; }

  double center_x(int col) const { return xll + (col + 0.5) * cellsize; }
  double center_y(int row) const { return yll + (nrows - row - 0.5) * cellsize; }

  // Cell containing (x, y); false when outside the grid extent.
  bool cell_of(double x, double y, int* row, int* col) const;

  // True when (x, y) falls in a masked-in cell.
  bool contains(double x, double y) const;

  // Area of the masked-in region, m².
  double area() const;

  size_t masked_in_count() const;

  void validate() const;
  bool same_geometry(const SpatialGrid& other) const;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

GridPtr make_grid(int ncols, int nrows, double xll, double yll, double cellsize);

// Per-cell real values on a grid; masked-out cells hold 0 and are excluded
// from integrals.
struct RasterField {
  GridPtr grid;
  std::vector<double> values;

  RasterField() = default;
  explicit RasterField(GridPtr g) : grid(std::move(g)), values(grid->cell_count(), 0.0) {}

  double at(int row, int col) const { return values[grid->idx(row, col)]; }
  double& at(int row, int col) { return values[grid->idx(row, col)]; }

  // Σ value·cellarea over masked-in cells.
  double integral() const;

  // Checks finiteness on masked-in cells; nonneg additionally requires >= 0.
  void validate(bool nonneg) const;
};

struct WeightedPoint {
  double x = 0.0, y = 0.0, w = 1.0;
};

// Gaussian kernel smoothing of weighted points onto the grid. Cell values are
// the kernel mass falling in the cell divided by the cell area (units of the
// weights per m²), so the field integrates to the total weight exactly up to
// the 6σ truncation (relative mass error < 2e-8). No boundary renormalization:
// mass may leak outside the masked region.
RasterField smooth_points(const std::vector<WeightedPoint>& points, const GridPtr& grid,
                          double sigma);

// Box totals treated as point masses at box centers, then smoothed.
RasterField smooth_areal(const RasterField& box_totals, double sigma);

// |W ∩ W_shift| approximated on the cell grid: cells whose center is
// masked-in and whose shifted center lands in a masked-in cell, times the
// cell area.
double translation_overlap(const SpatialGrid& grid, double dx, double dy);

// Lattice set-covariance of the mask with bilinear lookup between lattice
// shifts; exact for rectangular masks. Used by the pair statistics, where a
// per-pair recount would be too slow.
class OverlapTable {
 public:
  OverlapTable(GridPtr grid, double max_shift);
  double at(double dx, double dy) const;

 private:
  double lattice(int sx, int sy) const;
  GridPtr grid_;
  int smax_ = 0;
  std::vector<double> counts_;  // (2·smax+1)² lattice, row-major over sy then sx
};

// Raster text format: six header lines (ncols, nrows, xllcorner, yllcorner,
// cellsize, nodata_value) then row-major values, 17 significant digits.
RasterField read_raster(const std::string& path);
void write_raster(const RasterField& field, const std::string& path);
std::string raster_to_text(const RasterField& field);
RasterField raster_from_text(const std::string& text, const std::string& origin);

}  // namespace stpp::geom
