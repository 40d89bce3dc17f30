#include "geom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace stpp::geom {

bool SpatialGrid::cell_of(double x, double y, int* row, int* col) const {
  double fc = (x - xll) / cellsize;
  double fr = (y - yll) / cellsize;
  if (fc < 0 || fr < 0) return false;
  int c = static_cast<int>(fc);
  int r_from_bottom = static_cast<int>(fr);
  if (c >= ncols || r_from_bottom >= nrows) return false;
  *col = c;
  *row = nrows - 1 - r_from_bottom;
  return true;
}

bool SpatialGrid::contains(double x, double y) const {
  int r, c;
  return cell_of(x, y, &r, &c) && in(r, c);
}

double SpatialGrid::area() const { return static_cast<double>(masked_in_count()) * cell_area(); }

size_t SpatialGrid::masked_in_count() const {
  size_t n = 0;
  for (uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

void SpatialGrid::validate() const {
  if (ncols <= 0 || nrows <= 0) throw InputError("grid: non-positive dimensions");
  if (!(cellsize > 0)) throw InputError("grid: cellsize must be > 0");
  if (mask.size() != cell_count()) throw InputError("grid: mask size mismatch");
  if (masked_in_count() == 0) throw InputError("grid: no masked-in cells");
}

bool SpatialGrid::same_geometry(const SpatialGrid& o) const {
  return ncols == o.ncols && nrows == o.nrows && xll == o.xll && yll == o.yll &&
         cellsize == o.cellsize && mask == o.mask;
}

GridPtr make_grid(int ncols, int nrows, double xll, double yll, double cellsize) {
  auto g = std::make_shared<SpatialGrid>();
  g->ncols = ncols;
  g->nrows = nrows;
  g->xll = xll;
  g->yll = yll;
  g->cellsize = cellsize;
  g->mask.assign(g->cell_count(), 1);
  g->validate();
  return g;
}

double RasterField::integral() const {
  double s = 0.0;
  const double ca = grid->cell_area();
  for (size_t i = 0; i < values.size(); ++i)
    if (grid->mask[i]) s += values[i] * ca;
  return s;
}

void RasterField::validate(bool nonneg) const {
  if (!grid) throw InputError("raster: missing grid");
  if (values.size() != grid->cell_count()) throw InputError("raster: value count mismatch");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!grid->mask[i]) continue;
    if (!std::isfinite(values[i])) throw InputError("raster: non-finite value on in-region cell");
    if (nonneg && values[i] < 0) throw InputError("raster: negative density value");
  }
}

RasterField smooth_points(const std::vector<WeightedPoint>& points, const GridPtr& grid,
                          double sigma) {
  if (!(sigma > 0)) throw InputError("smooth_points: sigma must be > 0");
  grid->validate();
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.w))
      throw InputError("smooth_points: non-finite point");

  RasterField out(grid);
  const double cs = grid->cellsize;
  const double inv_ca = 1.0 / grid->cell_area();
  const double reach = 6.0 * sigma;  // kernel mass outside is < 2e-8
  const double inv_sq2s = 1.0 / (sigma * std::sqrt(2.0));
  const double y_top = grid->yll + grid->nrows * cs;

  for (const auto& p : points) {
    int c0 = std::max(0, static_cast<int>(std::floor((p.x - reach - grid->xll) / cs)));
    int c1 = std::min(grid->ncols - 1, static_cast<int>(std::floor((p.x + reach - grid->xll) / cs)));
    int r0 = std::max(0, static_cast<int>(std::floor((y_top - (p.y + reach)) / cs)));
    int r1 = std::min(grid->nrows - 1, static_cast<int>(std::floor((y_top - (p.y - reach)) / cs)));
    if (c0 > c1 || r0 > r1) continue;
    // Per-axis cell-integrated Gaussian masses; their product is the exact
    // kernel mass in the cell.
    std::vector<double> gx(c1 - c0 + 1), gy(r1 - r0 + 1);
    for (int c = c0; c <= c1; ++c) {
      double x0 = grid->xll + c * cs;
      gx[c - c0] = 0.5 * (std::erf((x0 + cs - p.x) * inv_sq2s) - std::erf((x0 - p.x) * inv_sq2s));
    }
    for (int r = r0; r <= r1; ++r) {
      double ylo = grid->yll + (grid->nrows - r - 1) * cs;
      gy[r - r0] = 0.5 * (std::erf((ylo + cs - p.y) * inv_sq2s) - std::erf((ylo - p.y) * inv_sq2s));
    }
    for (int r = r0; r <= r1; ++r) {
      const double wy = p.w * gy[r - r0] * inv_ca;
      for (int c = c0; c <= c1; ++c) {
        size_t i = grid->idx(r, c);
        if (grid->mask[i]) out.values[i] += wy * gx[c - c0];
      }
    }
  }
  return out;
}

RasterField smooth_areal(const RasterField& box_totals, double sigma) {
  box_totals.validate(false);
  std::vector<WeightedPoint> pts;
  pts.reserve(box_totals.grid->masked_in_count());
  const auto& g = *box_totals.grid;
  for (int r = 0; r < g.nrows; ++r)
    for (int c = 0; c < g.ncols; ++c) {
      size_t i = g.idx(r, c);
      if (!g.mask[i]) continue;
      pts.push_back({g.center_x(c), g.center_y(r), box_totals.values[i]});
    }
  return smooth_points(pts, box_totals.grid, sigma);
}

double translation_overlap(const SpatialGrid& grid, double dx, double dy) {
  long count = 0;
  for (int r = 0; r < grid.nrows; ++r)
    for (int c = 0; c < grid.ncols; ++c) {
      if (!grid.in(r, c)) continue;
      int rr, cc;
      if (grid.cell_of(grid.center_x(c) + dx, grid.center_y(r) + dy, &rr, &cc) && grid.in(rr, cc))
        ++count;
    }
  return static_cast<double>(count) * grid.cell_area();
}

OverlapTable::OverlapTable(GridPtr grid, double max_shift) : grid_(std::move(grid)) {
  const auto& g = *grid_;
  smax_ = std::min(static_cast<int>(std::ceil(max_shift / g.cellsize)) + 2,
                   std::max(g.ncols, g.nrows));
  const int w = 2 * smax_ + 1;
  counts_.assign(static_cast<size_t>(w) * w, 0.0);
  const double ca = g.cell_area();
  for (int sy = -smax_; sy <= smax_; ++sy) {
    for (int sx = -smax_; sx <= smax_; ++sx) {
      if (sx < 0 || (sx == 0 && sy < 0)) continue;  // fill half, mirror the rest
      long n = 0;
      // +sx in x moves to higher column; +sy in y moves to a lower row index.
      for (int r = 0; r < g.nrows; ++r) {
        int rr = r - sy;
        if (rr < 0 || rr >= g.nrows) continue;
        for (int c = 0; c < g.ncols; ++c) {
          int cc = c + sx;
          if (cc < 0 || cc >= g.ncols) continue;
          if (g.in(r, c) && g.in(rr, cc)) ++n;
        }
      }
      double v = static_cast<double>(n) * ca;
      counts_[static_cast<size_t>(sy + smax_) * w + (sx + smax_)] = v;
      counts_[static_cast<size_t>(-sy + smax_) * w + (-sx + smax_)] = v;
    }
  }
}

double OverlapTable::lattice(int sx, int sy) const {
  if (std::abs(sx) > smax_ || std::abs(sy) > smax_) return 0.0;
  const int w = 2 * smax_ + 1;
  return counts_[static_cast<size_t>(sy + smax_) * w + (sx + smax_)];
}

double OverlapTable::at(double dx, double dy) const {
  const double cs = grid_->cellsize;
  double fx = dx / cs, fy = dy / cs;
  int sx = static_cast<int>(std::floor(fx));
  int sy = static_cast<int>(std::floor(fy));
  double wx = fx - sx, wy = fy - sy;
  return (1 - wx) * (1 - wy) * lattice(sx, sy) + wx * (1 - wy) * lattice(sx + 1, sy) +
         (1 - wx) * wy * lattice(sx, sy + 1) + wx * wy * lattice(sx + 1, sy + 1);
}

std::string raster_to_text(const RasterField& field) {
  field.validate(false);
  const auto& g = *field.grid;
  std::ostringstream out;
  out << "ncols " << g.ncols << "\n";
  out << "nrows " << g.nrows << "\n";
  out << "xllcorner " << fmt_g17(g.xll) << "\n";
  out << "yllcorner " << fmt_g17(g.yll) << "\n";
  out << "cellsize " << fmt_g17(g.cellsize) << "\n";
  out << "nodata_value " << fmt_g17(g.nodata) << "\n";
  for (int r = 0; r < g.nrows; ++r) {
    for (int c = 0; c < g.ncols; ++c) {
      if (c) out << ' ';
      size_t i = g.idx(r, c);
      out << fmt_g17(g.mask[i] ? field.values[i] : g.nodata);
    }
    out << '\n';
  }
  return out.str();
}

void write_raster(const RasterField& field, const std::string& path) {
  atomic_write(path, raster_to_text(field));
}

RasterField raster_from_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  auto header = [&](const char* key) {
    std::string k;
    double v;
    if (!(in >> k >> v)) throw InputError(origin + ": truncated raster header");
    std::string lk = k;
    std::transform(lk.begin(), lk.end(), lk.begin(), ::tolower);
    if (lk != key) throw InputError(origin + ": expected header '" + key + "', got '" + k + "'");
    return v;
  };
  auto g = std::make_shared<SpatialGrid>();
  g->ncols = static_cast<int>(header("ncols"));
  g->nrows = static_cast<int>(header("nrows"));
  g->xll = header("xllcorner");
  g->yll = header("yllcorner");
  g->cellsize = header("cellsize");
  g->nodata = header("nodata_value");
  if (g->ncols <= 0 || g->nrows <= 0 || !(g->cellsize > 0))
    throw InputError(origin + ": invalid raster dimensions");
  g->mask.assign(g->cell_count(), 0);
  std::vector<double> values(g->cell_count(), 0.0);
  for (size_t i = 0; i < g->cell_count(); ++i) {
    double v;
    if (!(in >> v)) throw InputError(origin + ": truncated raster values");
    if (v == g->nodata) continue;
    g->mask[i] = 1;
    values[i] = v;
  }
  double extra;
  if (in >> extra) throw InputError(origin + ": trailing raster values");
  g->validate();
  RasterField field{GridPtr(g)};
  field.values = std::move(values);
  return field;
}

RasterField read_raster(const std::string& path) {
  return raster_from_text(read_file(path), path);
}

}  // namespace stpp::geom
