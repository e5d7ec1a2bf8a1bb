#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stormvi/errors.hpp"

namespace stormvi {

// Row-major grid in ESRI ASCII order: row 0 is the northernmost row.
// Cell (row, col) has center x = xllcorner + (col + 0.5) * cellsize,
// y = yllcorner + (nrows - 1 - row + 0.5) * cellsize.
struct GridRaster {
  int ncols = 0;
  int nrows = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  double nodata_value = -9999.0;
  std::vector<double> values;

  double at(int row, int col) const { return values[row * ncols + col]; }
  double& at(int row, int col) { return values[row * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata_value; }
  bool same_geometry(const GridRaster& o) const;
};

GridRaster read_ascii_grid(const std::string& path);
void write_ascii_grid(const GridRaster& raster, const std::string& path);

enum class ResampleMethod { Nearest, Bilinear };

// Resamples src onto target's geometry. Cells outside src's extent become
// NODATA; bilinear also yields NODATA when any of the four neighbors is
// NODATA or missing. Throws DataError on disjoint extents.
GridRaster resample_to_grid(const GridRaster& src, const GridRaster& target,
                            ResampleMethod method);

// One grid cell that enters inference. wind_prior / flood_prior are the
// log-scale inputs a_W, a_F; dpm is the positive observation y.
struct LocationRecord {
  int row = 0;
  int col = 0;
  double dpm = 0.0;
  double wind_prior = 0.0;
  double flood_prior = 0.0;
  bool has_footprint = false;
  std::optional<int> label;
};

struct LocationTable {
  int nrows = 0;
  int ncols = 0;
  double xllcorner = 0.0;
  double yllcorner = 0.0;
  double cellsize = 1.0;
  std::vector<LocationRecord> records;
};

// Builds one record per DPM cell where dpm, flood and wind are all valid.
// Zero/negative DPM values are floored at delta = 1e-3 * (smallest positive
// DPM value); prior layers are ingested as log(max(value, delta)). The
// footprint layer marks has_footprint where it is valid and nonzero.
// All layers must share the DPM geometry.
LocationTable build_location_table(const GridRaster& dpm,
                                   const GridRaster& flood,
                                   const GridRaster& wind,
                                   const GridRaster& footprint);

struct DamageLabel {
  double lat = 0.0;
  double lon = 0.0;
  int level = 0;  // 0..4
};

std::vector<DamageLabel> read_labels_csv(const std::string& path);

struct LabelJoinStats {
  int applied = 0;        // cells that received a label
  int out_of_extent = 0;  // labels outside the table's grid
  int unmatched = 0;      // labels on cells without a footprint record
};

// Attaches binarized labels to footprint cells: buildings aggregate per cell
// by maximum level, and level >= 3 maps to 1.
LabelJoinStats join_labels(LocationTable& table,
                           const std::vector<DamageLabel>& labels);

// CSV with header row,col,y,a_w,a_f,footprint,label (label empty if absent).
void write_location_table_csv(const LocationTable& table,
                              const std::string& path);

}  // namespace stormvi
