#include "stormvi/geodata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace stormvi {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_double(const std::string& tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

bool GridRaster::same_geometry(const GridRaster& o) const {
  return ncols == o.ncols && nrows == o.nrows && xllcorner == o.xllcorner &&
         yllcorner == o.yllcorner && cellsize == o.cellsize;
}

GridRaster read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open raster: " + path);

  GridRaster g;
  std::map<std::string, double> header;
  std::string line;
  int line_no = 0;

  // Header: six key/value lines, keys case-insensitive, any order.
  while (header.size() < 6) {
    if (!std::getline(in, line)) parse_fail(path, line_no, "truncated header");
    ++line_no;
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key >> value)) parse_fail(path, line_no, "malformed header line");
    double v;
    if (!parse_double(value, v))
      parse_fail(path, line_no, "non-numeric header value '" + value + "'");
    std::string extra;
    if (ls >> extra) parse_fail(path, line_no, "trailing tokens in header");
    header[lower(key)] = v;
  }

  for (const char* key :
       {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"})
    if (!header.count(key))
      parse_fail(path, line_no, std::string("missing header key ") + key);

  g.ncols = static_cast<int>(header["ncols"]);
  g.nrows = static_cast<int>(header["nrows"]);
  g.xllcorner = header["xllcorner"];
  g.yllcorner = header["yllcorner"];
  g.cellsize = header["cellsize"];
  g.nodata_value = header["nodata_value"];
  if (g.ncols <= 0 || g.nrows <= 0)
    parse_fail(path, line_no, "ncols/nrows must be positive");
  if (!(g.cellsize > 0)) parse_fail(path, line_no, "cellsize must be positive");

  const std::size_t expect =
      static_cast<std::size_t>(g.ncols) * static_cast<std::size_t>(g.nrows);
  g.values.reserve(expect);
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      double v;
      if (!parse_double(tok, v))
        parse_fail(path, line_no, "non-numeric token '" + tok + "'");
      if (g.values.size() == expect)
        parse_fail(path, line_no, "more values than ncols*nrows");
      g.values.push_back(v);
    }
  }
  if (g.values.size() != expect)
    parse_fail(path, line_no,
               "value count mismatch: got " + std::to_string(g.values.size()) +
                   ", expected " + std::to_string(expect));
  return g;
}

void write_ascii_grid(const GridRaster& raster, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write raster: " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  out << "NCOLS " << raster.ncols << "\n";
  out << "NROWS " << raster.nrows << "\n";
  out << "XLLCORNER " << fmt(raster.xllcorner) << "\n";
  out << "YLLCORNER " << fmt(raster.yllcorner) << "\n";
  out << "CELLSIZE " << fmt(raster.cellsize) << "\n";
  out << "NODATA_VALUE " << fmt(raster.nodata_value) << "\n";
  for (int r = 0; r < raster.nrows; ++r) {
    for (int c = 0; c < raster.ncols; ++c) {
      if (c) out << ' ';
      out << fmt(raster.at(r, c));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

GridRaster resample_to_grid(const GridRaster& src, const GridRaster& target,
                            ResampleMethod method) {
  const double sx0 = src.xllcorner;
  const double sy0 = src.yllcorner;
  const double sx1 = sx0 + src.ncols * src.cellsize;
  const double sy1 = sy0 + src.nrows * src.cellsize;
  const double tx0 = target.xllcorner;
  const double ty0 = target.yllcorner;
  const double tx1 = tx0 + target.ncols * target.cellsize;
  const double ty1 = ty0 + target.nrows * target.cellsize;
  if (sx1 <= tx0 || tx1 <= sx0 || sy1 <= ty0 || ty1 <= sy0)
    throw DataError("resample_to_grid: disjoint extents");

  GridRaster out = target;
  out.nodata_value = target.nodata_value;
  out.values.assign(
      static_cast<std::size_t>(target.ncols) * target.nrows,
      target.nodata_value);

  for (int r = 0; r < target.nrows; ++r) {
    for (int c = 0; c < target.ncols; ++c) {
      const double x = tx0 + (c + 0.5) * target.cellsize;
      const double y = ty0 + (target.nrows - 1 - r + 0.5) * target.cellsize;
      if (x < sx0 || x >= sx1 || y < sy0 || y >= sy1) continue;

      if (method == ResampleMethod::Nearest) {
        const int sc = static_cast<int>(std::floor((x - sx0) / src.cellsize));
        const int sb = static_cast<int>(std::floor((y - sy0) / src.cellsize));
        const int sr = src.nrows - 1 - sb;
        const double v = src.at(sr, sc);
        if (!src.is_nodata(v)) out.at(r, c) = v;
      } else {
        // Continuous coordinates in units of src cell centers.
        const double u = (x - sx0) / src.cellsize - 0.5;   // column axis
        const double w = (y - sy0) / src.cellsize - 0.5;   // row-from-bottom
        const int c0 = static_cast<int>(std::floor(u));
        const int b0 = static_cast<int>(std::floor(w));
        if (c0 < 0 || c0 + 1 >= src.ncols || b0 < 0 || b0 + 1 >= src.nrows)
          continue;
        const double fu = u - c0;
        const double fw = w - b0;
        const double v00 = src.at(src.nrows - 1 - b0, c0);
        const double v01 = src.at(src.nrows - 1 - b0, c0 + 1);
        const double v10 = src.at(src.nrows - 1 - (b0 + 1), c0);
        const double v11 = src.at(src.nrows - 1 - (b0 + 1), c0 + 1);
        if (src.is_nodata(v00) || src.is_nodata(v01) || src.is_nodata(v10) ||
            src.is_nodata(v11))
          continue;
        out.at(r, c) = (1 - fw) * ((1 - fu) * v00 + fu * v01) +
                       fw * ((1 - fu) * v10 + fu * v11);
      }
    }
  }
  return out;
}

LocationTable build_location_table(const GridRaster& dpm,
                                   const GridRaster& flood,
                                   const GridRaster& wind,
                                   const GridRaster& footprint) {
  if (!dpm.same_geometry(flood) || !dpm.same_geometry(wind) ||
      !dpm.same_geometry(footprint))
    throw DataError("build_location_table: layers not on the DPM geometry");

  // Flooring scale: smallest positive DPM value, down 3 decades.
  double min_pos = std::numeric_limits<double>::infinity();
  for (double v : dpm.values)
    if (!dpm.is_nodata(v) && v > 0.0) min_pos = std::min(min_pos, v);
  const double delta =
      std::isfinite(min_pos) ? 1e-3 * min_pos : 1e-6;

  LocationTable table;
  table.nrows = dpm.nrows;
  table.ncols = dpm.ncols;
  table.xllcorner = dpm.xllcorner;
  table.yllcorner = dpm.yllcorner;
  table.cellsize = dpm.cellsize;

  for (int r = 0; r < dpm.nrows; ++r) {
    for (int c = 0; c < dpm.ncols; ++c) {
      const double y = dpm.at(r, c);
      const double f = flood.at(r, c);
      const double w = wind.at(r, c);
      if (dpm.is_nodata(y) || flood.is_nodata(f) || wind.is_nodata(w))
        continue;
      LocationRecord rec;
      rec.row = r;
      rec.col = c;
      rec.dpm = y > 0.0 ? y : delta;
      rec.flood_prior = std::log(std::max(f, delta));
      rec.wind_prior = std::log(std::max(w, delta));
      const double fp = footprint.at(r, c);
      rec.has_footprint = !footprint.is_nodata(fp) && fp != 0.0;
      table.records.push_back(rec);
    }
  }
  return table;
}

std::vector<DamageLabel> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels: " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty labels file");
  ++line_no;
  {
    std::string h = lower(line);
    h.erase(std::remove_if(h.begin(), h.end(),
                           [](char c) { return c == ' ' || c == '\r'; }),
            h.end());
    if (h != "lat,lon,level")
      parse_fail(path, 1, "expected header lat,lon,level");
  }
  std::vector<DamageLabel> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 3> cols;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
      // the level column runs to end of line so stray columns get rejected
      const std::size_t comma =
          i < 2 ? line.find(',', start) : std::string::npos;
      if (i < 2 && comma == std::string::npos)
        parse_fail(path, line_no, "expected 3 columns");
      cols[i] = line.substr(start, comma == std::string::npos
                                       ? std::string::npos
                                       : comma - start);
      start = comma + 1;
    }
    DamageLabel lab;
    double level;
    if (!parse_double(cols[0], lab.lat) || !parse_double(cols[1], lab.lon) ||
        !parse_double(cols[2], level))
      parse_fail(path, line_no, "non-numeric label field");
    lab.level = static_cast<int>(level);
    if (lab.level < 0 || lab.level > 4 || level != lab.level)
      parse_fail(path, line_no, "level must be an integer in 0..4");
    labels.push_back(lab);
  }
  return labels;
}

LabelJoinStats join_labels(LocationTable& table,
                           const std::vector<DamageLabel>& labels) {
  LabelJoinStats stats;
  // Aggregate per cell by max level before binarizing.
  std::map<std::pair<int, int>, int> cell_level;
  for (const auto& lab : labels) {
    const int c =
        static_cast<int>(std::floor((lab.lon - table.xllcorner) / table.cellsize));
    const int b =
        static_cast<int>(std::floor((lab.lat - table.yllcorner) / table.cellsize));
    if (c < 0 || c >= table.ncols || b < 0 || b >= table.nrows) {
      ++stats.out_of_extent;
      continue;
    }
    const int r = table.nrows - 1 - b;
    auto [it, fresh] = cell_level.try_emplace({r, c}, lab.level);
    if (!fresh) it->second = std::max(it->second, lab.level);
  }

  std::map<std::pair<int, int>, LocationRecord*> index;
  for (auto& rec : table.records) index[{rec.row, rec.col}] = &rec;
  for (const auto& [cell, level] : cell_level) {
    auto it = index.find(cell);
    if (it == index.end() || !it->second->has_footprint) {
      ++stats.unmatched;
      continue;
    }
    it->second->label = level >= 3 ? 1 : 0;
    ++stats.applied;
  }
  return stats;
}

void write_location_table_csv(const LocationTable& table,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write table: " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  out << "row,col,y,a_w,a_f,footprint,label\n";
  for (const auto& rec : table.records) {
    out << rec.row << ',' << rec.col << ',' << fmt(rec.dpm) << ','
        << fmt(rec.wind_prior) << ',' << fmt(rec.flood_prior) << ','
        << (rec.has_footprint ? 1 : 0) << ',';
    if (rec.label) out << *rec.label;
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace stormvi
