#include "venibot/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>

#include "venibot/errors.hpp"

namespace venibot::geometry {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr std::array<int, 8> kDx = {0, 1, 1, 1, 0, -1, -1, -1};  // N NE E SE S SW W NW
constexpr std::array<int, 8> kDy = {-1, -1, 0, 1, 1, 1, 0, -1};

std::size_t idx(int x, int y, int w) { return static_cast<std::size_t>(y) * w + x; }

std::array<bool, 8> ring(const std::vector<std::uint8_t>& img, int w, int h, int x, int y) {
  std::array<bool, 8> p{};
  for (int k = 0; k < 8; ++k) {
    const int xx = x + kDx[k], yy = y + kDy[k];
    p[k] = xx >= 0 && yy >= 0 && xx < w && yy < h && img[idx(xx, yy, w)];
  }
  return p;
}

// Number of 8-connected groups formed by the set neighbours of a pixel.
int neighbour_groups(const std::array<bool, 8>& p) {
  std::array<int, 8> comp{};
  comp.fill(-1);
  int groups = 0;
  for (int s = 0; s < 8; ++s) {
    if (!p[s] || comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = groups;
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      for (int j = 0; j < 8; ++j) {
        if (!p[j] || comp[j] >= 0) continue;
        const int dx = std::abs(kDx[k] - kDx[j]), dy = std::abs(kDy[k] - kDy[j]);
        if (dx <= 1 && dy <= 1) {
          comp[j] = groups;
          stack.push_back(j);
        }
      }
    }
    ++groups;
  }
  return groups;
}

int degree_at(const std::vector<std::uint8_t>& img, int w, int h, int x, int y) {
  const auto p = ring(img, w, h, x, y);
  return static_cast<int>(std::count(p.begin(), p.end(), true));
}

bool inside_margin(int x, int y, int w, int h, int m) {
  return x >= m && y >= m && x < w - m && y < h - m;
}

}  // namespace

BinaryMask Skeleton::to_mask() const {
  BinaryMask m(width, height);
  for (auto p : pixels) m.set(p.x, p.y);
  return m;
}

void SuitabilityRules::validate() const {
  if (!(min_length_px > 0.0) || !(max_mean_turning_deg_per_px > 0.0) || edge_margin_px < 0 ||
      !(min_diameter_px > 0.0))
    throw ParameterError("suitability thresholds must be positive");
}

double EllipseFit::opencv_angle_deg() const {
  return std::fmod(gamma_deg + 90.0, 180.0);
}

double wrap_axis_deg(double deg) {
  double r = std::fmod(deg, 180.0);
  if (r <= -90.0) r += 180.0;
  if (r > 90.0) r -= 180.0;
  return r;
}

double axis_difference_deg(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

double continuous_angle_deg(double opencv_gamma_deg) { return std::abs(opencv_gamma_deg - 90.0); }

Skeleton skeletonize(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> img(mask.bits().begin(), mask.bits().end());

  // Zhang-Suen thinning.
  std::vector<std::size_t> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!img[idx(x, y, w)]) continue;
          const auto p = ring(img, w, h, x, y);
          const int b = static_cast<int>(std::count(p.begin(), p.end(), true));
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k) a += (!p[k] && p[(k + 1) % 8]) ? 1 : 0;
          if (a != 1) continue;
          // p[0]=N p[2]=E p[4]=S p[6]=W
          if (pass == 0) {
            if (p[0] && p[2] && p[4]) continue;
            if (p[2] && p[4] && p[6]) continue;
          } else {
            if (p[0] && p[2] && p[6]) continue;
            if (p[0] && p[4] && p[6]) continue;
          }
          to_clear.push_back(idx(x, y, w));
        }
      for (auto i : to_clear) img[i] = 0;
      changed = changed || !to_clear.empty();
    }
  }

  // Remove staircase corners so the path is 8-minimal: a pixel with two
  // perpendicular 4-neighbours is redundant when its removal keeps the
  // neighbourhood connected.
  changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!img[idx(x, y, w)]) continue;
        const auto p = ring(img, w, h, x, y);
        const bool corner = (p[0] && p[2] && !p[5]) || (p[2] && p[4] && !p[7]) ||
                            (p[4] && p[6] && !p[1]) || (p[6] && p[0] && !p[3]);
        if (!corner || neighbour_groups(p) != 1) continue;
        img[idx(x, y, w)] = 0;
        changed = true;
      }
  }

  Skeleton s;
  s.width = w;
  s.height = h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (img[idx(x, y, w)]) {
        s.pixels.push_back({x, y});
        s.degree.push_back(degree_at(img, w, h, x, y));
      }
  return s;
}

std::vector<double> distance_transform(const BinaryMask& mask) {
  // Felzenszwalb-Huttenlocher squared EDT on a raster padded by one background pixel.
  const int w = mask.width() + 2, h = mask.height() + 2;
  constexpr double inf = 1e20;
  std::vector<double> f(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) f[idx(x + 1, y + 1, w)] = inf;

  auto pass = [](std::vector<double>& line) {
    const int n = static_cast<int>(line.size());
    std::vector<double> d(n), z(n + 1);
    std::vector<int> v(n);
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
      double s = ((line[q] + q * q) - (line[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      while (s <= z[k]) {
        --k;
        s = ((line[q] + q * q) - (line[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      d[q] = (q - v[k]) * (q - v[k]) + line[v[k]];
    }
    line = std::move(d);
  };

  std::vector<double> line;
  for (int x = 0; x < w; ++x) {
    line.resize(h);
    for (int y = 0; y < h; ++y) line[y] = f[idx(x, y, w)];
    pass(line);
    for (int y = 0; y < h; ++y) f[idx(x, y, w)] = line[y];
  }
  for (int y = 0; y < h; ++y) {
    line.assign(f.begin() + idx(0, y, w), f.begin() + idx(0, y, w) + w);
    pass(line);
    std::copy(line.begin(), line.end(), f.begin() + idx(0, y, w));
  }

  std::vector<double> out(mask.size());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      out[idx(x, y, mask.width())] = std::sqrt(f[idx(x + 1, y + 1, w)]);
  return out;
}

namespace {

struct BranchSplit {
  std::vector<int> branch_of;            // per pixel: branch id (1-based), -1 junction, 0 none
  std::vector<std::vector<Point>> branches;  // unordered pixels per branch
  std::vector<Point> junctions;
};

BranchSplit split_branches(const std::vector<std::uint8_t>& skel, int w, int h) {
  BranchSplit bs;
  bs.branch_of.assign(skel.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (skel[idx(x, y, w)] && degree_at(skel, w, h, x, y) >= 3) {
        bs.branch_of[idx(x, y, w)] = -1;
        bs.junctions.push_back({x, y});
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!skel[idx(x, y, w)] || bs.branch_of[idx(x, y, w)] != 0) continue;
      const int id = static_cast<int>(bs.branches.size()) + 1;
      std::vector<Point> pix;
      std::vector<Point> stack{{x, y}};
      bs.branch_of[idx(x, y, w)] = id;
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        pix.push_back(p);
        for (int k = 0; k < 8; ++k) {
          const int qx = p.x + kDx[k], qy = p.y + kDy[k];
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          const auto q = idx(qx, qy, w);
          if (!skel[q] || bs.branch_of[q] != 0) continue;
          bs.branch_of[q] = id;
          stack.push_back({qx, qy});
        }
      }
      std::sort(pix.begin(), pix.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      bs.branches.push_back(std::move(pix));
    }
  return bs;
}

// Orders the pixels of one branch into a path, starting from an end.
std::vector<Point> order_path(const std::vector<Point>& pix, const std::vector<int>& branch_of,
                              int id, int w, int h) {
  if (pix.empty()) return {};
  auto neighbours = [&](Point p, bool four_first) {
    std::vector<Point> out;
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < 8; ++k) {
        const bool diag = (k % 2) == 1;
        if (four_first && (pass == 0) == diag) continue;
        if (!four_first && pass == 1) continue;
        const int qx = p.x + kDx[k], qy = p.y + kDy[k];
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        if (branch_of[idx(qx, qy, w)] == id) out.push_back({qx, qy});
      }
    return out;
  };
  Point start = pix.front();
  for (auto p : pix)
    if (neighbours(p, false).size() <= 1) {
      start = p;
      break;
    }
  std::vector<Point> path{start};
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  seen[idx(start.x, start.y, w)] = 1;
  Point cur = start;
  while (true) {
    bool moved = false;
    for (auto q : neighbours(cur, true)) {
      if (seen[idx(q.x, q.y, w)]) continue;
      seen[idx(q.x, q.y, w)] = 1;
      path.push_back(q);
      cur = q;
      moved = true;
      break;
    }
    if (!moved) break;
  }
  return path;
}

bool adjacent_to_junction(const std::vector<Point>& pix, const std::vector<int>& branch_of, int w,
                          int h) {
  for (auto p : pix)
    for (int k = 0; k < 8; ++k) {
      const int qx = p.x + kDx[k], qy = p.y + kDy[k];
      if (qx >= 0 && qy >= 0 && qx < w && qy < h && branch_of[idx(qx, qy, w)] == -1) return true;
    }
  return false;
}

double step_length(Point a, Point b) { return (a.x != b.x && a.y != b.y) ? std::numbers::sqrt2 : 1.0; }

}  // namespace

std::vector<double> local_turning(std::span<const double> xs, std::span<const double> ys) {
  constexpr int kHalf = 3;  // 7-px moving average
  const int n = static_cast<int>(xs.size());
  // Direction windows of 20 points, shortened on short paths.
  const int kWindow = std::min(20, (n - 1) / 2);
  std::vector<double> out(xs.size(), std::numeric_limits<double>::quiet_NaN());
  if (kWindow < 3) return out;
  std::vector<double> sx(n), sy(n);
  for (int i = 0; i < n; ++i) {
    double ax = 0.0, ay = 0.0;
    int c = 0;
    for (int j = std::max(0, i - kHalf); j <= std::min(n - 1, i + kHalf); ++j, ++c) {
      ax += xs[j];
      ay += ys[j];
    }
    sx[i] = ax / c;
    sy[i] = ay / c;
  }
  std::vector<double> arc(n, 0.0);
  for (int i = 1; i < n; ++i) arc[i] = arc[i - 1] + std::hypot(sx[i] - sx[i - 1], sy[i] - sy[i - 1]);

  // Principal direction of points [a, b], oriented from a towards b.
  auto direction = [&](int a, int b) {
    double mx = 0.0, my = 0.0;
    for (int j = a; j <= b; ++j) {
      mx += sx[j];
      my += sy[j];
    }
    mx /= (b - a + 1);
    my /= (b - a + 1);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int j = a; j <= b; ++j) {
      sxx += (sx[j] - mx) * (sx[j] - mx);
      syy += (sy[j] - my) * (sy[j] - my);
      sxy += (sx[j] - mx) * (sy[j] - my);
    }
    double ang = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    if (std::cos(ang) * (sx[b] - sx[a]) + std::sin(ang) * (sy[b] - sy[a]) < 0.0) ang += std::numbers::pi;
    return ang;
  };

  for (int i = kWindow; i + kWindow < n; ++i) {
    double d = std::abs(direction(i, i + kWindow) - direction(i - kWindow, i)) * kDeg;
    d = std::fmod(d, 360.0);
    if (d > 180.0) d = 360.0 - d;
    // Window centres are half the spanned arc length apart.
    out[i] = d / (0.5 * (arc[i + kWindow] - arc[i - kWindow]));
  }
  return out;
}

TurningSummary summarize_turning(std::span<const double> xs, std::span<const double> ys,
                                 std::span<const std::uint8_t> inner) {
  TurningSummary out;
  double sum = 0.0;
  auto take = [&](std::size_t a, std::size_t b) {
    const auto t = local_turning(xs.subspan(a, b - a + 1), ys.subspan(a, b - a + 1));
    for (double v : t) {
      if (std::isnan(v)) continue;
      sum += v;
      out.max = std::max(out.max, v);
      ++out.samples;
    }
  };
  const std::size_t n = xs.size();
  for (std::size_t a = 0; a < n;) {
    if (!inner[a]) {
      ++a;
      continue;
    }
    std::size_t b = a;
    while (b + 1 < n && inner[b + 1]) ++b;
    take(a, b);
    a = b + 1;
  }
  if (out.samples == 0 && n > 0) take(0, n - 1);
  out.mean = out.samples ? sum / out.samples : 0.0;
  return out;
}

SegmentAnalysis analyze_segments(const BinaryMask& mask, const Skeleton& skel,
                                 const SuitabilityRules& rules) {
  const int w = mask.width(), h = mask.height();
  const auto dt = distance_transform(mask);
  std::vector<std::uint8_t> sk(mask.size(), 0);
  for (auto p : skel.pixels) sk[idx(p.x, p.y, w)] = 1;

  // Prune terminal spurs shorter than the local diameter at their junction.
  for (int iter = 0; iter < 16; ++iter) {
    const auto bs = split_branches(sk, w, h);
    bool pruned = false;
    for (std::size_t b = 0; b < bs.branches.size(); ++b) {
      const auto& pix = bs.branches[b];
      const int id = static_cast<int>(b) + 1;
      if (!adjacent_to_junction(pix, bs.branch_of, w, h)) continue;
      bool has_end = false;
      for (auto p : pix)
        if (degree_at(sk, w, h, p.x, p.y) <= 1) has_end = true;
      if (!has_end && pix.size() > 1) continue;
      double local = 0.0;
      for (auto p : pix)
        for (int k = 0; k < 8; ++k) {
          const int qx = p.x + kDx[k], qy = p.y + kDy[k];
          if (qx >= 0 && qy >= 0 && qx < w && qy < h && bs.branch_of[idx(qx, qy, w)] == -1)
            local = std::max(local, 2.0 * dt[idx(qx, qy, w)]);
        }
      const auto path = order_path(pix, bs.branch_of, id, w, h);
      double len = 0.0;
      for (std::size_t i = 1; i < path.size(); ++i) len += step_length(path[i - 1], path[i]);
      if (len < std::max(3.0, local)) {
        for (auto p : pix) sk[idx(p.x, p.y, w)] = 0;
        pruned = true;
      }
    }
    if (!pruned) break;
  }

  const auto bs = split_branches(sk, w, h);
  SegmentAnalysis out;
  out.junctions = bs.junctions;
  for (auto j : bs.junctions) out.junction_radius.push_back(2.0 * dt[idx(j.x, j.y, w)]);

  auto inner = [&](Point p) {
    if (!inside_margin(p.x, p.y, w, h, rules.edge_margin_px)) return false;
    for (std::size_t j = 0; j < out.junctions.size(); ++j) {
      const double dx = p.x - out.junctions[j].x, dy = p.y - out.junctions[j].y;
      if (dx * dx + dy * dy <= out.junction_radius[j] * out.junction_radius[j]) return false;
    }
    return true;
  };

  for (std::size_t b = 0; b < bs.branches.size(); ++b) {
    const int id = static_cast<int>(b) + 1;
    SegmentStats st;
    st.id = id;
    st.path = order_path(bs.branches[b], bs.branch_of, id, w, h);
    const auto& path = st.path;
    const std::size_t n = path.size();
    std::vector<bool> in(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = inner(path[i]);
    for (std::size_t i = 1; i < n; ++i) {
      const double s = step_length(path[i - 1], path[i]);
      st.arc_length_px += s;
      if (in[i - 1] && in[i]) st.inner_length_px += s;
    }
    st.has_bifurcation = adjacent_to_junction(bs.branches[b], bs.branch_of, w, h);
    for (auto p : path)
      if (!inside_margin(p.x, p.y, w, h, rules.edge_margin_px)) st.touches_edge = true;

    double dsum = 0.0;
    int dcount = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (in[i]) {
        dsum += 2.0 * dt[idx(path[i].x, path[i].y, w)];
        ++dcount;
      }
    if (dcount == 0)
      for (auto p : path) {
        dsum += 2.0 * dt[idx(p.x, p.y, w)];
        ++dcount;
      }
    st.mean_diameter_px = dcount ? dsum / dcount : 0.0;

    std::vector<double> px(n), py(n);
    std::vector<std::uint8_t> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = path[i].x;
      py[i] = path[i].y;
      flags[i] = in[i] ? 1 : 0;
    }
    const auto turn = summarize_turning(px, py, flags);
    st.mean_turning_deg_per_px = turn.mean;
    st.max_turning_deg_per_px = turn.max;
    out.segments.push_back(std::move(st));
  }
  return out;
}

std::vector<SegmentStats> analyze_segments(const BinaryMask& mask, const Skeleton& skel, int edge_margin) {
  SuitabilityRules rules;
  rules.edge_margin_px = edge_margin;
  return analyze_segments(mask, skel, rules).segments;
}

bool is_suitable(const SegmentStats& s, const SuitabilityRules& rules) {
  return s.inner_length_px >= rules.min_length_px &&
         s.max_turning_deg_per_px <= rules.max_mean_turning_deg_per_px &&
         s.mean_diameter_px >= rules.min_diameter_px;
}

BinaryMask erase_unsuitable(const BinaryMask& mask, const SegmentAnalysis& analysis,
                            const SuitabilityRules& rules) {
  rules.validate();
  const int w = mask.width(), h = mask.height();
  // Geodesic nearest-skeleton assignment: multi-source BFS inside the mask.
  // owner > 0: branch id, -1: junction, 0: unreached.
  std::vector<int> owner(mask.size(), 0);
  std::deque<Point> queue;
  for (const auto& s : analysis.segments)
    for (auto p : s.path) {
      if (!mask.at(p.x, p.y)) continue;
      owner[idx(p.x, p.y, w)] = s.id;
      queue.push_back(p);
    }
  for (auto j : analysis.junctions) {
    if (!mask.at(j.x, j.y)) continue;
    owner[idx(j.x, j.y, w)] = -1;
    queue.push_back(j);
  }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    const int o = owner[idx(p.x, p.y, w)];
    for (int k = 0; k < 8; ++k) {
      const int qx = p.x + kDx[k], qy = p.y + kDy[k];
      if (!mask.contains(qx, qy) || !mask.at(qx, qy) || owner[idx(qx, qy, w)] != 0) continue;
      owner[idx(qx, qy, w)] = o;
      queue.push_back({qx, qy});
    }
  }

  std::vector<bool> keep_branch(analysis.segments.size() + 1, false);
  for (const auto& s : analysis.segments) keep_branch[s.id] = is_suitable(s, rules);

  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int o = owner[idx(x, y, w)];
      if (o <= 0 || !keep_branch[o] || !inside_margin(x, y, w, h, rules.edge_margin_px)) continue;
      bool near_junction = false;
      for (std::size_t j = 0; j < analysis.junctions.size() && !near_junction; ++j) {
        const double dx = x - analysis.junctions[j].x, dy = y - analysis.junctions[j].y;
        near_junction = dx * dx + dy * dy <= analysis.junction_radius[j] * analysis.junction_radius[j];
      }
      if (!near_junction) out.set(x, y);
    }
  // Kept branches that still touch (shallow forks, parallel runs) are cut
  // apart so that every output component belongs to exactly one branch.
  BinaryMask cut = out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!out.at(x, y)) continue;
      const int o = owner[idx(x, y, w)];
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
          if (out.get_or(x + dx, y + dy, false) && owner[idx(x + dx, y + dy, w)] != o) cut.set(x, y, false);
    }
  return cut;
}

EllipseFit fit_component_angle(const vision::ComponentSet& components, int component) {
  if (component < 1 || component > components.count())
    throw FitError("fit_component_angle: unknown component " + std::to_string(component));
  const auto& st = components.stats[component - 1];
  if (st.area < 5) throw FitError("fit_component_angle: component has fewer than 5 pixels");
  double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
  for (int y = st.min_y; y <= st.max_y; ++y)
    for (int x = st.min_x; x <= st.max_x; ++x) {
      if (components.label(x, y) != component) continue;
      const double dx = x - st.cx, dy = y - st.cy;
      mu20 += dx * dx;
      mu02 += dy * dy;
      mu11 += dx * dy;
    }
  // Each pixel is a unit square, which adds 1/12 to both axis variances.
  mu20 = mu20 / st.area + 1.0 / 12.0;
  mu02 = mu02 / st.area + 1.0 / 12.0;
  mu11 /= st.area;
  const double tr = 0.5 * (mu20 + mu02);
  const double disc = std::sqrt(0.25 * (mu20 - mu02) * (mu20 - mu02) + mu11 * mu11);
  EllipseFit fit;
  fit.cx = st.cx;
  fit.cy = st.cy;
  fit.a = 2.0 * std::sqrt(tr + disc);
  fit.b = 2.0 * std::sqrt(std::max(tr - disc, 0.0));
  if (fit.a - fit.b <= 0.01 * fit.a)
    throw DegenerateOrientationError("fit_component_angle: major and minor axes agree within 1%");
  double g = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02) * kDeg;
  if (g < 0.0) g += 180.0;
  if (g >= 180.0) g -= 180.0;
  fit.gamma_deg = g;
  return fit;
}

EllipseFit fit_component_angle(const BinaryMask& mask, int component) {
  return fit_component_angle(vision::connected_components(mask), component);
}

PunctureTarget continuous_angle(const EllipseFit& fit, const vision::ComponentSet& components,
                                int component) {
  if (component < 1 || component > components.count())
    throw FitError("continuous_angle: unknown component " + std::to_string(component));
  const auto& st = components.stats[component - 1];
  PunctureTarget t;
  t.component = component;
  t.cx = st.cx;
  t.cy = st.cy;
  t.fit = fit;
  t.theta_deg = continuous_angle_deg(fit.opencv_angle_deg());

  // Endpoints A/B: extreme projections of the component onto its major axis.
  const double ux = std::cos(fit.gamma_deg / kDeg), uy = std::sin(fit.gamma_deg / kDeg);
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  for (int y = st.min_y; y <= st.max_y; ++y)
    for (int x = st.min_x; x <= st.max_x; ++x) {
      if (components.label(x, y) != component) continue;
      const double proj = (x - fit.cx) * ux + (y - fit.cy) * uy;
      tmin = std::min(tmin, proj);
      tmax = std::max(tmax, proj);
    }
  const double ax = fit.cx + tmin * ux, ay = fit.cy + tmin * uy;
  const double bx = fit.cx + tmax * ux, by = fit.cy + tmax * uy;
  double sign = 1.0;
  constexpr double kTie = 1e-9;
  if (std::abs(ax - bx) > kTie) {
    const double right_y = ax > bx ? ay : by;
    const double left_y = ax > bx ? by : ay;
    if (right_y > left_y + kTie) sign = -1.0;
  }
  t.phi_deg = wrap_axis_deg(sign * t.theta_deg);
  return t;
}

PunctureTarget continuous_angle(const EllipseFit& fit, const BinaryMask& mask, int component) {
  return continuous_angle(fit, vision::connected_components(mask), component);
}

std::vector<PunctureTarget> targets_from_components(const vision::ComponentSet& components, int min_area) {
  std::vector<PunctureTarget> out;
  for (const auto& st : components.stats) {
    if (st.area < std::max(min_area, 5)) continue;
    try {
      out.push_back(continuous_angle(fit_component_angle(components, st.id), components, st.id));
    } catch (const FitError&) {
    }
  }
  return out;
}

ExtractionResult extract_targets_detailed(const BinaryMask& mask, const SuitabilityRules& rules) {
  ExtractionResult res;
  const auto skel = skeletonize(mask);
  const auto analysis = analyze_segments(mask, skel, rules);
  res.suitable = erase_unsuitable(mask, analysis, rules);
  const auto cs = vision::connected_components(res.suitable);
  for (const auto& st : cs.stats) {
    try {
      res.targets.push_back(continuous_angle(fit_component_angle(cs, st.id), cs, st.id));
    } catch (const FitError&) {
      ++res.skipped;
    }
  }
  return res;
}

std::vector<PunctureTarget> extract_targets(const BinaryMask& mask, const SuitabilityRules& rules) {
  return extract_targets_detailed(mask, rules).targets;
}

}  // namespace venibot::geometry
