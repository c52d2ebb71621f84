#include "venibot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "venibot/errors.hpp"
#include "venibot/rng.hpp"
#include "venibot/vision.hpp"

namespace venibot::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

struct Vec {
  double x = 0.0;
  double y = 0.0;
};

struct Chain {
  int id = 0;
  int parent = -1;  // chain whose pixels may be touched near the origin
  double radius = 0.0;
  int depth = 0;
  std::vector<Vec> pts;  // centreline sampled at 1-px arc steps
};

struct Node {
  Vec at;
  double zone = 0.0;  // erase radius around the junction
  int chain = 0;      // parent chain and the index of the fork on it
  std::size_t index = 0;
};

struct PendingBranch {
  int parent = 0;
  int index = 0;
  double heading = 0.0;
  double radius = 0.0;
  int depth = 0;
};

double seg_distance(Vec p, Vec a, Vec b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Calls fn(x, y, d) for every pixel within `reach` of the polyline pts[i0..i1],
// with d the distance to the polyline (minimum over its segments).
template <typename Fn>
void for_polyline_pixels(const std::vector<Vec>& pts, std::size_t i0, std::size_t i1, double reach,
                         int w, int h, std::vector<double>& scratch, Fn fn) {
  if (pts.empty() || i1 < i0) return;
  double minx = 1e9, miny = 1e9, maxx = -1e9, maxy = -1e9;
  for (std::size_t i = i0; i <= i1; ++i) {
    minx = std::min(minx, pts[i].x);
    maxx = std::max(maxx, pts[i].x);
    miny = std::min(miny, pts[i].y);
    maxy = std::max(maxy, pts[i].y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(minx - reach)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(maxx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(miny - reach)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(maxy + reach)));
  if (x0 > x1 || y0 > y1) return;
  const int bw = x1 - x0 + 1;
  scratch.assign(static_cast<std::size_t>(bw) * (y1 - y0 + 1), 1e18);
  for (std::size_t i = i0; i <= i1; ++i) {
    const Vec a = pts[i];
    const Vec b = i + 1 <= i1 ? pts[i + 1] : pts[i];
    const int sx0 = std::max(x0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
    const int sx1 = std::min(x1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
    const int sy0 = std::max(y0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
    const int sy1 = std::min(y1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
    for (int y = sy0; y <= sy1; ++y)
      for (int x = sx0; x <= sx1; ++x) {
        auto& d = scratch[static_cast<std::size_t>(y - y0) * bw + (x - x0)];
        d = std::min(d, seg_distance({double(x), double(y)}, a, b));
      }
  }
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d = scratch[static_cast<std::size_t>(y - y0) * bw + (x - x0)];
      if (d <= reach) fn(x, y, d);
    }
}

class TreeBuilder {
 public:
  TreeBuilder(const VeinTreeSpec& spec, Rng& rng)
      : spec_(spec), rng_(rng), owner_(static_cast<std::size_t>(spec.width) * spec.height, -1) {}

  std::vector<Chain> chains;
  std::vector<Node> nodes;

  void grow_trunks() {
    for (int t = 0; t < spec_.trunk_count; ++t) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        if (try_trunk()) break;
      }
    }
    while (!pending_.empty()) {
      const PendingBranch pb = pending_.front();
      pending_.erase(pending_.begin());
      grow_branch(pb);
    }
  }

 private:
  const VeinTreeSpec& spec_;
  Rng& rng_;
  std::vector<int> owner_;
  std::vector<PendingBranch> pending_;
  std::vector<double> scratch_;

  bool outside(Vec p, double r) const {
    return p.x < -r - 2 || p.y < -r - 2 || p.x > spec_.width - 1 + r + 2 || p.y > spec_.height - 1 + r + 2;
  }

  // Foreign tube pixels within r+3 of p stop growth. `allowed` may be touched.
  bool collides(Vec p, double r, int allowed_a, int allowed_b) const {
    const double reach = r + 3.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x - reach)));
    const int x1 = std::min(spec_.width - 1, static_cast<int>(std::ceil(p.x + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y - reach)));
    const int y1 = std::min(spec_.height - 1, static_cast<int>(std::ceil(p.y + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const int o = owner_[static_cast<std::size_t>(y) * spec_.width + x];
        if (o < 0 || o == allowed_a || o == allowed_b) continue;
        const double dx = x - p.x, dy = y - p.y;
        if (dx * dx + dy * dy <= reach * reach) return true;
      }
    return false;
  }

  bool self_collides(const std::vector<Vec>& pts, Vec p, double r) const {
    const std::size_t skip = static_cast<std::size_t>(4.0 * r + 8.0);
    if (pts.size() <= skip) return false;
    const double lim = 2.0 * r + 3.0;
    for (std::size_t i = 0; i + skip < pts.size(); ++i) {
      const double dx = pts[i].x - p.x, dy = pts[i].y - p.y;
      if (dx * dx + dy * dy < lim * lim) return true;
    }
    return false;
  }

  void stamp(const Chain& c) {
    for_polyline_pixels(c.pts, 0, c.pts.size() - 1, c.radius, spec_.width, spec_.height, scratch_,
                        [&](int x, int y, double) {
                          auto& o = owner_[static_cast<std::size_t>(y) * spec_.width + x];
                          if (o < 0) o = c.id;
                        });
  }

  struct Grown {
    std::vector<Vec> pts;
    std::vector<std::pair<int, double>> forks;  // (point index, heading of the new branch)
  };

  // Grows one direction. `grace` steps may overlap `parent`.
  Grown grow(Vec start, double heading, double r, int self_id, int parent, int grace, int depth,
             const std::vector<Vec>* prior) {
    Grown g;
    g.pts.push_back(start);
    Vec p = start;
    int steps = 0;
    bool done = false;
    while (!done && steps < 2000) {
      const int seg_len = static_cast<int>(std::lround(rng_.uniform(spec_.segment_length_px.lo, spec_.segment_length_px.hi)));
      // Quadratic skew towards gentle bends: most segments are near-straight,
      // a few turn sharply.
      const double u = rng_.uniform();
      double rate = spec_.curvature_deg_per_px.lo + (spec_.curvature_deg_per_px.hi - spec_.curvature_deg_per_px.lo) * u * u;
      if (rng_.bernoulli(0.5)) rate = -rate;
      for (int s = 0; s < std::max(seg_len, 1); ++s) {
        heading += rate / kDeg;
        const Vec q{p.x + std::cos(heading), p.y + std::sin(heading)};
        if (outside(q, r)) {
          done = true;
          break;
        }
        const int allow = steps < grace ? parent : -2;
        if (collides(q, r, allow, self_id) || self_collides(g.pts, q, r)) {
          done = true;
          break;
        }
        if (prior && self_collides_prior(*prior, q, r, steps)) {
          done = true;
          break;
        }
        p = q;
        g.pts.push_back(p);
        ++steps;
      }
      if (done) break;
      if (depth < spec_.max_branch_depth && rng_.bernoulli(spec_.bifurcation_prob)) {
        double turn = rng_.uniform(spec_.branch_angle_deg.lo, spec_.branch_angle_deg.hi) / kDeg;
        if (rng_.bernoulli(0.5)) turn = -turn;
        g.forks.emplace_back(static_cast<int>(g.pts.size()) - 1, heading + turn);
      }
    }
    return g;
  }

  // The forward half of a trunk must not fold back onto its own backward half.
  bool self_collides_prior(const std::vector<Vec>& prior, Vec p, double r, int steps) const {
    if (steps < static_cast<int>(4.0 * r + 8.0)) return false;
    const double lim = 2.0 * r + 3.0;
    for (const auto& v : prior) {
      const double dx = v.x - p.x, dy = v.y - p.y;
      if (dx * dx + dy * dy < lim * lim) return true;
    }
    return false;
  }

  bool try_trunk() {
    const double r = 0.5 * rng_.uniform(spec_.diameter_px.lo, spec_.diameter_px.hi);
    const Vec start{rng_.uniform(0.25, 0.75) * (spec_.width - 1), rng_.uniform(0.25, 0.75) * (spec_.height - 1)};
    const double screen = spec_.trunk_angle_deg ? *spec_.trunk_angle_deg
                                                : rng_.uniform(spec_.trunk_angle_range.lo, spec_.trunk_angle_range.hi);
    const double heading = -screen / kDeg;  // screen angles are counter-clockwise, y points down
    if (collides(start, r, -2, -2)) return false;
    const int id = static_cast<int>(chains.size());
    Grown back = grow(start, heading + kPi, r, id, id, 0, 0, nullptr);
    Grown fwd = grow(start, heading, r, id, id, 0, 0, &back.pts);
    Chain c;
    c.id = id;
    c.radius = r;
    const int nb = static_cast<int>(back.pts.size());
    for (int i = nb - 1; i >= 1; --i) c.pts.push_back(back.pts[i]);
    c.pts.insert(c.pts.end(), fwd.pts.begin(), fwd.pts.end());
    if (c.pts.size() < 30) return false;
    chains.push_back(c);
    stamp(chains.back());
    for (auto [i, hd] : back.forks) add_fork(id, nb - 1 - i, hd, r, 0);
    for (auto [i, hd] : fwd.forks) add_fork(id, nb - 1 + i, hd, r, 0);
    return true;
  }

  void add_fork(int parent, int index, double heading, double parent_r, int parent_depth) {
    PendingBranch pb;
    pb.parent = parent;
    pb.index = index;
    pb.heading = heading;
    pb.radius = parent_r * rng_.uniform(spec_.branch_diameter_ratio.lo, spec_.branch_diameter_ratio.hi);
    pb.depth = parent_depth + 1;
    pending_.push_back(pb);
  }

  void grow_branch(const PendingBranch& pb) {
    const Chain& parent = chains[pb.parent];
    const Vec start = parent.pts[pb.index];
    const int id = static_cast<int>(chains.size());
    const int grace = static_cast<int>(2.0 * (parent.radius + pb.radius) + 4.0);
    Grown g = grow(start, pb.heading, pb.radius, id, pb.parent, grace, pb.depth, nullptr);
    // Stubs that barely leave the parent tube read as bumps, not junctions.
    if (static_cast<int>(g.pts.size()) <= grace + 15) return;
    Chain c;
    c.id = id;
    c.parent = pb.parent;
    c.radius = pb.radius;
    c.depth = pb.depth;
    c.pts = std::move(g.pts);
    nodes.push_back({start, 2.0 * parent.radius + 1.0, pb.parent, static_cast<std::size_t>(pb.index)});
    chains.push_back(c);
    stamp(chains.back());
    for (auto [i, hd] : g.forks) add_fork(id, i, hd, c.radius, c.depth);
  }
};

double profile(double d, double r) {
  if (d >= 2.0 * r) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * d / (2.0 * r)));
}

bool inside_margin(double x, double y, int w, int h, int m) {
  return x >= m && y >= m && x <= w - 1 - m && y <= h - 1 - m;
}

struct Run {
  int chain = 0;
  std::size_t i0 = 0;
  std::size_t i1 = 0;
};

bool try_generate(const VeinTreeSpec& spec, Rng& rng, SyntheticSample& out) {
  const int w = spec.width, h = spec.height;
  TreeBuilder tb(spec, rng);
  tb.grow_trunks();
  if (tb.chains.empty()) return false;

  // Junction points: branch origins. Every chain touching a node is split there.
  auto in_zone = [&](double x, double y) {
    for (const auto& n : tb.nodes) {
      const double dx = x - n.at.x, dy = y - n.at.y;
      if (dx * dx + dy * dy <= n.zone * n.zone) return true;
    }
    return false;
  };

  std::vector<double> scratch;
  BinaryMask vein(w, h);
  std::vector<double> weight(static_cast<std::size_t>(w) * h, 0.0);
  for (const auto& c : tb.chains) {
    for_polyline_pixels(c.pts, 0, c.pts.size() - 1, 2.0 * c.radius, w, h, scratch, [&](int x, int y, double d) {
      auto& wt = weight[static_cast<std::size_t>(y) * w + x];
      wt = std::max(wt, profile(d, c.radius));
      if (d <= c.radius) vein.set(x, y);
    });
  }
  if (!vein.any()) return false;

  // Sections mirror what the skeleton analysis sees as branches: a chain cut
  // at its forks and clipped to the canvas. A section is judged as a whole on
  // its inner points (clear of the edge margin and junction zones); each
  // contiguous inner stretch of a suitable section becomes one run.
  std::vector<Run> runs;
  for (const auto& c : tb.chains) {
    const std::size_t n = c.pts.size();
    std::vector<std::size_t> cuts{0};
    for (const auto& nd : tb.nodes)
      if (nd.chain == c.id) cuts.push_back(nd.index);
    cuts.push_back(n - 1);
    std::sort(cuts.begin(), cuts.end());
    auto on_canvas = [&](std::size_t k) {
      return c.pts[k].x >= -0.5 && c.pts[k].y >= -0.5 && c.pts[k].x <= w - 0.5 && c.pts[k].y <= h - 0.5;
    };
    auto inner = [&](std::size_t k) {
      return inside_margin(c.pts[k].x, c.pts[k].y, w, h, spec.rules.edge_margin_px) && !in_zone(c.pts[k].x, c.pts[k].y);
    };
    for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
      std::size_t a = cuts[q];
      while (a <= cuts[q + 1]) {
        if (!on_canvas(a)) {
          ++a;
          continue;
        }
        std::size_t b = a;
        while (b + 1 <= cuts[q + 1] && on_canvas(b + 1)) ++b;
        std::vector<double> xs, ys;
        std::vector<std::uint8_t> flags;
        double length = 0.0;
        for (std::size_t k = a; k <= b; ++k) {
          xs.push_back(c.pts[k].x);
          ys.push_back(c.pts[k].y);
          flags.push_back(inner(k) ? 1 : 0);
          if (k > a && inner(k) && inner(k - 1)) length += 1.0;
        }
        // Same estimator as the skeleton analysis, on the exact centreline.
        const double peak = geometry::summarize_turning(xs, ys, flags).max;
        if (length >= spec.rules.min_length_px && peak <= spec.rules.max_mean_turning_deg_per_px &&
            2.0 * c.radius >= spec.rules.min_diameter_px) {
          for (std::size_t k = a; k <= b;) {
            if (!inner(k)) {
              ++k;
              continue;
            }
            std::size_t e = k;
            while (e + 1 <= b && inner(e + 1)) ++e;
            if (e > k) runs.push_back({c.id, k, e});
            k = e + 1;
          }
        }
        a = b + 1;
      }
    }
  }

  out.suitable_gt = BinaryMask(w, h);
  out.target_labels.assign(static_cast<std::size_t>(w) * h, 0);
  out.targets.clear();
  std::vector<std::vector<std::pair<int, int>>> run_pixels;
  std::vector<int> run_ids;
  for (const auto& run : runs) {
    const auto& c = tb.chains[run.chain];
    const int label = static_cast<int>(out.targets.size()) + 1;
    std::vector<std::pair<int, int>> pix;
    for_polyline_pixels(c.pts, run.i0, run.i1, c.radius, w, h, scratch, [&](int x, int y, double) {
      if (!vein.at(x, y) || !inside_margin(x, y, w, h, spec.rules.edge_margin_px) || in_zone(x, y)) return;
      if (out.target_labels[static_cast<std::size_t>(y) * w + x] != 0) return;
      out.target_labels[static_cast<std::size_t>(y) * w + x] = label;
      out.suitable_gt.set(x, y);
      pix.emplace_back(x, y);
    });
    run_pixels.push_back(std::move(pix));
    run_ids.push_back(label);
    out.targets.emplace_back();
  }
  // Runs that touch (shallow forks, parallel veins) are cut apart so every
  // suitable component belongs to exactly one target.
  {
    const auto labels = out.target_labels;
    auto lab = [&](int x, int y) {
      return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : labels[static_cast<std::size_t>(y) * w + x];
    };
    for (auto& pix : run_pixels) {
      std::vector<std::pair<int, int>> kept;
      for (auto [x, y] : pix) {
        const int l = lab(x, y);
        bool touch = false;
        for (int dy = -2; dy <= 2 && !touch; ++dy)
          for (int dx = -2; dx <= 2 && !touch; ++dx) touch = lab(x + dx, y + dy) != 0 && lab(x + dx, y + dy) != l;
        if (touch) {
          out.target_labels[static_cast<std::size_t>(y) * w + x] = 0;
          out.suitable_gt.set(x, y, false);
        } else {
          kept.emplace_back(x, y);
        }
      }
      pix = std::move(kept);
    }
  }
  std::vector<Target> targets;
  std::vector<int> relabel(runs.size() + 1, 0);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const auto& c = tb.chains[run.chain];
    const auto& pix = run_pixels[r];
    const int label = run_ids[r];
    if (pix.empty()) continue;
    relabel[label] = static_cast<int>(targets.size()) + 1;

    // Principal direction of the centreline.
    double mx = 0.0, my = 0.0;
    const double cnt = static_cast<double>(run.i1 - run.i0 + 1);
    for (std::size_t k = run.i0; k <= run.i1; ++k) {
      mx += c.pts[k].x;
      my += c.pts[k].y;
    }
    mx /= cnt;
    my /= cnt;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t k = run.i0; k <= run.i1; ++k) {
      const double dx = c.pts[k].x - mx, dy = c.pts[k].y - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
    const double gamma = 0.5 * std::atan2(2.0 * sxy, sxx - syy);

    Target t;
    t.phi_deg = geometry::wrap_axis_deg(-gamma * kDeg);
    t.length_px = static_cast<double>(run.i1 - run.i0);
    double px = 0.0, py = 0.0;
    for (auto [x, y] : pix) {
      px += x;
      py += y;
    }
    t.cx = px / static_cast<double>(pix.size());
    t.cy = py / static_cast<double>(pix.size());
    // Snap the centroid into its own component when the run is curved.
    const int rx = static_cast<int>(std::lround(t.cx)), ry = static_cast<int>(std::lround(t.cy));
    if (!out.suitable_gt.contains(rx, ry) || out.target_labels[static_cast<std::size_t>(ry) * w + rx] != label) {
      double best = 1e18;
      for (auto [x, y] : pix) {
        const double d = (x - t.cx) * (x - t.cx) + (y - t.cy) * (y - t.cy);
        if (d < best) {
          best = d;
          t.cx = x;
          t.cy = y;
        }
      }
    }
    targets.push_back(t);
  }
  out.targets = std::move(targets);
  for (auto& l : out.target_labels) l = relabel[l];
  out.vein_gt = std::move(vein);

  // Rendering: skin background with vignette, dark tubes, then noise layers.
  GrayImage img(w, h);
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ux = (x - cx) / (0.5 * w), uy = (y - cy) / (0.5 * h);
      const double bg = spec.background * (1.0 - spec.vignette * 0.5 * (ux * ux + uy * uy));
      const double wt = weight[static_cast<std::size_t>(y) * w + x];
      img.at(x, y) = bg - (bg - spec.vein_core) * wt;
    }

  out.blemish_mask = BinaryMask(w, h);
  for (int b = 0; b < spec.blemish_count; ++b) {
    const double bx = rng.uniform(0.0, w - 1.0), by = rng.uniform(0.0, h - 1.0);
    const double br = rng.uniform(2.0, 4.0);
    const double depth = rng.uniform(0.25, 0.45);
    for (int y = std::max(0, int(by - br - 1)); y <= std::min(h - 1, int(by + br + 1)); ++y)
      for (int x = std::max(0, int(bx - br - 1)); x <= std::min(w - 1, int(bx + br + 1)); ++x) {
        const double d = std::hypot(x - bx, y - by);
        if (d > br) continue;
        img.at(x, y) *= 1.0 - depth * profile(d, 0.5 * br);
        out.blemish_mask.set(x, y);
      }
  }

  out.hair_mask = BinaryMask(w, h);
  for (int k = 0; k < spec.hair_count; ++k) {
    double hx = rng.uniform(0.0, w - 1.0), hy = rng.uniform(0.0, h - 1.0);
    double heading = rng.uniform(0.0, 2.0 * kPi);
    const double len = rng.uniform(25.0, 60.0);
    const double bend = rng.uniform(-1.5, 1.5) / kDeg;
    const double dark = rng.uniform(0.35, 0.5);
    for (double s = 0.0; s < len; s += 0.5) {
      const int x = static_cast<int>(std::lround(hx)), y = static_cast<int>(std::lround(hy));
      if (img.contains(x, y) && !out.hair_mask.at(x, y)) {
        img.at(x, y) *= 1.0 - dark;
        out.hair_mask.set(x, y);
      }
      heading += 0.5 * bend;
      hx += 0.5 * std::cos(heading);
      hy += 0.5 * std::sin(heading);
    }
  }

  if (spec.sensor_noise_sigma > 0.0)
    for (auto& v : img.pixels()) v += spec.sensor_noise_sigma * rng.normal();
  img.clamp01();
  out.image = std::move(img);
  return true;
}

}  // namespace

void VeinTreeSpec::validate() const {
  auto range_ok = [](Range r, bool allow_zero) {
    return r.lo <= r.hi && (allow_zero ? r.lo >= 0.0 : r.lo > 0.0);
  };
  if (width < 16 || height < 16) throw ParameterError("canvas must be at least 16x16");
  if (trunk_count < 1) throw ParameterError("trunk_count must be >= 1");
  if (!(bifurcation_prob >= 0.0 && bifurcation_prob <= 1.0)) throw ParameterError("bifurcation_prob must lie in [0,1]");
  if (!range_ok(curvature_deg_per_px, true)) throw ParameterError("curvature range invalid");
  if (!range_ok(diameter_px, false)) throw ParameterError("diameter range invalid");
  if (!range_ok(segment_length_px, false)) throw ParameterError("segment length range invalid");
  if (!range_ok(branch_angle_deg, true) || !range_ok(branch_diameter_ratio, false))
    throw ParameterError("branch ranges invalid");
  if (trunk_angle_range.lo > trunk_angle_range.hi) throw ParameterError("trunk angle range invalid");
  if (hair_count < 0 || blemish_count < 0 || vignette < 0.0 || sensor_noise_sigma < 0.0)
    throw ParameterError("noise parameters must be non-negative");
  if (!(vein_core >= 0.0 && vein_core < background && background <= 1.0))
    throw ParameterError("need 0 <= vein_core < background <= 1");
  if (max_retries < 1) throw ParameterError("max_retries must be >= 1");
  rules.validate();
}

VeinTreeSpec VeinTreeSpec::noise_free() const {
  VeinTreeSpec s = *this;
  s.hair_count = 0;
  s.blemish_count = 0;
  s.vignette = 0.0;
  s.sensor_noise_sigma = 0.0;
  return s;
}

SyntheticSample generate_sample(const VeinTreeSpec& spec) {
  spec.validate();
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    Rng rng(attempt == 0 ? spec.seed : derive_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
    SyntheticSample s;
    if (try_generate(spec, rng, s)) return s;
  }
  throw GenerationError("could not place any vein on the canvas after " + std::to_string(spec.max_retries) +
                        " attempts");
}

std::vector<int> label_targets(const BinaryMask& suitable, const std::vector<Target>& targets) {
  const auto cs = vision::connected_components(suitable);
  std::vector<int> comp_to_target(cs.count() + 1, 0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const int x = static_cast<int>(std::lround(targets[t].cx)), y = static_cast<int>(std::lround(targets[t].cy));
    if (!suitable.contains(x, y)) continue;
    const int id = cs.label(x, y);
    if (id > 0 && comp_to_target[id] == 0) comp_to_target[id] = static_cast<int>(t) + 1;
  }
  std::vector<int> labels(cs.labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = comp_to_target[cs.labels[i]];
  return labels;
}

std::vector<int> Manifest::volunteers() const {
  std::set<int> v;
  for (const auto& s : samples) v.insert(s.volunteer_id);
  return {v.begin(), v.end()};
}

std::uint64_t volunteer_seed(std::uint64_t master_seed, int volunteer_id) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(volunteer_id));
}

std::uint64_t sample_seed(std::uint64_t master_seed, int volunteer_id, int image_index) {
  return derive_seed(volunteer_seed(master_seed, volunteer_id), static_cast<std::uint64_t>(image_index) + 1000003ULL);
}

namespace {

std::string sample_name(int volunteer, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%03d_i%03d", volunteer, index);
  return buf;
}

// Per-volunteer "arm": small shifts of skin brightness and vein calibre.
VeinTreeSpec volunteer_spec(const VeinTreeSpec& base, std::uint64_t vseed) {
  Rng rng(vseed);
  VeinTreeSpec s = base;
  s.background = std::clamp(base.background + rng.uniform(-0.05, 0.05), base.vein_core + 0.2, 1.0);
  const double scale = rng.uniform(0.9, 1.1);
  s.diameter_px.lo *= scale;
  s.diameter_px.hi *= scale;
  return s;
}

}  // namespace

Manifest generate_corpus(const VeinTreeSpec& spec, int volunteers, int images_per_volunteer,
                         const std::filesystem::path& out_dir) {
  if (volunteers < 1 || images_per_volunteer < 1) throw ParameterError("corpus counts must be >= 1");
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "vein", ec);
  std::filesystem::create_directories(out_dir / "suitable", ec);
  if (ec) throw IoError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

  Manifest m;
  m.master_seed = spec.seed;
  m.root = out_dir;
  const int total = volunteers * images_per_volunteer;
  m.samples.resize(static_cast<std::size_t>(total));
  std::vector<std::string> errors(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < total; ++k) {
    const int v = k / images_per_volunteer, i = k % images_per_volunteer;
    try {
      VeinTreeSpec s = volunteer_spec(spec, volunteer_seed(spec.seed, v));
      s.seed = sample_seed(spec.seed, v, i);
      const auto sample = generate_sample(s);
      ManifestEntry e;
      e.sample_id = sample_name(v, i);
      e.volunteer_id = v;
      e.image_path = "images/" + e.sample_id + ".png";
      e.vein_gt_path = "vein/" + e.sample_id + ".png";
      e.suitable_gt_path = "suitable/" + e.sample_id + ".png";
      e.targets = sample.targets;
      write_image(out_dir / e.image_path, sample.image);
      write_mask(out_dir / e.vein_gt_path, sample.vein_gt);
      write_mask(out_dir / e.suitable_gt_path, sample.suitable_gt);
      m.samples[static_cast<std::size_t>(k)] = std::move(e);
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(k)] = ex.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw IoError(e);
  std::sort(m.samples.begin(), m.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.sample_id < b.sample_id; });
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["master_seed"] = m.master_seed;
  auto& arr = j["samples"] = nlohmann::ordered_json::array();
  for (const auto& e : m.samples) {
    nlohmann::ordered_json s;
    s["sample_id"] = e.sample_id;
    s["volunteer_id"] = e.volunteer_id;
    s["image_path"] = e.image_path;
    s["vein_gt_path"] = e.vein_gt_path;
    s["suitable_gt_path"] = e.suitable_gt_path;
    auto& ts = s["targets"] = nlohmann::ordered_json::array();
    for (const auto& t : e.targets)
      ts.push_back({{"cx", t.cx}, {"cy", t.cy}, {"phi_deg", t.phi_deg}, {"length_px", t.length_px}});
    arr.push_back(std::move(s));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write manifest " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("cannot write manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  try {
    const auto j = nlohmann::json::parse(f);
    m.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.sample_id = s.at("sample_id").get<std::string>();
      e.volunteer_id = s.at("volunteer_id").get<int>();
      e.image_path = s.at("image_path").get<std::string>();
      e.vein_gt_path = s.at("vein_gt_path").get<std::string>();
      e.suitable_gt_path = s.at("suitable_gt_path").get<std::string>();
      for (const auto& t : s.at("targets"))
        e.targets.push_back({t.at("cx").get<double>(), t.at("cy").get<double>(), t.at("phi_deg").get<double>(),
                             t.at("length_px").get<double>()});
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("malformed manifest " + path.string() + ": " + ex.what());
  }
  return m;
}

SyntheticSample load_sample(const Manifest& m, const ManifestEntry& e) {
  SyntheticSample s;
  s.image = read_image(m.root / e.image_path);
  s.vein_gt = read_mask(m.root / e.vein_gt_path);
  s.suitable_gt = read_mask(m.root / e.suitable_gt_path);
  s.targets = e.targets;
  s.target_labels = label_targets(s.suitable_gt, s.targets);
  s.hair_mask = BinaryMask(s.image.width(), s.image.height());
  s.blemish_mask = BinaryMask(s.image.width(), s.image.height());
  return s;
}

}  // namespace venibot::synth
