#include "venibot/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "venibot/errors.hpp"

namespace venibot::metrics {

double dsc(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_size(b))
    throw DataError("dsc: masks are " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " and " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  std::size_t na = 0, nb = 0, both = 0;
  const auto ab = a.bits(), bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    na += ab[i] != 0;
    nb += bb[i] != 0;
    both += (ab[i] != 0) && (bb[i] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double axis_error_deg(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

std::vector<double> angle_errors(const LabelledAngles& pred, const LabelledAngles& gt) {
  if (pred.width != gt.width || pred.height != gt.height || pred.labels.size() != gt.labels.size())
    throw DataError("angle_errors: label rasters differ in size");
  const int ng = static_cast<int>(gt.phi_deg.size());
  const int np = static_cast<int>(pred.phi_deg.size());
  // overlap[g][p]: pixels of gt component g+1 inside predicted component p+1.
  std::vector<std::vector<long>> overlap(ng, std::vector<long>(np, 0));
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i], p = pred.labels[i];
    if (g > 0 && g <= ng && p > 0 && p <= np) ++overlap[g - 1][p - 1];
  }
  std::vector<double> errors;
  for (int g = 0; g < ng; ++g) {
    int best = -1;
    long best_count = 0;
    for (int p = 0; p < np; ++p)
      if (overlap[g][p] > best_count) {
        best_count = overlap[g][p];
        best = p;
      }
    errors.push_back(best < 0 ? 90.0 : axis_error_deg(pred.phi_deg[best], gt.phi_deg[g]));
  }
  return errors;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  r.count = static_cast<int>(values.size());
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(sq / values.size());
  return r;
}

}  // namespace venibot::metrics
