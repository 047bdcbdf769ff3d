#include "nhkpm/peaks.hpp"

#include <algorithm>
#include <cmath>

namespace nhkpm {

namespace {

// Vertex offset of the parabola through (-1, a), (0, b), (1, c), clamped to half a cell.
double parabola_offset(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

}  // namespace

PeakOptions PeakOptions::for_width(double sigma_delta) {
  PeakOptions o;
  o.merge_radius = sigma_delta;
  o.sidelobe_radius = 3.0 * sigma_delta;
  o.sidelobe_ratio = 0.2;
  o.relative_floor = 0.02;
  return o;
}

std::vector<Peak> find_peaks(const SpectralMap& map, const PeakOptions& options) {
  const std::size_t nr = map.grid.re.size();
  const std::size_t ni = map.grid.im.size();
  if (map.values.size() != nr * ni) throw InvalidArgument("map values do not match its grid");

  std::vector<double> s(map.values.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = options.signal == PeakSignal::magnitude ? std::abs(map.values[k]) : map.values[k].real();
  }
  std::vector<double> mags(s.size());
  std::transform(s.begin(), s.end(), mags.begin(), [](double v) { return std::abs(v); });
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  const double threshold = options.background_factor * *mid;

  auto v = [&](std::size_t i, std::size_t j) { return s[j * nr + i]; };
  std::vector<Peak> candidates;
  for (std::size_t j = 1; j + 1 < ni; ++j) {
    for (std::size_t i = 1; i + 1 < nr; ++i) {
      const double c = v(i, j);
      if (!(c > threshold)) continue;
      bool is_max = true;
      for (int dj = -1; dj <= 1 && is_max; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const double nb = v(i + di, j + dj);
          // Ties are broken towards the lower flat index so plateaus yield one peak.
          const bool earlier = (dj < 0) || (dj == 0 && di < 0);
          if (nb > c || (nb == c && earlier)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      const auto& re = map.grid.re;
      const auto& im = map.grid.im;
      const double dx = parabola_offset(v(i - 1, j), c, v(i + 1, j));
      const double dy = parabola_offset(v(i, j - 1), c, v(i, j + 1));
      const double x = re[i] + dx * (dx >= 0 ? re[i + 1] - re[i] : re[i] - re[i - 1]);
      const double y = im[j] + dy * (dy >= 0 ? im[j + 1] - im[j] : im[j] - im[j - 1]);
      candidates.push_back(Peak{cplx{x, y}, c, j * nr + i});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.height > b.height; });
  std::vector<Peak> peaks;
  const double floor = candidates.empty() ? 0.0 : options.relative_floor * candidates.front().height;
  for (const auto& p : candidates) {
    if (p.height < floor) break;
    const bool shadowed = std::any_of(peaks.begin(), peaks.end(), [&](const Peak& q) {
      const double d = std::abs(q.position - p.position);
      if (d < options.merge_radius) return true;
      return d < options.sidelobe_radius && p.height < options.sidelobe_ratio * q.height;
    });
    if (!shadowed) peaks.push_back(p);
  }
  return peaks;
}

}  // namespace nhkpm
