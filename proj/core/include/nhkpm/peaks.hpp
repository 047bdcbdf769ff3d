#pragma once

#include <vector>

#include "nhkpm/grid.hpp"

namespace nhkpm {

struct Peak {
  cplx position;       // refined by a parabola through the neighbouring nodes
  double height = 0.0;
  std::size_t node = 0;
};

enum class PeakSignal { magnitude, real_part };

struct PeakOptions {
  double merge_radius = 0.0;        // peaks closer than this collapse onto the higher one
  double background_factor = 3.0;   // threshold = factor * median(|signal|)
  PeakSignal signal = PeakSignal::magnitude;
  // The Jackson-damped two-dimensional peak has a negative ring at 1-2 widths,
  // which shows up as a ring of maxima in |f|. A maximum lying within
  // sidelobe_radius of a taller peak and below sidelobe_ratio of its height is
  // treated as such a ring. Disabled when sidelobe_ratio is 0.
  double sidelobe_radius = 0.0;
  double sidelobe_ratio = 0.0;
  // Maxima below this fraction of the tallest one are ignored (0 disables).
  double relative_floor = 0.0;

  /// Merge within one width, suppress side lobes within three widths at 20%,
  /// ignore maxima under 2% of the tallest.
  static PeakOptions for_width(double sigma_delta);
};

/// Interior local maxima (8-neighbourhood) above the background threshold,
/// sorted by decreasing height after merging.
std::vector<Peak> find_peaks(const SpectralMap& map, const PeakOptions& options);

}  // namespace nhkpm
