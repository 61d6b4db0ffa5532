// Simulates the central fringe of a scan and prints visibility and g2.

#include <mzc/mzc.hpp>

#include <cstdio>

int main() {
  mzc::Config cfg;
  cfg.seed = 7;
  const std::size_t mid = cfg.scan.points_per_scan / 2;
  const auto fringe = mzc::simulate_scan(cfg, mid - 100, mid + 101);

  const auto v = fringe.voltages();
  const auto d1 = fringe.d1();
  const double vis = mzc::central_visibility(v, d1, cfg.scan.v_center, 0.5 * cfg.scan.period());
  const auto g2 = mzc::g2_zero(fringe, cfg.effective_window());

  std::printf("points        %zu\n", fringe.size());
  std::printf("visibility D1 %.5f\n", vis);
  std::printf("g2            %.4f +/- %.4f\n", g2.g2, g2.uncertainty);
  std::printf("below bound   %s\n", g2.below_g2_bound ? "yes" : "no");
}
