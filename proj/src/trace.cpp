#include "lrs/trace.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace lrs {

namespace {
void put_cell(std::ostream& os, double v) {
  os << ",";
  if (std::isfinite(v)) os << v;
}
}  // namespace

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.precision(12);
  f << "iter,dx,dlambda1,dlambda2,mpsnr,H,dip_loss\n";
  const double nan = std::nan("");
  for (int k = 0; k < trace.iterations; ++k) {
    f << (k + 1);
    put_cell(f, trace.dx[k]);
    put_cell(f, trace.dlambda1[k]);
    put_cell(f, trace.dlambda2[k]);
    put_cell(f, k < static_cast<int>(trace.mpsnr.size()) ? trace.mpsnr[k] : nan);
    // h is indexed from the initial state; row k reports H^{k+1}.
    put_cell(f, k + 1 < static_cast<int>(trace.h.size()) ? trace.h[k + 1] : nan);
    put_cell(f, k < static_cast<int>(trace.dip_loss.size()) ? trace.dip_loss[k] : nan);
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lrs
