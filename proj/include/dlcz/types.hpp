#pragma once

namespace dlcz {

/// A measured or simulated value with its one-sigma standard error.
struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// One point of a retrieval-efficiency curve.
struct CurvePoint {
  double time = 0.0;  // s, readout time measured from the (first) write pulse
  double value = 0.0;
  double standard_error = 0.0;
};

}  // namespace dlcz
