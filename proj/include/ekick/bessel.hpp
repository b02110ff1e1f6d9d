#pragma once

namespace ekick {

/// Modified Bessel function of the second kind K_order(x), integer order >= 0.
///
/// Orders 0 and 1 come from the power series for x < 2 and Steed's
/// continued fraction above; higher orders use the upward recurrence
/// K_{m+1} = K_{m-1} + (2m/x) K_m, which is stable for K. Results underflow
/// to zero once exp(-x) leaves the double range. Throws InvalidInput for
/// x <= 0 or order < 0.
double bessel_k(int order, double x);

} // namespace ekick
