#pragma once

#include <cmath>
#include <cstring>
#include <span>
#include <vector>

#include "pinncw/common.hpp"

namespace pinncw {

// Vectorized tanh via (e^{2x}-1)/(e^{2x}+1) with |x| clamped at 19 (where
// tanh is 1 to the last ulp). Eigen's Array::tanh() falls back to scalar
// libm calls for double, roughly 9x slower at our batch sizes. Every element
// goes through the same packet kernel (the tail is processed in a padded
// packet), so a value's result never depends on its position in a batch.
inline void tanh_fast_inplace(double* data, long size) {
  using Packet = Eigen::internal::packet_traits<double>::type;
  constexpr long kPS = Eigen::internal::unpacket_traits<Packet>::size;
  using namespace Eigen::internal;
  const Packet lo = pset1<Packet>(-19.0);
  const Packet hi = pset1<Packet>(19.0);
  const Packet one = pset1<Packet>(1.0);
  auto kernel = [&](Packet z) {
    z = pmin(pmax(z, lo), hi);
    const Packet e = pexp(padd(z, z));
    return pdiv(psub(e, one), padd(e, one));
  };
  long i = 0;
  for (; i + kPS <= size; i += kPS)
    pstoreu(data + i, kernel(ploadu<Packet>(data + i)));
  if (i < size) {
    double buf[kPS] = {};
    std::memcpy(buf, data + i, (std::size_t)(size - i) * sizeof(double));
    pstoreu(buf, kernel(ploadu<Packet>(buf)));
    std::memcpy(data + i, buf, (std::size_t)(size - i) * sizeof(double));
  }
}

inline Arr tanh_fast(Arr x) {
  tanh_fast_inplace(x.data(), x.size());
  return x;
}

inline double tanh_fast_scalar(double x) {
  double v = x;
  tanh_fast_inplace(&v, 1);
  return v;
}

// Exact floating-point summation (Shewchuk growing expansion, as in Python's
// math.fsum). The result is the correctly rounded value of the exact sum and
// therefore independent of summand order.
inline double exact_sum(std::span<const double> xs) {
  std::vector<double> partials;
  partials.reserve(8);
  for (double x : xs) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < partials.size(); ++j) {
      double y = partials[j];
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

inline double exact_sum(const Vec& v) {
  return exact_sum(std::span<const double>(v.data(), (std::size_t)v.size()));
}

}  // namespace pinncw
