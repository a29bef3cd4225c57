#include "songsign/rational.hpp"

#include <cstdio>

namespace songsign {

std::string Rational::percent() const {
    // round(num * 10000 / den) in hundredths of a percent, half away from zero
    const bool neg = num_ < 0;
    const std::int64_t n = (neg ? -num_ : num_) * 10000;
    std::int64_t hundredths = n / den_;
    if ((n % den_) * 2 >= den_) ++hundredths;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld%%", neg ? "-" : "", static_cast<long long>(hundredths / 100),
                  static_cast<long long>(hundredths % 100));
    return buf;
}

} // namespace songsign
