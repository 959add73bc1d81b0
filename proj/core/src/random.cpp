#include "epigen/random.hpp"

#include <random>

namespace epigen
{

std::uint64_t Stream::poisson(double mean)
{
    if (!(mean > 0.0)) {
        return 0;
    }
    if (mean < 30.0) {
        // inversion by sequential search
        double p            = std::exp(-mean);
        double cdf          = p;
        const double u      = uniform();
        std::uint64_t count = 0;
        while (u > cdf && p > 0.0) {
            ++count;
            p *= mean / static_cast<double>(count);
            cdf += p;
        }
        return count;
    }
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(*this);
}

} // namespace epigen
