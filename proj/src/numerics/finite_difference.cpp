#include "timexl/numerics/finite_difference.hpp"

#include <algorithm>
#include <cmath>

namespace timexl::numerics {

Tensor centralDifference(const std::function<double()>& evaluate, Tensor& x, double step) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = x[i];
        x[i] = original + step;
        const double plus = evaluate();
        x[i] = original - step;
        const double minus = evaluate();
        x[i] = original;
        out[i] = (plus - minus) / (2.0 * step);
    }
    return out;
}

double relativeError(double a, double b) {
    const double denom = std::max(std::fabs(a), std::fabs(b));
    return denom == 0.0 ? 0.0 : std::fabs(a - b) / denom;
}

bool gradientsAgree(double analytic, double numeric, double relTol, double absTol) {
    return std::fabs(analytic - numeric) <= absTol || relativeError(analytic, numeric) <= relTol;
}

}  // namespace timexl::numerics
