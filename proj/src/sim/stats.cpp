#include "zephyr/sim/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include "zephyr/error.hpp"

namespace zephyr::sim {

ChiSquare chi_square_uniform(const std::vector<std::uint64_t>& counts) {
    if (counts.size() < 2) throw Error(Errc::InvalidArgument, "chi-square needs at least two cells");
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total == 0.0) throw Error(Errc::InvalidArgument, "chi-square needs observations");
    const double expected = total / static_cast<double>(counts.size());
    ChiSquare out;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        out.statistic += d * d / expected;
    }
    const double dof = static_cast<double>(counts.size() - 1);
    out.p_value = boost::math::gamma_q(dof / 2.0, out.statistic / 2.0);
    return out;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(Errc::InvalidArgument, "fit needs two or more points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(Errc::InvalidArgument, "x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

}  // namespace zephyr::sim
