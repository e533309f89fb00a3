#include "dgms/q1.hpp"

#include "dgms/errors.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

namespace dgms {

namespace q1 {

namespace {

GaussRule make_rule(int n)
{
    GaussRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i)
    {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it)
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k)
            {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            const double pn = n == 1 ? x : p1;
            const double pnm1 = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        // map [-1, 1] -> [0, 1], ascending
        rule.points[n - 1 - i] = 0.5 * (x + 1.0);
        rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

} // namespace

const GaussRule& gauss(int npoints)
{
    static std::once_flag once;
    static std::vector<GaussRule> rules;
    std::call_once(once, [] {
        for (int n = 1; n <= 12; ++n)
            rules.push_back(make_rule(n));
    });
    if (npoints < 1 || npoints > 12)
        throw ConfigError("Gauss rule with " + std::to_string(npoints) + " points not available");
    return rules[npoints - 1];
}

} // namespace q1

double evaluate_on(const Mesh& mesh, const Eigen::VectorXd& v, int e, double x, double y)
{
    const auto o = mesh.origin(e);
    const double xi = (x - o[0]) / mesh.width();
    const double eta = (y - o[1]) / mesh.width();
    double s = 0.0;
    for (int j = 0; j < 4; ++j)
        s += v[4 * e + j] * q1::shape(j, xi, eta);
    return s;
}

double evaluate(const Mesh& mesh, const Eigen::VectorXd& v, double x, double y)
{
    const int e = mesh.locate(x, y);
    if (e < 0)
        return std::numeric_limits<double>::quiet_NaN();
    return evaluate_on(mesh, v, e, x, y);
}

} // namespace dgms
