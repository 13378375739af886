#include "tmhd/quadrature.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace tmhd {

GaussRule::GaussRule(int order) {
    if (order < 1) throw std::invalid_argument("GaussRule: order must be >= 1");
    nodes.resize(order);
    weights.resize(order);
    for (int i = 0; i < order; ++i) {
        // Newton iteration from the Chebyshev estimate.
        double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

double integrate(const std::function<double(double)>& f, double a, double b, int panels, int order) {
    static std::map<int, GaussRule> rules;
    auto it = rules.find(order);
    if (it == rules.end()) it = rules.emplace(order, GaussRule(order)).first;
    const GaussRule& rule = it->second;
    double h = (b - a) / panels;
    double total = 0;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * h;
        double mid = lo + 0.5 * h;
        for (int i = 0; i < order; ++i) total += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    }
    return total * 0.5 * h;
}

}  // namespace tmhd
