#pragma once

#include <functional>
#include <vector>

namespace tmhd {

/// Gauss-Legendre nodes/weights on [-1,1], computed by Newton iteration.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    explicit GaussRule(int order);
};

/// Composite Gauss-Legendre integral of f over [a,b].
double integrate(const std::function<double(double)>& f, double a, double b, int panels = 64,
                 int order = 16);

}  // namespace tmhd
