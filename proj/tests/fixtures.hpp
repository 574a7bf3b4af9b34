#pragma once

#include "quantsens/model.hpp"
#include "quantsens/special.hpp"

namespace fixtures {

using namespace qs;

inline Matrix matrix(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size());
    std::size_t i = 0;
    for (const auto& r : rows) {
        std::size_t j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

// Two obligors, two lines of business, t4 dependence across all four factors.
inline LossModelSpec two_obligor(bool dependent = true) {
    LossModelSpec s;
    s.x_marginals = {Normal{0, 1}, Uniform01{}};
    s.z_marginals = {lognormal_from_mean_cov(100, 0.2), lognormal_from_mean_cov(100, 0.2)};
    s.thresholds = {normal_quantile(0.3), 0.3};
    s.g = {IdentityG{0}, LayerSumG{{{1, 80, 60}, {0, 100, 40}}}};
    if (dependent)
        s.dependence = make_mvt(matrix({{1, 0.4, 0.3, 0.2}, {0.4, 1, 0.25, 0.3}, {0.3, 0.25, 1, 0.5}, {0.2, 0.3, 0.5, 1}}), 4);
    return s;
}

// Thresholds at the medians: the t-copula Rosenblatt derivative is then
// positive everywhere, so cascade directions are well defined.
inline LossModelSpec two_obligor_median(bool dependent = true) {
    LossModelSpec s = two_obligor(dependent);
    s.thresholds = {0.0, 0.5};
    return s;
}

}  // namespace fixtures
