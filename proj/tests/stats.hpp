#pragma once

// Standard errors from the observed information, by central differences.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cdm/likelihood.hpp"

namespace oracle {

inline std::vector<double> standard_errors(const cdm::CompiledLikelihood& lik, const std::vector<double>& x0,
                                           const std::vector<int>& free, double h = 1e-4) {
    const int k = static_cast<int>(free.size());
    Eigen::MatrixXd hess(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            double acc = 0;
            for (int sa : {1, -1})
                for (int sb : {1, -1}) {
                    auto x = x0;
                    x[static_cast<std::size_t>(free[a])] += sa * h;
                    x[static_cast<std::size_t>(free[b])] += sb * h;
                    acc += sa * sb * lik(x);
                }
            hess(a, b) = acc / (4 * h * h);
        }
    const Eigen::MatrixXd cov = (-hess).inverse();
    std::vector<double> se;
    for (int a = 0; a < k; ++a) se.push_back(std::sqrt(cov(a, a)));
    return se;
}

}  // namespace oracle
